"""Regenerates the bundled byte-level BPE vocabulary from the seed corpora.

    python3 train_bpe.py

Writes vocab.json and merges.txt next to this script.
"""
import pathlib

from tokenizers import ByteLevelBPETokenizer

HERE = pathlib.Path(__file__).resolve().parent
SEEDS = sorted((HERE.parent / "seeds").glob("*.txt"))

tok = ByteLevelBPETokenizer()
tok.train(
    files=[str(p) for p in SEEDS],
    vocab_size=3000,
    min_frequency=2,
    special_tokens=["<|endoftext|>"],
    show_progress=False,
)
tok.save_model(str(HERE))
