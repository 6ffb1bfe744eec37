"""Reference token ids for tests/fixtures/bpe_200_words.txt.

Runs the bundled vocab/merges through the HuggingFace byte-level BPE
implementation, which is independent of the crate's encoder.

    python3 tests/oracles/bpe_count.py
"""
from pathlib import Path

from tokenizers import ByteLevelBPETokenizer

root = Path(__file__).resolve().parents[2]
tok = ByteLevelBPETokenizer(
    str(root / "data/tokenizer/vocab.json"),
    str(root / "data/tokenizer/merges.txt"),
)
text = (root / "tests/fixtures/bpe_200_words.txt").read_text(encoding="utf-8")
ids = tok.encode(text).ids
print(len(ids))
print(",".join(map(str, ids)))
