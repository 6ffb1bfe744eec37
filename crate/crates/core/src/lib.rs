pub mod cli;
pub mod corpus;
pub mod dedup;
pub mod lang;
pub mod mixer;
pub mod pack;
pub mod probe;
pub mod quality;
pub mod seeds;
pub mod segment;
pub mod translate;

pub use corpus::{Document, TokenCounter};
pub use lang::Lang;
