pub mod augment;
pub mod cli;
pub mod contrastive;
pub mod encoder;
pub mod eval;
pub mod interp;
pub mod seed;
pub mod syntax;
pub mod tokenizer;
pub mod transforms;
