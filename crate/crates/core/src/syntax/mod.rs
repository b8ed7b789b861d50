//! Lexer, parser, tree model and printer for the supported JavaScript subset.

pub mod ast;
pub mod early;
pub mod lexer;
pub mod normalize;
pub mod number;
pub mod parser;
pub mod printer;
pub mod random;

pub use ast::Program;
pub use lexer::{lex, LexError, Token, TokenKind};
pub use normalize::{compact_form, structurally_equal};
pub use parser::{parse, SyntaxError};
pub use printer::{print, PrintStyle};
