use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Number,
    String,
    Punctuator,
    Keyword,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// Byte offsets `[start, end)` into the source.
    pub span: (usize, usize),
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuator && self.lexeme == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme == k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("illegal character {ch:?} at offset {offset}")]
    IllegalChar { offset: usize, ch: char },
    #[error("unterminated string literal starting at offset {offset}")]
    UnterminatedString { offset: usize },
    #[error("unterminated block comment starting at offset {offset}")]
    UnterminatedComment { offset: usize },
    #[error("malformed number literal at offset {offset}")]
    BadNumber { offset: usize },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match *self {
            LexError::IllegalChar { offset, .. }
            | LexError::UnterminatedString { offset }
            | LexError::UnterminatedComment { offset }
            | LexError::BadNumber { offset } => offset,
        }
    }
}

/// Reserved words. Only some of them are accepted by the parser; the rest
/// are recognized so that the parser can report them as unsupported.
pub const KEYWORDS: &[&str] = &[
    "var", "let", "const", "function", "return", "if", "else", "while", "for", "true", "false",
    "null", "typeof", "class", "new", "this", "async", "await", "yield", "switch", "case",
    "default", "do", "try", "catch", "finally", "throw", "break", "continue", "delete", "in",
    "instanceof", "void", "with", "import", "export", "super", "extends", "debugger", "enum",
    "static",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

// Longest first so that maximal munch is a linear scan.
const PUNCTUATORS: &[&str] = &[
    ">>>=", "===", "!==", "**=", "<<=", ">>=", ">>>", "...", "&&=", "||=", "??=", "=>", "==",
    "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "<<", ">>", "**", "{", "}", "(", ")", "[", "]", ";", ",", ".", "<", ">", "+",
    "-", "*", "/", "%", "!", "=", "?", ":", "&", "|", "^", "~",
];

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$' || (!c.is_ascii() && c.is_alphabetic())
}

pub(crate) fn is_ident_part(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || (!c.is_ascii() && c.is_alphanumeric())
}

/// Tokenize a source string. Comments are returned as tokens; whitespace is
/// dropped.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer { src, pos: 0 }.run()
}

/// Tokenize and drop comments.
pub fn lex_code(src: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = lex(src)?;
    tokens.retain(|t| t.kind != TokenKind::Comment);
    Ok(tokens)
}

/// Lexemes of the non-comment tokens joined by single spaces: the
/// whitespace- and comment-normalized form of a program.
pub fn normalized_text(src: &str) -> Result<String, LexError> {
    Ok(lex_code(src)?
        .iter()
        .map(|t| t.lexeme.as_str())
        .collect::<Vec<_>>()
        .join(" "))
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            let start = self.pos;
            let kind = if c == '/' && self.peek_at(1) == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' || c == '\r' {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                TokenKind::Comment
            } else if c == '/' && self.peek_at(1) == Some('*') {
                match self.src[start + 2..].find("*/") {
                    Some(end) => self.pos = start + 2 + end + 2,
                    None => return Err(LexError::UnterminatedComment { offset: start }),
                }
                TokenKind::Comment
            } else if is_ident_start(c) {
                while let Some(c) = self.peek() {
                    if !is_ident_part(c) {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                if is_keyword(&self.src[start..self.pos]) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                }
            } else if c.is_ascii_digit()
                || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()))
            {
                self.number(start)?;
                TokenKind::Number
            } else if c == '"' || c == '\'' {
                self.string(start, c)?;
                TokenKind::String
            } else if let Some(p) = PUNCTUATORS.iter().find(|p| self.src[start..].starts_with(**p)) {
                self.pos += p.len();
                TokenKind::Punctuator
            } else {
                return Err(LexError::IllegalChar { offset: start, ch: c });
            };
            out.push(Token {
                kind,
                lexeme: self.src[start..self.pos].to_string(),
                span: (start, self.pos),
            });
        }
        Ok(out)
    }

    fn digits(&mut self, radix: u32) -> usize {
        let mut n = 0;
        while let Some(c) = self.peek() {
            if !c.is_digit(radix) {
                break;
            }
            self.pos += 1;
            n += 1;
        }
        n
    }

    fn number(&mut self, start: usize) -> Result<(), LexError> {
        let bad = LexError::BadNumber { offset: start };
        if self.peek() == Some('0') && matches!(self.peek_at(1), Some('x' | 'X')) {
            self.pos += 2;
            if self.digits(16) == 0 {
                return Err(bad);
            }
        } else {
            self.digits(10);
            if self.peek() == Some('.') {
                self.pos += 1;
                self.digits(10);
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                self.pos += 1;
                if matches!(self.peek(), Some('+' | '-')) {
                    self.pos += 1;
                }
                if self.digits(10) == 0 {
                    return Err(bad);
                }
            }
        }
        if self.peek().is_some_and(is_ident_part) {
            return Err(bad);
        }
        Ok(())
    }

    fn string(&mut self, start: usize, quote: char) -> Result<(), LexError> {
        self.pos += 1;
        loop {
            match self.peek() {
                None | Some('\n') | Some('\r') => {
                    return Err(LexError::UnterminatedString { offset: start })
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        None => return Err(LexError::UnterminatedString { offset: start }),
                        Some(c) => self.pos += c.len_utf8(),
                    }
                }
                Some(c) => {
                    self.pos += c.len_utf8();
                    if c == quote {
                        return Ok(());
                    }
                }
            }
        }
    }
}

/// Decode the body of a string literal lexeme (including its quotes).
pub fn unescape_string(lexeme: &str) -> String {
    let inner = &lexeme[1..lexeme.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let Some(e) = chars.next() else { break };
        match e {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'b' => out.push('\u{8}'),
            'f' => out.push('\u{c}'),
            'v' => out.push('\u{b}'),
            '0' => out.push('\0'),
            'x' | 'u' => {
                let width = if e == 'x' { 2 } else { 4 };
                let hex: String = (0..width).filter_map(|_| chars.next()).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => {
                        out.push(e);
                        out.push_str(&hex);
                    }
                }
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexemes(src: &str) -> Vec<String> {
        lex_code(src).unwrap().into_iter().map(|t| t.lexeme).collect()
    }

    #[test]
    fn simple_declaration() {
        assert_eq!(lexemes("var x = 1;"), ["var", "x", "=", "1", ";"]);
        let kinds: Vec<_> = lex("var x = 1;").unwrap().iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            [
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punctuator,
                TokenKind::Number,
                TokenKind::Punctuator
            ]
        );
    }

    #[test]
    fn affine_expression() {
        assert_eq!(lexemes("W*x + b"), ["W", "*", "x", "+", "b"]);
    }

    #[test]
    fn illegal_character_offset() {
        assert_eq!(
            lex("var @"),
            Err(LexError::IllegalChar { offset: 4, ch: '@' })
        );
    }

    #[test]
    fn unterminated_string_and_comment() {
        assert!(matches!(lex("'abc"), Err(LexError::UnterminatedString { offset: 0 })));
        assert!(matches!(lex("x /* y"), Err(LexError::UnterminatedComment { offset: 2 })));
    }

    #[test]
    fn comments_are_tokens_but_not_code() {
        let all = lex("a // hi\n/* b */ c").unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all[1].kind, TokenKind::Comment);
        assert_eq!(all[1].lexeme, "// hi");
        assert_eq!(lexemes("a // hi\n/* b */ c"), ["a", "c"]);
    }

    #[test]
    fn maximal_munch_punctuators() {
        assert_eq!(lexemes("a===b!==c=>d++"), ["a", "===", "b", "!==", "c", "=>", "d", "++"]);
        assert_eq!(lexemes("x.y...z"), ["x", ".", "y", "...", "z"]);
    }

    #[test]
    fn numbers() {
        assert_eq!(lexemes("1.5e3 .25 0xff 7."), ["1.5e3", ".25", "0xff", "7."]);
        assert!(lex("3in").is_err());
    }

    #[test]
    fn spans_are_ordered() {
        let toks = lex("function f(a){return a+1}").unwrap();
        for w in toks.windows(2) {
            assert!(w[0].span.1 <= w[1].span.0);
        }
    }

    #[test]
    fn string_escapes() {
        assert_eq!(unescape_string(r#""a\nb\"c""#), "a\nb\"c");
        assert_eq!(unescape_string(r"'\x41B'"), "AB");
    }

    #[test]
    fn whitespace_is_irrelevant() {
        assert_eq!(
            normalized_text("if (x)\n\t{  return 1 ; }").unwrap(),
            normalized_text("if(x){return 1;}").unwrap()
        );
    }
}
