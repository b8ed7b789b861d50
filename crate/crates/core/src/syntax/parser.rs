use thiserror::Error;

use super::ast::*;
use super::lexer::{lex, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("parse error at offset {offset}: expected {expected}")]
    Parse { offset: usize, expected: String },
    #[error("unsupported syntax: {construct} (offset {offset})")]
    Unsupported { construct: String, offset: usize },
    #[error("`{name}` has already been declared")]
    Redeclared { name: String },
}

type PResult<T> = Result<T, SyntaxError>;

/// Parse a program in the supported subset.
pub fn parse(src: &str) -> PResult<Program> {
    let tokens = match lex(src) {
        Ok(t) => t,
        Err(LexError::IllegalChar { offset, ch: '`' }) => {
            return Err(SyntaxError::Unsupported { construct: "template literal".into(), offset })
        }
        Err(LexError::IllegalChar { offset, ch: '#' }) => {
            return Err(SyntaxError::Unsupported { construct: "private name".into(), offset })
        }
        Err(e) => return Err(e.into()),
    };
    let mut p = Parser { tokens, pos: 0, eof: src.len() };
    let mut program = p.program()?;
    super::early::check_in_place(&mut program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: usize,
}

impl Parser {
    // ----- token cursor -------------------------------------------------

    fn skip_comments(&mut self) {
        while self.tokens.get(self.pos).is_some_and(|t| t.kind == TokenKind::Comment) {
            self.pos += 1;
        }
    }

    fn nth_code(&self, n: usize) -> Option<&Token> {
        self.tokens[self.pos..]
            .iter()
            .filter(|t| t.kind != TokenKind::Comment)
            .nth(n)
    }

    fn peek(&self) -> Option<&Token> {
        self.nth_code(0)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.eof, |t| t.span.0)
    }

    fn next(&mut self) -> Option<Token> {
        self.skip_comments();
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn collect_comments(&mut self) -> Vec<Comment> {
        let mut out = Vec::new();
        while let Some(t) = self.tokens.get(self.pos) {
            if t.kind != TokenKind::Comment {
                break;
            }
            out.push(Comment { text: t.lexeme.clone() });
            self.pos += 1;
        }
        out
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, expected: &str) -> PResult<T> {
        Err(SyntaxError::Parse { offset: self.offset(), expected: expected.to_string() })
    }

    fn unsupported<T>(&self, construct: &str) -> PResult<T> {
        Err(SyntaxError::Unsupported { construct: construct.to_string(), offset: self.offset() })
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(&format!("'{p}'"))
        }
    }

    fn binding_name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && t.lexeme != "undefined" => {
                Ok(self.next().unwrap().lexeme)
            }
            Some(t) if t.is_punct("{") || t.is_punct("[") => self.unsupported("destructuring"),
            Some(t) if t.is_punct("...") => self.unsupported("rest parameter"),
            _ => self.err("identifier"),
        }
    }

    // ----- statements ---------------------------------------------------

    fn program(&mut self) -> PResult<Program> {
        let mut body = Vec::new();
        loop {
            let comments = self.collect_comments();
            if self.peek().is_none() {
                return Ok(Program { body, trailing_comments: comments });
            }
            if self.eat_punct(";") {
                continue;
            }
            body.push(self.statement(comments, true)?);
        }
    }

    fn block_body(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            let comments = self.collect_comments();
            if self.eat_punct("}") {
                return Ok(Block { stmts, trailing_comments: comments });
            }
            if self.peek().is_none() {
                return self.err("'}'");
            }
            if self.eat_punct(";") {
                continue;
            }
            stmts.push(self.statement(comments, true)?);
        }
    }

    /// Body of `if`/`while`/`for`: declarations other than `var` are not
    /// allowed in this position.
    fn sub_statement(&mut self) -> PResult<Box<Stmt>> {
        let comments = self.collect_comments();
        if self.at_punct(";") {
            return self.unsupported("empty statement");
        }
        Ok(Box::new(self.statement(comments, false)?))
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        if self.eat_punct(";") || self.at_punct("}") || self.peek().is_none() {
            Ok(())
        } else {
            self.err("';'")
        }
    }

    fn statement(&mut self, comments: Vec<Comment>, list_item: bool) -> PResult<Stmt> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("statement");
        };
        let kind = match (tok.kind, tok.lexeme.as_str()) {
            (TokenKind::Keyword, "function") => {
                if !list_item {
                    return self.err("statement (function declaration not allowed here)");
                }
                self.next();
                if self.at_punct("*") {
                    return self.unsupported("generator");
                }
                let name = self.binding_name()?;
                let func = self.function_rest(Some(name))?;
                StmtKind::FunctionDecl(func)
            }
            (TokenKind::Keyword, "var" | "let" | "const") => {
                if !list_item && tok.lexeme != "var" {
                    return self.err("statement (lexical declaration not allowed here)");
                }
                let decl = self.var_decl()?;
                self.end_of_statement()?;
                StmtKind::VarDecl(decl)
            }
            (TokenKind::Keyword, "if") => {
                self.next();
                self.expect_punct("(")?;
                let test = self.expression()?;
                self.expect_punct(")")?;
                let cons = self.sub_statement()?;
                let alt = if self.at_keyword("else") {
                    self.next();
                    Some(self.sub_statement()?)
                } else {
                    None
                };
                StmtKind::If { test, cons, alt }
            }
            (TokenKind::Keyword, "while") => {
                self.next();
                self.expect_punct("(")?;
                let test = self.expression()?;
                self.expect_punct(")")?;
                StmtKind::While { test, body: self.sub_statement()? }
            }
            (TokenKind::Keyword, "for") => self.for_statement()?,
            (TokenKind::Keyword, "return") => {
                self.next();
                let arg = if self.at_punct(";") || self.at_punct("}") || self.peek().is_none() {
                    None
                } else {
                    Some(self.expression()?)
                };
                self.end_of_statement()?;
                StmtKind::Return(arg)
            }
            (TokenKind::Punctuator, "{") => StmtKind::Block(self.block_body()?),
            (TokenKind::Keyword, kw)
                if !matches!(kw, "true" | "false" | "null" | "typeof") =>
            {
                return self.unsupported(kw);
            }
            _ => {
                let e = self.expression()?;
                self.end_of_statement()?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { comments, kind })
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let kind = match self.next().map(|t| t.lexeme) {
            Some(k) if k == "var" => VarKind::Var,
            Some(k) if k == "let" => VarKind::Let,
            _ => VarKind::Const,
        };
        let mut decls = Vec::new();
        loop {
            let name = self.binding_name()?;
            let init = if self.eat_punct("=") {
                Some(self.assignment()?)
            } else {
                if kind == VarKind::Const && !(self.at_keyword("in") || self.at_of()) {
                    return self.err("initializer for const");
                }
                None
            };
            decls.push(Declarator { name, init });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(VarDecl { kind, decls })
    }

    fn at_of(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Identifier && t.lexeme == "of")
    }

    fn for_statement(&mut self) -> PResult<StmtKind> {
        self.next();
        if self.at_keyword("await") {
            return self.unsupported("for await");
        }
        self.expect_punct("(")?;
        let init = if self.at_punct(";") {
            None
        } else if self.at_keyword("var") || self.at_keyword("let") || self.at_keyword("const") {
            Some(ForInit::Var(self.var_decl()?))
        } else {
            Some(ForInit::Expr(self.expression()?))
        };
        if self.at_keyword("in") || self.at_of() {
            return self.unsupported("for-in/for-of");
        }
        self.expect_punct(";")?;
        let test = if self.at_punct(";") { None } else { Some(self.expression()?) };
        self.expect_punct(";")?;
        let update = if self.at_punct(")") { None } else { Some(self.expression()?) };
        self.expect_punct(")")?;
        let body = self.sub_statement()?;
        Ok(StmtKind::For { init, test, update, body })
    }

    fn function_rest(&mut self, name: Option<String>) -> PResult<Function> {
        let params = self.params()?;
        let body = self.block_body()?;
        Ok(Function { name, params, body })
    }

    fn params(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok(params);
        }
        loop {
            params.push(self.binding_name()?);
            if self.at_punct("=") {
                return self.unsupported("default parameter");
            }
            if self.eat_punct(")") {
                return Ok(params);
            }
            self.expect_punct(",")?;
        }
    }

    // ----- expressions --------------------------------------------------

    /// No comma operator: a `,` is left for the enclosing list to consume.
    fn expression(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn arrow_ahead(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.nth_code(1).is_some_and(|t| t.is_punct("=>"))
            }
            Some(t) if t.is_punct("(") => {
                let mut depth = 0usize;
                let mut n = 0;
                while let Some(t) = self.nth_code(n) {
                    if t.is_punct("(") {
                        depth += 1;
                    } else if t.is_punct(")") {
                        depth -= 1;
                        if depth == 0 {
                            return self.nth_code(n + 1).is_some_and(|t| t.is_punct("=>"));
                        }
                    }
                    n += 1;
                }
                false
            }
            _ => false,
        }
    }

    fn arrow(&mut self) -> PResult<Expr> {
        let params = if self.at_punct("(") {
            self.params()?
        } else {
            vec![self.binding_name()?]
        };
        self.expect_punct("=>")?;
        let body = if self.at_punct("{") {
            ArrowBody::Block(self.block_body()?)
        } else {
            ArrowBody::Expr(self.assignment()?)
        };
        Ok(Expr::Arrow(Box::new(Arrow { params, body })))
    }

    fn assignment(&mut self) -> PResult<Expr> {
        if self.at_keyword("async") {
            return self.unsupported("async");
        }
        if self.at_keyword("yield") {
            return self.unsupported("yield");
        }
        if self.arrow_ahead() {
            return self.arrow();
        }
        let left = self.binary(0)?;
        if self.at_punct("?") {
            return self.unsupported("conditional expression");
        }
        let Some(tok) = self.peek() else { return Ok(left) };
        if tok.kind != TokenKind::Punctuator {
            return Ok(left);
        }
        if let Some(op) = AssignOp::from_punct(&tok.lexeme) {
            if !matches!(left, Expr::Ident(_) | Expr::Member { .. }) {
                return self.err("assignable target");
            }
            self.next();
            let value = self.assignment()?;
            return Ok(Expr::assign(op, left, value));
        }
        if matches!(
            tok.lexeme.as_str(),
            "**=" | "<<=" | ">>=" | ">>>=" | "&=" | "|=" | "^=" | "&&=" | "||=" | "??="
        ) {
            return self.unsupported(&format!("operator {}", tok.lexeme));
        }
        Ok(left)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut left = self.unary()?;
        loop {
            let Some(tok) = self.peek() else { break };
            if tok.kind == TokenKind::Keyword && matches!(tok.lexeme.as_str(), "in" | "instanceof")
            {
                return self.unsupported(&tok.lexeme.clone());
            }
            if tok.kind != TokenKind::Punctuator {
                break;
            }
            if matches!(tok.lexeme.as_str(), "**" | "&" | "|" | "^" | "<<" | ">>" | ">>>" | "??")
            {
                return self.unsupported(&format!("operator {}", tok.lexeme));
            }
            let Some(op) = BinOp::from_punct(&tok.lexeme) else { break };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.next();
            let right = self.binary(prec + 1)?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expression");
        };
        let op = match (tok.kind, tok.lexeme.as_str()) {
            (TokenKind::Punctuator, "!") => Some(UnaryOp::Not),
            (TokenKind::Punctuator, "-") => Some(UnaryOp::Neg),
            (TokenKind::Punctuator, "+") => Some(UnaryOp::Plus),
            (TokenKind::Keyword, "typeof") => Some(UnaryOp::Typeof),
            _ => None,
        };
        if let Some(op) = op {
            self.next();
            let arg = self.unary()?;
            return Ok(Expr::unary(op, arg));
        }
        if tok.is_punct("++") || tok.is_punct("--") {
            self.next();
            let target = self.unary()?;
            if !matches!(target, Expr::Ident(_) | Expr::Member { .. }) {
                return self.err("assignable target");
            }
            let op = if tok.lexeme == "++" { UpdateOp::Inc } else { UpdateOp::Dec };
            return Ok(Expr::Update { op, prefix: true, target: Box::new(target) });
        }
        match (tok.kind, tok.lexeme.as_str()) {
            (TokenKind::Punctuator, "~") => return self.unsupported("operator ~"),
            (TokenKind::Keyword, kw @ ("void" | "delete" | "await")) => {
                return self.unsupported(kw)
            }
            _ => {}
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let e = self.call_member()?;
        if self.at_punct("++") || self.at_punct("--") {
            if !matches!(e, Expr::Ident(_) | Expr::Member { .. }) {
                return self.err("assignable target");
            }
            let op = if self.next().unwrap().lexeme == "++" { UpdateOp::Inc } else { UpdateOp::Dec };
            return Ok(Expr::Update { op, prefix: false, target: Box::new(e) });
        }
        Ok(e)
    }

    fn call_member(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                match self.next() {
                    Some(t) if matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) => {
                        e = Expr::dot(e, &t.lexeme);
                    }
                    _ => return self.err("property name"),
                }
            } else if self.eat_punct("[") {
                let index = self.expression()?;
                self.expect_punct("]")?;
                e = Expr::index(e, index);
            } else if self.at_punct("(") {
                let args = self.arguments()?;
                e = Expr::call(e, args);
            } else if self.at_punct("?.") {
                return self.unsupported("optional chaining");
            } else {
                return Ok(e);
            }
        }
    }

    fn arguments(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        loop {
            if self.eat_punct(")") {
                return Ok(args);
            }
            if self.at_punct("...") {
                return self.unsupported("spread");
            }
            args.push(self.assignment()?);
            if !self.at_punct(")") {
                self.expect_punct(",")?;
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expression");
        };
        match tok.kind {
            TokenKind::Number => {
                self.next();
                let value = parse_number(&tok.lexeme);
                match value {
                    Some(v) if v.is_finite() => Ok(Expr::Number(v)),
                    _ => Err(SyntaxError::Parse {
                        offset: tok.span.0,
                        expected: "finite number literal".into(),
                    }),
                }
            }
            TokenKind::String => {
                self.next();
                Ok(Expr::Str(super::lexer::unescape_string(&tok.lexeme)))
            }
            TokenKind::Identifier => {
                self.next();
                if tok.lexeme == "undefined" {
                    Ok(Expr::Undefined)
                } else {
                    Ok(Expr::Ident(tok.lexeme))
                }
            }
            TokenKind::Keyword => match tok.lexeme.as_str() {
                "true" => {
                    self.next();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.next();
                    Ok(Expr::Bool(false))
                }
                "null" => {
                    self.next();
                    Ok(Expr::Null)
                }
                "function" => {
                    self.next();
                    if self.at_punct("*") {
                        return self.unsupported("generator");
                    }
                    let name = if self.at_punct("(") { None } else { Some(self.binding_name()?) };
                    Ok(Expr::Function(Box::new(self.function_rest(name)?)))
                }
                kw => self.unsupported(kw),
            },
            TokenKind::Punctuator => match tok.lexeme.as_str() {
                "(" => {
                    self.next();
                    let e = self.expression()?;
                    self.expect_punct(")")?;
                    Ok(e)
                }
                "[" => {
                    self.next();
                    let mut items = Vec::new();
                    loop {
                        if self.eat_punct("]") {
                            return Ok(Expr::Array(items));
                        }
                        if self.at_punct(",") {
                            return self.unsupported("array hole");
                        }
                        if self.at_punct("...") {
                            return self.unsupported("spread");
                        }
                        items.push(self.assignment()?);
                        if !self.at_punct("]") {
                            self.expect_punct(",")?;
                        }
                    }
                }
                "{" => {
                    self.next();
                    let mut props = Vec::new();
                    loop {
                        if self.eat_punct("}") {
                            return Ok(Expr::Object(props));
                        }
                        if self.at_punct("...") {
                            return self.unsupported("spread");
                        }
                        if self.at_punct("[") {
                            return self.unsupported("computed property");
                        }
                        let key = match self.next() {
                            Some(t) => match t.kind {
                                TokenKind::Identifier | TokenKind::Keyword => t.lexeme,
                                TokenKind::String => super::lexer::unescape_string(&t.lexeme),
                                TokenKind::Number => match parse_number(&t.lexeme) {
                                    Some(v) => super::number::to_js_string(v),
                                    None => return self.err("property key"),
                                },
                                _ => return self.err("property key"),
                            },
                            None => return self.err("property key"),
                        };
                        if self.at_punct(",") || self.at_punct("}") {
                            return self.unsupported("shorthand property");
                        }
                        if self.at_punct("(") {
                            return self.unsupported("method definition");
                        }
                        self.expect_punct(":")?;
                        let value = self.assignment()?;
                        props.push(Property { key, value });
                        if !self.at_punct("}") {
                            self.expect_punct(",")?;
                        }
                    }
                }
                "..." => self.unsupported("spread"),
                "/" | "/=" => self.unsupported("regular expression literal"),
                _ => self.err("expression"),
            },
            TokenKind::Comment => unreachable!("comments are skipped by peek"),
        }
    }
}

pub(crate) fn parse_number(lexeme: &str) -> Option<f64> {
    if let Some(hex) = lexeme.strip_prefix("0x").or_else(|| lexeme.strip_prefix("0X")) {
        return u64::from_str_radix(hex, 16).ok().map(|v| v as f64);
    }
    lexeme.parse::<f64>().ok()
}
