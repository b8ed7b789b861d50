//! Source emission in three layouts.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::lexer::is_ident_part;
use super::normalize::{compact_form, ends_with_open_if, needs_block_context};
use super::number::to_js_string;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrintStyle {
    /// Two-space indent, braces on the same line.
    Beautified,
    /// Four-space indent, braces on their own line.
    Reformatted,
    /// No optional whitespace, no comments, minimal braces.
    Compact,
}

impl std::str::FromStr for PrintStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beautified" => Ok(PrintStyle::Beautified),
            "reformatted" => Ok(PrintStyle::Reformatted),
            "compact" => Ok(PrintStyle::Compact),
            other => Err(format!("unknown print style {other:?}")),
        }
    }
}

pub fn print(program: &Program, style: PrintStyle) -> String {
    match style {
        PrintStyle::Compact => print_exact(&compact_form(program), style),
        _ => print_exact(program, style),
    }
}

/// Print without normalizing first. For compact style this keeps whatever
/// braces the tree has, and still omits comments.
pub fn print_exact(program: &Program, style: PrintStyle) -> String {
    let mut p = Printer { style, out: String::new(), indent: 0 };
    p.stmt_list(&program.body, &program.trailing_comments);
    if style == PrintStyle::Compact {
        p.out
    } else {
        let mut s = p.out.trim_start_matches('\n').to_string();
        s.push('\n');
        s
    }
}

/// Print a single expression in compact style.
pub fn print_expr(expr: &Expr) -> String {
    let mut p = Printer { style: PrintStyle::Compact, out: String::new(), indent: 0 };
    p.expr(expr, 0);
    p.out
}

struct Printer {
    style: PrintStyle,
    out: String,
    indent: usize,
}

fn glues(prev: char, next: char) -> bool {
    (is_ident_part(prev) && is_ident_part(next))
        || (prev == '+' && next == '+')
        || (prev == '-' && next == '-')
        || (prev == '/' && (next == '/' || next == '*'))
}

pub(crate) fn is_identifier_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if super::lexer::is_ident_start(c)) && chars.all(is_ident_part)
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => out.push_str(&format!("\\x{:02x}", c as u32)),
            '\u{2028}' | '\u{2029}' => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Leftmost primary of an expression, following operands that print first.
fn leftmost(e: &Expr) -> &Expr {
    match e {
        Expr::Binary { left, .. } => leftmost(left),
        Expr::Call { callee, .. } => leftmost(callee),
        Expr::Member { object, .. } => leftmost(object),
        Expr::Assign { target, .. } => leftmost(target),
        Expr::Update { prefix: false, target, .. } => leftmost(target),
        other => other,
    }
}

impl Printer {
    fn pretty(&self) -> bool {
        self.style != PrintStyle::Compact
    }

    fn allman(&self) -> bool {
        self.style == PrintStyle::Reformatted
    }

    fn tok(&mut self, s: &str) {
        if let (Some(prev), Some(next)) = (self.out.chars().last(), s.chars().next()) {
            if glues(prev, next) {
                self.out.push(' ');
            }
        }
        self.out.push_str(s);
    }

    fn space(&mut self) {
        if self.pretty() {
            self.out.push(' ');
        }
    }

    fn nl(&mut self) {
        if self.pretty() {
            self.out.push('\n');
            let width = if self.allman() { 4 } else { 2 };
            self.out.extend(std::iter::repeat(' ').take(self.indent * width));
        }
    }

    fn comments(&mut self, comments: &[Comment]) {
        if !self.pretty() {
            return;
        }
        for c in comments {
            self.nl();
            self.out.push_str(&c.text);
        }
    }

    fn stmt_list(&mut self, stmts: &[Stmt], trailing: &[Comment]) {
        for s in stmts {
            self.comments(&s.comments);
            self.nl();
            self.stmt(s);
        }
        self.comments(trailing);
    }

    fn block(&mut self, b: &Block) {
        self.tok("{");
        if b.stmts.is_empty() && (b.trailing_comments.is_empty() || !self.pretty()) {
            self.tok("}");
            return;
        }
        self.indent += 1;
        self.stmt_list(&b.stmts, &b.trailing_comments);
        self.indent -= 1;
        self.nl();
        self.tok("}");
    }

    /// Opening brace placement for function bodies and block statements that
    /// follow a header.
    fn header_block(&mut self, b: &Block) {
        if self.allman() {
            self.nl();
        } else {
            self.space();
        }
        self.block(b);
    }

    /// Body of `if`/`else`/`while`/`for`. Returns true when it was printed as
    /// a block that ends on the header line's brace (K&R `} else`).
    fn body(&mut self, s: &Stmt, before_else: bool) -> bool {
        let must_wrap = needs_block_context(s) || (before_else && ends_with_open_if(s));
        if must_wrap {
            let wrapped = Block::new(vec![s.clone()]);
            self.header_block(&wrapped);
            return true;
        }
        match &s.kind {
            StmtKind::Block(b) if s.comments.is_empty() || !self.pretty() => {
                self.header_block(b);
                true
            }
            _ => {
                self.indent += 1;
                self.comments(&s.comments);
                self.nl();
                self.stmt(s);
                self.indent -= 1;
                false
            }
        }
    }

    fn params(&mut self, params: &[String]) {
        self.tok("(");
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.tok(",");
                self.space();
            }
            self.tok(p);
        }
        self.tok(")");
    }

    fn function(&mut self, f: &Function) {
        self.tok("function");
        if let Some(name) = &f.name {
            self.out.push(' ');
            self.tok(name);
        } else {
            self.space();
        }
        self.params(&f.params);
        self.header_block(&f.body);
    }

    fn var_decl(&mut self, d: &VarDecl) {
        self.tok(d.kind.as_str());
        for (i, decl) in d.decls.iter().enumerate() {
            if i > 0 {
                self.tok(",");
            }
            if i > 0 || self.pretty() {
                self.space();
            }
            self.tok(&decl.name);
            if let Some(init) = &decl.init {
                self.space();
                self.tok("=");
                self.space();
                self.expr(init, 2);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::FunctionDecl(f) => self.function(f),
            StmtKind::VarDecl(d) => {
                self.var_decl(d);
                self.tok(";");
            }
            StmtKind::If { test, cons, alt } => {
                self.tok("if");
                self.space();
                self.tok("(");
                self.expr(test, 0);
                self.tok(")");
                let inline_close = self.body(cons, alt.is_some());
                if let Some(alt) = alt {
                    if inline_close && !self.allman() {
                        self.space();
                    } else {
                        self.nl();
                    }
                    self.tok("else");
                    let chain = matches!(alt.kind, StmtKind::If { .. })
                        && (alt.comments.is_empty() || !self.pretty());
                    if chain {
                        self.out.push(' ');
                        self.stmt(alt);
                    } else {
                        self.body(alt, false);
                    }
                }
            }
            StmtKind::While { test, body } => {
                self.tok("while");
                self.space();
                self.tok("(");
                self.expr(test, 0);
                self.tok(")");
                self.body(body, false);
            }
            StmtKind::For { init, test, update, body } => {
                self.tok("for");
                self.space();
                self.tok("(");
                match init {
                    Some(ForInit::Var(d)) => self.var_decl(d),
                    Some(ForInit::Expr(e)) => self.expr(e, 0),
                    None => {}
                }
                self.tok(";");
                if let Some(t) = test {
                    self.space();
                    self.expr(t, 0);
                }
                self.tok(";");
                if let Some(u) = update {
                    self.space();
                    self.expr(u, 0);
                }
                self.tok(")");
                self.body(body, false);
            }
            StmtKind::Return(arg) => {
                self.tok("return");
                if let Some(e) = arg {
                    self.space();
                    self.expr(e, 0);
                }
                self.tok(";");
            }
            StmtKind::Block(b) => self.block(b),
            StmtKind::Expr(e) => {
                let wrap = matches!(leftmost(e), Expr::Object(_) | Expr::Function(_));
                if wrap {
                    self.tok("(");
                }
                self.expr(e, 0);
                if wrap {
                    self.tok(")");
                }
                self.tok(";");
            }
        }
    }

    fn comma_list(&mut self, items: &[Expr]) {
        for (i, e) in items.iter().enumerate() {
            if i > 0 {
                self.tok(",");
                self.space();
            }
            self.expr(e, 2);
        }
    }

    fn expr(&mut self, e: &Expr, min_prec: u8) {
        let prec = e.precedence();
        if prec < min_prec {
            self.tok("(");
            self.expr(e, 0);
            self.tok(")");
            return;
        }
        match e {
            Expr::Number(v) => self.tok(&to_js_string(*v)),
            Expr::Str(s) => self.tok(&quote_string(s)),
            Expr::Bool(b) => self.tok(if *b { "true" } else { "false" }),
            Expr::Null => self.tok("null"),
            Expr::Undefined => self.tok("undefined"),
            Expr::Ident(n) => self.tok(n),
            Expr::Array(items) => {
                self.tok("[");
                self.comma_list(items);
                self.tok("]");
            }
            Expr::Object(props) => {
                self.tok("{");
                for (i, p) in props.iter().enumerate() {
                    if i > 0 {
                        self.tok(",");
                        self.space();
                    }
                    if is_identifier_name(&p.key) {
                        self.tok(&p.key);
                    } else {
                        self.tok(&quote_string(&p.key));
                    }
                    self.tok(":");
                    self.space();
                    self.expr(&p.value, 2);
                }
                self.tok("}");
            }
            Expr::Binary { op, left, right } => {
                let p = op.precedence();
                self.expr(left, p);
                self.space();
                self.tok(op.as_str());
                self.space();
                self.expr(right, p + 1);
            }
            Expr::Unary { op, arg } => {
                self.tok(op.as_str());
                if *op == UnaryOp::Typeof {
                    self.space();
                }
                self.expr(arg, 15);
            }
            Expr::Update { op, prefix: true, target } => {
                self.tok(op.as_str());
                self.expr(target, 15);
            }
            Expr::Update { op, prefix: false, target } => {
                self.expr(target, 18);
                self.tok(op.as_str());
            }
            Expr::Call { callee, args } => {
                self.expr(callee, 18);
                self.tok("(");
                self.comma_list(args);
                self.tok(")");
            }
            Expr::Member { object, prop } => {
                if matches!(**object, Expr::Number(_)) {
                    self.tok("(");
                    self.expr(object, 0);
                    self.tok(")");
                } else {
                    self.expr(object, 18);
                }
                match prop {
                    MemberProp::Dot(name) => {
                        self.tok(".");
                        self.tok(name);
                    }
                    MemberProp::Index(i) => {
                        self.tok("[");
                        self.expr(i, 0);
                        self.tok("]");
                    }
                }
            }
            Expr::Assign { op, target, value } => {
                self.expr(target, 18);
                self.space();
                self.tok(op.as_str());
                self.space();
                self.expr(value, 2);
            }
            Expr::Function(f) => self.function(f),
            Expr::Arrow(a) => {
                if a.params.len() == 1 && !self.pretty() {
                    self.tok(&a.params[0]);
                } else {
                    self.params(&a.params);
                }
                self.space();
                self.tok("=>");
                match &a.body {
                    ArrowBody::Expr(body) => {
                        self.space();
                        if matches!(leftmost(body), Expr::Object(_)) {
                            self.tok("(");
                            self.expr(body, 0);
                            self.tok(")");
                        } else {
                            self.expr(body, 2);
                        }
                    }
                    ArrowBody::Block(b) => self.header_block(b),
                }
            }
        }
    }
}
