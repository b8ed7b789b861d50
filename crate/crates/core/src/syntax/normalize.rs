//! Canonical forms used by compact printing and structural comparison.

use super::ast::*;

struct StripComments;

impl VisitMut for StripComments {
    fn visit_stmt(&mut self, stmt: &mut Stmt) {
        stmt.comments.clear();
        walk_stmt(self, stmt);
    }

    fn visit_block(&mut self, block: &mut Block) {
        block.trailing_comments.clear();
        walk_block(self, block);
    }
}

pub fn strip_comments(program: &mut Program) {
    program.trailing_comments.clear();
    walk_program(&mut StripComments, program);
}

/// True if printing `stmt` without braces ahead of an `else` would let the
/// `else` attach to an inner `if`.
pub fn ends_with_open_if(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::If { alt: None, .. } => true,
        StmtKind::If { alt: Some(alt), .. } => ends_with_open_if(alt),
        StmtKind::While { body, .. } | StmtKind::For { body, .. } => ends_with_open_if(body),
        _ => false,
    }
}

/// Statements that may not stand alone as the body of `if`/`while`/`for`.
pub fn needs_block_context(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::FunctionDecl(_) => true,
        StmtKind::VarDecl(d) => d.kind.is_lexical(),
        _ => false,
    }
}

/// If `body` is a comment-free block holding one statement that can stand
/// alone, replace the block by that statement.
fn unwrap_body(body: &mut Box<Stmt>, before_else: bool) {
    while unwrap_once(body, before_else) {}
}

fn unwrap_once(body: &mut Box<Stmt>, before_else: bool) -> bool {
    let StmtKind::Block(block) = &mut body.kind else { return false };
    if block.stmts.len() != 1 || !block.trailing_comments.is_empty() || !body.comments.is_empty()
    {
        return false;
    }
    let inner = &block.stmts[0];
    if needs_block_context(inner) || (before_else && ends_with_open_if(inner)) {
        return false;
    }
    let inner = block.stmts.pop().unwrap();
    **body = inner;
    true
}

struct UnwrapBlocks;

impl VisitMut for UnwrapBlocks {
    fn visit_stmt(&mut self, stmt: &mut Stmt) {
        walk_stmt(self, stmt);
        match &mut stmt.kind {
            StmtKind::If { cons, alt, .. } => {
                unwrap_body(cons, alt.is_some());
                if let Some(alt) = alt {
                    unwrap_body(alt, false);
                }
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => unwrap_body(body, false),
            _ => {}
        }
    }
}

/// Drop braces around single-statement `if`/`while`/`for` bodies where that
/// cannot change the parse.
pub fn unwrap_redundant_blocks(program: &mut Program) {
    walk_program(&mut UnwrapBlocks, program);
}

/// Comment-free, brace-minimal form: what compact printing emits.
pub fn compact_form(program: &Program) -> Program {
    let mut p = program.clone();
    strip_comments(&mut p);
    unwrap_redundant_blocks(&mut p);
    p
}

/// Equality modulo comments and redundant single-statement braces.
pub fn structurally_equal(a: &Program, b: &Program) -> bool {
    compact_form(a) == compact_form(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn braces_are_dropped_only_when_safe() {
        let a = compact_form(&parse("if (x) { return 1; }").unwrap());
        assert_eq!(a, parse("if (x) return 1;").unwrap());

        let kept = compact_form(&parse("if (a) { if (b) x(); } else y();").unwrap());
        let StmtKind::If { cons, .. } = &kept.body[0].kind else { panic!() };
        assert!(matches!(cons.kind, StmtKind::Block(_)));

        let lexical = compact_form(&parse("while (x) { let y = 1; }").unwrap());
        let StmtKind::While { body, .. } = &lexical.body[0].kind else { panic!() };
        assert!(matches!(body.kind, StmtKind::Block(_)));
    }

    #[test]
    fn comments_do_not_affect_structure() {
        let a = parse("// c\nfunction f(){ /* d */ return 1; }").unwrap();
        let b = parse("function f(){return 1}").unwrap();
        assert!(structurally_equal(&a, &b));
        assert_ne!(a, b);
    }
}
