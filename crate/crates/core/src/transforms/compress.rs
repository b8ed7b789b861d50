use crate::syntax::ast::*;
use crate::syntax::normalize::unwrap_redundant_blocks;

fn compress_list(stmts: &mut Vec<Stmt>) {
    let mut out: Vec<Stmt> = Vec::with_capacity(stmts.len());
    for s in stmts.drain(..) {
        match s.kind {
            // Bare blocks without block-scoped declarations only group.
            StmtKind::Block(b) if !crate::transforms::scope::has_block_scope(&b.stmts) => {
                for inner in b.stmts {
                    push_merged(&mut out, inner);
                }
            }
            kind => push_merged(&mut out, Stmt { comments: s.comments, kind }),
        }
    }
    *stmts = out;
}

fn push_merged(out: &mut Vec<Stmt>, s: Stmt) {
    if let (Some(Stmt { kind: StmtKind::VarDecl(prev), .. }), StmtKind::VarDecl(next)) =
        (out.last_mut(), &s.kind)
    {
        if prev.kind == next.kind {
            let StmtKind::VarDecl(next) = s.kind else { unreachable!() };
            prev.decls.extend(next.decls);
            return;
        }
    }
    out.push(s);
}

struct Compress;

impl VisitMut for Compress {
    fn visit_block(&mut self, block: &mut Block) {
        walk_block(self, block);
        compress_list(&mut block.stmts);
    }

    fn visit_expr(&mut self, e: &mut Expr) {
        walk_expr(self, e);
        if let Expr::Binary { op, left, right } = e {
            if op.is_equality() && right.is_literal() && !left.is_literal() {
                std::mem::swap(left, right);
            }
        }
    }
}

/// Minifier-style rewrites: merge adjacent declarations of one kind,
/// put literals first in equality tests, flatten grouping blocks and drop
/// braces around single-statement bodies.
pub fn compress(program: &mut Program) {
    walk_program(&mut Compress, program);
    compress_list(&mut program.body);
    unwrap_redundant_blocks(program);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{check_equivalence, random_inputs, Verdict};
    use crate::syntax::{parse, print, PrintStyle};

    fn c(src: &str) -> String {
        let mut p = parse(src).unwrap();
        compress(&mut p);
        let inputs = random_inputs(2, 10, 5);
        assert_eq!(check_equivalence(&parse(src).unwrap(), &p, &inputs, 10_000), Verdict::Equivalent);
        print(&p, PrintStyle::Compact)
    }

    #[test]
    fn merges_and_inlines() {
        assert_eq!(
            c("function f(a){ if (a.length === 1) { return a; } const m = 1; const n = 2; let k = 3; return m + n + k; }"),
            "function f(a){if(1===a.length)return a;const m=1,n=2;let k=3;return m+n+k;}"
        );
    }

    #[test]
    fn flattens_plain_blocks_only() {
        assert_eq!(c("function f(a){ { var x = a; } { let y = 1; a = y; } return x + a; }"),
            "function f(a){var x=a;{let y=1;a=y;}return x+a;}");
    }
}
