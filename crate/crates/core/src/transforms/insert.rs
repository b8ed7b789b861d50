use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::rename::WORDS;
use super::scope::analyze;
use crate::syntax::ast::*;
use crate::syntax::lexer::is_keyword;

enum Insertion {
    Decl(Stmt),
    Comment(Comment),
}

/// Visits every block that belongs to a function body, in source order.
struct FunctionBlocks<F: FnMut(&mut Block)> {
    depth: usize,
    f: F,
}

impl<F: FnMut(&mut Block)> VisitMut for FunctionBlocks<F> {
    fn visit_block(&mut self, block: &mut Block) {
        if self.depth > 0 {
            (self.f)(block);
        }
        walk_block(self, block);
    }

    fn visit_function(&mut self, func: &mut Function) {
        self.depth += 1;
        self.visit_block(&mut func.body);
        self.depth -= 1;
    }

    fn visit_arrow(&mut self, arrow: &mut Arrow) {
        self.depth += 1;
        match &mut arrow.body {
            ArrowBody::Expr(e) => self.visit_expr(e),
            ArrowBody::Block(b) => self.visit_block(b),
        }
        self.depth -= 1;
    }
}

fn for_each_function_block(program: &mut Program, f: impl FnMut(&mut Block)) {
    walk_program(&mut FunctionBlocks { depth: 0, f }, program);
}

fn random_words<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<&'static str> {
    (0..count).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

fn fresh_name<R: Rng + ?Sized>(rng: &mut R, taken: &mut HashSet<String>) -> String {
    loop {
        let count = rng.gen_range(1..=3);
        let words = random_words(rng, count);
        let mut name = words[0].to_string();
        for w in &words[1..] {
            name.push_str(&w[..1].to_uppercase());
            name.push_str(&w[1..]);
        }
        if !is_keyword(&name) && taken.insert(name.clone()) {
            return name;
        }
    }
}

fn random_literal<R: Rng + ?Sized>(rng: &mut R) -> Expr {
    match rng.gen_range(0..4) {
        0 => Expr::Number(rng.gen_range(0..100) as f64),
        1 => Expr::Str(random_words(rng, 1)[0].to_string()),
        2 => Expr::Bool(rng.gen()),
        _ => Expr::Null,
    }
}

fn random_comment<R: Rng + ?Sized>(rng: &mut R) -> Comment {
    let count = rng.gen_range(1..=4);
    let words = random_words(rng, count).join(" ");
    if rng.gen_bool(0.5) {
        Comment::line(&format!(" {words}"))
    } else {
        Comment { text: format!("/* {words} */") }
    }
}

fn insert_into(stmts: &mut Vec<Stmt>, trailing: &mut Vec<Comment>, pos: usize, item: Insertion) {
    match item {
        Insertion::Decl(s) => stmts.insert(pos, s),
        Insertion::Comment(c) if pos < stmts.len() => stmts[pos].comments.insert(0, c),
        Insertion::Comment(c) => trailing.push(c),
    }
}

/// Insert one to three unused `var` declarations with literal initializers
/// or comments at random statement positions inside function bodies (the
/// top level if there is no function).
pub fn insert_dead_code<R: Rng + ?Sized>(program: &mut Program, rng: &mut R) {
    let mut taken: HashSet<String> = {
        let res = analyze(program);
        res.bindings.into_iter().map(|b| b.name).chain(res.free_names).collect()
    };
    let mut lengths = Vec::new();
    for_each_function_block(program, |b| lengths.push(b.stmts.len()));
    let k = rng.gen_range(1..=3);
    // (block index, position, insertion); positions refer to the block as
    // it was before any insertion.
    let mut plan = Vec::with_capacity(k);
    for _ in 0..k {
        let (block, len) = if lengths.is_empty() {
            (usize::MAX, program.body.len())
        } else {
            let i = rng.gen_range(0..lengths.len());
            (i, lengths[i])
        };
        let pos = rng.gen_range(0..=len);
        let item = if rng.gen_bool(0.5) {
            let name = fresh_name(rng, &mut taken);
            Insertion::Decl(Stmt::new(StmtKind::VarDecl(VarDecl {
                kind: VarKind::Var,
                decls: vec![Declarator { name, init: Some(random_literal(rng)) }],
            })))
        } else {
            Insertion::Comment(random_comment(rng))
        };
        plan.push((block, pos, item));
    }
    // Descending, so popping yields blocks in traversal order and the
    // top-level case applies back to front.
    plan.sort_by(|a, b| (b.0, b.1).cmp(&(a.0, a.1)));
    if lengths.is_empty() {
        for (_, pos, item) in plan {
            insert_into(&mut program.body, &mut program.trailing_comments, pos, item);
        }
        return;
    }
    let mut index = 0;
    for_each_function_block(program, |b| {
        let mut mine = Vec::new();
        while plan.last().is_some_and(|p| p.0 == index) {
            mine.push(plan.pop().unwrap());
        }
        // `mine` is ascending by position after the pops; insert from the
        // back.
        for (_, pos, item) in mine.into_iter().rev() {
            insert_into(&mut b.stmts, &mut b.trailing_comments, pos, item);
        }
        index += 1;
    });
}

/// Keep each top-level statement of each top-level function body with
/// probability `keep`.
pub fn subsample_lines<R: Rng + ?Sized>(program: &mut Program, keep: f64, rng: &mut R) {
    for s in &mut program.body {
        if let StmtKind::FunctionDecl(f) = &mut s.kind {
            f.body.stmts.retain(|_| rng.gen_bool(keep));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{check_equivalence, random_inputs, Verdict};
    use crate::seed::rng;
    use crate::syntax::{parse, print, PrintStyle};

    #[test]
    fn insertion_preserves_behavior_and_code() {
        let src = "function f(a){ var s = 0; for (var i = 0; i < 3; i++) { s = s + a; } return s; }";
        let p = parse(src).unwrap();
        let inputs = random_inputs(1, 10, 1);
        let mut grew = 0;
        for seed in 0..20 {
            let mut q = p.clone();
            insert_dead_code(&mut q, &mut rng(seed));
            assert_eq!(check_equivalence(&p, &q, &inputs, 10_000), Verdict::Equivalent);
            let printed = print(&q, PrintStyle::Beautified);
            assert_eq!(parse(&printed).unwrap(), q);
            if print(&q, PrintStyle::Compact) != print(&p, PrintStyle::Compact) {
                grew += 1;
            }
        }
        assert!(grew > 0);
    }

    #[test]
    fn top_level_fallback() {
        let mut p = parse("x = 1;").unwrap();
        insert_dead_code(&mut p, &mut rng(3));
        assert!(print(&p, PrintStyle::Beautified).len() > "x = 1;\n".len());
    }

    #[test]
    fn subsampling_only_drops_statements() {
        let p = parse("function f(){ a(); b(); c(); d(); e(); }").unwrap();
        let mut q = p.clone();
        subsample_lines(&mut q, 0.5, &mut rng(7));
        let StmtKind::FunctionDecl(f) = &q.body[0].kind else { panic!() };
        assert!(f.body.stmts.len() < 5);
        let mut all = p.clone();
        subsample_lines(&mut all, 1.0, &mut rng(7));
        assert_eq!(all, p);
    }
}
