//! Seeded generator of random programs in the subset. Programs have one
//! entry function first, bounded loops only, and mostly read variables that
//! are in scope, so they terminate quickly and exercise every construct the
//! transforms touch.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ast::*;

const NAMES: &[&str] = &[
    "a", "b", "c", "n", "x", "y", "acc", "arr", "count", "idx", "item", "left", "list", "max",
    "mid", "out", "res", "right", "sum", "temp", "total", "val", "word",
];

const STRINGS: &[&str] = &["", "a", "ab", "hello", "x y", "42", "3.5", "\"q\"", "line\nbreak"];

#[derive(Clone)]
struct Var {
    name: String,
    mutable: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    scopes: Vec<Vec<Var>>,
    /// Callable helpers in scope: (name, arity).
    helpers: Vec<Vec<(String, usize)>>,
    fresh: usize,
    loop_depth: usize,
    fn_depth: usize,
}

/// A random program whose first statement is a function declaration taking
/// one to three parameters.
pub fn random_program(seed: u64) -> Program {
    // Draws with conflicting declarations are rejected and redrawn.
    for attempt in 0.. {
        let mut g = Gen {
            rng: crate::seed::rng(crate::seed::derive_index(seed, "program", attempt)),
            scopes: vec![Vec::new()],
            helpers: vec![Vec::new()],
            fresh: 0,
            loop_depth: 0,
            fn_depth: 0,
        };
        let p = g.program();
        if super::early::check_declarations(&p).is_ok() {
            return p;
        }
    }
    unreachable!()
}

/// Brace a bare `if` body that would otherwise capture the `else`, as the
/// printer would.
fn make_if(test: Expr, mut cons: Box<Stmt>, alt: Option<Box<Stmt>>) -> StmtKind {
    if alt.is_some() && super::normalize::ends_with_open_if(&cons) {
        cons = Box::new(Stmt::new(StmtKind::Block(Block::new(vec![*cons]))));
    }
    StmtKind::If { test, cons, alt }
}

impl Gen {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn new_name(&mut self) -> String {
        // Mostly reuse the pool (shadowing is allowed across scopes), with a
        // suffix when the innermost scope already has the name.
        let base = *NAMES.choose(&mut self.rng).unwrap();
        if self.scopes.last().unwrap().iter().any(|v| v.name == base)
            || self.helpers.last().unwrap().iter().any(|h| h.0 == base)
        {
            self.fresh += 1;
            format!("{base}{}", self.fresh)
        } else {
            base.to_string()
        }
    }

    fn visible(&self) -> Vec<Var> {
        let mut seen: Vec<Var> = Vec::new();
        for scope in self.scopes.iter().rev() {
            for v in scope {
                if !seen.iter().any(|s| s.name == v.name) {
                    seen.push(v.clone());
                }
            }
        }
        seen
    }

    fn visible_helpers(&self) -> Vec<(String, usize)> {
        self.helpers.iter().flatten().cloned().collect()
    }

    fn declare(&mut self, name: &str, mutable: bool) {
        self.scopes.last_mut().unwrap().push(Var { name: name.to_string(), mutable });
    }

    fn push_scope(&mut self) {
        self.scopes.push(Vec::new());
        self.helpers.push(Vec::new());
    }

    fn pop_scope(&mut self) {
        self.scopes.pop();
        self.helpers.pop();
    }

    fn comments(&mut self) -> Vec<Comment> {
        if self.chance(0.15) {
            let body = ["check bounds", "accumulate", "TODO tidy up", "fast path", "helper"]
                .choose(&mut self.rng)
                .unwrap();
            if self.chance(0.7) {
                vec![Comment::line(&format!(" {body}"))]
            } else {
                vec![Comment { text: format!("/* {body} */") }]
            }
        } else {
            Vec::new()
        }
    }

    fn program(&mut self) -> Program {
        let mut body = Vec::new();
        let arity = self.rng.gen_range(1..=3);
        let main_name = ["main", "solve", "compute", "process"].choose(&mut self.rng).unwrap();
        // A top-level helper, hoisted, declared after the entry function.
        let helper = if self.chance(0.4) {
            let name = "helper".to_string();
            let arity = self.rng.gen_range(1..=2);
            self.helpers[0].push((name.clone(), arity));
            Some((name, arity))
        } else {
            None
        };
        if self.chance(0.2) {
            self.declare("LIMIT", false);
        }
        let main = self.function(Some(main_name.to_string()), arity, 3);
        let mut head = Stmt::new(StmtKind::FunctionDecl(main));
        head.comments = self.comments();
        body.push(head);
        if self.scopes[0].iter().any(|v| v.name == "LIMIT") {
            let n = Expr::Number(self.rng.gen_range(0..5) as f64);
            body.push(Stmt::new(StmtKind::VarDecl(VarDecl {
                kind: VarKind::Const,
                decls: vec![Declarator { name: "LIMIT".into(), init: Some(n) }],
            })));
        }
        if let Some((name, arity)) = helper {
            // Keep the helper from calling itself.
            self.helpers[0].clear();
            let f = self.function(Some(name), arity, 2);
            body.push(Stmt::new(StmtKind::FunctionDecl(f)));
        }
        let trailing = if self.chance(0.1) { self.comments() } else { Vec::new() };
        Program { body, trailing_comments: trailing }
    }

    fn function(&mut self, name: Option<String>, arity: usize, budget: usize) -> Function {
        self.push_scope();
        let saved_loop = std::mem::replace(&mut self.loop_depth, 0);
        self.fn_depth += 1;
        let mut params = Vec::new();
        for _ in 0..arity {
            let p = self.new_name();
            self.declare(&p, true);
            params.push(p);
        }
        let mut stmts = self.stmt_list(budget, true);
        let ret = self.expr(2);
        stmts.push(Stmt::new(StmtKind::Return(Some(ret))));
        if self.chance(0.1) {
            // Unreachable tail.
            let e = self.expr(1);
            stmts.push(Stmt::new(StmtKind::Expr(e)));
        }
        self.fn_depth -= 1;
        self.loop_depth = saved_loop;
        self.pop_scope();
        Function { name, params, body: Block::new(stmts) }
    }

    fn stmt_list(&mut self, budget: usize, function_level: bool) -> Vec<Stmt> {
        let count = if function_level {
            self.rng.gen_range(2..=6)
        } else {
            self.rng.gen_range(1..=3)
        };
        (0..count).map(|_| self.stmt(budget)).collect()
    }

    fn block(&mut self, budget: usize) -> Block {
        self.push_scope();
        let stmts = self.stmt_list(budget, false);
        self.pop_scope();
        let trailing = if self.chance(0.05) { self.comments() } else { Vec::new() };
        Block { stmts, trailing_comments: trailing }
    }

    fn body_stmt(&mut self, budget: usize) -> Box<Stmt> {
        if self.chance(0.7) {
            Box::new(Stmt::new(StmtKind::Block(self.block(budget))))
        } else {
            // Unbraced body: anything but a declaration.
            self.push_scope();
            let mut s = self.stmt(budget);
            while crate::syntax::normalize::needs_block_context(&s)
                || matches!(s.kind, StmtKind::VarDecl(_))
            {
                s = self.stmt(budget);
            }
            self.pop_scope();
            Box::new(s)
        }
    }

    fn assignable(&mut self) -> Option<String> {
        let vars: Vec<Var> = self.visible().into_iter().filter(|v| v.mutable).collect();
        vars.choose(&mut self.rng).map(|v| v.name.clone())
    }

    fn stmt(&mut self, budget: usize) -> Stmt {
        let comments = self.comments();
        let compound = budget > 0;
        let kind = loop {
            let pick = self.rng.gen_range(0..100);
            match pick {
                0..=21 => break self.var_decl(),
                22..=37 => {
                    if let Some(target) = self.assignable() {
                        let op = *[
                            AssignOp::Assign,
                            AssignOp::Assign,
                            AssignOp::Add,
                            AssignOp::Sub,
                            AssignOp::Mul,
                        ]
                        .choose(&mut self.rng)
                        .unwrap();
                        let value = self.expr(2);
                        break StmtKind::Expr(Expr::assign(op, Expr::Ident(target), value));
                    }
                }
                38..=42 => {
                    if let Some(target) = self.assignable() {
                        let op = if self.chance(0.5) { UpdateOp::Inc } else { UpdateOp::Dec };
                        let prefix = self.chance(0.3);
                        break StmtKind::Expr(Expr::Update {
                            op,
                            prefix,
                            target: Box::new(Expr::Ident(target)),
                        });
                    }
                }
                43..=54 if compound => {
                    let test = self.expr(2);
                    let cons = self.body_stmt(budget - 1);
                    let alt = if self.chance(0.4) {
                        if self.chance(0.25) {
                            // else-if chain
                            let inner = self.stmt_if(budget - 1);
                            Some(Box::new(Stmt::new(inner)))
                        } else {
                            Some(self.body_stmt(budget - 1))
                        }
                    } else {
                        None
                    };
                    break make_if(test, cons, alt);
                }
                55..=61 if compound && self.loop_depth < 2 => break self.for_loop(budget - 1),
                62..=65 if compound && self.loop_depth < 2 => break self.while_loop(budget - 1),
                66..=70 => {
                    let n = self.rng.gen_range(1..=2);
                    let args = (0..n).map(|_| self.expr(1)).collect();
                    break StmtKind::Expr(Expr::call(Expr::dot(Expr::ident("console"), "log"), args));
                }
                71..=74 => {
                    let arrays: Vec<Var> = self.visible();
                    if let Some(v) = arrays.choose(&mut self.rng) {
                        let arg = self.expr(1);
                        let name = v.name.clone();
                        break StmtKind::Expr(Expr::call(Expr::dot(Expr::Ident(name), "push"), vec![arg]));
                    }
                }
                75..=79 if compound && self.fn_depth < 3 => break self.helper_decl(budget - 1),
                80..=83 if compound && self.loop_depth == 0 => {
                    let test = self.expr(1);
                    let value = self.expr(2);
                    break StmtKind::If {
                        test,
                        cons: Box::new(Stmt::new(StmtKind::Return(Some(value)))),
                        alt: None,
                    };
                }
                84..=87 if compound => {
                    let b = self.block(budget - 1);
                    break StmtKind::Block(b);
                }
                88..=91 if compound => {
                    // Constant test: a target for dead-code removal.
                    let test = if self.chance(0.5) { Expr::Bool(false) } else { Expr::Number(0.0) };
                    let cons = self.body_stmt(budget - 1);
                    break StmtKind::If { test, cons, alt: None };
                }
                92..=95 => {
                    // Unused declaration with a foldable initializer.
                    let name = self.new_name();
                    let l = Expr::Number(self.rng.gen_range(0..10) as f64);
                    let r = Expr::Number(self.rng.gen_range(1..10) as f64);
                    let op = *[BinOp::Add, BinOp::Mul, BinOp::Sub].choose(&mut self.rng).unwrap();
                    self.declare(&name, true);
                    break StmtKind::VarDecl(VarDecl {
                        kind: VarKind::Var,
                        decls: vec![Declarator { name, init: Some(Expr::binary(op, l, r)) }],
                    });
                }
                96..=99 => {
                    let e = self.expr(2);
                    break StmtKind::Expr(e);
                }
                _ => {}
            }
        };
        Stmt { comments, kind }
    }

    fn stmt_if(&mut self, budget: usize) -> StmtKind {
        let test = self.expr(2);
        let cons = self.body_stmt(budget);
        let alt = if self.chance(0.5) { Some(self.body_stmt(budget)) } else { None };
        make_if(test, cons, alt)
    }

    fn var_decl(&mut self) -> StmtKind {
        let kind = *[VarKind::Var, VarKind::Let, VarKind::Const, VarKind::Let]
            .choose(&mut self.rng)
            .unwrap();
        let n = if self.chance(0.25) { 2 } else { 1 };
        let mut decls = Vec::new();
        for _ in 0..n {
            let init = if kind == VarKind::Const || self.chance(0.9) { Some(self.expr(2)) } else { None };
            let name = self.new_name();
            self.declare(&name, kind != VarKind::Const);
            decls.push(Declarator { name, init });
        }
        StmtKind::VarDecl(VarDecl { kind, decls })
    }

    fn counter_name(&mut self) -> String {
        self.fresh += 1;
        format!("{}{}", ["i", "j", "k"].choose(&mut self.rng).unwrap(), self.fresh)
    }

    fn for_loop(&mut self, budget: usize) -> StmtKind {
        self.push_scope();
        let counter = self.counter_name();
        let kind = if self.chance(0.7) { VarKind::Let } else { VarKind::Var };
        let bound = Expr::Number(self.rng.gen_range(0..5) as f64);
        let init = ForInit::Var(VarDecl {
            kind,
            decls: vec![Declarator { name: counter.clone(), init: Some(Expr::Number(0.0)) }],
        });
        let test = Expr::binary(BinOp::Lt, Expr::Ident(counter.clone()), bound);
        let update = Expr::Update {
            op: UpdateOp::Inc,
            prefix: self.chance(0.3),
            target: Box::new(Expr::Ident(counter.clone())),
        };
        // Readable but never assigned in the body.
        self.declare(&counter, false);
        self.loop_depth += 1;
        let body = self.body_stmt(budget);
        self.loop_depth -= 1;
        self.pop_scope();
        StmtKind::For { init: Some(init), test: Some(test), update: Some(update), body }
    }

    fn while_loop(&mut self, budget: usize) -> StmtKind {
        // `{ let c = 0; while (c < N) { ...; c++; } }` keeps it bounded.
        self.push_scope();
        let counter = self.counter_name();
        self.declare(&counter, false);
        let bound = Expr::Number(self.rng.gen_range(0..5) as f64);
        self.loop_depth += 1;
        let mut body = self.block(budget);
        self.loop_depth -= 1;
        body.stmts.push(Stmt::new(StmtKind::Expr(Expr::Update {
            op: UpdateOp::Inc,
            prefix: false,
            target: Box::new(Expr::Ident(counter.clone())),
        })));
        self.pop_scope();
        let decl = Stmt::new(StmtKind::VarDecl(VarDecl {
            kind: VarKind::Let,
            decls: vec![Declarator { name: counter.clone(), init: Some(Expr::Number(0.0)) }],
        }));
        let w = Stmt::new(StmtKind::While {
            test: Expr::binary(BinOp::Lt, Expr::Ident(counter), bound),
            body: Box::new(Stmt::new(StmtKind::Block(body))),
        });
        StmtKind::Block(Block::new(vec![decl, w]))
    }

    fn helper_decl(&mut self, budget: usize) -> StmtKind {
        let name = self.new_name();
        let arity = self.rng.gen_range(0..=2);
        let f = self.function(Some(name.clone()), arity, budget.min(1));
        self.helpers.last_mut().unwrap().push((name, arity));
        StmtKind::FunctionDecl(f)
    }

    fn literal(&mut self) -> Expr {
        match self.rng.gen_range(0..10) {
            0..=3 => Expr::Number(self.rng.gen_range(0..20) as f64),
            4 => Expr::Number(self.rng.gen_range(0..40) as f64 / 4.0),
            5 => Expr::unary(UnaryOp::Neg, Expr::Number(self.rng.gen_range(1..10) as f64)),
            6 | 7 => Expr::Str(STRINGS.choose(&mut self.rng).unwrap().to_string()),
            8 => Expr::Bool(self.chance(0.5)),
            _ => {
                if self.chance(0.5) {
                    Expr::Null
                } else {
                    Expr::Undefined
                }
            }
        }
    }

    fn read(&mut self) -> Expr {
        let vars = self.visible();
        match vars.choose(&mut self.rng) {
            Some(v) => Expr::Ident(v.name.clone()),
            None => self.literal(),
        }
    }

    fn leaf(&mut self) -> Expr {
        if self.chance(0.6) {
            self.read()
        } else {
            self.literal()
        }
    }

    fn expr(&mut self, depth: usize) -> Expr {
        if depth == 0 {
            return self.leaf();
        }
        match self.rng.gen_range(0..100) {
            0..=29 => self.leaf(),
            30..=54 => {
                let op = *BinOp::ALL.choose(&mut self.rng).unwrap();
                let l = self.expr(depth - 1);
                let r = self.expr(depth - 1);
                Expr::binary(op, l, r)
            }
            55..=61 => {
                let op = *[UnaryOp::Not, UnaryOp::Neg, UnaryOp::Plus, UnaryOp::Typeof]
                    .choose(&mut self.rng)
                    .unwrap();
                Expr::unary(op, self.expr(depth - 1))
            }
            62..=67 => {
                let n = self.rng.gen_range(0..=3);
                Expr::Array((0..n).map(|_| self.expr(depth - 1)).collect())
            }
            68..=70 => {
                let keys = ["k", "v", "name", "1", "two words"];
                let n = self.rng.gen_range(0..=2);
                let mut props: Vec<Property> = Vec::new();
                for _ in 0..n {
                    let key = keys.choose(&mut self.rng).unwrap().to_string();
                    if props.iter().all(|p| p.key != key) {
                        let value = self.expr(depth - 1);
                        props.push(Property { key, value });
                    }
                }
                Expr::Object(props)
            }
            71..=76 => {
                let obj = self.read();
                Expr::dot(obj, "length")
            }
            77..=80 => {
                let obj = self.read();
                let idx = if self.chance(0.6) {
                    Expr::Number(self.rng.gen_range(0..3) as f64)
                } else {
                    self.expr(depth - 1)
                };
                Expr::index(obj, idx)
            }
            81..=85 => {
                let obj = self.read();
                let (method, arity) = *[
                    ("slice", 1),
                    ("indexOf", 1),
                    ("includes", 1),
                    ("concat", 1),
                    ("join", 0),
                    ("toUpperCase", 0),
                    ("charAt", 1),
                ]
                .choose(&mut self.rng)
                .unwrap();
                let args = (0..arity).map(|_| self.expr(depth - 1)).collect();
                Expr::call(Expr::dot(obj, method), args)
            }
            86..=89 => {
                let f = *["floor", "abs", "max", "min", "round"].choose(&mut self.rng).unwrap();
                let n = if f == "max" || f == "min" { 2 } else { 1 };
                let args = (0..n).map(|_| self.expr(depth - 1)).collect();
                Expr::call(Expr::dot(Expr::ident("Math"), f), args)
            }
            90..=94 => {
                let helpers = self.visible_helpers();
                match helpers.choose(&mut self.rng) {
                    Some((name, arity)) => {
                        let (name, arity) = (name.clone(), *arity);
                        let args = (0..arity).map(|_| self.expr(depth - 1)).collect();
                        Expr::call(Expr::Ident(name), args)
                    }
                    None => self.leaf(),
                }
            }
            _ => {
                // Immediately applied arrow or function expression.
                self.push_scope();
                self.fn_depth += 1;
                let p = self.new_name();
                self.declare(&p, true);
                let body = self.expr(depth - 1);
                self.fn_depth -= 1;
                self.pop_scope();
                let arg = self.expr(depth - 1);
                let callee = if self.chance(0.7) {
                    Expr::Arrow(Box::new(Arrow { params: vec![p], body: ArrowBody::Expr(body) }))
                } else {
                    Expr::Function(Box::new(Function {
                        name: None,
                        params: vec![p],
                        body: Block::new(vec![Stmt::new(StmtKind::Return(Some(body)))]),
                    }))
                };
                Expr::call(callee, vec![arg])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{entry_arity, evaluate, random_inputs, Outcome};
    use crate::syntax::{parse, print, PrintStyle};

    #[test]
    fn deterministic_and_parseable() {
        for seed in 0..50 {
            let p = random_program(seed);
            assert_eq!(p, random_program(seed));
            let src = print(&p, PrintStyle::Beautified);
            assert_eq!(parse(&src).unwrap(), p, "{src}");
        }
    }

    #[test]
    fn programs_mostly_return() {
        let mut returned = 0;
        for seed in 0..100 {
            let p = random_program(seed);
            let arity = entry_arity(&p).unwrap();
            let out = evaluate(&p, &random_inputs(arity, 1, seed)[0], 20_000);
            assert_ne!(out.result, Outcome::StepLimitExceeded);
            if matches!(out.result, Outcome::Returned(_)) {
                returned += 1;
            }
        }
        assert!(returned >= 40, "{returned}");
    }
}
