use super::fold::const_value;
use super::scope::{resolve, BindingKind, Resolution};
use crate::interp::truthy;
use crate::syntax::ast::*;

const SEP: char = '\u{1}';

/// Resolution facts carried on a name while the pass runs: the name is
/// temporarily rewritten to `name SEP binding SEP seq SEP func`.
#[derive(Clone, Copy)]
struct Tag {
    binding: Option<usize>,
    seq: usize,
    func: usize,
}

fn tag_of(name: &str) -> Tag {
    let mut parts = name.split(SEP).skip(1).map(|p| p.parse::<usize>().unwrap_or(usize::MAX));
    let binding = parts.next().filter(|b| *b != usize::MAX);
    let seq = parts.next().unwrap_or(0);
    let func = parts.next().unwrap_or(0);
    Tag { binding, seq, func }
}

fn annotate(program: &mut Program) -> Resolution {
    resolve(program, |name, occ| {
        let b = occ.binding.unwrap_or(usize::MAX);
        *name = format!("{name}{SEP}{b}{SEP}{}{SEP}{}", occ.seq, occ.func);
    })
}

fn strip(program: &mut Program) {
    resolve(program, |name, _| {
        if let Some(i) = name.find(SEP) {
            name.truncate(i);
        }
    });
}

/// Remove unused side-effect-free declarations, effect-free expression
/// statements, unreachable code after `return` and branches with constant
/// tests, inside function bodies, until nothing changes. Any call, member
/// access or assignment counts as an effect.
pub fn eliminate_dead_code(program: &mut Program) {
    loop {
        let res = annotate(program);
        let mut pass = Pass { res: &res, changed: false };
        for s in &mut program.body {
            pass.top_level_stmt(s);
        }
        let changed = pass.changed;
        strip(program);
        if !changed {
            break;
        }
    }
}

struct Pass<'r> {
    res: &'r Resolution,
    changed: bool,
}

fn empty_block() -> StmtKind {
    StmtKind::Block(Block::default())
}

fn is_empty_block(s: &Stmt) -> bool {
    matches!(&s.kind, StmtKind::Block(b) if b.stmts.is_empty() && b.trailing_comments.is_empty())
        && s.comments.is_empty()
}

impl Pass<'_> {
    fn unused(&self, name: &str) -> bool {
        tag_of(name).binding.is_some_and(|b| self.res.bindings[b].refs == 0)
    }

    fn pure(&self, e: &Expr) -> bool {
        match e {
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null | Expr::Undefined => true,
            Expr::Function(_) | Expr::Arrow(_) => true,
            Expr::Array(items) => items.iter().all(|i| self.pure(i)),
            Expr::Object(props) => props.iter().all(|p| self.pure(&p.value)),
            Expr::Binary { left, right, .. } => self.pure(left) && self.pure(right),
            Expr::Unary { op: UnaryOp::Typeof, arg } if matches!(**arg, Expr::Ident(_)) => {
                let Expr::Ident(name) = &**arg else { unreachable!() };
                tag_of(name).binding.is_none() || self.pure(arg)
            }
            Expr::Unary { arg, .. } => self.pure(arg),
            Expr::Ident(name) => {
                let tag = tag_of(name);
                let Some(b) = tag.binding else { return false };
                let info = &self.res.bindings[b];
                match info.kind {
                    BindingKind::Let | BindingKind::Const => {
                        info.func == tag.func && tag.seq > info.decl_seq
                    }
                    _ => true,
                }
            }
            Expr::Member { .. } | Expr::Call { .. } | Expr::Assign { .. } | Expr::Update { .. } => {
                false
            }
        }
    }

    fn top_level_stmt(&mut self, s: &mut Stmt) {
        // Top-level code is left alone; only function bodies are pruned.
        struct Functions<'a, 'r>(&'a mut Pass<'r>);
        impl VisitMut for Functions<'_, '_> {
            fn visit_function(&mut self, f: &mut Function) {
                self.0.body(&mut f.body.stmts);
            }
            fn visit_arrow(&mut self, a: &mut Arrow) {
                match &mut a.body {
                    ArrowBody::Block(b) => self.0.body(&mut b.stmts),
                    ArrowBody::Expr(e) => self.0.expr(e),
                }
            }
        }
        Functions(self).visit_stmt(s);
    }

    /// Descend into nested functions inside an expression.
    fn expr(&mut self, e: &mut Expr) {
        struct Nested<'a, 'r>(&'a mut Pass<'r>);
        impl VisitMut for Nested<'_, '_> {
            fn visit_function(&mut self, f: &mut Function) {
                self.0.body(&mut f.body.stmts);
            }
            fn visit_arrow(&mut self, a: &mut Arrow) {
                match &mut a.body {
                    ArrowBody::Block(b) => self.0.body(&mut b.stmts),
                    ArrowBody::Expr(e) => self.0.expr(e),
                }
            }
        }
        Nested(self).visit_expr(e);
    }

    fn var_decl_exprs(&mut self, d: &mut VarDecl) {
        for decl in &mut d.decls {
            if let Some(init) = &mut decl.init {
                self.expr(init);
            }
        }
    }

    /// A statement list inside a function.
    fn body(&mut self, stmts: &mut Vec<Stmt>) {
        let mut out = Vec::with_capacity(stmts.len());
        let mut after_return = false;
        for mut s in stmts.drain(..) {
            if after_return && !s.contains_declaration() {
                self.changed = true;
                continue;
            }
            if self.simplify(&mut s) {
                after_return |= matches!(s.kind, StmtKind::Return(_));
                out.push(s);
            } else {
                self.changed = true;
            }
        }
        *stmts = out;
    }

    /// A statement in sub-statement position: removal becomes `{}`.
    fn sub(&mut self, s: &mut Stmt) {
        if is_empty_block(s) {
            return;
        }
        if !self.simplify(s) {
            self.changed = true;
            *s = Stmt::new(empty_block());
        }
    }

    /// Simplify in place; false if the statement should be dropped.
    fn simplify(&mut self, s: &mut Stmt) -> bool {
        match &mut s.kind {
            StmtKind::FunctionDecl(f) => {
                if f.name.as_deref().is_some_and(|n| self.unused(n)) {
                    return false;
                }
                self.body(&mut f.body.stmts);
                true
            }
            StmtKind::VarDecl(d) => {
                let before = d.decls.len();
                let mut kept = Vec::with_capacity(before);
                for decl in d.decls.drain(..) {
                    let dead = self.unused(&decl.name)
                        && decl.init.as_ref().is_none_or(|i| self.pure(i));
                    if !dead {
                        kept.push(decl);
                    }
                }
                d.decls = kept;
                if d.decls.len() != before {
                    self.changed = true;
                }
                self.var_decl_exprs(d);
                !d.decls.is_empty()
            }
            StmtKind::Expr(e) => {
                if self.pure(e) {
                    return false;
                }
                self.expr(e);
                true
            }
            StmtKind::If { test, cons, alt } => {
                if let Some(v) = const_value(test) {
                    let t = truthy(&v);
                    let dropped_decl = if t {
                        alt.as_ref().is_some_and(|a| a.contains_declaration())
                    } else {
                        cons.contains_declaration()
                    };
                    if !dropped_decl {
                        self.changed = true;
                        let StmtKind::If { cons, alt, .. } =
                            std::mem::replace(&mut s.kind, empty_block())
                        else {
                            unreachable!()
                        };
                        let kept = if t { Some(*cons) } else { alt.map(|a| *a) };
                        let Some(mut kept) = kept else { return false };
                        kept.comments.splice(0..0, s.comments.drain(..));
                        *s = kept;
                        return self.simplify(s);
                    }
                }
                self.expr(test);
                self.sub(cons);
                if let Some(a) = alt {
                    self.sub(a);
                    if is_empty_block(a) {
                        *alt = None;
                        self.changed = true;
                    }
                }
                let StmtKind::If { test, cons, alt } = &s.kind else { unreachable!() };
                !(alt.is_none() && is_empty_block(cons) && self.pure(test))
            }
            StmtKind::While { test, body } => {
                if const_value(test).is_some_and(|v| !truthy(&v)) && !body.contains_declaration() {
                    return false;
                }
                self.expr(test);
                self.sub(body);
                true
            }
            StmtKind::For { init, test, update, body } => {
                match init {
                    Some(ForInit::Var(d)) => self.var_decl_exprs(d),
                    Some(ForInit::Expr(e)) => self.expr(e),
                    None => {}
                }
                if let Some(t) = test {
                    self.expr(t);
                }
                if let Some(u) = update {
                    self.expr(u);
                }
                self.sub(body);
                true
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
                true
            }
            StmtKind::Block(b) => {
                self.body(&mut b.stmts);
                !(b.stmts.is_empty() && b.trailing_comments.is_empty() && s.comments.is_empty())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{check_equivalence, random_inputs, Verdict};
    use crate::syntax::{parse, print, PrintStyle};

    fn dce(src: &str) -> String {
        let mut p = parse(src).unwrap();
        eliminate_dead_code(&mut p);
        let out = print(&p, PrintStyle::Compact);
        let inputs = random_inputs(2, 10, 4);
        assert_eq!(check_equivalence(&parse(src).unwrap(), &p, &inputs, 10_000), Verdict::Equivalent);
        out
    }

    #[test]
    fn removes_unused_pure_declarations() {
        assert_eq!(dce("function f(a){ var x = 1, y = a; var z = g(); return y; }"), "function f(a){var y=a;var z=g();return y;}");
        assert_eq!(dce("function f(a){ let u = a * 2; let v = u + 1; return a; }"), "function f(a){return a;}");
    }

    #[test]
    fn removes_unreachable_and_constant_branches() {
        assert_eq!(dce("function f(a){ return a; a = 2; }"), "function f(a){return a;}");
        assert_eq!(dce("function f(a){ return k; var k = 1; }"), "function f(a){return k;var k=1;}");
        assert_eq!(dce("function f(a){ if (false) { a = 1; } else a = 2; while (0) a++; return a; }"), "function f(a){a=2;return a;}");
    }

    #[test]
    fn keeps_effects_and_tdz_reads() {
        let src = "function f(a){ a.length; x; let x = 1; return a; }";
        assert_eq!(dce(src), "function f(a){a.length;x;let x=1;return a;}");
        assert_eq!(dce("function f(a){ function h(){ return 1; } return a; }"), "function f(a){return a;}");
    }

    #[test]
    fn fixed_point_on_clean_code() {
        let src = "function f(a,b){var s=0;for(var i=0;i<a;i++)s+=b;return s;}";
        assert_eq!(dce(src), src);
    }

    #[test]
    fn names_are_restored() {
        let mut p = parse("function f(a){ var t = a; return t; }").unwrap();
        let q = p.clone();
        eliminate_dead_code(&mut p);
        assert_eq!(p, q);
    }
}
