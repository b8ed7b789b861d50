//! Declaration conflicts that JavaScript rejects before running anything:
//! a `let`, `const` or block-level function may not share its scope with
//! another declaration of the same name, and parameters may not repeat.

use super::ast::*;
use super::parser::SyntaxError;

/// Names declared with `var` in `stmts`, including nested blocks but not
/// nested functions, in source order.
pub fn var_declared_names(stmts: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    for s in stmts {
        collect_vars(s, &mut out);
    }
    out
}

fn collect_vars(s: &Stmt, out: &mut Vec<String>) {
    match &s.kind {
        StmtKind::VarDecl(d) if d.kind == VarKind::Var => {
            out.extend(d.decls.iter().map(|d| d.name.clone()))
        }
        StmtKind::If { cons, alt, .. } => {
            collect_vars(cons, out);
            if let Some(a) = alt {
                collect_vars(a, out);
            }
        }
        StmtKind::While { body, .. } => collect_vars(body, out),
        StmtKind::For { init, body, .. } => {
            if let Some(ForInit::Var(d)) = init {
                if d.kind == VarKind::Var {
                    out.extend(d.decls.iter().map(|d| d.name.clone()));
                }
            }
            collect_vars(body, out);
        }
        StmtKind::Block(b) => b.stmts.iter().for_each(|s| collect_vars(s, out)),
        _ => {}
    }
}

fn lexical_names(stmts: &[Stmt], functions_are_lexical: bool) -> Vec<String> {
    let mut out = Vec::new();
    for s in stmts {
        match &s.kind {
            StmtKind::VarDecl(d) if d.kind.is_lexical() => {
                out.extend(d.decls.iter().map(|d| d.name.clone()))
            }
            StmtKind::FunctionDecl(f) if functions_are_lexical => {
                out.extend(f.name.iter().cloned())
            }
            _ => {}
        }
    }
    out
}

fn function_names(stmts: &[Stmt]) -> Vec<String> {
    stmts
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::FunctionDecl(f) => f.name.clone(),
            _ => None,
        })
        .collect()
}

fn redeclared(name: &str) -> SyntaxError {
    SyntaxError::Redeclared { name: name.to_string() }
}

fn unique(names: &[String]) -> Result<(), SyntaxError> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(redeclared(n));
        }
    }
    Ok(())
}

fn disjoint(a: &[String], b: &[String]) -> Result<(), SyntaxError> {
    match a.iter().find(|n| b.contains(n)) {
        Some(n) => Err(redeclared(n)),
        None => Ok(()),
    }
}

/// Top level or function body: functions declared here behave like `var`.
fn function_level(params: &[String], stmts: &[Stmt]) -> Result<(), SyntaxError> {
    unique(params)?;
    let lexical = lexical_names(stmts, false);
    unique(&lexical)?;
    disjoint(&lexical, params)?;
    disjoint(&lexical, &var_declared_names(stmts))?;
    disjoint(&lexical, &function_names(stmts))
}

fn block_level(stmts: &[Stmt]) -> Result<(), SyntaxError> {
    let lexical = lexical_names(stmts, true);
    unique(&lexical)?;
    disjoint(&lexical, &var_declared_names(stmts))
}

struct Checker {
    error: Option<SyntaxError>,
}

impl Checker {
    fn record(&mut self, r: Result<(), SyntaxError>) {
        if let (None, Err(e)) = (&self.error, r) {
            self.error = Some(e);
        }
    }
}

impl VisitMut for Checker {
    fn visit_block(&mut self, block: &mut Block) {
        self.record(block_level(&block.stmts));
        walk_block(self, block);
    }

    fn visit_function(&mut self, func: &mut Function) {
        self.record(function_level(&func.params, &func.body.stmts));
        for s in &mut func.body.stmts {
            self.visit_stmt(s);
        }
    }

    fn visit_arrow(&mut self, arrow: &mut Arrow) {
        match &mut arrow.body {
            ArrowBody::Expr(e) => {
                self.record(unique(&arrow.params));
                self.visit_expr(e);
            }
            ArrowBody::Block(b) => {
                self.record(function_level(&arrow.params, &b.stmts));
                for s in &mut b.stmts {
                    self.visit_stmt(s);
                }
            }
        }
    }

    fn visit_stmt(&mut self, stmt: &mut Stmt) {
        if let StmtKind::For { init: Some(ForInit::Var(d)), body, .. } = &stmt.kind {
            if d.kind.is_lexical() {
                let names: Vec<String> = d.decls.iter().map(|d| d.name.clone()).collect();
                self.record(unique(&names));
                let mut vars = Vec::new();
                collect_vars(body, &mut vars);
                self.record(disjoint(&names, &vars));
            }
        }
        walk_stmt(self, stmt);
    }
}

pub(crate) fn check_in_place(program: &mut Program) -> Result<(), SyntaxError> {
    let mut c = Checker { error: None };
    c.record(function_level(&[], &program.body));
    walk_program(&mut c, program);
    c.error.map_or(Ok(()), Err)
}

/// Reject conflicting declarations.
pub fn check_declarations(program: &Program) -> Result<(), SyntaxError> {
    check_in_place(&mut program.clone())
}

#[cfg(test)]
mod tests {
    use crate::syntax::parse;

    #[test]
    fn conflicts_are_rejected() {
        for src in [
            "function f(){ { var a = 1; } let a = 2; }",
            "let a = 1; let a = 2;",
            "function f(a){ let a = 1; }",
            "function f(a, a){ }",
            "{ let x; function x(){} }",
            "for (let i = 0; i < 1; i++) { var i; }",
            "let g; function g(){}",
        ] {
            assert!(parse(src).is_err(), "{src}");
        }
    }

    #[test]
    fn legal_shadowing_is_accepted() {
        for src in [
            "function f(a){ var a; { let a = 1; } }",
            "var x; var x; function x(){}",
            "function f(){ let a; { let a; } return () => { let a; }; }",
            "for (let i = 0; i < 1; i++) { let i = 2; }",
        ] {
            assert!(parse(src).is_ok(), "{src}");
        }
    }
}
