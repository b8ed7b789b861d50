//! Binding resolution mirroring the interpreter's scoping rules: `var`
//! hoists to the enclosing function, `let`/`const` and function declarations
//! are block scoped, parameters and named function expressions get their
//! own bindings, and unresolved names are free.

use crate::syntax::ast::*;

pub type BindingId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingKind {
    Param,
    Var,
    Let,
    Const,
    Function,
    /// The name of a named function expression, visible only inside it.
    FunctionName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Decl,
    Ref,
}

#[derive(Debug, Clone)]
pub struct BindingInfo {
    pub name: String,
    pub kind: BindingKind,
    /// Declared outside every function.
    pub top_level: bool,
    /// Function that owns the binding; 0 is the top level.
    pub func: usize,
    /// Occurrence counter value once the declaration has finished
    /// initializing. Only meaningful for `let`/`const`.
    pub decl_seq: usize,
    pub refs: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Occurrence {
    pub binding: Option<BindingId>,
    pub role: Role,
    pub seq: usize,
    pub func: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub bindings: Vec<BindingInfo>,
    /// Names that occur free anywhere in the program.
    pub free_names: Vec<String>,
}

impl Resolution {
    /// Names that renaming passes must not introduce: top-level bindings,
    /// free references and the builtin globals.
    pub fn reserved_names(&self) -> std::collections::HashSet<String> {
        let mut out: std::collections::HashSet<String> = self
            .bindings
            .iter()
            .filter(|b| b.top_level)
            .map(|b| b.name.clone())
            .chain(self.free_names.iter().cloned())
            .collect();
        for g in ["Math", "console", "NaN", "Infinity", "undefined", "arguments", "eval"] {
            out.insert(g.to_string());
        }
        out
    }
}

/// Walk every identifier occurrence in source order, reporting its binding.
/// The callback may rename the occurrence in place; resolution uses the
/// names as they were when each scope was entered, so renaming during the
/// walk is safe.
pub fn resolve(program: &mut Program, mut f: impl FnMut(&mut String, Occurrence)) -> Resolution {
    let mut r = Resolver {
        scopes: Vec::new(),
        bindings: Vec::new(),
        free_names: Vec::new(),
        func_stack: vec![0],
        next_func: 1,
        seq: 0,
        cb: &mut f,
    };
    r.scopes.push(Vec::new());
    r.hoist_function_level(&program.body);
    for s in &mut program.body {
        r.stmt(s);
    }
    Resolution { bindings: r.bindings, free_names: r.free_names }
}

/// Resolution without renaming.
pub fn analyze(program: &Program) -> Resolution {
    let mut copy = program.clone();
    resolve(&mut copy, |_, _| {})
}

struct Resolver<'f> {
    scopes: Vec<Vec<(String, BindingId)>>,
    bindings: Vec<BindingInfo>,
    free_names: Vec<String>,
    func_stack: Vec<usize>,
    next_func: usize,
    seq: usize,
    cb: &'f mut dyn FnMut(&mut String, Occurrence),
}

pub(crate) fn has_block_scope(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::FunctionDecl(_) => true,
        StmtKind::VarDecl(d) => d.kind.is_lexical(),
        _ => false,
    })
}

impl Resolver<'_> {
    fn func(&self) -> usize {
        *self.func_stack.last().unwrap()
    }

    fn declare(&mut self, name: &str, kind: BindingKind) -> BindingId {
        let scope = self.scopes.last_mut().unwrap();
        if let Some((_, id)) = scope.iter().find(|(n, _)| n == name) {
            return *id;
        }
        let id = self.bindings.len();
        let func = *self.func_stack.last().unwrap();
        self.bindings.push(BindingInfo {
            name: name.to_string(),
            kind,
            top_level: func == 0,
            func,
            decl_seq: 0,
            refs: 0,
        });
        self.scopes.last_mut().unwrap().push((name.to_string(), id));
        id
    }

    fn lookup(&self, name: &str) -> Option<BindingId> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.iter().find(|(n, _)| n == name).map(|(_, id)| *id))
    }

    fn occurrence(&mut self, name: &mut String, role: Role) {
        self.seq += 1;
        let binding = self.lookup(name);
        match binding {
            Some(id) if role == Role::Ref => self.bindings[id].refs += 1,
            None if !self.free_names.contains(name) => self.free_names.push(name.clone()),
            _ => {}
        }
        let occ = Occurrence { binding, role, seq: self.seq, func: self.func() };
        (self.cb)(name, occ);
    }

    fn hoist_block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match &s.kind {
                StmtKind::FunctionDecl(f) => {
                    self.declare(f.name.as_deref().unwrap_or(""), BindingKind::Function);
                }
                StmtKind::VarDecl(d) if d.kind.is_lexical() => {
                    let kind =
                        if d.kind == VarKind::Let { BindingKind::Let } else { BindingKind::Const };
                    for decl in &d.decls {
                        self.declare(&decl.name, kind);
                    }
                }
                _ => {}
            }
        }
    }

    fn hoist_function_level(&mut self, stmts: &[Stmt]) {
        for n in crate::syntax::early::var_declared_names(stmts) {
            self.declare(&n, BindingKind::Var);
        }
        self.hoist_block(stmts);
    }

    fn block(&mut self, b: &mut Block) {
        let scoped = has_block_scope(&b.stmts);
        if scoped {
            self.scopes.push(Vec::new());
            self.hoist_block(&b.stmts);
        }
        for s in &mut b.stmts {
            self.stmt(s);
        }
        if scoped {
            self.scopes.pop();
        }
    }

    fn var_decl(&mut self, d: &mut VarDecl) {
        for decl in &mut d.decls {
            let original = decl.name.clone();
            self.occurrence(&mut decl.name, Role::Decl);
            if let Some(init) = &mut decl.init {
                self.expr(init);
            }
            if d.kind.is_lexical() {
                if let Some(id) = self.lookup(&original) {
                    self.bindings[id].decl_seq = self.seq;
                }
            }
        }
    }

    fn stmt(&mut self, s: &mut Stmt) {
        match &mut s.kind {
            StmtKind::FunctionDecl(f) => {
                if let Some(name) = &mut f.name {
                    self.occurrence(name, Role::Decl);
                }
                self.function(&mut f.params, &mut f.body);
            }
            StmtKind::VarDecl(d) => self.var_decl(d),
            StmtKind::If { test, cons, alt } => {
                self.expr(test);
                self.stmt(cons);
                if let Some(a) = alt {
                    self.stmt(a);
                }
            }
            StmtKind::While { test, body } => {
                self.expr(test);
                self.stmt(body);
            }
            StmtKind::For { init, test, update, body } => {
                let scoped = matches!(init, Some(ForInit::Var(d)) if d.kind.is_lexical());
                if scoped {
                    self.scopes.push(Vec::new());
                }
                match init {
                    Some(ForInit::Var(d)) => {
                        if scoped {
                            let kind = if d.kind == VarKind::Let {
                                BindingKind::Let
                            } else {
                                BindingKind::Const
                            };
                            for decl in &d.decls {
                                self.declare(&decl.name, kind);
                            }
                        }
                        self.var_decl(d);
                    }
                    Some(ForInit::Expr(e)) => self.expr(e),
                    None => {}
                }
                if let Some(t) = test {
                    self.expr(t);
                }
                if let Some(u) = update {
                    self.expr(u);
                }
                self.stmt(body);
                if scoped {
                    self.scopes.pop();
                }
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Block(b) => self.block(b),
            StmtKind::Expr(e) => self.expr(e),
        }
    }

    fn enter_function(&mut self) {
        self.func_stack.push(self.next_func);
        self.next_func += 1;
        self.scopes.push(Vec::new());
    }

    fn exit_function(&mut self) {
        self.scopes.pop();
        self.func_stack.pop();
    }

    fn params(&mut self, params: &mut [String]) {
        for p in params.iter() {
            self.declare(p, BindingKind::Param);
        }
        for p in params.iter_mut() {
            self.occurrence(p, Role::Decl);
        }
    }

    fn function(&mut self, params: &mut [String], body: &mut Block) {
        self.enter_function();
        self.params(params);
        self.hoist_function_level(&body.stmts);
        for s in &mut body.stmts {
            self.stmt(s);
        }
        self.exit_function();
    }

    fn expr(&mut self, e: &mut Expr) {
        match e {
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null | Expr::Undefined => {}
            Expr::Ident(name) => self.occurrence(name, Role::Ref),
            Expr::Array(items) => items.iter_mut().for_each(|i| self.expr(i)),
            Expr::Object(props) => props.iter_mut().for_each(|p| self.expr(&mut p.value)),
            Expr::Binary { left, right, .. } => {
                self.expr(left);
                self.expr(right);
            }
            Expr::Unary { arg, .. } => self.expr(arg),
            Expr::Update { target, .. } => self.expr(target),
            Expr::Call { callee, args } => {
                self.expr(callee);
                args.iter_mut().for_each(|a| self.expr(a));
            }
            Expr::Member { object, prop } => {
                self.expr(object);
                if let MemberProp::Index(i) = prop {
                    self.expr(i);
                }
            }
            Expr::Assign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            Expr::Function(f) => {
                let f = &mut **f;
                match &mut f.name {
                    Some(name) => {
                        self.scopes.push(Vec::new());
                        let n = name.clone();
                        self.declare(&n, BindingKind::FunctionName);
                        self.occurrence(name, Role::Decl);
                        self.function(&mut f.params, &mut f.body);
                        self.scopes.pop();
                    }
                    None => self.function(&mut f.params, &mut f.body),
                }
            }
            Expr::Arrow(a) => {
                self.enter_function();
                self.params(&mut a.params);
                match &mut a.body {
                    ArrowBody::Expr(e) => self.expr(e),
                    ArrowBody::Block(b) => {
                        self.hoist_function_level(&b.stmts);
                        for s in &mut b.stmts {
                            self.stmt(s);
                        }
                    }
                }
                self.exit_function();
            }
        }
    }
}
