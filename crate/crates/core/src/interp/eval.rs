//! Tree-walking evaluator. Scopes live in an arena owned by the evaluator
//! so closures can refer to their environment by index without reference
//! cycles.

use std::cell::RefCell;
use std::rc::Rc;

use super::runtime::*;
use super::Value;
use crate::syntax::ast::*;

pub const MAX_CALL_DEPTH: usize = 100;

struct Slot<'a> {
    name: &'a str,
    value: Rt<'a>,
    mutable: bool,
    init: bool,
}

struct Scope<'a> {
    slots: Vec<Slot<'a>>,
    parent: Option<usize>,
}

pub(crate) struct Interp<'a> {
    scopes: Vec<Scope<'a>>,
    steps: u64,
    limit: u64,
    depth: usize,
    pub log: Vec<Value>,
    last_value: Rt<'a>,
}

enum Key {
    Index(usize),
    Name(String),
}

impl Key {
    fn name(&self) -> String {
        match self {
            Key::Index(i) => i.to_string(),
            Key::Name(n) => n.clone(),
        }
    }
}

fn key_of(v: &Rt) -> Key {
    match v {
        Rt::Num(n) if *n >= 0.0 && n.fract() == 0.0 && *n < 4294967295.0 => Key::Index(*n as usize),
        Rt::Str(s) => {
            let n = crate::syntax::number::string_to_number(s);
            if n >= 0.0
                && n.fract() == 0.0
                && n < 4294967295.0
                && crate::syntax::number::to_js_string(n) == **s
            {
                Key::Index(n as usize)
            } else {
                Key::Name(s.to_string())
            }
        }
        other => Key::Name(to_string(other)),
    }
}

const ARRAY_METHODS: &[&str] = &[
    "push", "pop", "shift", "slice", "indexOf", "includes", "join", "concat", "reverse", "map",
    "filter", "forEach", "reduce",
];

const STRING_METHODS: &[&str] = &[
    "charAt", "charCodeAt", "indexOf", "slice", "substring", "toUpperCase", "toLowerCase",
    "split", "concat", "trim", "includes", "startsWith", "endsWith", "repeat",
];

const MATH_FUNCTIONS: &[&str] =
    &["floor", "ceil", "round", "abs", "max", "min", "sqrt", "pow", "trunc", "sign"];

/// Names of `var` declarations in a statement list, not descending into
/// nested functions.
fn collect_vars<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a str>) {
    for s in stmts {
        collect_vars_stmt(s, out);
    }
}

fn collect_vars_stmt<'a>(s: &'a Stmt, out: &mut Vec<&'a str>) {
    match &s.kind {
        StmtKind::VarDecl(d) if d.kind == VarKind::Var => {
            out.extend(d.decls.iter().map(|d| d.name.as_str()))
        }
        StmtKind::If { cons, alt, .. } => {
            collect_vars_stmt(cons, out);
            if let Some(a) = alt {
                collect_vars_stmt(a, out);
            }
        }
        StmtKind::While { body, .. } => collect_vars_stmt(body, out),
        StmtKind::For { init, body, .. } => {
            if let Some(ForInit::Var(d)) = init {
                if d.kind == VarKind::Var {
                    out.extend(d.decls.iter().map(|d| d.name.as_str()));
                }
            }
            collect_vars_stmt(body, out);
        }
        StmtKind::Block(b) => collect_vars(&b.stmts, out),
        _ => {}
    }
}

fn needs_scope(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::FunctionDecl(_) => true,
        StmtKind::VarDecl(d) => d.kind.is_lexical(),
        _ => false,
    })
}

fn math(name: &str, args: &[Rt]) -> f64 {
    let x = args.first().map_or(f64::NAN, to_number);
    match name {
        "floor" => x.floor(),
        "ceil" => x.ceil(),
        "abs" => x.abs(),
        "sqrt" => x.sqrt(),
        "trunc" => x.trunc(),
        "sign" => {
            if x.is_nan() || x == 0.0 {
                x
            } else {
                x.signum()
            }
        }
        "pow" => {
            let y = args.get(1).map_or(f64::NAN, to_number);
            // JS differs from C pow for 1^NaN and (-1)^Infinity.
            if y.is_nan() || (x.abs() == 1.0 && y.is_infinite()) {
                f64::NAN
            } else {
                x.powf(y)
            }
        }
        "round" => {
            if !x.is_finite() {
                return x;
            }
            let r = x.floor();
            let res = if x - r >= 0.5 { r + 1.0 } else { r };
            if res == 0.0 && x.is_sign_negative() {
                -0.0
            } else {
                res
            }
        }
        "max" | "min" => {
            let is_max = name == "max";
            let mut acc = if is_max { f64::NEG_INFINITY } else { f64::INFINITY };
            for a in args {
                let v = to_number(a);
                if v.is_nan() {
                    return f64::NAN;
                }
                let better = if is_max {
                    v > acc || (v == 0.0 && acc == 0.0 && !v.is_sign_negative())
                } else {
                    v < acc || (v == 0.0 && acc == 0.0 && v.is_sign_negative())
                };
                if better {
                    acc = v;
                }
            }
            acc
        }
        _ => f64::NAN,
    }
}

impl<'a> Interp<'a> {
    pub fn new(limit: u64) -> Self {
        let mut it = Interp {
            scopes: Vec::new(),
            steps: 0,
            limit,
            depth: 0,
            log: Vec::new(),
            last_value: Rt::Undef,
        };
        let global = it.new_scope(None);
        let math_obj: Vec<(String, Rt<'a>)> = MATH_FUNCTIONS
            .iter()
            .map(|n| (n.to_string(), Rt::Native(Rc::new(Native::Math(n)))))
            .collect();
        let console = vec![("log".to_string(), Rt::Native(Rc::new(Native::Log)))];
        it.declare(global, "Math", Rt::Obj(Rc::new(RefCell::new(math_obj))), true, true);
        it.declare(global, "console", Rt::Obj(Rc::new(RefCell::new(console))), true, true);
        it.declare(global, "NaN", Rt::Num(f64::NAN), false, true);
        it.declare(global, "Infinity", Rt::Num(f64::INFINITY), false, true);
        it
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One step, plus one for every eight characters or elements produced
    /// since the last tick, so bulk string and array work is paid for.
    fn tick(&mut self) -> RtResult<()> {
        self.charge(1 + take_work() / 8)
    }

    fn charge(&mut self, n: u64) -> RtResult<()> {
        self.steps += n;
        if self.steps > self.limit {
            Err(Abrupt::StepLimit)
        } else {
            Ok(())
        }
    }

    fn new_scope(&mut self, parent: Option<usize>) -> usize {
        self.scopes.push(Scope { slots: Vec::new(), parent });
        self.scopes.len() - 1
    }

    fn declare(&mut self, env: usize, name: &'a str, value: Rt<'a>, mutable: bool, init: bool) {
        let scope = &mut self.scopes[env];
        if let Some(slot) = scope.slots.iter_mut().find(|s| s.name == name) {
            *slot = Slot { name, value, mutable, init };
        } else {
            scope.slots.push(Slot { name, value, mutable, init });
        }
    }

    fn lookup(&self, mut env: usize, name: &str) -> Option<(usize, usize)> {
        loop {
            if let Some(i) = self.scopes[env].slots.iter().position(|s| s.name == name) {
                return Some((env, i));
            }
            env = self.scopes[env].parent?;
        }
    }

    fn read_var(&self, env: usize, name: &str) -> RtResult<Rt<'a>> {
        match self.lookup(env, name) {
            Some((s, i)) => {
                let slot = &self.scopes[s].slots[i];
                if slot.init {
                    Ok(slot.value.clone())
                } else {
                    throw(ErrorKind::Reference)
                }
            }
            None => throw(ErrorKind::Reference),
        }
    }

    fn write_var(&mut self, env: usize, name: &str, value: Rt<'a>) -> RtResult<()> {
        match self.lookup(env, name) {
            Some((s, i)) => {
                let slot = &mut self.scopes[s].slots[i];
                if !slot.init {
                    throw(ErrorKind::Reference)
                } else if !slot.mutable {
                    throw(ErrorKind::Type)
                } else {
                    slot.value = value;
                    Ok(())
                }
            }
            None => throw(ErrorKind::Reference),
        }
    }

    fn init_var(&mut self, env: usize, name: &str, value: Rt<'a>) {
        if let Some((s, i)) = self.lookup(env, name) {
            let slot = &mut self.scopes[s].slots[i];
            slot.value = value;
            slot.init = true;
        }
    }

    fn closure(&mut self, code: Code<'a>, env: usize) -> Rt<'a> {
        Rt::Fun(Rc::new(Closure { code, env }))
    }

    /// Function declarations and lexical bindings of one statement list.
    fn hoist_block(&mut self, stmts: &'a [Stmt], env: usize) {
        for s in stmts {
            match &s.kind {
                StmtKind::FunctionDecl(f) => {
                    let name = f.name.as_deref().unwrap_or("");
                    let clo = self.closure(Code::Func(f), env);
                    self.declare(env, name, clo, true, true);
                }
                StmtKind::VarDecl(d) if d.kind.is_lexical() => {
                    for decl in &d.decls {
                        self.declare(env, &decl.name, Rt::Undef, d.kind == VarKind::Let, false);
                    }
                }
                _ => {}
            }
        }
    }

    fn hoist_vars(&mut self, stmts: &'a [Stmt], env: usize) {
        let mut names = Vec::new();
        collect_vars(stmts, &mut names);
        for name in names {
            if !self.scopes[env].slots.iter().any(|s| s.name == name) {
                self.declare(env, name, Rt::Undef, true, true);
            }
        }
    }

    /// Run the top level, then call the first top-level function declaration
    /// with `args`. Without one, the result is the value of the last
    /// top-level expression statement.
    pub fn run_program(&mut self, program: &'a Program, args: &[Value]) -> RtResult<Rt<'a>> {
        take_work();
        let top = self.new_scope(Some(0));
        self.hoist_vars(&program.body, top);
        self.hoist_block(&program.body, top);
        for s in &program.body {
            self.exec(s, top)?;
        }
        let entry = program.body.iter().find_map(|s| match &s.kind {
            StmtKind::FunctionDecl(f) => f.name.as_deref(),
            _ => None,
        });
        match entry {
            Some(name) => {
                let f = self.read_var(top, name)?;
                let args = args.iter().map(Rt::from_value).collect();
                self.call(&f, args)
            }
            None => Ok(self.last_value.clone()),
        }
    }

    fn exec_list(&mut self, stmts: &'a [Stmt], env: usize) -> RtResult<Option<Rt<'a>>> {
        for s in stmts {
            if let Some(v) = self.exec(s, env)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn exec_var_decl(&mut self, d: &'a VarDecl, env: usize) -> RtResult<()> {
        for decl in &d.decls {
            match (&decl.init, d.kind) {
                (Some(init), VarKind::Var) => {
                    let v = self.eval(init, env)?;
                    self.write_var(env, &decl.name, v)?;
                }
                (None, VarKind::Var) => {}
                (init, _) => {
                    let v = match init {
                        Some(e) => self.eval(e, env)?,
                        None => Rt::Undef,
                    };
                    self.init_var(env, &decl.name, v);
                }
            }
        }
        Ok(())
    }

    fn exec(&mut self, s: &'a Stmt, env: usize) -> RtResult<Option<Rt<'a>>> {
        self.tick()?;
        match &s.kind {
            StmtKind::FunctionDecl(_) => Ok(None),
            StmtKind::VarDecl(d) => {
                self.exec_var_decl(d, env)?;
                Ok(None)
            }
            StmtKind::Expr(e) => {
                let v = self.eval(e, env)?;
                if self.depth == 0 {
                    self.last_value = v;
                }
                Ok(None)
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, env)?,
                    None => Rt::Undef,
                };
                Ok(Some(v))
            }
            StmtKind::If { test, cons, alt } => {
                let t = self.eval(test, env)?;
                if truthy(&t) {
                    self.exec(cons, env)
                } else if let Some(alt) = alt {
                    self.exec(alt, env)
                } else {
                    Ok(None)
                }
            }
            StmtKind::While { test, body } => loop {
                let t = self.eval(test, env)?;
                if !truthy(&t) {
                    return Ok(None);
                }
                if let Some(v) = self.exec(body, env)? {
                    return Ok(Some(v));
                }
                self.tick()?;
            },
            StmtKind::For { init, test, update, body } => self.exec_for(init, test, update, body, env),
            StmtKind::Block(b) => {
                let inner = if needs_scope(&b.stmts) {
                    let inner = self.new_scope(Some(env));
                    self.hoist_block(&b.stmts, inner);
                    inner
                } else {
                    env
                };
                self.exec_list(&b.stmts, inner)
            }
        }
    }

    fn exec_for(
        &mut self,
        init: &'a Option<ForInit>,
        test: &'a Option<Expr>,
        update: &'a Option<Expr>,
        body: &'a Stmt,
        env: usize,
    ) -> RtResult<Option<Rt<'a>>> {
        let per_iteration = matches!(init, Some(ForInit::Var(d)) if d.kind.is_lexical());
        let mut iter_env = env;
        match init {
            Some(ForInit::Var(d)) => {
                if per_iteration {
                    iter_env = self.new_scope(Some(env));
                    for decl in &d.decls {
                        self.declare(iter_env, &decl.name, Rt::Undef, d.kind == VarKind::Let, false);
                    }
                }
                self.exec_var_decl(d, iter_env)?;
            }
            Some(ForInit::Expr(e)) => {
                self.eval(e, env)?;
            }
            None => {}
        }
        loop {
            if let Some(t) = test {
                let t = self.eval(t, iter_env)?;
                if !truthy(&t) {
                    return Ok(None);
                }
            }
            if let Some(v) = self.exec(body, iter_env)? {
                return Ok(Some(v));
            }
            self.tick()?;
            if per_iteration {
                // Fresh bindings per iteration so closures capture each one.
                let copy: Vec<Slot<'a>> = self.scopes[iter_env]
                    .slots
                    .iter()
                    .map(|s| Slot { name: s.name, value: s.value.clone(), mutable: s.mutable, init: s.init })
                    .collect();
                iter_env = self.new_scope(Some(env));
                self.scopes[iter_env].slots = copy;
            }
            if let Some(u) = update {
                self.eval(u, iter_env)?;
            }
        }
    }

    pub fn call(&mut self, f: &Rt<'a>, args: Vec<Rt<'a>>) -> RtResult<Rt<'a>> {
        self.tick()?;
        match f {
            Rt::Fun(clo) => {
                if self.depth >= MAX_CALL_DEPTH {
                    return throw(ErrorKind::Range);
                }
                self.depth += 1;
                let result = self.call_closure(clo, args);
                self.depth -= 1;
                result
            }
            Rt::Native(n) => self.call_native(n, args),
            _ => throw(ErrorKind::Type),
        }
    }

    fn call_closure(&mut self, clo: &Closure<'a>, args: Vec<Rt<'a>>) -> RtResult<Rt<'a>> {
        let env = self.new_scope(Some(clo.env));
        let params = match clo.code {
            Code::Func(f) => &f.params,
            Code::Arrow(a) => &a.params,
        };
        let mut args = args.into_iter();
        for p in params {
            let v = args.next().unwrap_or(Rt::Undef);
            self.declare(env, p, v, true, true);
        }
        let body = match clo.code {
            Code::Func(f) => &f.body,
            Code::Arrow(a) => match &a.body {
                ArrowBody::Expr(e) => return self.eval(e, env),
                ArrowBody::Block(b) => b,
            },
        };
        self.hoist_vars(&body.stmts, env);
        self.hoist_block(&body.stmts, env);
        Ok(self.exec_list(&body.stmts, env)?.unwrap_or(Rt::Undef))
    }

    fn eval_key(&mut self, prop: &'a MemberProp, env: usize) -> RtResult<Key> {
        Ok(match prop {
            MemberProp::Dot(name) => Key::Name(name.clone()),
            MemberProp::Index(e) => {
                let k = self.eval(e, env)?;
                key_of(&k)
            }
        })
    }

    fn get_prop(&mut self, obj: &Rt<'a>, key: &Key) -> RtResult<Rt<'a>> {
        let method = |name: &str, table: &[&'static str]| {
            table.iter().find(|m| **m == name).map(|m| {
                Rt::Native(Rc::new(Native::Method { name: m, this: obj.clone() }))
            })
        };
        Ok(match obj {
            Rt::Null | Rt::Undef => return throw(ErrorKind::Type),
            Rt::Arr(a) => match key {
                Key::Index(i) => a.borrow().get(*i).cloned().unwrap_or(Rt::Undef),
                Key::Name(n) if n == "length" => Rt::Num(a.borrow().len() as f64),
                Key::Name(n) => method(n, ARRAY_METHODS).unwrap_or(Rt::Undef),
            },
            Rt::Str(s) => match key {
                Key::Index(i) => s.chars().nth(*i).map_or(Rt::Undef, |c| Rt::str(&c.to_string())),
                Key::Name(n) if n == "length" => Rt::Num(s.chars().count() as f64),
                Key::Name(n) => method(n, STRING_METHODS).unwrap_or(Rt::Undef),
            },
            Rt::Obj(o) => {
                let name = key.name();
                o.borrow().iter().find(|(k, _)| *k == name).map_or(Rt::Undef, |(_, v)| v.clone())
            }
            _ => Rt::Undef,
        })
    }

    fn set_prop(&mut self, obj: &Rt<'a>, key: Key, value: Rt<'a>) -> RtResult<()> {
        match obj {
            Rt::Arr(a) => {
                let mut a = a.borrow_mut();
                match key {
                    Key::Index(i) if i < a.len() => a[i] = value,
                    Key::Index(i) if i < MAX_LENGTH => {
                        a.resize(i, Rt::Undef);
                        a.push(value);
                    }
                    Key::Index(_) => return throw(ErrorKind::Range),
                    Key::Name(n) if n == "length" => {
                        let len = to_number(&value);
                        if !(len >= 0.0 && len.fract() == 0.0 && len <= MAX_LENGTH as f64) {
                            return throw(ErrorKind::Range);
                        }
                        a.resize(len as usize, Rt::Undef);
                    }
                    Key::Name(_) => {}
                }
                Ok(())
            }
            Rt::Obj(o) => {
                let name = key.name();
                let mut o = o.borrow_mut();
                match o.iter_mut().find(|(k, _)| *k == name) {
                    Some(slot) => slot.1 = value,
                    None => o.push((name, value)),
                }
                Ok(())
            }
            _ => throw(ErrorKind::Type),
        }
    }

    fn eval_args(&mut self, args: &'a [Expr], env: usize) -> RtResult<Vec<Rt<'a>>> {
        args.iter().map(|a| self.eval(a, env)).collect()
    }

    pub fn eval(&mut self, e: &'a Expr, env: usize) -> RtResult<Rt<'a>> {
        Ok(match e {
            Expr::Number(n) => Rt::Num(*n),
            Expr::Str(s) => Rt::str(s),
            Expr::Bool(b) => Rt::Bool(*b),
            Expr::Null => Rt::Null,
            Expr::Undefined => Rt::Undef,
            Expr::Ident(name) => self.read_var(env, name)?,
            Expr::Array(items) => {
                let items = self.eval_args(items, env)?;
                Rt::array(items)
            }
            Expr::Object(props) => {
                let mut out: Vec<(String, Rt<'a>)> = Vec::with_capacity(props.len());
                for p in props {
                    let v = self.eval(&p.value, env)?;
                    match out.iter_mut().find(|(k, _)| *k == p.key) {
                        Some(slot) => slot.1 = v,
                        None => out.push((p.key.clone(), v)),
                    }
                }
                Rt::Obj(Rc::new(RefCell::new(out)))
            }
            Expr::Binary { op: BinOp::And, left, right } => {
                let l = self.eval(left, env)?;
                if truthy(&l) {
                    self.eval(right, env)?
                } else {
                    l
                }
            }
            Expr::Binary { op: BinOp::Or, left, right } => {
                let l = self.eval(left, env)?;
                if truthy(&l) {
                    l
                } else {
                    self.eval(right, env)?
                }
            }
            Expr::Binary { op, left, right } => {
                let l = self.eval(left, env)?;
                let r = self.eval(right, env)?;
                binary(*op, &l, &r)?
            }
            Expr::Unary { op: UnaryOp::Typeof, arg } => match &**arg {
                // `typeof` tolerates undeclared names but not the TDZ.
                Expr::Ident(name) if self.lookup(env, name).is_none() => Rt::str("undefined"),
                other => {
                    let v = self.eval(other, env)?;
                    unary(UnaryOp::Typeof, &v)
                }
            },
            Expr::Unary { op, arg } => {
                let v = self.eval(arg, env)?;
                unary(*op, &v)
            }
            Expr::Update { op, prefix, target } => {
                let delta = if *op == UpdateOp::Inc { 1.0 } else { -1.0 };
                match &**target {
                    Expr::Ident(name) => {
                        let old = to_number(&self.read_var(env, name)?);
                        self.write_var(env, name, Rt::Num(old + delta))?;
                        Rt::Num(if *prefix { old + delta } else { old })
                    }
                    Expr::Member { object, prop } => {
                        let obj = self.eval(object, env)?;
                        let key = self.eval_key(prop, env)?;
                        let old = to_number(&self.get_prop(&obj, &key)?);
                        self.set_prop(&obj, key, Rt::Num(old + delta))?;
                        Rt::Num(if *prefix { old + delta } else { old })
                    }
                    _ => return throw(ErrorKind::Reference),
                }
            }
            Expr::Assign { op, target, value } => match &**target {
                Expr::Ident(name) => {
                    let v = match op.binary() {
                        None => self.eval(value, env)?,
                        Some(bin) => {
                            let old = self.read_var(env, name)?;
                            let rhs = self.eval(value, env)?;
                            binary(bin, &old, &rhs)?
                        }
                    };
                    self.write_var(env, name, v.clone())?;
                    v
                }
                Expr::Member { object, prop } => {
                    let obj = self.eval(object, env)?;
                    let key = self.eval_key(prop, env)?;
                    let v = match op.binary() {
                        None => self.eval(value, env)?,
                        Some(bin) => {
                            let old = self.get_prop(&obj, &key)?;
                            let rhs = self.eval(value, env)?;
                            binary(bin, &old, &rhs)?
                        }
                    };
                    self.set_prop(&obj, key, v.clone())?;
                    v
                }
                _ => return throw(ErrorKind::Reference),
            },
            Expr::Member { object, prop } => {
                let obj = self.eval(object, env)?;
                let key = self.eval_key(prop, env)?;
                self.get_prop(&obj, &key)?
            }
            Expr::Call { callee, args } => {
                let f = self.eval(callee, env)?;
                let args = self.eval_args(args, env)?;
                if !f.is_callable() {
                    return throw(ErrorKind::Type);
                }
                self.call(&f, args)?
            }
            Expr::Function(f) => {
                match &f.name {
                    // A named function expression sees its own name.
                    Some(name) => {
                        let own = self.new_scope(Some(env));
                        let clo = self.closure(Code::Func(f), own);
                        self.declare(own, name, clo.clone(), false, true);
                        clo
                    }
                    None => self.closure(Code::Func(f), env),
                }
            }
            Expr::Arrow(a) => self.closure(Code::Arrow(a), env),
        })
    }

    fn call_native(&mut self, n: &Native<'a>, args: Vec<Rt<'a>>) -> RtResult<Rt<'a>> {
        match n {
            Native::Math(name) => Ok(Rt::Num(math(name, &args))),
            Native::Log => {
                self.log.push(Value::Array(args.iter().map(Rt::snapshot).collect()));
                Ok(Rt::Undef)
            }
            Native::Method { name, this } => match this {
                Rt::Arr(a) => self.array_method(name, a, args),
                Rt::Str(s) => string_method(name, s, &args),
                _ => throw(ErrorKind::Type),
            },
        }
    }

    fn array_method(
        &mut self,
        name: &str,
        arr: &Rc<RefCell<Vec<Rt<'a>>>>,
        args: Vec<Rt<'a>>,
    ) -> RtResult<Rt<'a>> {
        let this = Rt::Arr(arr.clone());
        match name {
            "push" => {
                let mut a = arr.borrow_mut();
                if a.len() + args.len() > MAX_LENGTH {
                    return throw(ErrorKind::Range);
                }
                a.extend(args);
                Ok(Rt::Num(a.len() as f64))
            }
            "pop" => Ok(arr.borrow_mut().pop().unwrap_or(Rt::Undef)),
            "shift" => {
                let mut a = arr.borrow_mut();
                Ok(if a.is_empty() { Rt::Undef } else { a.remove(0) })
            }
            "slice" => {
                let a = arr.borrow();
                let start = relative_index(args.first(), a.len(), 0);
                let end = relative_index(args.get(1), a.len(), a.len());
                Ok(Rt::array(if start < end { a[start..end].to_vec() } else { Vec::new() }))
            }
            "indexOf" => {
                let target = args.first().cloned().unwrap_or(Rt::Undef);
                let a = arr.borrow();
                let from = relative_index(args.get(1), a.len(), 0);
                let pos = a.iter().skip(from).position(|v| strict_equals(v, &target));
                Ok(Rt::Num(pos.map_or(-1.0, |p| (p + from) as f64)))
            }
            "includes" => {
                let target = args.first().cloned().unwrap_or(Rt::Undef);
                Ok(Rt::Bool(arr.borrow().iter().any(|v| same_value_zero(v, &target))))
            }
            "join" => {
                let sep = match args.first() {
                    None | Some(Rt::Undef) => ",".to_string(),
                    Some(s) => to_string(s),
                };
                checked_string(join_array(&arr, &sep))
            }
            "concat" => {
                let mut out = arr.borrow().clone();
                for a in args {
                    match a {
                        Rt::Arr(other) => out.extend(other.borrow().iter().cloned()),
                        other => out.push(other),
                    }
                }
                if out.len() > MAX_LENGTH {
                    return throw(ErrorKind::Range);
                }
                Ok(Rt::array(out))
            }
            "reverse" => {
                arr.borrow_mut().reverse();
                Ok(this)
            }
            "map" | "filter" | "forEach" => {
                let cb = args.first().cloned().unwrap_or(Rt::Undef);
                if !cb.is_callable() {
                    return throw(ErrorKind::Type);
                }
                let len = arr.borrow().len();
                let mut out = Vec::new();
                for i in 0..len {
                    let Some(item) = arr.borrow().get(i).cloned() else { continue };
                    let r = self.call(&cb, vec![item.clone(), Rt::Num(i as f64), this.clone()])?;
                    match name {
                        "map" => out.push(r),
                        "filter" if truthy(&r) => out.push(item),
                        _ => {}
                    }
                }
                Ok(if name == "forEach" { Rt::Undef } else { Rt::array(out) })
            }
            "reduce" => {
                let cb = args.first().cloned().unwrap_or(Rt::Undef);
                if !cb.is_callable() {
                    return throw(ErrorKind::Type);
                }
                let len = arr.borrow().len();
                let mut i = 0;
                let mut acc = match args.get(1) {
                    Some(init) => init.clone(),
                    None => {
                        if len == 0 {
                            return throw(ErrorKind::Type);
                        }
                        i = 1;
                        arr.borrow()[0].clone()
                    }
                };
                while i < len {
                    let Some(item) = arr.borrow().get(i).cloned() else { break };
                    acc = self.call(&cb, vec![acc, item, Rt::Num(i as f64), this.clone()])?;
                    i += 1;
                }
                Ok(acc)
            }
            _ => throw(ErrorKind::Type),
        }
    }
}

fn char_index_of(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from.min(hay.len()));
    }
    (from..hay.len()).find(|&i| hay[i..].starts_with(needle))
}

fn string_method<'a>(name: &str, s: &str, args: &[Rt<'a>]) -> RtResult<Rt<'a>> {
    let chars: Vec<char> = s.chars().collect();
    let arg_str = |i: usize| args.get(i).map(to_string).unwrap_or_else(|| "undefined".into());
    Ok(match name {
        "charAt" => {
            let i = to_integer(args.first());
            if i >= 0.0 && (i as usize) < chars.len() {
                Rt::str(&chars[i as usize].to_string())
            } else {
                Rt::str("")
            }
        }
        "charCodeAt" => {
            let i = to_integer(args.first());
            if i >= 0.0 && (i as usize) < chars.len() {
                Rt::Num(chars[i as usize] as u32 as f64)
            } else {
                Rt::Num(f64::NAN)
            }
        }
        "indexOf" => {
            let needle: Vec<char> = arg_str(0).chars().collect();
            let from = to_integer(args.get(1)).clamp(0.0, chars.len() as f64) as usize;
            Rt::Num(char_index_of(&chars, &needle, from).map_or(-1.0, |p| p as f64))
        }
        "includes" => {
            let needle: Vec<char> = arg_str(0).chars().collect();
            Rt::Bool(char_index_of(&chars, &needle, 0).is_some())
        }
        "startsWith" => Rt::Bool(s.starts_with(&arg_str(0))),
        "endsWith" => Rt::Bool(s.ends_with(&arg_str(0))),
        "slice" => {
            let start = relative_index(args.first(), chars.len(), 0);
            let end = relative_index(args.get(1), chars.len(), chars.len());
            let out: String = if start < end { chars[start..end].iter().collect() } else { String::new() };
            Rt::str(&out)
        }
        "substring" => {
            let clamp = |v: Option<&Rt>, default: usize| match v {
                None | Some(Rt::Undef) => default,
                Some(v) => to_integer(Some(v)).clamp(0.0, chars.len() as f64) as usize,
            };
            let a = clamp(args.first(), 0);
            let b = clamp(args.get(1), chars.len());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            Rt::str(&chars[lo..hi].iter().collect::<String>())
        }
        "toUpperCase" => Rt::str(&s.to_uppercase()),
        "toLowerCase" => Rt::str(&s.to_lowercase()),
        "trim" => Rt::str(s.trim()),
        "concat" => {
            let mut out = s.to_string();
            for a in args {
                out.push_str(&to_string(a));
            }
            return checked_string(out);
        }
        "repeat" => {
            let n = to_integer(args.first());
            if n < 0.0 || n.is_infinite() || (n * chars.len() as f64) > MAX_LENGTH as f64 {
                return throw(ErrorKind::Range);
            }
            Rt::str(&s.repeat(n as usize))
        }
        "split" => {
            let parts: Vec<Rt<'a>> = match args.first() {
                None | Some(Rt::Undef) => vec![Rt::str(s)],
                Some(sep) => {
                    let sep = to_string(sep);
                    if sep.is_empty() {
                        chars.iter().map(|c| Rt::str(&c.to_string())).collect()
                    } else {
                        s.split(sep.as_str()).map(Rt::str).collect()
                    }
                }
            };
            Rt::array(parts)
        }
        _ => return throw(ErrorKind::Type),
    })
}
