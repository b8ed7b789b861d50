//! Tree model of the supported JavaScript subset.

use std::fmt;

/// A comment attached as leading trivia to a statement, or trailing inside a
/// block. `text` is the full lexeme including its `//` or `/* */` markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub text: String,
}

impl Comment {
    pub fn line(body: &str) -> Self {
        Comment { text: format!("//{body}") }
    }

    pub fn is_line(&self) -> bool {
        self.text.starts_with("//")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub body: Vec<Stmt>,
    pub trailing_comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub trailing_comments: Vec<Comment>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts, trailing_comments: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub comments: Vec<Comment>,
    pub kind: StmtKind,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { comments: Vec::new(), kind }
    }
}

impl From<StmtKind> for Stmt {
    fn from(kind: StmtKind) -> Self {
        Stmt::new(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    FunctionDecl(Function),
    VarDecl(VarDecl),
    If {
        test: Expr,
        cons: Box<Stmt>,
        alt: Option<Box<Stmt>>,
    },
    While {
        test: Expr,
        body: Box<Stmt>,
    },
    For {
        init: Option<ForInit>,
        test: Option<Expr>,
        update: Option<Expr>,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
    Block(Block),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForInit {
    Var(VarDecl),
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Var,
    Let,
    Const,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Var => "var",
            VarKind::Let => "let",
            VarKind::Const => "const",
        }
    }

    pub fn is_lexical(self) -> bool {
        !matches!(self, VarKind::Var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub kind: VarKind,
    pub decls: Vec<Declarator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: Option<String>,
    pub params: Vec<String>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrow {
    pub params: Vec<String>,
    pub body: ArrowBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrowBody {
    Expr(Expr),
    Block(Block),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemberProp {
    Dot(String),
    Index(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub key: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Always finite and non-negative; negative values are `Unary(Neg, ..)`.
    Number(f64),
    Str(String),
    Bool(bool),
    Null,
    Undefined,
    Array(Vec<Expr>),
    Object(Vec<Property>),
    Ident(String),
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        arg: Box<Expr>,
    },
    Update {
        op: UpdateOp,
        prefix: bool,
        target: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Member {
        object: Box<Expr>,
        prop: MemberProp,
    },
    Assign {
        op: AssignOp,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Function(Box<Function>),
    Arrow(Box<Arrow>),
}

impl Expr {
    pub fn ident(name: &str) -> Self {
        Expr::Ident(name.to_string())
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary { op, arg: Box::new(arg) }
    }

    pub fn call(callee: Expr, args: Vec<Expr>) -> Self {
        Expr::Call { callee: Box::new(callee), args }
    }

    pub fn dot(object: Expr, prop: &str) -> Self {
        Expr::Member { object: Box::new(object), prop: MemberProp::Dot(prop.to_string()) }
    }

    pub fn index(object: Expr, index: Expr) -> Self {
        Expr::Member { object: Box::new(object), prop: MemberProp::Index(Box::new(index)) }
    }

    pub fn assign(op: AssignOp, target: Expr, value: Expr) -> Self {
        Expr::Assign { op, target: Box::new(target), value: Box::new(value) }
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null | Expr::Undefined
        )
    }

    /// Binding power used by the printer to decide on parentheses.
    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Assign { .. } | Expr::Arrow(_) => 2,
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { .. } => 15,
            Expr::Update { prefix: true, .. } => 15,
            Expr::Update { prefix: false, .. } => 16,
            Expr::Call { .. } | Expr::Member { .. } => 18,
            _ => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    StrictEq,
    StrictNe,
    LooseEq,
    LooseNe,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 15] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::StrictEq,
        BinOp::StrictNe,
        BinOp::LooseEq,
        BinOp::LooseNe,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::StrictEq => "===",
            BinOp::StrictNe => "!==",
            BinOp::LooseEq => "==",
            BinOp::LooseNe => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn from_punct(p: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.as_str() == p)
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 4,
            BinOp::And => 5,
            BinOp::StrictEq | BinOp::StrictNe | BinOp::LooseEq | BinOp::LooseNe => 9,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 10,
            BinOp::Add | BinOp::Sub => 12,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 13,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, BinOp::StrictEq | BinOp::StrictNe | BinOp::LooseEq | BinOp::LooseNe)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
    Plus,
    Typeof,
}

impl UnaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::Typeof => "typeof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateOp {
    Inc,
    Dec,
}

impl UpdateOp {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateOp::Inc => "++",
            UpdateOp::Dec => "--",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Assign,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl AssignOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignOp::Assign => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
        }
    }

    pub fn from_punct(p: &str) -> Option<AssignOp> {
        [
            AssignOp::Assign,
            AssignOp::Add,
            AssignOp::Sub,
            AssignOp::Mul,
            AssignOp::Div,
            AssignOp::Rem,
        ]
        .into_iter()
        .find(|op| op.as_str() == p)
    }

    /// The arithmetic operator of a compound assignment.
    pub fn binary(self) -> Option<BinOp> {
        match self {
            AssignOp::Assign => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
            AssignOp::Rem => Some(BinOp::Rem),
        }
    }
}

/// Mutable traversal with overridable hooks. The `walk_*` functions recurse
/// into children; an override that wants the default descent calls them.
pub trait VisitMut {
    fn visit_stmt(&mut self, stmt: &mut Stmt) {
        walk_stmt(self, stmt);
    }

    fn visit_expr(&mut self, expr: &mut Expr) {
        walk_expr(self, expr);
    }

    fn visit_block(&mut self, block: &mut Block) {
        walk_block(self, block);
    }

    fn visit_function(&mut self, func: &mut Function) {
        self.visit_block(&mut func.body);
    }

    fn visit_arrow(&mut self, arrow: &mut Arrow) {
        match &mut arrow.body {
            ArrowBody::Expr(e) => self.visit_expr(e),
            ArrowBody::Block(b) => self.visit_block(b),
        }
    }
}

pub fn walk_program<V: VisitMut + ?Sized>(v: &mut V, program: &mut Program) {
    for stmt in &mut program.body {
        v.visit_stmt(stmt);
    }
}

pub fn walk_block<V: VisitMut + ?Sized>(v: &mut V, block: &mut Block) {
    for stmt in &mut block.stmts {
        v.visit_stmt(stmt);
    }
}

pub fn walk_var_decl<V: VisitMut + ?Sized>(v: &mut V, decl: &mut VarDecl) {
    for d in &mut decl.decls {
        if let Some(init) = &mut d.init {
            v.visit_expr(init);
        }
    }
}

pub fn walk_stmt<V: VisitMut + ?Sized>(v: &mut V, stmt: &mut Stmt) {
    match &mut stmt.kind {
        StmtKind::FunctionDecl(f) => v.visit_function(f),
        StmtKind::VarDecl(d) => walk_var_decl(v, d),
        StmtKind::If { test, cons, alt } => {
            v.visit_expr(test);
            v.visit_stmt(cons);
            if let Some(alt) = alt {
                v.visit_stmt(alt);
            }
        }
        StmtKind::While { test, body } => {
            v.visit_expr(test);
            v.visit_stmt(body);
        }
        StmtKind::For { init, test, update, body } => {
            match init {
                Some(ForInit::Var(d)) => walk_var_decl(v, d),
                Some(ForInit::Expr(e)) => v.visit_expr(e),
                None => {}
            }
            if let Some(t) = test {
                v.visit_expr(t);
            }
            if let Some(u) = update {
                v.visit_expr(u);
            }
            v.visit_stmt(body);
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                v.visit_expr(e);
            }
        }
        StmtKind::Block(b) => v.visit_block(b),
        StmtKind::Expr(e) => v.visit_expr(e),
    }
}

pub fn walk_expr<V: VisitMut + ?Sized>(v: &mut V, expr: &mut Expr) {
    match expr {
        Expr::Number(_)
        | Expr::Str(_)
        | Expr::Bool(_)
        | Expr::Null
        | Expr::Undefined
        | Expr::Ident(_) => {}
        Expr::Array(items) => {
            for e in items {
                v.visit_expr(e);
            }
        }
        Expr::Object(props) => {
            for p in props {
                v.visit_expr(&mut p.value);
            }
        }
        Expr::Binary { left, right, .. } => {
            v.visit_expr(left);
            v.visit_expr(right);
        }
        Expr::Unary { arg, .. } => v.visit_expr(arg),
        Expr::Update { target, .. } => v.visit_expr(target),
        Expr::Call { callee, args } => {
            v.visit_expr(callee);
            for a in args {
                v.visit_expr(a);
            }
        }
        Expr::Member { object, prop } => {
            v.visit_expr(object);
            if let MemberProp::Index(i) = prop {
                v.visit_expr(i);
            }
        }
        Expr::Assign { target, value, .. } => {
            v.visit_expr(target);
            v.visit_expr(value);
        }
        Expr::Function(f) => v.visit_function(f),
        Expr::Arrow(a) => v.visit_arrow(a),
    }
}

/// Read-only structural queries that do not need a full visitor.
impl Stmt {
    /// True if this statement (not descending into nested functions)
    /// declares anything: a `var`, lexical binding or function.
    pub fn contains_declaration(&self) -> bool {
        match &self.kind {
            StmtKind::FunctionDecl(_) | StmtKind::VarDecl(_) => true,
            StmtKind::If { cons, alt, .. } => {
                cons.contains_declaration()
                    || alt.as_ref().is_some_and(|a| a.contains_declaration())
            }
            StmtKind::While { body, .. } => body.contains_declaration(),
            StmtKind::For { init, body, .. } => {
                matches!(init, Some(ForInit::Var(_))) || body.contains_declaration()
            }
            StmtKind::Block(b) => b.stmts.iter().any(Stmt::contains_declaration),
            StmtKind::Return(_) | StmtKind::Expr(_) => false,
        }
    }
}
