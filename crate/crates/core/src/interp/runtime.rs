//! Runtime values and the primitive operator semantics shared with constant
//! folding.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::Value;
use crate::syntax::ast::{Arrow, BinOp, Function, UnaryOp};
use crate::syntax::number::{string_to_number, to_js_string};

/// Strings and arrays larger than this raise a RangeError.
pub const MAX_LENGTH: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Type,
    Reference,
    Range,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Type => "TypeError",
            ErrorKind::Reference => "ReferenceError",
            ErrorKind::Range => "RangeError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Abrupt {
    Throw(ErrorKind),
    StepLimit,
}

pub type RtResult<T> = Result<T, Abrupt>;

pub fn throw<T>(kind: ErrorKind) -> RtResult<T> {
    Err(Abrupt::Throw(kind))
}

#[derive(Debug, Clone, Copy)]
pub enum Code<'a> {
    Func(&'a Function),
    Arrow(&'a Arrow),
}

#[derive(Debug)]
pub struct Closure<'a> {
    pub code: Code<'a>,
    pub env: usize,
}

#[derive(Debug, Clone)]
pub enum Native<'a> {
    Math(&'static str),
    Log,
    Method { name: &'static str, this: Rt<'a> },
}

#[derive(Debug, Clone)]
pub enum Rt<'a> {
    Num(f64),
    Str(Rc<str>),
    Bool(bool),
    Null,
    Undef,
    Arr(Rc<RefCell<Vec<Rt<'a>>>>),
    Obj(Rc<RefCell<Vec<(String, Rt<'a>)>>>),
    Fun(Rc<Closure<'a>>),
    Native(Rc<Native<'a>>),
}

impl<'a> Rt<'a> {
    pub fn str(s: &str) -> Self {
        add_work(s.len());
        Rt::Str(Rc::from(s))
    }

    pub fn array(items: Vec<Rt<'a>>) -> Self {
        add_work(items.len());
        Rt::Arr(Rc::new(RefCell::new(items)))
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Rt::Fun(_) | Rt::Native(_))
    }

    pub fn from_value(v: &Value) -> Self {
        match v {
            Value::Number(n) => Rt::Num(*n),
            Value::Str(s) => Rt::str(s),
            Value::Bool(b) => Rt::Bool(*b),
            Value::Null => Rt::Null,
            Value::Undefined | Value::Function => Rt::Undef,
            Value::Array(items) => Rt::array(items.iter().map(Rt::from_value).collect()),
            Value::Object(props) => Rt::Obj(Rc::new(RefCell::new(
                props.iter().map(|(k, v)| (k.clone(), Rt::from_value(v))).collect(),
            ))),
        }
    }

    /// Observable copy. Cycles become `"[Circular]"`; very deep or very
    /// large structures are cut off at a fixed budget.
    pub fn snapshot(&self) -> Value {
        let mut budget = SNAPSHOT_BUDGET;
        self.snapshot_inner(&mut Vec::new(), &mut budget)
    }

    fn snapshot_inner(&self, stack: &mut Vec<*const ()>, budget: &mut usize) -> Value {
        if *budget == 0 || stack.len() > 32 {
            return Value::Str("[...]".into());
        }
        *budget -= 1;
        match self {
            Rt::Num(n) => Value::Number(*n),
            Rt::Str(s) => Value::Str(s.to_string()),
            Rt::Bool(b) => Value::Bool(*b),
            Rt::Null => Value::Null,
            Rt::Undef => Value::Undefined,
            Rt::Arr(a) => {
                let id = Rc::as_ptr(a) as *const ();
                if stack.contains(&id) {
                    return Value::Str("[Circular]".into());
                }
                stack.push(id);
                let out = a.borrow().iter().map(|v| v.snapshot_inner(stack, budget)).collect();
                stack.pop();
                Value::Array(out)
            }
            Rt::Obj(o) => {
                let id = Rc::as_ptr(o) as *const ();
                if stack.contains(&id) {
                    return Value::Str("[Circular]".into());
                }
                stack.push(id);
                let out = o
                    .borrow()
                    .iter()
                    .map(|(k, v)| (k.clone(), v.snapshot_inner(stack, budget)))
                    .collect();
                stack.pop();
                Value::Object(out)
            }
            Rt::Fun(_) | Rt::Native(_) => Value::Function,
        }
    }
}

const SNAPSHOT_BUDGET: usize = 100_000;

thread_local! {
    static WORK: Cell<u64> = const { Cell::new(0) };
}

/// Record bulk work (characters or elements produced) so the interpreter
/// can charge steps for it.
pub fn add_work(n: usize) {
    WORK.with(|w| w.set(w.get() + n as u64));
}

pub fn take_work() -> u64 {
    WORK.with(|w| w.replace(0))
}

pub fn truthy(v: &Rt) -> bool {
    match v {
        Rt::Num(n) => !(*n == 0.0 || n.is_nan()),
        Rt::Str(s) => !s.is_empty(),
        Rt::Bool(b) => *b,
        Rt::Null | Rt::Undef => false,
        _ => true,
    }
}

pub fn type_of(v: &Rt) -> &'static str {
    match v {
        Rt::Num(_) => "number",
        Rt::Str(_) => "string",
        Rt::Bool(_) => "boolean",
        Rt::Undef => "undefined",
        Rt::Null | Rt::Arr(_) | Rt::Obj(_) => "object",
        Rt::Fun(_) | Rt::Native(_) => "function",
    }
}

pub fn to_number(v: &Rt) -> f64 {
    match v {
        Rt::Num(n) => *n,
        Rt::Str(s) => string_to_number(s),
        Rt::Bool(b) => f64::from(u8::from(*b)),
        Rt::Null => 0.0,
        Rt::Undef | Rt::Fun(_) | Rt::Native(_) => f64::NAN,
        Rt::Arr(_) | Rt::Obj(_) => string_to_number(&to_string(v)),
    }
}

pub fn to_string(v: &Rt) -> String {
    match v {
        Rt::Num(n) => to_js_string(*n),
        Rt::Str(s) => s.to_string(),
        Rt::Bool(b) => b.to_string(),
        Rt::Null => "null".into(),
        Rt::Undef => "undefined".into(),
        Rt::Arr(a) => join_array(a, ","),
        Rt::Obj(_) => "[object Object]".into(),
        Rt::Fun(_) | Rt::Native(_) => "function".into(),
    }
}

/// `Array.prototype.join`: holes, `null` and `undefined` print empty and an
/// array nested inside itself prints empty. Output past the length limit
/// is cut short; callers turn that into a range error.
pub fn join_array(a: &Rc<RefCell<Vec<Rt>>>, sep: &str) -> String {
    let mut out = String::new();
    join_into(a, sep, &mut out, &mut Vec::new());
    add_work(out.len());
    out
}

fn join_into(a: &Rc<RefCell<Vec<Rt>>>, sep: &str, out: &mut String, stack: &mut Vec<*const ()>) {
    let id = Rc::as_ptr(a) as *const ();
    if stack.contains(&id) || stack.len() > 32 {
        return;
    }
    stack.push(id);
    for (i, x) in a.borrow().iter().enumerate() {
        if out.len() > MAX_LENGTH {
            break;
        }
        if i > 0 {
            out.push_str(sep);
        }
        match x {
            Rt::Null | Rt::Undef => {}
            Rt::Arr(inner) => join_into(inner, ",", out, stack),
            other => out.push_str(&to_string(other)),
        }
    }
    stack.pop();
}

fn is_object(v: &Rt) -> bool {
    matches!(v, Rt::Arr(_) | Rt::Obj(_) | Rt::Fun(_) | Rt::Native(_))
}

/// Primitive conversion of objects (string hint; no user-defined hooks).
fn to_primitive<'a>(v: &Rt<'a>) -> Rt<'a> {
    if is_object(v) {
        Rt::str(&to_string(v))
    } else {
        v.clone()
    }
}

pub fn strict_equals<'a>(a: &Rt<'a>, b: &Rt<'a>) -> bool {
    match (a, b) {
        (Rt::Num(x), Rt::Num(y)) => x == y,
        (Rt::Str(x), Rt::Str(y)) => x == y,
        (Rt::Bool(x), Rt::Bool(y)) => x == y,
        (Rt::Null, Rt::Null) | (Rt::Undef, Rt::Undef) => true,
        (Rt::Arr(x), Rt::Arr(y)) => Rc::ptr_eq(x, y),
        (Rt::Obj(x), Rt::Obj(y)) => Rc::ptr_eq(x, y),
        (Rt::Fun(x), Rt::Fun(y)) => Rc::ptr_eq(x, y),
        (Rt::Native(x), Rt::Native(y)) => Rc::ptr_eq(x, y),
        _ => false,
    }
}

/// SameValueZero, used by `includes`.
pub fn same_value_zero<'a>(a: &Rt<'a>, b: &Rt<'a>) -> bool {
    match (a, b) {
        (Rt::Num(x), Rt::Num(y)) if x.is_nan() && y.is_nan() => true,
        _ => strict_equals(a, b),
    }
}

/// Loose equality over a reduced coercion table: null/undefined are equal
/// to each other only, booleans convert to numbers, numbers and strings
/// compare numerically, objects compare by identity or via their string
/// form against primitives.
pub fn loose_equals<'a>(a: &Rt<'a>, b: &Rt<'a>) -> bool {
    match (a, b) {
        (Rt::Null | Rt::Undef, Rt::Null | Rt::Undef) => true,
        (Rt::Null | Rt::Undef, _) | (_, Rt::Null | Rt::Undef) => false,
        (Rt::Num(_), Rt::Str(_)) | (Rt::Str(_), Rt::Num(_)) => to_number(a) == to_number(b),
        (Rt::Bool(_), _) => loose_equals(&Rt::Num(to_number(a)), b),
        (_, Rt::Bool(_)) => loose_equals(a, &Rt::Num(to_number(b))),
        _ if is_object(a) && !is_object(b) => loose_equals(&to_primitive(a), b),
        _ if !is_object(a) && is_object(b) => loose_equals(a, &to_primitive(b)),
        _ => strict_equals(a, b),
    }
}

fn compare<'a>(op: BinOp, a: &Rt<'a>, b: &Rt<'a>) -> bool {
    let (a, b) = (to_primitive(a), to_primitive(b));
    if let (Rt::Str(x), Rt::Str(y)) = (&a, &b) {
        return match op {
            BinOp::Lt => x < y,
            BinOp::Le => x <= y,
            BinOp::Gt => x > y,
            _ => x >= y,
        };
    }
    let (x, y) = (to_number(&a), to_number(&b));
    match op {
        BinOp::Lt => x < y,
        BinOp::Le => x <= y,
        BinOp::Gt => x > y,
        _ => x >= y,
    }
}

pub fn checked_string<'a>(s: String) -> RtResult<Rt<'a>> {
    add_work(s.len());
    if s.len() > MAX_LENGTH {
        throw(ErrorKind::Range)
    } else {
        Ok(Rt::Str(Rc::from(s)))
    }
}

/// Non-short-circuit binary operators.
pub fn binary<'a>(op: BinOp, a: &Rt<'a>, b: &Rt<'a>) -> RtResult<Rt<'a>> {
    Ok(match op {
        BinOp::Add => {
            let (pa, pb) = (to_primitive(a), to_primitive(b));
            if matches!(pa, Rt::Str(_)) || matches!(pb, Rt::Str(_)) {
                let mut s = to_string(&pa);
                s.push_str(&to_string(&pb));
                return checked_string(s);
            }
            Rt::Num(to_number(&pa) + to_number(&pb))
        }
        BinOp::Sub => Rt::Num(to_number(a) - to_number(b)),
        BinOp::Mul => Rt::Num(to_number(a) * to_number(b)),
        BinOp::Div => Rt::Num(to_number(a) / to_number(b)),
        BinOp::Rem => Rt::Num(to_number(a) % to_number(b)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => Rt::Bool(compare(op, a, b)),
        BinOp::StrictEq => Rt::Bool(strict_equals(a, b)),
        BinOp::StrictNe => Rt::Bool(!strict_equals(a, b)),
        BinOp::LooseEq => Rt::Bool(loose_equals(a, b)),
        BinOp::LooseNe => Rt::Bool(!loose_equals(a, b)),
        BinOp::And => {
            if truthy(a) {
                b.clone()
            } else {
                a.clone()
            }
        }
        BinOp::Or => {
            if truthy(a) {
                a.clone()
            } else {
                b.clone()
            }
        }
    })
}

pub fn unary<'a>(op: UnaryOp, a: &Rt<'a>) -> Rt<'a> {
    match op {
        UnaryOp::Not => Rt::Bool(!truthy(a)),
        UnaryOp::Neg => Rt::Num(-to_number(a)),
        UnaryOp::Plus => Rt::Num(to_number(a)),
        UnaryOp::Typeof => Rt::str(type_of(a)),
    }
}

/// `ToIntegerOrInfinity` followed by relative-index clamping to `[0, len]`.
pub fn relative_index(v: Option<&Rt>, len: usize, default: usize) -> usize {
    let Some(v) = v else { return default };
    if matches!(v, Rt::Undef) {
        return default;
    }
    let n = to_number(v);
    let n = if n.is_nan() { 0.0 } else { n.trunc() };
    let len_f = len as f64;
    let idx = if n < 0.0 { (len_f + n).max(0.0) } else { n.min(len_f) };
    idx as usize
}

pub fn to_integer(v: Option<&Rt>) -> f64 {
    match v {
        None => 0.0,
        Some(v) => {
            let n = to_number(v);
            if n.is_nan() {
                0.0
            } else {
                n.trunc()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(x: f64) -> Rt<'static> {
        Rt::Num(x)
    }

    #[test]
    fn addition_concatenates_with_strings() {
        let r = binary(BinOp::Add, &Rt::str("a"), &n(1.0)).unwrap();
        assert_eq!(to_string(&r), "a1");
        let r = binary(BinOp::Add, &n(1.0), &Rt::Bool(true)).unwrap();
        assert_eq!(to_number(&r), 2.0);
        let arr = Rt::array(vec![n(1.0), n(2.0)]);
        assert_eq!(to_string(&binary(BinOp::Add, &arr, &n(3.0)).unwrap()), "1,23");
    }

    #[test]
    fn equality_tables() {
        assert!(!strict_equals(&n(f64::NAN), &n(f64::NAN)));
        assert!(strict_equals(&n(0.0), &n(-0.0)));
        assert!(loose_equals(&n(1.0), &Rt::str("1")));
        assert!(loose_equals(&Rt::Bool(true), &n(1.0)));
        assert!(loose_equals(&Rt::Null, &Rt::Undef));
        assert!(!loose_equals(&Rt::Null, &n(0.0)));
        assert!(loose_equals(&Rt::array(vec![n(1.0)]), &n(1.0)));
    }

    #[test]
    fn comparisons() {
        let lt = |a, b| to_string(&binary(BinOp::Lt, &a, &b).unwrap());
        assert_eq!(lt(Rt::str("10"), Rt::str("9")), "true");
        assert_eq!(lt(Rt::str("10"), n(9.0)), "false");
        assert_eq!(lt(n(f64::NAN), n(1.0)), "false");
        let ge = to_string(&binary(BinOp::Ge, &n(f64::NAN), &n(f64::NAN)).unwrap());
        assert_eq!(ge, "false");
    }

    #[test]
    fn remainder_keeps_dividend_sign() {
        assert_eq!(to_number(&binary(BinOp::Rem, &n(-7.0), &n(3.0)).unwrap()), -1.0);
    }

    #[test]
    fn relative_indices() {
        assert_eq!(relative_index(Some(&n(-2.0)), 5, 0), 3);
        assert_eq!(relative_index(Some(&n(9.0)), 5, 0), 5);
        assert_eq!(relative_index(None, 5, 5), 5);
    }
}
