//! Reference interpreter for the subset and a bounded equivalence check.

mod eval;
pub mod runtime;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::syntax::ast::{BinOp, Program, StmtKind, UnaryOp};
use eval::Interp;
use runtime::{Abrupt, Rt};

pub const DEFAULT_STEP_LIMIT: u64 = 20_000;

/// An observable value. Equality is SameValue on numbers (NaN equals
/// itself, +0 and -0 differ); all functions compare equal since their
/// identity is not observable in a result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    Str(String),
    Bool(bool),
    Null,
    Undefined,
    Array(Vec<Value>),
    Object(Vec<(String, Value)>),
    Function,
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => {
                a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
            }
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Null, Value::Null)
            | (Value::Undefined, Value::Undefined)
            | (Value::Function, Value::Function) => true,
            (Value::Array(a), Value::Array(b)) => a == b,
            (Value::Object(a), Value::Object(b)) => a == b,
            _ => false,
        }
    }
}

impl Value {
    pub fn is_primitive(&self) -> bool {
        matches!(
            self,
            Value::Number(_) | Value::Str(_) | Value::Bool(_) | Value::Null | Value::Undefined
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Returned(Value),
    Threw(String),
    StepLimitExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub result: Outcome,
    /// One entry per `console.log` call: the array of its arguments.
    pub log: Vec<Value>,
    pub steps: u64,
}

impl EvalOutcome {
    pub fn observably_equal(&self, other: &EvalOutcome) -> bool {
        self.result == other.result && self.log == other.log
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equivalent,
    Diverged { input: Vec<Value>, left: EvalOutcome, right: EvalOutcome },
    Inconclusive,
}

/// Run `program` and call its first top-level function declaration with
/// `args` (missing arguments are `undefined`).
pub fn evaluate(program: &Program, args: &[Value], step_limit: u64) -> EvalOutcome {
    let mut it = Interp::new(step_limit);
    let result = match it.run_program(program, args) {
        Ok(v) => Outcome::Returned(v.snapshot()),
        Err(Abrupt::Throw(kind)) => Outcome::Threw(kind.name().to_string()),
        Err(Abrupt::StepLimit) => Outcome::StepLimitExceeded,
    };
    let steps = it.steps().min(step_limit);
    EvalOutcome { result, log: std::mem::take(&mut it.log), steps }
}

/// Number of parameters of the entry function, if there is one.
pub fn entry_arity(program: &Program) -> Option<usize> {
    program.body.iter().find_map(|s| match &s.kind {
        StmtKind::FunctionDecl(f) => Some(f.params.len()),
        _ => None,
    })
}

/// Compare two programs on every input. When exactly one side runs out of
/// steps, both are rerun with a larger budget before calling it a
/// divergence, since a transform may legitimately add or remove steps.
pub fn check_equivalence(
    p1: &Program,
    p2: &Program,
    inputs: &[Vec<Value>],
    step_limit: u64,
) -> Verdict {
    let mut inconclusive = false;
    for input in inputs {
        let mut a = evaluate(p1, input, step_limit);
        let mut b = evaluate(p2, input, step_limit);
        let limited = |o: &EvalOutcome| o.result == Outcome::StepLimitExceeded;
        if limited(&a) != limited(&b) {
            a = evaluate(p1, input, step_limit * 8);
            b = evaluate(p2, input, step_limit * 8);
        }
        if limited(&a) && limited(&b) {
            inconclusive = true;
            continue;
        }
        if !a.observably_equal(&b) {
            return Verdict::Diverged { input: input.clone(), left: a, right: b };
        }
    }
    if inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Equivalent
    }
}

fn random_value<R: Rng>(rng: &mut R, depth: usize) -> Value {
    let choices = if depth >= 2 { 4 } else { 5 };
    match rng.gen_range(0..choices) {
        0 => Value::Number(rng.gen_range(-10..=20) as f64),
        1 => Value::Number((rng.gen_range(-100..=100) as f64) / 4.0),
        2 => {
            let len = rng.gen_range(0..=5);
            let s: String = (0..len).map(|_| rng.gen_range(b'a'..=b'e') as char).collect();
            Value::Str(s)
        }
        3 => Value::Bool(rng.gen()),
        _ => {
            let len = rng.gen_range(0..=4);
            Value::Array((0..len).map(|_| random_value(rng, depth + 1)).collect())
        }
    }
}

/// Seeded argument tuples: small ints, quarter-step floats, short strings,
/// booleans and small arrays of those, nesting depth at most 2.
pub fn random_inputs(arity: usize, count: usize, seed: u64) -> Vec<Vec<Value>> {
    let mut rng = crate::seed::rng(seed);
    (0..count)
        .map(|_| (0..arity).map(|_| random_value(&mut rng, 1)).collect())
        .collect()
}

/// Fold a binary operator over two primitive values with interpreter
/// semantics. `None` for non-primitive operands or a runtime error.
pub fn fold_binary(op: BinOp, a: &Value, b: &Value) -> Option<Value> {
    if !a.is_primitive() || !b.is_primitive() {
        return None;
    }
    runtime::binary(op, &Rt::from_value(a), &Rt::from_value(b)).ok().map(|v| v.snapshot())
}

pub fn fold_unary(op: UnaryOp, a: &Value) -> Option<Value> {
    if !a.is_primitive() {
        return None;
    }
    Some(runtime::unary(op, &Rt::from_value(a)).snapshot())
}

pub fn truthy(v: &Value) -> bool {
    runtime::truthy(&Rt::from_value(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn run(src: &str, args: &[Value]) -> Outcome {
        evaluate(&parse(src).unwrap(), args, 10_000).result
    }

    fn num(v: f64) -> Value {
        Value::Number(v)
    }

    #[test]
    fn constant_expression_body() {
        assert_eq!(run("function f(){return (2 + 3) * 4;}", &[]), Outcome::Returned(num(20.0)));
        assert_eq!(run("(2 + 3) * 4", &[]), Outcome::Returned(num(20.0)));
    }

    #[test]
    fn identity_and_missing_args() {
        assert_eq!(run("function f(x){return x}", &[num(7.0)]), Outcome::Returned(num(7.0)));
        assert_eq!(run("function f(x, y){return y}", &[num(7.0)]), Outcome::Returned(Value::Undefined));
    }

    #[test]
    fn infinite_loop_hits_limit() {
        assert_eq!(run("function f(){while(true){}}", &[]), Outcome::StepLimitExceeded);
    }

    #[test]
    fn free_identifiers_throw() {
        assert_eq!(run("function f(){return g(1);}", &[]), Outcome::Threw("ReferenceError".into()));
        assert_eq!(run("function f(){return typeof g;}", &[]), Outcome::Returned(Value::Str("undefined".into())));
    }

    #[test]
    fn closures_hoisting_and_scoping() {
        let src = "function f(n){
            var fs = [];
            for (let i = 0; i < n; i++) { fs.push(() => i); }
            var total = 0;
            for (var j = 0; j < fs.length; j++) { total = total + fs[j](); }
            hoisted = 100;
            return total + g();
            function g(){ return hoisted; }
            var hoisted;
        }";
        assert_eq!(run(src, &[num(4.0)]), Outcome::Returned(num(106.0)));
    }

    #[test]
    fn tdz_and_const() {
        assert_eq!(run("function f(){ x; let x = 1; }", &[]), Outcome::Threw("ReferenceError".into()));
        assert_eq!(run("function f(){ const x = 1; x = 2; }", &[]), Outcome::Threw("TypeError".into()));
    }

    #[test]
    fn recursion_and_builtins() {
        let src = "function mergeSort(arr){
            if (arr.length === 1) return arr;
            const mid = Math.floor(arr.length / 2), left = arr.slice(0, mid), right = arr.slice(mid);
            return merge(mergeSort(left), mergeSort(right));
        }
        function merge(a, b){
            var out = [];
            while (a.length > 0 && b.length > 0) { if (a[0] < b[0]) out.push(a.shift()); else out.push(b.shift()); }
            return out.concat(a).concat(b);
        }";
        let input = Value::Array(vec![num(3.0), num(1.0), num(2.0)]);
        assert_eq!(
            run(src, &[input]),
            Outcome::Returned(Value::Array(vec![num(1.0), num(2.0), num(3.0)]))
        );
    }

    #[test]
    fn log_is_observable() {
        let out = evaluate(&parse("function f(a){ console.log(a, 1); return 0; }").unwrap(), &[num(2.0)], 1000);
        assert_eq!(out.log, vec![Value::Array(vec![num(2.0), num(1.0)])]);
    }

    #[test]
    fn runaway_recursion_is_a_range_error() {
        assert_eq!(run("function f(){ return f(); }", &[]), Outcome::Threw("RangeError".into()));
    }

    #[test]
    fn equivalence_verdicts() {
        let p = parse("function f(x){ return x * 2; }").unwrap();
        let q = parse("function f(y){ return y + y; }").unwrap();
        let r = parse("function f(x){ return 1; }").unwrap();
        let inputs = random_inputs(1, 10, 3);
        assert_eq!(check_equivalence(&p, &p, &inputs, 1000), Verdict::Equivalent);
        // x*2 and x+x differ on strings.
        assert!(matches!(check_equivalence(&p, &q, &inputs, 1000), Verdict::Diverged { .. }));
        assert!(matches!(check_equivalence(&p, &r, &inputs, 1000), Verdict::Diverged { .. }));
        let l = parse("function f(){ while(true){} }").unwrap();
        assert_eq!(check_equivalence(&l, &l, &[vec![]], 1000), Verdict::Inconclusive);
    }

    #[test]
    fn same_value_semantics() {
        assert_eq!(num(f64::NAN), num(f64::NAN));
        assert_ne!(num(0.0), num(-0.0));
        assert_eq!(fold_binary(BinOp::Div, &num(1.0), &num(0.0)), Some(num(f64::INFINITY)));
    }

    #[test]
    fn determinism() {
        let p = parse("function f(a){ var s = ''; for (var i = 0; i < 5; i++) s += a; return s; }").unwrap();
        let inputs = random_inputs(1, 5, 11);
        for i in &inputs {
            assert_eq!(evaluate(&p, i, 1000), evaluate(&p, i, 1000));
        }
        assert_eq!(random_inputs(2, 3, 5), random_inputs(2, 3, 5));
    }
}
