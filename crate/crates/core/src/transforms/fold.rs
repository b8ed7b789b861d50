use crate::interp::{fold_binary, fold_unary, truthy, Value};
use crate::syntax::ast::*;

/// Longest string literal folding may produce.
const MAX_FOLDED_STRING: usize = 256;

/// The value of a literal expression, counting `-<number>` as a literal.
pub(crate) fn const_value(e: &Expr) -> Option<Value> {
    Some(match e {
        Expr::Number(n) => Value::Number(*n),
        Expr::Str(s) => Value::Str(s.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Null => Value::Null,
        Expr::Undefined => Value::Undefined,
        Expr::Unary { op: UnaryOp::Neg, arg } => match **arg {
            Expr::Number(n) => Value::Number(-n),
            _ => return None,
        },
        _ => return None,
    })
}

/// Literal syntax for a value. NaN and infinities have none.
fn to_literal(v: Value) -> Option<Expr> {
    Some(match v {
        Value::Number(n) if !n.is_finite() => return None,
        Value::Number(n) if n.is_sign_negative() => Expr::unary(UnaryOp::Neg, Expr::Number(-n)),
        Value::Number(n) => Expr::Number(n),
        Value::Str(s) if s.len() > MAX_FOLDED_STRING => return None,
        Value::Str(s) => Expr::Str(s),
        Value::Bool(b) => Expr::Bool(b),
        Value::Null => Expr::Null,
        Value::Undefined => Expr::Undefined,
        _ => return None,
    })
}

struct Folder;

impl VisitMut for Folder {
    fn visit_expr(&mut self, e: &mut Expr) {
        walk_expr(self, e);
        let folded = match e {
            Expr::Binary { op, left, right } if op.is_logical() => {
                let Some(l) = const_value(left) else { return };
                let keep_left = truthy(&l) == (*op == BinOp::Or);
                Some(if keep_left { std::mem::replace(&mut **left, Expr::Null) } else {
                    std::mem::replace(&mut **right, Expr::Null)
                })
            }
            Expr::Binary { op, left, right } => match (const_value(left), const_value(right)) {
                (Some(l), Some(r)) => fold_binary(*op, &l, &r).and_then(to_literal),
                _ => None,
            },
            Expr::Unary { op: UnaryOp::Neg, arg } if matches!(**arg, Expr::Number(_)) => None,
            Expr::Unary { op, arg } => {
                const_value(arg).and_then(|v| fold_unary(*op, &v)).and_then(to_literal)
            }
            _ => None,
        };
        if let Some(f) = folded {
            *e = f;
        }
    }
}

/// Replace constant subexpressions by their values, bottom-up, using the
/// interpreter's arithmetic. Results without a literal form (NaN,
/// infinities) stay unfolded.
pub fn fold_constants(program: &mut Program) {
    walk_program(&mut Folder, program);
}

struct BoolSwap;

impl VisitMut for BoolSwap {
    fn visit_expr(&mut self, e: &mut Expr) {
        let swapped = match e {
            Expr::Bool(b) => Some(Expr::unary(UnaryOp::Not, Expr::Number(if *b { 0.0 } else { 1.0 }))),
            Expr::Unary { op: UnaryOp::Not, arg } => match **arg {
                Expr::Number(n) if n == 0.0 => Some(Expr::Bool(true)),
                Expr::Number(n) if n == 1.0 => Some(Expr::Bool(false)),
                _ => None,
            },
            _ => None,
        };
        match swapped {
            Some(s) => *e = s,
            None => walk_expr(self, e),
        }
    }
}

/// `true` becomes `!0` and `false` becomes `!1`, and the other way round.
pub fn swap_booleans(program: &mut Program) {
    walk_program(&mut BoolSwap, program);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, print, PrintStyle};

    fn cf(src: &str) -> String {
        let mut p = parse(src).unwrap();
        fold_constants(&mut p);
        print(&p, PrintStyle::Compact)
    }

    #[test]
    fn folds_arithmetic() {
        assert_eq!(cf("(2 + 3) * 4"), "20;");
        assert_eq!(cf("x = 1 - 3;"), "x=-2;");
        assert_eq!(cf("x = \"a\" + 1 + 2;"), "x=\"a12\";");
        assert_eq!(cf("x = 2 * y + (3 * 3);"), "x=2*y+9;");
    }

    #[test]
    fn leaves_non_literal_results() {
        assert_eq!(cf("x = 1 / 0;"), "x=1/0;");
        assert_eq!(cf("x = 0 / 0;"), "x=0/0;");
        assert_eq!(cf("x = -0 * 1;"), "x=-0;");
    }

    #[test]
    fn folds_logical_with_constant_left() {
        assert_eq!(cf("x = true && y;"), "x=y;");
        assert_eq!(cf("x = 0 || y;"), "x=y;");
        assert_eq!(cf("x = \"s\" || y;"), "x=\"s\";");
        assert_eq!(cf("x = y && 0;"), "x=y&&0;");
    }

    #[test]
    fn boolean_swap_is_an_involution() {
        let mut p = parse("x = true; y = !false; z = !0;").unwrap();
        let original = p.clone();
        swap_booleans(&mut p);
        assert_eq!(print(&p, PrintStyle::Compact), "x=!0;y=!!1;z=true;");
        swap_booleans(&mut p);
        assert_eq!(p, original);
    }
}
