//! Seeded corpus of small methods drawn from parameterized templates.
//! Each template family fixes an algorithm; identifiers, constants, loop
//! style, declaration keywords, guards, comments and leftover debug code
//! vary per draw.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::syntax::{parse, print, PrintStyle};

const ARR: &[&str] = &["arr", "items", "values", "list", "nums", "data", "xs", "elems", "numbers", "input"];
const IDX: &[&str] = &["i", "j", "k", "idx", "pos", "index"];
const ACC: &[&str] = &["sum", "total", "acc", "result", "res", "out", "agg"];
const STR: &[&str] = &["s", "str", "text", "word", "line", "phrase"];
const NUM: &[&str] = &["n", "num", "count", "limit", "size", "x"];
const TMP: &[&str] = &["tmp", "temp", "cur", "current", "value", "item", "el", "v"];
const COMMENTS: &[&str] = &[
    "// iterate over the input",
    "// accumulate the result",
    "/* simple helper */",
    "// TODO: handle edge cases",
    "// early exit",
    "/* keep this in sync with the caller */",
    "// copy first so the input is untouched",
    "// main loop",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticMethod {
    pub id: String,
    pub family: String,
    pub source: String,
}

struct G {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl G {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    fn pick<'s>(&mut self, xs: &[&'s str]) -> &'s str {
        xs.choose(&mut self.rng).unwrap()
    }

    /// A name from `pool` not yet used in this method; suffixed on reuse.
    fn name(&mut self, pool: &[&str]) -> String {
        for _ in 0..8 {
            let n = self.pick(pool).to_string();
            if self.used.insert(n.clone()) {
                return n;
            }
        }
        let base = self.pick(pool);
        (2..)
            .map(|i| format!("{base}{i}"))
            .find(|n| self.used.insert(n.clone()))
            .unwrap()
    }

    fn fname(&mut self, pool: &[&str]) -> String {
        let n = self.pick(pool).to_string();
        self.used.insert(n.clone());
        n
    }

    fn mutable(&mut self) -> &'static str {
        if self.chance(0.7) {
            "let"
        } else {
            "var"
        }
    }

    fn fixed(&mut self) -> &'static str {
        match self.int(0, 5) {
            0..=2 => "const",
            3 | 4 => "let",
            _ => "var",
        }
    }

    fn comment(&mut self, p: f64) -> String {
        if self.chance(p) {
            format!("{}\n", self.pick(COMMENTS))
        } else {
            String::new()
        }
    }

    /// Leftover debugging or unused code that optimizers would remove.
    fn cruft(&mut self) -> String {
        if !self.chance(0.25) {
            return String::new();
        }
        match self.int(0, 3) {
            0 => "if (false) { console.log(\"debug\"); }\n".into(),
            1 => {
                let n = self.name(&["unused", "debugFlag", "scale", "factor"]);
                format!("var {n} = {} * {};\n", self.int(1, 9), self.int(1, 9))
            }
            2 => {
                let n = self.name(&["DEBUG", "verbose", "trace"]);
                format!("const {n} = false;\nif ({n}) {{ console.log(\"trace\"); }}\n")
            }
            _ => "if (1 > 2) { return null; }\n".into(),
        }
    }

    fn block(&mut self, body: &str) -> String {
        let single = body.trim_end().lines().count() == 1;
        if single && self.chance(0.35) {
            format!("\n  {}", body.trim_end())
        } else {
            format!(" {{\n{body}}}")
        }
    }

    /// A counting loop from `start` while `cond(i)`, in for or while form.
    fn count_loop(&mut self, i: &str, start: &str, cond: &str, body: &str) -> String {
        let step = if self.chance(0.7) { format!("{i}++") } else { format!("{i} += 1") };
        if self.chance(0.7) {
            let kw = self.mutable();
            format!("for ({kw} {i} = {start}; {cond}; {step}){}\n", self.block(body))
        } else {
            let kw = self.mutable();
            format!("{kw} {i} = {start};\nwhile ({cond}) {{\n{body}{step};\n}}\n")
        }
    }

    fn down_loop(&mut self, i: &str, start: &str, body: &str) -> String {
        let step = if self.chance(0.7) { format!("{i}--") } else { format!("{i} -= 1") };
        if self.chance(0.7) {
            let kw = self.mutable();
            format!("for ({kw} {i} = {start}; {i} >= 0; {step}){}\n", self.block(body))
        } else {
            let kw = self.mutable();
            format!("{kw} {i} = {start};\nwhile ({i} >= 0) {{\n{body}{step};\n}}\n")
        }
    }

    fn iff(&mut self, cond: &str, body: &str) -> String {
        format!("if ({cond}){}\n", self.block(body))
    }

    fn func(&mut self, name: &str, params: &[&str], body: String) -> String {
        let lead = self.comment(0.3);
        format!("{lead}function {name}({}) {{\n{}{body}}}\n", params.join(", "), self.cruft())
    }

    fn empty_guard(&mut self, arr: &str, value: &str) -> String {
        if !self.chance(0.4) {
            return String::new();
        }
        match self.int(0, 2) {
            0 => self.iff(&format!("{arr}.length === 0"), &format!("return {value};\n")),
            1 => self.iff(&format!("!{arr}"), &format!("return {value};\n")),
            _ => self.iff(&format!("{arr}.length < 1"), &format!("return {value};\n")),
        }
    }
}

type Template = fn(&mut G) -> String;

fn reduce_template(g: &mut G, names: &[&str], init: &str, op: &str) -> String {
    let f = g.fname(names);
    let arr = g.name(ARR);
    let acc = g.name(ACC);
    let i = g.name(IDX);
    let guard = g.empty_guard(&arr, init);
    let kw = g.mutable();
    let update = if g.chance(0.5) {
        format!("{acc} {op}= {arr}[{i}];\n")
    } else {
        format!("{acc} = {acc} {op} {arr}[{i}];\n")
    };
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &update);
    let ret = if g.chance(0.3) {
        format!("return {acc} * {};\n", g.int(2, 5))
    } else {
        format!("return {acc};\n")
    };
    let c = g.comment(0.3);
    g.func(&f, &[&arr], format!("{guard}{kw} {acc} = {init};\n{c}{lp}{ret}"))
}

fn sum_array(g: &mut G) -> String {
    if g.chance(0.25) {
        let f = g.fname(&["sumAll", "total", "addUp"]);
        let arr = g.name(ARR);
        let (a, b) = (g.name(ACC), g.name(TMP));
        return g.func(&f, &[&arr], format!("return {arr}.reduce(({a}, {b}) => {a} + {b}, 0);\n"));
    }
    reduce_template(g, &["sumArray", "sumAll", "total", "addUp", "arraySum"], "0", "+")
}

fn product_array(g: &mut G) -> String {
    reduce_template(g, &["product", "multiplyAll", "prod", "arrayProduct"], "1", "*")
}

fn extreme(g: &mut G, names: &[&str], cmp: &str, math: &str) -> String {
    let f = g.fname(names);
    let arr = g.name(ARR);
    let best = g.name(&["best", "m", "champion", "top", "extreme"]);
    let i = g.name(IDX);
    if g.chance(0.2) {
        let (a, b) = (g.name(&["a", "p", "acc"]), g.name(&["b", "q", "next"]));
        let init = if math == "max" { "-Infinity" } else { "Infinity" };
        return g.func(&f, &[&arr], format!("return {arr}.reduce(({a}, {b}) => Math.{math}({a}, {b}), {init});\n"));
    }
    let guard = g.empty_guard(&arr, "null");
    let kw = g.mutable();
    let body = g.iff(&format!("{arr}[{i}] {cmp} {best}"), &format!("{best} = {arr}[{i}];\n"));
    let lp = g.count_loop(&i, "1", &format!("{i} < {arr}.length"), &body);
    g.func(&f, &[&arr], format!("{guard}{kw} {best} = {arr}[0];\n{lp}return {best};\n"))
}

fn max_value(g: &mut G) -> String {
    extreme(g, &["maxValue", "largest", "findMax", "maximum"], ">", "max")
}

fn min_value(g: &mut G) -> String {
    extreme(g, &["minValue", "smallest", "findMin", "minimum"], "<", "min")
}

fn count_above(g: &mut G) -> String {
    let f = g.fname(&["countAbove", "countGreater", "numLarge", "tally"]);
    let arr = g.name(ARR);
    let c = g.name(&["count", "cnt", "hits", "matches"]);
    let i = g.name(IDX);
    let (params, threshold) = if g.chance(0.5) {
        let t = g.name(&["threshold", "limit", "bound", "cutoff"]);
        (vec![arr.clone(), t.clone()], t)
    } else {
        (vec![arr.clone()], g.int(0, 10).to_string())
    };
    let kw = g.mutable();
    let inc = if g.chance(0.5) { format!("{c}++;\n") } else { format!("{c} += 1;\n") };
    let body = g.iff(&format!("{arr}[{i}] > {threshold}"), &inc);
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &body);
    let p: Vec<&str> = params.iter().map(String::as_str).collect();
    g.func(&f, &p, format!("{kw} {c} = 0;\n{lp}return {c};\n"))
}

fn filter_even(g: &mut G) -> String {
    let f = g.fname(&["evens", "filterEven", "keepEven", "onlyEven"]);
    let arr = g.name(ARR);
    let m = g.int(2, 4);
    let r = if g.chance(0.5) { "0" } else { "1" };
    if g.chance(0.3) {
        let x = g.name(TMP);
        return g.func(&f, &[&arr], format!("return {arr}.filter({x} => {x} % {m} === {r});\n"));
    }
    let out = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.fixed();
    let body = g.iff(&format!("{arr}[{i}] % {m} === {r}"), &format!("{out}.push({arr}[{i}]);\n"));
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &body);
    g.func(&f, &[&arr], format!("{kw} {out} = [];\n{lp}return {out};\n"))
}

fn scale_map(g: &mut G) -> String {
    let f = g.fname(&["scale", "multiplyEach", "mapTimes", "stretch"]);
    let arr = g.name(ARR);
    let (params, k) = if g.chance(0.5) {
        let k = g.name(&["factor", "k", "mult", "ratio"]);
        (vec![arr.clone(), k.clone()], k)
    } else {
        (vec![arr.clone()], g.int(2, 9).to_string())
    };
    let p: Vec<&str> = params.iter().map(String::as_str).collect();
    if g.chance(0.3) {
        let x = g.name(TMP);
        return g.func(&f, &p, format!("return {arr}.map(({x}) => {x} * {k});\n"));
    }
    let out = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.fixed();
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &format!("{out}.push({arr}[{i}] * {k});\n"));
    g.func(&f, &p, format!("{kw} {out} = [];\n{lp}return {out};\n"))
}

fn reverse_string(g: &mut G) -> String {
    let f = g.fname(&["reverse", "reverseString", "flip", "backwards"]);
    let s = g.name(STR);
    if g.chance(0.3) {
        return g.func(&f, &[&s], format!("return {s}.split(\"\").reverse().join(\"\");\n"));
    }
    let r = g.name(&["r", "rev", "reversed", "out"]);
    let i = g.name(IDX);
    let kw = g.mutable();
    let ch = if g.chance(0.5) { format!("{s}.charAt({i})") } else { format!("{s}[{i}]") };
    let lp = g.down_loop(&i, &format!("{s}.length - 1"), &format!("{r} += {ch};\n"));
    g.func(&f, &[&s], format!("{kw} {r} = \"\";\n{lp}return {r};\n"))
}

fn repeat_join(g: &mut G) -> String {
    let f = g.fname(&["repeatWith", "joinTimes", "replicate", "stutter"]);
    let s = g.name(STR);
    let n = g.name(NUM);
    let out = g.name(ACC);
    let i = g.name(IDX);
    let sep = g.pick(&["\",\"", "\"-\"", "\" \"", "\";\""]);
    let cap = g.int(5, 12);
    let kw = g.mutable();
    let body = format!("{}{out} += {s};\n", g.iff(&format!("{i} > 0"), &format!("{out} += {sep};\n")));
    let lp = g.count_loop(&i, "0", &format!("{i} < Math.min({n}, {cap})"), &body);
    g.func(&f, &[&s, &n], format!("{kw} {out} = \"\";\n{lp}return {out};\n"))
}

fn join_words(g: &mut G) -> String {
    let f = g.fname(&["joinWords", "concatAll", "glue", "implode"]);
    let arr = g.name(&["words", "parts", "pieces", "tokens"]);
    let out = g.name(ACC);
    let i = g.name(IDX);
    let sep = g.pick(&["\" \"", "\", \"", "\"/\"", "\"\""]);
    let kw = g.mutable();
    let body = if g.chance(0.5) {
        format!("{out} = {out} + {arr}[{i}];\n{}", g.iff(&format!("{i} < {arr}.length - 1"), &format!("{out} = {out} + {sep};\n")))
    } else {
        format!("{}{out} += {arr}[{i}];\n", g.iff(&format!("{i} !== 0"), &format!("{out} += {sep};\n")))
    };
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &body);
    g.func(&f, &[&arr], format!("{kw} {out} = \"\";\n{lp}return {out};\n"))
}

fn factorial(g: &mut G) -> String {
    let f = g.fname(&["factorial", "fact", "fac", "permutations"]);
    let n = g.name(NUM);
    if g.chance(0.5) {
        let base = g.iff(&format!("{n} <= 1"), "return 1;\n");
        return g.func(&f, &[&n], format!("{base}return {n} * {f}({n} - 1);\n"));
    }
    let r = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.mutable();
    let upd = if g.chance(0.5) { format!("{r} *= {i};\n") } else { format!("{r} = {r} * {i};\n") };
    let lp = g.count_loop(&i, "2", &format!("{i} <= {n}"), &upd);
    g.func(&f, &[&n], format!("{kw} {r} = 1;\n{lp}return {r};\n"))
}

fn fibonacci(g: &mut G) -> String {
    let f = g.fname(&["fib", "fibonacci", "fibo", "nthFib"]);
    let n = g.name(NUM);
    if g.chance(0.4) {
        let cap = g.int(8, 14);
        let base = g.iff(&format!("{n} < 2"), &format!("return {n};\n"));
        let clamp = g.iff(&format!("{n} > {cap}"), &format!("return {f}({cap});\n"));
        return g.func(&f, &[&n], format!("{base}{clamp}return {f}({n} - 1) + {f}({n} - 2);\n"));
    }
    let a = g.name(&["a", "prev", "first", "lo"]);
    let b = g.name(&["b", "curr", "second", "hi"]);
    let t = g.name(TMP);
    let i = g.name(IDX);
    let (ka, kt) = (g.mutable(), g.fixed());
    let body = format!("{kt} {t} = {a} + {b};\n{a} = {b};\n{b} = {t};\n");
    let lp = g.count_loop(&i, "0", &format!("{i} < {n}"), &body);
    g.func(&f, &[&n], format!("{ka} {a} = 0, {b} = 1;\n{lp}return {a};\n"))
}

fn gcd(g: &mut G) -> String {
    let f = g.fname(&["gcd", "greatestDivisor", "euclid", "commonFactor"]);
    let a = g.name(&["a", "x", "m", "p"]);
    let b = g.name(&["b", "y", "q", "r"]);
    if g.chance(0.4) {
        let t = g.name(TMP);
        let kw = g.fixed();
        let body = format!("{kw} {t} = {b};\n{b} = {a} % {b};\n{a} = {t};\n");
        return g.func(
            &f,
            &[&a, &b],
            format!("{a} = Math.abs({a});\n{b} = Math.abs({b});\nwhile ({b} > 0) {{\n{body}}}\nreturn {a};\n"),
        );
    }
    let base = g.iff(&format!("!({b} > 0)"), &format!("return Math.abs({a});\n"));
    g.func(&f, &[&a, &b], format!("{base}return {f}({b}, Math.abs({a}) % {b});\n"))
}

fn power(g: &mut G) -> String {
    let f = g.fname(&["power", "pow", "raise", "exponent"]);
    let x = g.name(&["base", "x", "b"]);
    let e = g.name(&["exp", "e", "p", "times"]);
    let cap = g.int(6, 12);
    if g.chance(0.4) {
        let base = g.iff(&format!("{e} <= 0"), "return 1;\n");
        let clamp = g.iff(&format!("{e} > {cap}"), &format!("{e} = {cap};\n"));
        return g.func(&f, &[&x, &e], format!("{base}{clamp}return {x} * {f}({x}, {e} - 1);\n"));
    }
    let r = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.mutable();
    let lp = g.count_loop(&i, "0", &format!("{i} < Math.min({e}, {cap})"), &format!("{r} *= {x};\n"));
    g.func(&f, &[&x, &e], format!("{kw} {r} = 1;\n{lp}return {r};\n"))
}

fn binary_search(g: &mut G) -> String {
    let f = g.fname(&["binarySearch", "bsearch", "findIndex", "locate"]);
    let arr = g.name(ARR);
    let t = g.name(&["target", "needle", "key", "goal"]);
    let lo = g.name(&["lo", "low", "left", "start"]);
    let hi = g.name(&["hi", "high", "right", "end"]);
    let mid = g.name(&["mid", "middle", "m", "pivot"]);
    let (k1, k2) = (g.mutable(), g.fixed());
    let found = g.iff(&format!("{arr}[{mid}] === {t}"), &format!("return {mid};\n"));
    let (branch_lo, branch_hi) = (format!("{lo} = {mid} + 1;\n"), format!("{hi} = {mid} - 1;\n"));
    let step = format!("{found}if ({arr}[{mid}] < {t}) {{\n{branch_lo}}} else {{\n{branch_hi}}}\n");
    let body = format!("{k2} {mid} = Math.floor(({lo} + {hi}) / 2);\n{step}");
    g.func(
        &f,
        &[&arr, &t],
        format!("{k1} {lo} = 0, {hi} = {arr}.length - 1;\nwhile ({lo} <= {hi}) {{\n{body}}}\nreturn -1;\n"),
    )
}

fn bubble_sort(g: &mut G) -> String {
    let f = g.fname(&["bubbleSort", "sortAsc", "sortValues", "order"]);
    let arr = g.name(ARR);
    let a = g.name(&["copy", "sorted", "a", "work"]);
    let i = g.name(&["i", "pass", "p"]);
    let j = g.name(&["j", "q", "inner"]);
    let t = g.name(TMP);
    let kw = g.fixed();
    let kt = g.fixed();
    let swap = format!("{kt} {t} = {a}[{j}];\n{a}[{j}] = {a}[{j} + 1];\n{a}[{j} + 1] = {t};\n");
    let inner_body = g.iff(&format!("{a}[{j}] > {a}[{j} + 1]"), &swap);
    let inner = g.count_loop(&j, "0", &format!("{j} < {a}.length - 1 - {i}"), &inner_body);
    let outer = g.count_loop(&i, "0", &format!("{i} < {a}.length"), &inner);
    let c = g.comment(0.3);
    g.func(&f, &[&arr], format!("{c}{kw} {a} = {arr}.slice();\n{outer}return {a};\n"))
}

fn insertion_sort(g: &mut G) -> String {
    let f = g.fname(&["insertionSort", "sortInPlace", "insertSort"]);
    let arr = g.name(ARR);
    let a = g.name(&["copy", "sorted", "a", "work"]);
    let i = g.name(&["i", "p"]);
    let j = g.name(&["j", "q"]);
    let key = g.name(&["key", "cur", "pivotValue"]);
    let (kw, kk, kj) = (g.fixed(), g.fixed(), g.mutable());
    let body = format!(
        "{kk} {key} = {a}[{i}];\n{kj} {j} = {i} - 1;\nwhile ({j} >= 0 && {a}[{j}] > {key}) {{\n{a}[{j} + 1] = {a}[{j}];\n{j}--;\n}}\n{a}[{j} + 1] = {key};\n"
    );
    let lp = g.count_loop(&i, "1", &format!("{i} < {a}.length"), &body);
    g.func(&f, &[&arr], format!("{kw} {a} = {arr}.slice();\n{lp}return {a};\n"))
}

fn palindrome(g: &mut G) -> String {
    let f = g.fname(&["isPalindrome", "palindrome", "mirrored", "symmetric"]);
    let s = g.name(STR);
    if g.chance(0.3) {
        return g.func(&f, &[&s], format!("return {s} === {s}.split(\"\").reverse().join(\"\");\n"));
    }
    let l = g.name(&["l", "left", "lo", "a"]);
    let r = g.name(&["r", "right", "hi", "b"]);
    let kw = g.mutable();
    let mismatch = g.iff(&format!("{s}.charAt({l}) !== {s}.charAt({r})"), "return false;\n");
    g.func(
        &f,
        &[&s],
        format!("{kw} {l} = 0, {r} = {s}.length - 1;\nwhile ({l} < {r}) {{\n{mismatch}{l}++;\n{r}--;\n}}\nreturn true;\n"),
    )
}

fn count_char(g: &mut G) -> String {
    let f = g.fname(&["countChar", "occurrences", "charCount", "howMany"]);
    let s = g.name(STR);
    let (params, ch) = if g.chance(0.5) {
        let c = g.name(&["ch", "c", "letter", "needle"]);
        (vec![s.clone(), c.clone()], c)
    } else {
        (vec![s.clone()], format!("\"{}\"", g.pick(&["a", "e", " ", "x", ","])))
    };
    let n = g.name(&["n", "count", "cnt", "seen"]);
    let i = g.name(IDX);
    let kw = g.mutable();
    let body = g.iff(&format!("{s}.charAt({i}) === {ch}"), &format!("{n}++;\n"));
    let lp = g.count_loop(&i, "0", &format!("{i} < {s}.length"), &body);
    let p: Vec<&str> = params.iter().map(String::as_str).collect();
    g.func(&f, &p, format!("{kw} {n} = 0;\n{lp}return {n};\n"))
}

fn range_sum(g: &mut G) -> String {
    let f = g.fname(&["rangeSum", "sumBetween", "seriesTotal", "addRange"]);
    let a = g.name(&["start", "from", "a", "lo"]);
    let b = g.name(&["stop", "to", "b", "hi"]);
    let acc = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.mutable();
    let stride = g.int(1, 3);
    let step = if stride == 1 { format!("{i}++") } else { format!("{i} += {stride}") };
    let k2 = g.mutable();
    let lp = format!("for ({k2} {i} = {a}; {i} <= {b}; {step}) {{\n{acc} += {i};\n}}\n");
    let guard = if g.chance(0.5) {
        g.iff(&format!("typeof {a} !== \"number\" || {b} - {a} > 100"), "return -1;\n")
    } else {
        g.iff(&format!("typeof {a} !== \"number\" || !({b} - {a} <= 100)"), "return -1;\n")
    };
    g.func(&f, &[&a, &b], format!("{guard}{kw} {acc} = 0;\n{lp}return {acc};\n"))
}

fn average(g: &mut G) -> String {
    let f = g.fname(&["average", "mean", "avg", "meanValue"]);
    let arr = g.name(ARR);
    let s = g.name(ACC);
    let i = g.name(IDX);
    let guard = g.iff(&format!("{arr}.length === 0"), "return 0;\n");
    let kw = g.mutable();
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &format!("{s} += {arr}[{i}];\n"));
    g.func(&f, &[&arr], format!("{guard}{kw} {s} = 0;\n{lp}return {s} / {arr}.length;\n"))
}

fn clamp(g: &mut G) -> String {
    let f = g.fname(&["clamp", "bound", "limitRange", "restrict"]);
    let x = g.name(&["x", "value", "v", "n"]);
    let lo = g.name(&["lo", "min", "low", "floor"]);
    let hi = g.name(&["hi", "max", "high", "ceiling"]);
    let body = match g.int(0, 2) {
        0 => format!("return Math.min(Math.max({x}, {lo}), {hi});\n"),
        1 => format!(
            "{}{}return {x};\n",
            g.iff(&format!("{x} < {lo}"), &format!("return {lo};\n")),
            g.iff(&format!("{x} > {hi}"), &format!("return {hi};\n"))
        ),
        _ => format!("return Math.max({lo}, Math.min({x}, {hi}));\n"),
    };
    g.func(&f, &[&x, &lo, &hi], body)
}

fn fizzbuzz(g: &mut G) -> String {
    let f = g.fname(&["fizzBuzz", "buzzify", "labels", "game"]);
    let n = g.name(NUM);
    let out = g.name(ACC);
    let i = g.name(IDX);
    let (a, b) = (g.int(2, 4), g.int(5, 7));
    let cap = g.int(15, 30);
    let w = [g.pick(&["\"Fizz\"", "\"Foo\"", "\"Ping\""]), g.pick(&["\"Buzz\"", "\"Bar\"", "\"Pong\""])];
    let kw = g.fixed();
    let body = format!(
        "if ({i} % {} === 0) {{\n{out}.push({} + {});\n}} else if ({i} % {a} === 0) {{\n{out}.push({});\n}} else if ({i} % {b} === 0) {{\n{out}.push({});\n}} else {{\n{out}.push(\"\" + {i});\n}}\n",
        a * b, w[0], w[1], w[0], w[1]
    );
    let lp = g.count_loop(&i, "1", &format!("{i} <= Math.min({n}, {cap})"), &body);
    g.func(&f, &[&n], format!("{kw} {out} = [];\n{lp}return {out};\n"))
}

fn digit_sum(g: &mut G) -> String {
    let f = g.fname(&["digitSum", "sumDigits", "crossSum", "digitTotal"]);
    let n = g.name(NUM);
    let s = g.name(ACC);
    let kw = g.mutable();
    let base = g.pick(&["10", "10", "2", "8"]);
    g.func(
        &f,
        &[&n],
        format!(
            "{n} = Math.abs(Math.floor({n}));\n{kw} {s} = 0;\nwhile ({n} > 0) {{\n{s} += {n} % {base};\n{n} = Math.floor({n} / {base});\n}}\nreturn {s};\n"
        ),
    )
}

fn prefix_sums(g: &mut G) -> String {
    let f = g.fname(&["prefixSums", "runningTotal", "cumulative", "scan"]);
    let arr = g.name(ARR);
    let out = g.name(&["out", "sums", "prefix", "acc"]);
    let run = g.name(&["run", "running", "soFar", "partial"]);
    let i = g.name(IDX);
    let (k1, k2) = (g.fixed(), g.mutable());
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &format!("{run} += {arr}[{i}];\n{out}.push({run});\n"));
    g.func(&f, &[&arr], format!("{k1} {out} = [];\n{k2} {run} = 0;\n{lp}return {out};\n"))
}

fn unique(g: &mut G) -> String {
    let f = g.fname(&["unique", "dedupe", "distinct", "uniq"]);
    let arr = g.name(ARR);
    let out = g.name(&["seen", "out", "result", "kept"]);
    let i = g.name(IDX);
    let kw = g.fixed();
    let test = if g.chance(0.5) {
        format!("{out}.indexOf({arr}[{i}]) === -1")
    } else {
        format!("!{out}.includes({arr}[{i}])")
    };
    let body = g.iff(&test, &format!("{out}.push({arr}[{i}]);\n"));
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &body);
    g.func(&f, &[&arr], format!("{kw} {out} = [];\n{lp}return {out};\n"))
}

fn flatten(g: &mut G) -> String {
    let f = g.fname(&["flatten", "flat", "concatAll", "merge"]);
    let arr = g.name(&["nested", "groups", "lists", "chunks"]);
    let out = g.name(ACC);
    let i = g.name(IDX);
    let kw = g.mutable();
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &format!("{out} = {out}.concat({arr}[{i}]);\n"));
    g.func(&f, &[&arr], format!("{kw} {out} = [];\n{lp}return {out};\n"))
}

fn capitalize(g: &mut G) -> String {
    let f = g.fname(&["capitalize", "titleCase", "upperFirst", "headline"]);
    let s = g.name(STR);
    let w = g.name(&["w", "word", "part", "token"]);
    let ws = g.name(&["words", "parts", "tokens"]);
    let kw = g.fixed();
    g.func(
        &f,
        &[&s],
        format!(
            "{kw} {ws} = {s}.split(\" \");\nreturn {ws}.map({w} => {w}.charAt(0).toUpperCase() + {w}.slice(1)).join(\" \");\n"
        ),
    )
}

fn count_vowels(g: &mut G) -> String {
    let f = g.fname(&["countVowels", "vowels", "numVowels"]);
    let s = g.name(STR);
    let n = g.name(&["n", "count", "total"]);
    let i = g.name(IDX);
    let c = g.name(&["c", "ch", "letter"]);
    let set = g.pick(&["\"aeiou\"", "\"aeiouAEIOU\"", "\"aeiouy\""]);
    let (kw, kc) = (g.mutable(), g.fixed());
    let body = format!("{kc} {c} = {s}.charAt({i});\n{}", g.iff(&format!("{set}.indexOf({c}) >= 0"), &format!("{n}++;\n")));
    let lp = g.count_loop(&i, "0", &format!("{i} < {s}.length"), &body);
    g.func(&f, &[&s], format!("{kw} {n} = 0;\n{lp}return {n};\n"))
}

fn zip_sum(g: &mut G) -> String {
    let f = g.fname(&["zipSum", "pairwiseAdd", "addVectors", "combine"]);
    let a = g.name(&["a", "left", "first", "xs"]);
    let b = g.name(&["b", "right", "second", "ys"]);
    let out = g.name(ACC);
    let i = g.name(IDX);
    let n = g.name(&["n", "len", "size"]);
    let (kw, kn) = (g.fixed(), g.fixed());
    let op = g.pick(&["+", "*", "-"]);
    let lp = g.count_loop(&i, "0", &format!("{i} < {n}"), &format!("{out}.push({a}[{i}] {op} {b}[{i}]);\n"));
    g.func(&f, &[&a, &b], format!("{kw} {out} = [];\n{kn} {n} = Math.min({a}.length, {b}.length);\n{lp}return {out};\n"))
}

fn char_frequency(g: &mut G) -> String {
    let f = g.fname(&["charFrequency", "histogram", "letterCounts", "freq"]);
    let s = g.name(STR);
    let m = g.name(&["counts", "freq", "table", "seen"]);
    let i = g.name(IDX);
    let c = g.name(&["c", "ch", "key"]);
    let (kw, kc) = (g.fixed(), g.fixed());
    let upd = if g.chance(0.5) {
        format!("{m}[{c}] = ({m}[{c}] || 0) + 1;\n")
    } else {
        format!("if ({m}[{c}] === undefined) {{\n{m}[{c}] = 0;\n}}\n{m}[{c}]++;\n")
    };
    let lp = g.count_loop(&i, "0", &format!("{i} < {s}.length"), &format!("{kc} {c} = {s}.charAt({i});\n{upd}"));
    g.func(&f, &[&s], format!("{kw} {m} = {{}};\n{lp}return {m};\n"))
}

fn sum_squares_helper(g: &mut G) -> String {
    let f = g.fname(&["sumSquares", "energy", "squaredNorm", "sumOfSquares"]);
    let h = g.fname(&["square", "sq", "squared", "pow2"]);
    let arr = g.name(ARR);
    let acc = g.name(ACC);
    let i = g.name(IDX);
    let x = g.name(TMP);
    let kw = g.mutable();
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &format!("{acc} += {h}({arr}[{i}]);\n"));
    let main = g.func(&f, &[&arr], format!("{kw} {acc} = 0;\n{lp}return {acc};\n"));
    format!("{main}function {h}({x}) {{\nreturn {x} * {x};\n}}\n")
}

fn tree_depth(g: &mut G) -> String {
    let f = g.fname(&["depth", "maxDepth", "nesting", "levels"]);
    let node = g.name(&["node", "tree", "value", "root"]);
    let best = g.name(&["best", "deepest", "m"]);
    let i = g.name(IDX);
    let ch = g.name(&["d", "sub", "childDepth"]);
    let (kw, kc) = (g.mutable(), g.fixed());
    let guard = g.iff(&format!("typeof {node} !== \"object\" || {node} === null"), "return 0;\n");
    let body = format!("{kc} {ch} = {f}({node}[{i}]);\n{}", g.iff(&format!("{ch} > {best}"), &format!("{best} = {ch};\n")));
    let lp = g.count_loop(&i, "0", &format!("{i} < {node}.length"), &body);
    g.func(&f, &[&node], format!("{guard}{kw} {best} = 0;\n{lp}return {best} + 1;\n"))
}

fn collatz(g: &mut G) -> String {
    let f = g.fname(&["collatzSteps", "hailstone", "stepsToOne"]);
    let n = g.name(NUM);
    let c = g.name(&["steps", "count", "k"]);
    let kw = g.mutable();
    let cap = g.int(50, 200);
    let step = if g.chance(0.5) {
        format!("if ({n} % 2 === 0) {{\n{n} = {n} / 2;\n}} else {{\n{n} = 3 * {n} + 1;\n}}\n")
    } else {
        format!("if ({n} % 2) {{\n{n} = 3 * {n} + 1;\n}} else {{\n{n} /= 2;\n}}\n")
    };
    g.func(
        &f,
        &[&n],
        format!("{n} = Math.floor(Math.abs({n}));\n{kw} {c} = 0;\nwhile ({n} > 1 && {c} < {cap}) {{\n{step}{c}++;\n}}\nreturn {c};\n"),
    )
}

fn is_prime(g: &mut G) -> String {
    let f = g.fname(&["isPrime", "prime", "primality", "checkPrime"]);
    let n = g.name(NUM);
    let d = g.name(&["d", "i", "div", "k"]);
    let small = g.iff(&format!("{n} < 2"), "return false;\n");
    let body = g.iff(&format!("{n} % {d} === 0"), "return false;\n");
    let lp = g.count_loop(&d, "2", &format!("{d} * {d} <= {n}"), &body);
    g.func(&f, &[&n], format!("{small}{lp}return true;\n"))
}

fn index_of(g: &mut G) -> String {
    let f = g.fname(&["indexOf", "find", "position", "search"]);
    let arr = g.name(ARR);
    let t = g.name(&["target", "needle", "key", "x"]);
    let i = g.name(IDX);
    let hit = g.iff(&format!("{arr}[{i}] === {t}"), &format!("return {i};\n"));
    let lp = g.count_loop(&i, "0", &format!("{i} < {arr}.length"), &hit);
    g.func(&f, &[&arr, &t], format!("{lp}return -1;\n"))
}

const FAMILIES: &[(&str, Template)] = &[
    ("sum_array", sum_array),
    ("product_array", product_array),
    ("max_value", max_value),
    ("min_value", min_value),
    ("count_above", count_above),
    ("filter_even", filter_even),
    ("scale_map", scale_map),
    ("reverse_string", reverse_string),
    ("repeat_join", repeat_join),
    ("join_words", join_words),
    ("factorial", factorial),
    ("fibonacci", fibonacci),
    ("gcd", gcd),
    ("power", power),
    ("binary_search", binary_search),
    ("bubble_sort", bubble_sort),
    ("insertion_sort", insertion_sort),
    ("palindrome", palindrome),
    ("count_char", count_char),
    ("range_sum", range_sum),
    ("average", average),
    ("clamp", clamp),
    ("fizzbuzz", fizzbuzz),
    ("digit_sum", digit_sum),
    ("prefix_sums", prefix_sums),
    ("unique", unique),
    ("flatten", flatten),
    ("capitalize", capitalize),
    ("count_vowels", count_vowels),
    ("zip_sum", zip_sum),
    ("char_frequency", char_frequency),
    ("sum_squares_helper", sum_squares_helper),
    ("tree_depth", tree_depth),
    ("collatz", collatz),
    ("is_prime", is_prime),
    ("index_of", index_of),
];

/// `count` distinct methods, families assigned round-robin from a seeded
/// shuffle so every family appears once `count` reaches the family count.
pub fn generate_synthetic_corpus(count: usize, seed: u64) -> Vec<SyntheticMethod> {
    let mut order: Vec<usize> = (0..FAMILIES.len()).collect();
    order.shuffle(&mut crate::seed::rng(seed::derive_str(seed, "families")));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let (family, template) = FAMILIES[order[index % order.len()]];
        for attempt in 0u64.. {
            let draw = seed::derive_index(seed::derive_index(seed, "method", index as u64), "attempt", attempt);
            let mut g = G { rng: seed::rng(draw), used: HashSet::new() };
            let text = template(&mut g);
            let program = parse(&text).unwrap_or_else(|e| panic!("template {family}: {e}\n{text}"));
            if seen.insert(print(&program, PrintStyle::Compact)) {
                out.push(SyntheticMethod {
                    id: format!("m{index:05}"),
                    family: family.to_string(),
                    source: print(&program, PrintStyle::Beautified),
                });
                break;
            }
        }
    }
    out
}
