use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::scope::{analyze, resolve, BindingInfo};
use crate::syntax::ast::Program;
use crate::syntax::lexer::is_keyword;

/// Vocabulary for random word-sequence names.
pub const WORDS: &[&str] = &[
    "apple", "anchor", "amber", "arrow", "atlas", "badge", "basket", "beacon", "berry", "blade",
    "bloom", "border", "branch", "breeze", "bridge", "bucket", "cable", "candle", "canyon",
    "carbon", "castle", "cedar", "chalk", "cherry", "circle", "cloud", "clover", "comet", "copper",
    "coral", "cotton", "crane", "crystal", "dawn", "delta", "desert", "dune", "eagle", "echo",
    "ember", "falcon", "feather", "fern", "field", "flame", "forest", "fossil", "frost", "garden",
    "glacier", "granite", "harbor", "hazel", "helmet", "hollow", "island", "ivory", "jade",
    "jasper", "jungle", "kettle", "lantern", "lemon", "lily", "linen", "lotus", "maple", "marble",
    "meadow", "meteor", "mirror", "moss", "mountain", "needle", "nectar", "oasis", "ocean", "olive",
    "orbit", "orchid", "paddle", "pebble", "pepper", "pillar", "pine", "planet", "plume", "prism",
    "quartz", "quill", "rain", "raven", "reef", "ribbon", "river", "rocket", "saddle", "sage",
    "salt", "shadow", "shell", "silver", "slate", "spark", "spruce", "stone", "storm", "summit",
    "sunset", "thistle", "thunder", "timber", "topaz", "torch", "tulip", "tundra", "valley",
    "velvet", "violet", "wagon", "walnut", "willow", "window", "winter", "wren", "yarrow", "zephyr",
];

const LETTERS: &[u8] = b"etrnloisaucfdhpmgbvywkxjqz";
const TAIL: &[u8] = b"etrnloisaucfdhpmgbvywkxjqz0123456789";

/// The `i`-th short name: single letters first, then two and three
/// character names.
fn short_name(mut i: usize) -> String {
    if i < LETTERS.len() {
        return (LETTERS[i] as char).to_string();
    }
    i -= LETTERS.len();
    let mut tail = Vec::new();
    let mut width = 1;
    loop {
        let block = LETTERS.len() * TAIL.len().pow(width);
        if i < block {
            break;
        }
        i -= block;
        width += 1;
    }
    for _ in 0..width {
        tail.push(TAIL[i % TAIL.len()] as char);
        i /= TAIL.len();
    }
    let mut s = (LETTERS[i] as char).to_string();
    s.extend(tail.into_iter().rev());
    s
}

/// Rename every binding declared inside a function. `fresh` proposes a
/// name for a binding; proposals that are taken or reserved are retried.
fn rename_locals(program: &mut Program, mut fresh: impl FnMut(&BindingInfo, usize) -> String) {
    let res = analyze(program);
    let mut taken: HashSet<String> = res.reserved_names();
    let names: Vec<Option<String>> = res
        .bindings
        .iter()
        .map(|b| {
            if b.top_level {
                return None;
            }
            let mut attempt = 0;
            loop {
                let candidate = fresh(b, attempt);
                attempt += 1;
                if !is_keyword(&candidate) && taken.insert(candidate.clone()) {
                    return Some(candidate);
                }
            }
        })
        .collect();
    resolve(program, |name, occ| {
        if let Some(new) = occ.binding.and_then(|b| names[b].as_ref()) {
            name.clone_from(new);
        }
    });
}

/// Replace local names by random camelCase word sequences.
pub fn rename_variables<R: Rng + ?Sized>(program: &mut Program, rng: &mut R) {
    rename_locals(program, |_, attempt| {
        let count = rng.gen_range(1..=2 + attempt.min(2));
        let mut name = String::new();
        for i in 0..count {
            let w = WORDS.choose(rng).unwrap();
            if i == 0 {
                name.push_str(w);
            } else {
                name.push_str(&w[..1].to_uppercase());
                name.push_str(&w[1..]);
            }
        }
        name
    });
}

/// Replace local names by the shortest available names, in declaration
/// order.
pub fn mangle_identifiers(program: &mut Program) {
    let mut next = 0;
    rename_locals(program, |_, _| {
        next += 1;
        short_name(next - 1)
    });
}
