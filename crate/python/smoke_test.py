"""Smoke test for the Python bindings. Run after `pip install -e crates/python`."""

import json
import math
import os
import sys
import tempfile

import equivar

SRC = """
function total(xs) {
  let s = 0;
  for (let i = 0; i < xs.length; i++) {
    s += xs[i];
  }
  return s;
}
"""


def main():
    compact = equivar.format_program(SRC, "compact")
    assert "function total" in compact and "\n" not in compact.strip()

    variants = equivar.transform_dropout(SRC, n=20, seed=3)
    assert variants[0] == SRC and len(variants) > 1
    assert variants == equivar.transform_dropout(SRC, n=20, seed=3)
    # Line subsampling is in the default pipeline, so not every variant is
    # equivalent; the reformatted program always is.
    assert equivar.check_equivalence(SRC, compact) == "equivalent"
    assert equivar.check_equivalence("function f(a) { return a + 1; }", "function f(a) { return a + 2; }") == "diverged"
    for v in variants[1:]:
        assert equivar.check_equivalence(SRC, v) in ("equivalent", "diverged", "inconclusive")
        assert 0.0 <= equivar.token_dissimilarity(SRC, v) <= 1.0
    assert equivar.edit_distance_score(SRC, SRC) == 1.0

    assert equivar.auroc([0.9, 0.4, 0.6, 0.1], [True, True, False, False])[0] == 0.75
    ap = equivar.average_precision([4, 3, 2, 1], [True, False, True, False])
    assert abs(ap - (0.5 + 0.5 * 2 / 3)) < 1e-12
    assert abs(equivar.cosine_similarity([1, 0], [1, 1]) - 1 / math.sqrt(2)) < 1e-12

    loss, gq, gk = equivar.info_nce([1, 0, 0], [1, 0, 0], [[0, 1, 0], [0, 0, 1]], 1.0)
    assert abs(loss + math.log(math.e / (math.e + 2))) < 1e-12 and len(gq) == len(gk) == 3

    corpus = equivar.generate_synthetic_corpus(12, 1)
    assert len({src for _, _, src in corpus}) == 12
    tok = equivar.Tokenizer.train([src for _, _, src in corpus], size=300)
    ids = tok.encode(corpus[0][2])
    assert " ".join(tok.decode(ids).split()) == " ".join(corpus[0][2].split())
    assert tok.encode_sampled(corpus[0][2], 0.1, 7) == tok.encode_sampled(corpus[0][2], 0.1, 7)

    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "c.jsonl")
        assert equivar.run_cli(["gen", "--count", "5", "--seed", "2", "--out", out]) == 0
        with open(out) as f:
            rows = [json.loads(line) for line in f]
        assert len(rows) == 5
        tok.save(os.path.join(d, "v.txt"))
        assert len(equivar.Tokenizer.load(os.path.join(d, "v.txt"))) == len(tok)
        assert equivar.run_cli(["gen", "--count", "0", "--out", out]) == 2

    print(f"python smoke test ok ({len(variants)} variants, {len(tok)} pieces)")


if __name__ == "__main__":
    sys.exit(main())
