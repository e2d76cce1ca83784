"""Brute-force sentence BLEU used to freeze tests/fixtures/bleu_pairs.json.

Precisions are exact fractions; only the final root and brevity penalty go
through 50-digit mpmath. n-grams are counted by scanning every window.
"""
import json
import pathlib
from fractions import Fraction

import mpmath

mpmath.mp.dps = 50

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "bleu_pairs.json"


def windows(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def clipped_matches(cand, ref, n):
    cw, rw = windows(cand, n), windows(ref, n)
    seen, total = [], 0
    for g in cw:
        if g in seen:
            continue
        seen.append(g)
        total += min(cw.count(g), rw.count(g))
    return total


def precision(cand, ref, n):
    denom = max(len(cand) - n + 1, 0)
    num = clipped_matches(cand, ref, n)
    if num == 0:
        if n == 1:
            return Fraction(0)
        return Fraction(1, denom + 1)
    return Fraction(num, denom)


def bleu(cand, ref, max_n=4):
    if not ref:
        raise ValueError("empty reference")
    if not cand:
        return mpmath.mpf(0)
    ps = [precision(cand, ref, n) for n in range(1, max_n + 1)]
    if ps[0] == 0:
        return mpmath.mpf(0)
    prod = Fraction(1)
    for p in ps:
        prod *= p
    geo = mpmath.root(mpmath.mpf(prod.numerator) / prod.denominator, max_n)
    c, r = len(cand), len(ref)
    bp = mpmath.mpf(1) if c >= r else mpmath.exp(1 - mpmath.mpf(r) / c)
    return bp * geo, ps


def t(s):
    return s.split()


PAIRS = [
    ("identity_long", t("hook readfile api to return fake credentials to counter t1555.003"),
     t("hook readfile api to return fake credentials to counter t1555.003")),
    ("identity_four", t("create honeyfile in documents"), t("create honeyfile in documents")),
    ("disjoint", t("alpha beta gamma delta"), t("one two three four five")),
    ("disjoint_single", t("x"), t("y z")),
    ("no_fourgram_full_unigram", t("b a d c"), t("a b c d")),
    ("shuffled_pairs", t("c d a b"), t("a b c d")),
    ("short_candidate", t("hook readfile"), t("hook readfile api to return fake credentials")),
    ("single_token_match", t("honeyfile"), t("create honeyfile in documents")),
    ("longer_candidate", t("plant credential honeytoken at login data to counter t1555.003 now please"),
     t("plant credential honeytoken at login data to counter t1555.003")),
    ("clipping", t("the the the the the the"), t("the cat sat on the mat")),
    ("partial_overlap",
     t("run decoy smb service on port 445 to counter t1021.002"),
     t("run decoy smb service on port 445 to counter t1021.002 lateral movement")),
    ("template_vs_reference",
     t("create honeyfile passwords.txt in ~/documents to counter t1552.001"),
     t("create honeyfile passwords.txt in ~/documents to counter t1552.001 credential harvesting")),
    ("api_mismatch",
     t("hook readfileex api to intercept calls to counter t1555.003"),
     t("hook readfile api to return fake credentials to counter t1555.003")),
    ("repeated_bigram", t("a b a b a b"), t("a b c a b c")),
    ("three_tokens", t("a b c"), t("a b c d e")),
    ("one_token_exact", t("a"), t("a")),
    ("reversed", t("t1486 counter to documents in honeyfile create"),
     t("create honeyfile in documents to counter t1486")),
    ("brevity_heavy", t("counter"), t("plant aws access key honeytoken at ~/.aws/credentials to counter t1552.001")),
    ("mixed_punct", t("hook getasynckeystate api , supply fake key states ."),
     t("hook getasynckeystate api to supply fake key states .")),
    ("near_match",
     t("plant session cookie honeytoken at cookies to counter t1539"),
     t("plant session cookie honeytoken at ~/cookies to counter t1539")),
]


def main():
    out = []
    for name, cand, ref in PAIRS:
        result = bleu(cand, ref)
        score = result if not isinstance(result, tuple) else result[0]
        ps = [] if not isinstance(result, tuple) else [str(p) for p in result[1]]
        out.append({"name": name, "candidate": cand, "reference": ref,
                    "precisions": ps, "bleu": float(score), "bleu_50": mpmath.nstr(score, 40)})
    assert len(out) == 20
    with open(OUT, "w", encoding="utf-8") as f:
        json.dump(out, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
