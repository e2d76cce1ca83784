#!/usr/bin/env python3
"""Independent evaluation oracle for the fixture runs.

Reads tests/fixtures/runs and tests/fixtures/corpus.jsonl, recomputes every
report field from scratch (canonical matching, anchors, BLEU in exact
rationals) and writes tests/fixtures/golden/eval_fixture_runs.json.
Run from the repository root.
"""

import json
import math
import re
from collections import Counter
from fractions import Fraction
from pathlib import Path

FIX = Path("tests/fixtures")


def canon(raw):
    s = raw.strip().lower().replace("\\", "/")
    s = re.sub(r"/+", "/", s)
    while s.startswith("./"):
        s = s[2:]
    if re.match(r"^[a-z]:", s):
        s = s[2:]
        if not s.startswith("/"):
            s = "/" + s
    for var in ("%userprofile%", "%homepath%", "${home}", "$home"):
        if s == var or s.startswith(var + "/"):
            s = "~" + s[len(var):]
            break
    m = re.match(r"^/(users|home|documents and settings)/([^/]+)(/.*)?$", s)
    if m:
        s = "~" + (m.group(3) or "")
    while len(s) > 1 and s.endswith("/"):
        s = s[:-1]
    return s


def objective_key(o):
    return (o["ploy_kind"], o["technique_id"].strip().upper(), canon(o["target_resource"]), o["action"])


def ploy_anchor(p):
    a = p["artifact"]
    kind = p["objective"]["ploy_kind"]
    if kind == "honeyfile":
        return canon(a["target_directory"])
    if kind == "honeytoken":
        return canon(a["placement"])
    if kind == "api_hook":
        return canon(a["api_name"])
    if kind == "decoy_service":
        return str(a["port"])
    return canon(p["objective"]["target_resource"])


def entry_anchor(e):
    t = canon(e["objective"]["target_resource"])
    if e["objective"]["ploy_kind"] == "decoy_service" and ":" in t:
        return t.rsplit(":", 1)[1]
    return t


PHRASE = {
    "place_decoy": "place a decoy",
    "intercept_api": "intercept calls",
    "redirect_to_honeypot": "redirect to a honeypot",
    "supply_fake_data": "supply fake data",
}


def render(p):
    o = p["objective"]
    a = p["artifact"]
    tech = o["technique_id"].strip().lower()
    kind = o["ploy_kind"]
    if kind == "honeyfile":
        t = f"create honeyfile {a['filename'].strip()} in {canon(a['target_directory'])} to counter {tech}"
    elif kind == "honeytoken":
        t = f"plant {a['token_type'].strip()} honeytoken at {canon(a['placement'])} to counter {tech}"
    elif kind == "api_hook":
        t = f"hook {canon(a['api_name'])} api to {PHRASE[o['action']]} to counter {tech}"
    elif kind == "decoy_service":
        t = f"run decoy {a['service_name'].strip()} service on port {a['port']} to counter {tech}"
    else:
        t = f"deploy {kind} on {canon(o['target_resource'])} to {PHRASE[o['action']]} to counter {tech}"
    return " ".join(t.lower().split())


PUNCT = set(".,;:!?()[]{}\"'`")


def tokenize(text):
    out = []
    text = text.lower()
    for word in text.split():
        cur = ""
        for i, c in enumerate(word):
            if c in PUNCT:
                inner = (c == "." and 0 < i < len(word) - 1
                         and (word[i - 1].isalnum() or ord(word[i - 1]) >= 128)
                         and (word[i + 1].isalnum() or ord(word[i + 1]) >= 128))
                if inner:
                    cur += c
                    continue
                if cur:
                    out.append(cur)
                cur = ""
                out.append(c)
            else:
                cur += c
        if cur:
            out.append(cur)
    return out


def ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu(cand, ref):
    if not cand:
        return 0.0
    ps = []
    for n in range(1, 5):
        c, r = ngrams(cand, n), ngrams(ref, n)
        hits = sum(min(k, r[g]) for g, k in c.items())
        total = max(len(cand) - n + 1, 0)
        if hits == 0:
            if n == 1:
                return 0.0
            ps.append(Fraction(1, total + 1))
        else:
            ps.append(Fraction(hits, total))
    geo = math.exp(sum(math.log(p) for p in ps) / 4)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * geo


def report(runs, corpus):
    ploys = [p for r in runs for it in r["iterations"] for p in it["ploys"]]
    keys = [objective_key(p["objective"]) for p in ploys]
    used = [False] * len(ploys)
    per, tp, bleus = [], 0, []
    for e in corpus:
        ek = objective_key(e["objective"])
        hits = [i for i, k in enumerate(keys) if k == ek]
        for i in hits:
            used[i] = True
        em = any(ploy_anchor(ploys[i]) == entry_anchor(e) for i in hits)
        score = 0.0
        if hits:
            tp += 1
            score = bleu(tokenize(render(ploys[hits[0]])), tokenize(e["reference_text"]))
            bleus.append(score)
        per.append({"entry_id": e["entry_id"], "matched": bool(hits), "em": em, "bleu": score})
    done = [r for r in runs if r["iterations"]]
    iters = [max(it["iteration_index"] for it in r["iterations"]) for r in done]
    lats = [sum(it["completion"]["latency_ms"] for it in r["iterations"]) for r in done]
    return {
        "model_id": runs[0]["model_id"],
        "recall": tp / len(corpus),
        "exact_match": sum(p["em"] for p in per) / len(corpus),
        "bleu_avg": sum(bleus) / len(bleus) if bleus else 0.0,
        "bleu_defined": bool(bleus),
        "iteration_avg": sum(iters) / len(iters),
        "latency_avg_ms": sum(lats) / len(lats),
        "run_count": len(runs),
        "corpus_size": len(corpus),
        "true_positives": tp,
        "false_negatives": len(corpus) - tp,
        "novel_feasible": used.count(False),
        "engagement_rate": None,
        "accuracy": None,
        "per_entry": per,
    }


def main():
    corpus = [json.loads(l) for l in (FIX / "corpus.jsonl").read_text().splitlines() if l.strip()]
    runs = [json.loads(p.read_text()) for p in (FIX / "runs" / "runs").glob("*/run.json")]
    runs.sort(key=lambda r: (r["created_at"], r["run_id"]))
    groups = {}
    for r in runs:
        groups.setdefault(r["model_id"], []).append(r)
    out = {"reports": [report(g, corpus) for g in groups.values()]}
    path = FIX / "golden" / "eval_fixture_runs.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    for r in out["reports"]:
        print(r["model_id"], r["true_positives"], r["novel_feasible"], r["recall"], r["exact_match"],
              r["bleu_avg"], r["iteration_avg"], r["latency_avg_ms"])


if __name__ == "__main__":
    main()
