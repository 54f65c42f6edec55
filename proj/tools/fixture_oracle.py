#!/usr/bin/env python3
"""Regenerates fixtures/*.json from independent reference computations.

Expected values come from hashlib, scipy, mpmath, scikit-learn or hand
arithmetic, never from the C++ library itself.
"""
import hashlib
import json
import math
import pathlib
import random
import sys

import mpmath
import numpy as np
from scipy import stats
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "fixtures")


def be32(ids):
    return b"".join(int(i).to_bytes(4, "big") for i in ids)


def prf(key, ctx):
    d = hashlib.sha256(int(key).to_bytes(8, "big") + b"\x1f" + ctx).digest()
    return int.from_bytes(d[:8], "big") / 2.0**64


def write(name, op, source, cases, tolerance=0.0):
    doc = {"name": name, "op": op, "source": source, "tolerance": tolerance, "cases": cases}
    (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


def irwin_hall_exact(k, x):
    mpmath.mp.dps = 60
    x = mpmath.mpf(x)
    if x <= 0:
        return 0.0
    if x >= k:
        return 1.0
    s = mpmath.mpf(0)
    for j in range(int(mpmath.floor(x)) + 1):
        s += (-1) ** j * mpmath.binomial(k, j) * (x - j) ** k
    return float(s / mpmath.factorial(k))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240601)

    cases = []
    for key, ctx in [(0, b""), (1, b"\x00\x00\x00\x05"), (42, be32([0, 7, 9, 300])), (2**63 + 11, b"abc")]:
        cases.append({"input": {"key": key, "context_hex": ctx.hex()}, "expected": prf(key, ctx)})
    write("prf_uniform_hashlib", "prf_uniform", "python hashlib SHA-256", cases)

    cases = []
    for shape, x in [(1, 0.5), (1, 3.0), (5, 2.5), (25, 25.0), (100, 90.0), (250, 260.0), (3, 0.0)]:
        cases.append({"input": {"shape": shape, "x": x}, "expected": float(stats.gamma.cdf(x, a=shape))})
    write("gamma_cdf_scipy", "gamma_cdf", "scipy.stats.gamma", cases, 1e-12)

    cases = []
    for k, x in [(1, 0.3), (2, 1.0), (3, 1.2), (10, 4.0), (30, 14.0), (30, 17.5)]:
        cases.append({"input": {"k": k, "x": x}, "expected": irwin_hall_exact(k, x)})
    write("irwin_hall_exact_small", "irwin_hall_cdf", "mpmath alternating sum at 60 digits", cases, 1e-12)
    cases = []
    for k, x in [(31, 15.0), (50, 23.0), (64, 35.0), (120, 58.0)]:
        cases.append({"input": {"k": k, "x": x}, "expected": irwin_hall_exact(k, x)})
    write("irwin_hall_large_k", "irwin_hall_cdf", "mpmath alternating sum at 60 digits", cases, 1e-4)

    cases = [{"input": {"z": z}, "expected": float(stats.norm.cdf(z))} for z in (-8.0, -1.96, 0.0, 0.5, 3.0)]
    write("std_normal_cdf_scipy", "std_normal_cdf", "scipy.stats.norm", cases, 1e-15)

    # Vocabulary with byte fallback: BOS 0, EOS 1, bytes 2..257, pieces from 258.
    pieces = ["the", " the", " cat", "cat", " sat", "s"]
    pid = {p: 258 + i for i, p in enumerate(pieces)}
    cases = [
        {"id": "words", "input": {"pieces": pieces, "text": "the cat sat"}, "expected": [pid["the"], pid[" cat"], pid[" sat"]]},
        {"id": "byte_fallback", "input": {"pieces": pieces, "text": "cats!"},
         "expected": [pid["cat"], pid["s"], 2 + ord("!")]},
        {"id": "double_space", "input": {"pieces": pieces, "text": "the  cat"},
         "expected": [pid["the"], 2 + ord(" "), pid[" cat"]]},
    ]
    write("tokenize_hand", "tokenize", "hand tokenization by longest match", cases)

    # Bigram counts by hand: corpus "a b a" and "a b b" -> tokens a, " b", " a" / a, " b", " b".
    v = 258 + 4
    alpha = 0.5
    lm_pieces = ["a", " a", "b", " b"]
    # After " b": next is " a" once, " b" once, EOS once.
    cases = [{
        "id": "bigram_after_b",
        "input": {"pieces": lm_pieces, "corpus": ["a b a", "a b b"], "order": 2, "alpha": alpha, "context": "a b",
                  "query": [" a", " b", "</s>", "a"]},
        "expected": {" a": (1 + alpha) / (3 + alpha * v), " b": (1 + alpha) / (3 + alpha * v),
                     "</s>": (1 + alpha) / (3 + alpha * v), "a": alpha / (3 + alpha * v)},
    }, {
        "id": "bigram_after_bos",
        "input": {"pieces": lm_pieces, "corpus": ["a b a", "a b b"], "order": 2, "alpha": alpha, "context": "",
                  "query": ["a", " b"]},
        "expected": {"a": (2 + alpha) / (2 + alpha * v), " b": alpha / (2 + alpha * v)},
    }]
    write("train_ngram_lm_counts", "train_ngram_lm", "hand counting with add-alpha smoothing", cases, 1e-15)

    cases = []
    for probs in ([1.0], [0.5, 0.5], [0.25] * 4, [0.7, 0.2, 0.1, 0.0]):
        h = -sum(p * math.log(p) for p in probs if p > 0)
        cases.append({"input": {"probs": probs}, "expected": h})
    write("next_token_entropy_closed_form", "next_token_entropy", "closed-form Shannon entropy", cases, 1e-15)

    cases = []
    for key, n, length in [(7, 4, 12), (99, 2, 30), (123456789, 4, 100)]:
        toks = [rng.randrange(2, 900) for _ in range(length)]
        grams = [toks[i - n:i] for i in range(n, length + 1)]
        s = sum(-math.log1p(-prf(key, be32(g))) for g in grams)
        cases.append({"input": {"key": key, "n": n, "tokens": toks},
                      "expected": {"sum": s, "length_aware": float(stats.gamma.cdf(s, a=len(grams))), "windows": len(grams)}})
    write("aaronson_score_hashlib", "aaronson_score", "python hashlib and scipy gamma", cases, 1e-10)

    cases = []
    for key, gamma, ctx, tok in [(5, 0.25, [0, 0, 17], 40), (5, 0.25, [3, 4, 5], 6), (11, 0.5, [9], 1000), (11, 0.9, [1, 2], 3)]:
        cases.append({"input": {"key": key, "gamma": gamma, "context": ctx, "token": tok},
                      "expected": prf(key, be32(ctx + [tok])) < gamma})
    write("kirchenbauer_is_green_hashlib", "kirchenbauer_is_green", "python hashlib", cases)

    cases = []
    for key, gamma, n, length in [(3, 0.25, 4, 40), (8, 0.5, 2, 60)]:
        toks = [rng.randrange(2, 40) for _ in range(length)]
        seen = set()
        green = 0
        for i in range(n, length + 1):
            g = tuple(toks[i - n:i])
            if g in seen:
                continue
            seen.add(g)
            green += prf(key, be32(g)) < gamma
        t = len(seen)
        z = (green - gamma * t) / math.sqrt(t * gamma * (1 - gamma))
        cases.append({"input": {"key": key, "gamma": gamma, "n": n, "tokens": toks},
                      "expected": {"z": z, "green": green, "unique_ngrams": t}})
    write("kirchenbauer_score_green_audit", "kirchenbauer_score", "python hashlib green-count audit", cases, 1e-12)

    cases = [
        {"id": "identity_when_short", "input": {"pieces": pieces, "text": "the cat sat", "T": 10}, "expected": "the cat sat"},
        {"id": "first_two", "input": {"pieces": pieces, "text": "the cat sat", "T": 2}, "expected": "the cat"},
    ]
    write("truncate_record_hand", "truncate_record", "hand tokenization", cases)

    cases = [
        {"id": "domination", "input": {"points": [[0.1, 0.5], [0.1, 0.7]]}, "expected": [[0, 0], [0.1, 0.7], [1, 1]]},
        {"id": "single", "input": {"points": [[0.3, 0.6]]}, "expected": [[0, 0], [0.3, 0.6], [1, 1]]},
        {"id": "staircase", "input": {"points": [[0.2, 0.4], [0.1, 0.4], [0.5, 0.9], [0.4, 0.95]]},
         "expected": [[0, 0], [0.1, 0.4], [0.4, 0.95], [1, 1]]},
    ]
    write("pareto_front_hand", "pareto_front", "hand dominance check", cases, 1e-15)

    f = 0.01
    cases = [
        {"id": "hand_trapezoid", "input": {"points": [[0.01, 0.5]], "max_fpr": f},
         "expected": 50 * (1 + (0.0025 - f * f / 2) / (f - f * f / 2))},
        {"id": "diagonal", "input": {"points": [[0.5, 0.5]], "max_fpr": f}, "expected": 50.0},
        {"id": "perfect", "input": {"points": [[0.0, 1.0]], "max_fpr": f}, "expected": 100.0},
        {"id": "diagonal_full", "input": {"points": [[0.25, 0.25]], "max_fpr": 1.0}, "expected": 50.0},
    ]
    write("paucc_hand", "paucc", "hand trapezoid and McClish standardization", cases, 1e-9)

    cases = []
    nprng = np.random.default_rng(7)
    for n in (20, 200):
        s = np.round(nprng.normal(size=n), 1)
        y = np.array([1] * (n // 2) + [0] * (n // 2))
        s[: n // 2] += 0.7
        cases.append({"input": {"scores": s.tolist(), "labels": y.tolist()}, "expected": float(roc_auc_score(y, s))})
    write("sweep_single_threshold_auc", "sweep_single_threshold", "scikit-learn roc_auc_score", cases, 1e-12)

    cases = [
        {"input": {"s_w": 0.9, "s_d": 0.0, "t": {"lambda_w": 0.8, "lambda_d": 1.0}}, "expected": True},
        {"input": {"s_w": 0.1, "s_d": 1.0, "t": {"lambda_w": 0.8, "lambda_d": 1.0}}, "expected": True},
        {"input": {"s_w": 0.1, "s_d": 0.5, "t": {"lambda_w": 0.8, "lambda_d": 1.0}}, "expected": False},
    ]
    write("cascade_1s_truth_table", "cascade_1s_predict", "truth table", cases)
    cases = [
        {"input": {"s_w": 0.95, "s_d": -9, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.9, "lambda_d": 0}}, "expected": True},
        {"input": {"s_w": 0.1, "s_d": 9, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.9, "lambda_d": 0}}, "expected": False},
        {"input": {"s_w": 0.5, "s_d": 1, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.9, "lambda_d": 0}}, "expected": True},
        {"input": {"s_w": 0.5, "s_d": -1, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.9, "lambda_d": 0}}, "expected": False},
    ]
    write("cascade_2s_truth_table", "cascade_2s_predict", "truth table", cases)

    feats = [[0.1, 0], [0.5, 0], [0.95, 0], [0.99, 0]]
    cases = [
        {"id": "1s", "input": {"features": feats, "t": {"lambda_w": 0.9}, "kind": "1S"},
         "expected": {"gamma_hit": 0.5, "est_cost_ratio": 0.5}},
        {"id": "2s", "input": {"features": feats, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.98}, "kind": "2S"},
         "expected": {"gamma_hit": 0.5, "est_cost_ratio": 0.5}},
        {"id": "2s_costed", "input": {"features": feats, "t": {"lambda_w_low": 0.2, "lambda_w_high": 0.98}, "kind": "2S",
                                      "cost_w": 1.0, "cost_d": 3.0},
         "expected": {"gamma_hit": 0.5, "est_cost_ratio": (1 + 0.5 * 3) / 4}},
    ]
    write("hit_rate_counts", "hit_rate", "hand counting", cases, 1e-15)

    nprng = np.random.default_rng(11)
    n = 120
    y = np.array([1] * (n // 2) + [0] * (n // 2))
    x = np.column_stack([nprng.normal(size=n) + 1.2 * y, 3.0 * nprng.normal(size=n) + 2.0 * y + 5.0])
    mean, std = x.mean(axis=0), x.std(axis=0)
    z = (x - mean) / std
    clf = LogisticRegression(C=1.0, tol=1e-12, max_iter=100000).fit(z, y)
    query = [[0.0, 5.0], [1.5, 9.0], [-1.0, 2.0]]
    expected = clf.predict_proba((np.array(query) - mean) / std)[:, 1].tolist()
    write("fit_logistic_sklearn", "fit_logistic", "scikit-learn LogisticRegression(C=1) on standardized features",
          [{"input": {"features": x.tolist(), "labels": y.tolist(), "query": query}, "expected": expected}], 1e-6)

    ent = {f"p{i:02d}": h for i, h in enumerate([5.0, 1.0, 3.0, 9.0, 2.0, 7.0, 4.0, 8.0, 6.0, 0.5, 11.0, 10.0])}
    order = sorted(ent, key=lambda k: (ent[k], k))
    sizes = [3, 3, 2, 2, 2]
    expected, pos = {}, 0
    for b, s in enumerate(sizes):
        for k in order[pos:pos + s]:
            expected[k] = b
        pos += s
    write("bucket_by_entropy_hand", "bucket_by_entropy", "hand sort and split",
          [{"input": {"entropies": ent}, "expected": expected}])

    toks = [rng.randrange(2, 500) for _ in range(100)]
    cases = [{"id": f"p{p}", "input": {"tokens": toks, "p": p, "vocab_size": 500, "seed": 9},
              "expected": {"length": 100, "changed": p}} for p in (0, 10, 40, 100)]
    write("random_token_replacement_counts", "random_token_replacement", "count contract", cases)


if __name__ == "__main__":
    main()
