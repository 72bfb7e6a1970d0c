"""Independent reference values for the unit tests.

Run from the repository root; prints C++ initializers that are pasted into
the tests. Nothing here imports engine code.
"""
import json
import math

import mpmath
import numpy as np
import pandas as pd
from scipy import stats

mpmath.mp.dps = 50

MISSING = ["", "NA", "NaN", "?"]


def puct_table():
    cases = [
        (0.2, 0.5, 16, 3, 1.0),
        (0.9, 0.37, 0, 0, 5.0),
        (0.3, 0.0, 100, 0, 2.0),
        (0.0, 1.0, 1, 0, 1.0),
        (0.5, 0.25, 4, 1, 1.0),
        (1.0, 0.1, 9, 2, 1.5),
        (0.0, 0.01, 10000, 99, 1.0),
        (0.75, 0.6, 2, 5, 0.5),
        (0.123456789, 0.987654321, 7, 3, 2.5),
        (0.0, 0.5, 3, 0, 1.0),
        (0.42, 1.0 / 3.0, 25, 4, 1.0),
        (0.999, 0.001, 1_000_000, 0, 1.0),
        (0.1, 0.9, 50, 49, 3.0),
        (0.6, 0.2, 12, 12, 0.1),
        (0.33, 0.33, 33, 3, 1.25),
        (0.0, 0.0, 0, 0, 1.0),
        (1.0, 1.0, 1, 1, 10.0),
        (0.05, 0.7, 169, 13, 1.0),
        (0.5, 0.5, 2, 0, math.sqrt(2.0)),
        (0.8, 0.15, 64, 7, 0.75),
    ]
    out = []
    for q, p, ns, nsa, c in cases:
        v = mpmath.mpf(q) + mpmath.mpf(c) * mpmath.mpf(p) * mpmath.sqrt(ns) / (1 + nsa)
        out.append((q, p, ns, nsa, c, float(v)))
    return out


def load(path, task):
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    target = task["target"]
    y_raw = df[target]
    feats = df.drop(columns=[target])
    return feats, y_raw


def meta(path, task_path):
    task = json.load(open(task_path))
    feats, y_raw = load(path, task)
    classification = task["kind"] != "regression"
    if classification:
        classes = sorted(set(y_raw))
        y = np.array([classes.index(v) for v in y_raw], dtype=float)
    else:
        y = y_raw.astype(float).to_numpy()
    n_rows, n_cols = feats.shape
    numeric, categorical, constant, missing = 0, 0, 0, 0
    means, stds, skews, kurts, corrs = [], [], [], [], []
    for name in feats.columns:
        col = feats[name]
        miss = col.isin(MISSING).to_numpy()
        missing += miss.sum()
        present = col[~miss]
        try:
            vals = present.astype(float).to_numpy()
            is_num = True
        except ValueError:
            is_num = False
        if not is_num:
            categorical += 1
            if present.nunique() <= 1:
                constant += 1
            continue
        numeric += 1
        if len(np.unique(vals)) <= 1:
            constant += 1
        if len(vals) == 0:
            continue
        means.append(vals.mean())
        stds.append(vals.std())
        skews.append(abs(stats.skew(vals, bias=True)) if vals.std() > 0 else 0.0)
        kurts.append(abs(stats.kurtosis(vals, fisher=True, bias=True)) if vals.std() > 0 else 0.0)
        yy = y[~miss]
        corrs.append(abs(np.corrcoef(vals, yy)[0, 1]) if vals.std() > 0 and yy.std() > 0 else 0.0)
    f = [math.log1p(n_rows), n_cols, numeric, categorical, missing / (n_rows * n_cols)]
    if classification:
        counts = np.bincount(y.astype(int))
        p = counts / n_rows
        f += [len(counts), float(-(p * np.log2(p)).sum()), counts.max() / n_rows]
    else:
        f += [0.0, 0.0, 0.0]
    f += [np.mean(means), np.mean(stds), np.mean(skews), np.mean(kurts), np.mean(corrs)]
    f += [numeric / n_cols, math.log1p(n_rows / n_cols), constant / n_cols]
    return [float(x) for x in f]


# ---- network reference -------------------------------------------------

N_PRIM, L_MAX, EMBED, HIDDEN = 10, 3, 3, 4
ACTIONS = L_MAX * N_PRIM + L_MAX + L_MAX * N_PRIM + 1
CTX = 19


def theta_value(i):
    return 0.4 * math.sin(0.37 * i + 0.1)


def shapes():
    h, d = HIDDEN, EMBED
    return [
        ("embedding", (N_PRIM + 1, d)), ("context_w", (h, CTX)), ("context_b", (h, 1)),
        ("gru_wz", (h, d)), ("gru_uz", (h, h)), ("gru_bz", (h, 1)),
        ("gru_wr", (h, d)), ("gru_ur", (h, h)), ("gru_br", (h, 1)),
        ("gru_wn", (h, d)), ("gru_un", (h, h)), ("gru_bn", (h, 1)),
        ("policy_w", (ACTIONS, h)), ("policy_b", (ACTIONS, 1)),
        ("value_w", (1, h)), ("value_b", (1, 1)),
    ]


def params():
    out, off = {}, 0
    for name, (r, c) in shapes():
        vals = np.array([theta_value(off + k) for k in range(r * c)])
        out[name] = vals.reshape(r, c)
        off += r * c
    return out, off


def example(b):
    meta = [(k * 1.5 - 3.0) * (b + 1) / 2.0 for k in range(16)]
    task = [0.0, 0.0, 0.0]
    task[b % 3] = 1.0
    slots = [[0, 8, 10], [3, 10, 10], [10, 10, 10]][b]
    legal = [1 if (a * 7 + b) % 3 != 0 else 0 for a in range(ACTIONS)]
    w = [(a % 5 + 1) if legal[a] else 0 for a in range(ACTIONS)]
    pi = [x / sum(w) for x in w]
    e = [0.2, 0.7, 1.0][b]
    return meta + task + [float(s) for s in slots], legal, pi, e


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def forward(P, sv, legal):
    ctx = np.array([math.copysign(math.log1p(abs(x)), x) for x in sv[:CTX]])
    h = np.tanh(P["context_w"] @ ctx + P["context_b"][:, 0])
    for t in range(L_MAX):
        x = P["embedding"][int(sv[CTX + t])]
        z = sig(P["gru_wz"] @ x + P["gru_uz"] @ h + P["gru_bz"][:, 0])
        r = sig(P["gru_wr"] @ x + P["gru_ur"] @ h + P["gru_br"][:, 0])
        n = np.tanh(P["gru_wn"] @ x + P["gru_bn"][:, 0] + r * (P["gru_un"] @ h))
        h = (1 - z) * n + z * h
    logits = P["policy_w"] @ h + P["policy_b"][:, 0]
    v = sig(P["value_w"] @ h + P["value_b"][:, 0])[0]
    mask = np.array(legal, dtype=bool)
    ex = np.where(mask, np.exp(logits - logits[mask].max()), 0.0)
    return ex / ex.sum(), logits, v


def net_reference(alpha=0.01, beta=0.02):
    P, count = params()
    ce = val = l1 = 0.0
    first = None
    for b in range(3):
        sv, legal, pi, e = example(b)
        probs, logits, v = forward(P, sv, legal)
        if first is None:
            first = (probs, v)
        ce -= sum(pi[a] * math.log(max(probs[a], 1e-12)) for a in range(ACTIONS) if legal[a] and pi[a] != 0)
        val += (v - e) ** 2
        l1 += np.abs(logits).sum()
    theta = np.concatenate([P[n].ravel() for n, _ in shapes()])
    return {
        "count": count,
        "cross_entropy": ce / 3,
        "value": val / 3,
        "l2": alpha * float(theta @ theta),
        "l1": beta * l1 / 3,
        "probs0": [float(first[0][a]) for a in (1, 2, 4, 62)],
        "value0": float(first[1]),
    }


def main():
    print("// PUCT (q, p, n_s, n_sa, c, expected)")
    for row in puct_table():
        print("{%r, %r, %r, %r, %r, %r}," % row)
    for name in ["iris", "credit", "linear", "separable"]:
        f = meta(f"data/fixtures/{name}.csv", f"data/fixtures/{name}.task.json")
        print(f"// meta {name}")
        print("{" + ", ".join(repr(x) for x in f) + "}")
    col = np.array([1.0, 2.0, 3.0])
    print("// standard-scaler {1,2,3}:", [repr(x) for x in (col - col.mean()) / col.std()])
    print("// net reference")
    print(json.dumps(net_reference(), indent=1))


if __name__ == "__main__":
    main()
