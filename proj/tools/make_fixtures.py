#!/usr/bin/env python3
"""Regenerates the bundled CSV fixtures under data/fixtures/.

The fixtures are committed; this script only documents how they were made.
"""
import json
import os

import numpy as np
from sklearn.datasets import load_iris

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")


def write_csv(name, header, rows):
    with open(os.path.join(OUT, name + ".csv"), "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def write_task(name, kind, target, metric):
    with open(os.path.join(OUT, name + ".task.json"), "w") as f:
        json.dump({"kind": kind, "target": target, "metric": metric}, f)
        f.write("\n")


def fmt(x):
    return "%.6g" % x


def iris():
    data = load_iris()
    names = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    rows = []
    for x, y in zip(data.data, data.target):
        rows.append([fmt(v) for v in x] + [str(data.target_names[y])])
    write_csv("iris", names + ["species"], rows)
    write_task("iris", "multiclass_classification", "species", "accuracy")


def separable():
    rng = np.random.default_rng(11)
    rows = []
    for label in (0, 1):
        for _ in range(100):
            x = rng.normal(size=4)
            # push along a fixed direction so a margin of 1.0 separates classes
            w = np.array([1.0, -0.5, 0.25, 0.0])
            w /= np.linalg.norm(w)
            x = x - (x @ w) * w + (2.0 + abs(rng.normal()) if label else -2.0 - abs(rng.normal())) * w
            rows.append([fmt(v * 3.0 + 10.0) for v in x] + ["pos" if label else "neg"])
    order = rng.permutation(len(rows))
    write_csv("separable", ["f0", "f1", "f2", "f3", "label"], [rows[i] for i in order])
    write_task("separable", "binary_classification", "label", "accuracy")


def credit():
    rng = np.random.default_rng(23)
    n = 300
    income = rng.lognormal(3.0, 0.5, n)
    debt = rng.gamma(2.0, 5.0, n)
    age = rng.integers(20, 70, n).astype(float)
    noise = rng.normal(size=n)
    region = rng.choice(["north", "south", "east", "west"], n)
    housing = rng.choice(["own", "rent", "free"], n, p=[0.5, 0.4, 0.1])
    score = 0.08 * income - 0.15 * debt + 0.02 * (age - 45) + 0.8 * (housing == "own") - 0.6
    prob = 1 / (1 + np.exp(-score))
    y = (rng.random(n) < prob).astype(int)
    markers = ["", "NA", "?"]
    rows = []
    for i in range(n):
        vals = [fmt(income[i]), fmt(debt[i]), fmt(age[i]), fmt(noise[i])]
        for j in (0, 1):
            if rng.random() < 0.08:
                vals[j] = markers[rng.integers(0, 3)]
        rows.append(vals + [region[i], housing[i], "good" if y[i] else "bad"])
    write_csv("credit", ["income", "debt", "age", "noise", "region", "housing", "outcome"], rows)
    write_task("credit", "binary_classification", "outcome", "f1_macro")


def linear():
    rng = np.random.default_rng(5)
    n = 200
    x = rng.uniform(0, 10, n)
    d1 = rng.normal(size=n)
    d2 = rng.uniform(-1, 1, n)
    y = 2 * x + rng.normal(scale=1.0, size=n)
    rows = [[fmt(x[i]), fmt(d1[i]), fmt(d2[i]), fmt(y[i])] for i in range(n)]
    write_csv("linear", ["x", "distractor_a", "distractor_b", "y"], rows)
    write_task("linear", "regression", "y", "r_squared")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    iris()
    separable()
    credit()
    linear()
