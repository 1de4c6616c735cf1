#!/usr/bin/env python3
"""Trains the desk-scale inference fixtures on the 8x8 digits set.

Writes <out>/digits_test.csv, <out>/digits_bnn/ (binary 64-64-10, XNOR) and
<out>/digits_int4/ (4-bit 64-32-10, AND). Blob layout: u32 ndim, u32 dims,
int32 values, little-endian; weights are [out, in].
"""
import argparse
import json
import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier

BNN_THRESHOLD = 5


def write_blob(path, arr):
    arr = np.asarray(arr, dtype=np.int64)
    with open(path, "wb") as f:
        f.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            f.write(struct.pack("<I", d))
        f.write(arr.astype("<i4").tobytes())


def write_net(out, name, precision, threshold, layers):
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for lname, w, b, act, shift in layers:
        write_blob(out / f"{lname}.w.bin", w)
        write_blob(out / f"{lname}.b.bin", b)
        entries.append({"name": lname, "in": int(w.shape[1]), "out": int(w.shape[0]),
                        "activation": act, "shift": int(shift),
                        "weights": f"{lname}.w.bin", "bias": f"{lname}.b.bin"})
    manifest = {"name": name, "precision": precision,
                "input": {"size": int(layers[0][1].shape[1]), "threshold": threshold},
                "layers": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def sgn(x):
    return np.where(x >= 0, 1, -1)


def train_bnn(xtr, ytr, seed, hidden=64, epochs=150):
    rng = np.random.default_rng(seed)
    x = sgn(xtr - BNN_THRESHOLD).astype(np.float64)
    n_in = x.shape[1]
    w1 = rng.normal(0, 0.1, (n_in, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0, 0.1, (hidden, 10))
    b2 = np.zeros(10)
    params = [w1, b1, w2, b2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    alpha, lr, t = 0.15, 3e-3, 0
    onehot = np.eye(10)[ytr]
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for k in range(0, len(x), 32):
            idx = order[k:k + 32]
            xb, yb = x[idx], onehot[idx]
            s1 = sgn(w1)
            h = xb @ s1 + b1
            a = sgn(h)
            s2 = sgn(w2)
            z = alpha * (a @ s2 + b2)
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            dz = alpha * (p - yb) / len(idx)
            g_w2 = a.T @ dz * (np.abs(w2) <= 1)
            g_b2 = dz.sum(axis=0)
            da = dz @ s2.T
            dh = da * (np.abs(h) <= 8) / 8
            g_w1 = xb.T @ dh * (np.abs(w1) <= 1)
            g_b1 = dh.sum(axis=0) * 8
            t += 1
            for i, g in enumerate([g_w1, g_b1, g_w2, g_b2]):
                m[i] = 0.9 * m[i] + 0.1 * g
                v[i] = 0.999 * v[i] + 0.001 * g * g
                mh = m[i] / (1 - 0.9 ** t)
                vh = v[i] / (1 - 0.999 ** t)
                step = lr * mh / (np.sqrt(vh) + 1e-8)
                if i in (1, 3):
                    step *= 30
                params[i] -= step
        np.clip(w1, -1, 1, out=w1)
        np.clip(w2, -1, 1, out=w2)
    return sgn(w1), np.floor(b1).astype(np.int64), sgn(w2), np.round(b2 / 1.0).astype(np.int64)


def bnn_predict(x, w1, b1, w2, b2):
    a = sgn(sgn(x - BNN_THRESHOLD) @ w1 + b1)
    return np.argmax(a @ w2 + b2, axis=1)


def quant4(w):
    s = np.abs(w).max() / 7.0
    return np.clip(np.round(w / s), -8, 7).astype(np.int64), s


def int4_forward(x, w1q, b1q, shift, w2q, b2q):
    acc = np.clip(x, 0, 15) @ w1q + b1q
    a = np.clip(np.floor_divide(acc, 1 << shift), 0, 15)
    return np.argmax(a @ w2q + b2q, axis=1)


def train_int4(xtr, ytr, seed, hidden=32):
    xf = np.clip(xtr, 0, 15).astype(np.float64)
    mlp = MLPClassifier(hidden_layer_sizes=(hidden,), activation="relu", alpha=1e-3,
                        max_iter=2000, random_state=seed)
    mlp.fit(xf, ytr)
    w1, w2 = mlp.coefs_
    b1, b2 = mlp.intercepts_
    w1q, s1 = quant4(w1)
    w2q, s2 = quant4(w2)
    b1q = np.round(b1 / s1).astype(np.int64)
    best = None
    for shift in range(0, 12):
        b2q = np.round(b2 / (s1 * (1 << shift) * s2)).astype(np.int64)
        acc = (int4_forward(xtr, w1q, b1q, shift, w2q, b2q) == ytr).mean()
        if best is None or acc > best[0]:
            best = (acc, shift, b2q)
    _, shift, b2q = best
    return w1q, b1q, shift, w2q, b2q


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="fixtures")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    d = load_digits()
    xtr, xte, ytr, yte = train_test_split(d.data.astype(np.int64), d.target, test_size=0.25,
                                          random_state=args.seed, stratify=d.target)
    with open(out / "digits_test.csv", "w", newline="") as f:
        f.write("label," + ",".join(f"x{i}" for i in range(xte.shape[1])) + "\r\n")
        for x, y in zip(xte, yte):
            f.write(f"{y}," + ",".join(str(int(v)) for v in x) + "\r\n")

    w1, b1, w2, b2 = train_bnn(xtr, ytr, args.seed)
    acc = (bnn_predict(xte, w1, b1, w2, b2) == yte).mean()
    print(f"bnn test accuracy {acc:.4f}")
    write_net(out / "digits_bnn", "digits-bnn", "binary", BNN_THRESHOLD,
              [("fc1", w1.T, b1, "sign", 0), ("fc2", w2.T, b2, "none", 0)])

    w1q, b1q, shift, w2q, b2q = train_int4(xtr, ytr, args.seed)
    acc = (int4_forward(xte, w1q, b1q, shift, w2q, b2q) == yte).mean()
    print(f"int4 test accuracy {acc:.4f} (shift {shift})")
    write_net(out / "digits_int4", "digits-int4", "int4", 0,
              [("fc1", w1q.T, b1q, "relu4", shift), ("fc2", w2q.T, b2q, "none", 0)])


if __name__ == "__main__":
    main()
