#!/usr/bin/env python3
"""Generate the bundled 100-molecule sample dataset (data/sample100.jsonl).

Molecules are random self-avoiding chains of C/N/O with hydrogens attached.
The regression target is a pairwise Coulomb-like sum, sum_{i<j} q_i q_j / d_ij,
with fixed per-element charges, so it depends only on interatomic distances.
"""
import argparse
import json

import numpy as np

CHARGE = {"H": 0.3, "C": 1.0, "N": 1.2, "O": 1.4}


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def place(rng, coords, anchor, bond, min_sep=1.0, tries=200):
    for _ in range(tries):
        p = anchor + bond * random_unit(rng)
        if all(np.linalg.norm(p - c) >= min_sep for c in coords):
            return p
    return None


def molecule(rng, index):
    heavy = int(rng.integers(4, 9))
    symbols, coords = [], []
    pos = np.zeros(3)
    for _ in range(heavy):
        sym = str(rng.choice(["C", "C", "C", "N", "O"]))
        if coords:
            p = place(rng, coords, coords[-1], rng.uniform(1.35, 1.55), min_sep=1.2)
            if p is None:
                break
            pos = p
        symbols.append(sym)
        coords.append(pos)
    for h in range(len(coords)):
        if symbols[h] == "H":
            continue
        for _ in range(int(rng.integers(0, 3))):
            p = place(rng, coords, coords[h], rng.uniform(1.0, 1.1))
            if p is not None:
                symbols.append("H")
                coords.append(p)
    xyz = np.array(coords)
    q = np.array([CHARGE[s] for s in symbols])
    target = 0.0
    for i in range(len(symbols)):
        for j in range(i + 1, len(symbols)):
            target += q[i] * q[j] / np.linalg.norm(xyz[i] - xyz[j])
    atoms = [
        {"symbol": s, "x": round(float(c[0]), 6), "y": round(float(c[1]), 6), "z": round(float(c[2]), 6)}
        for s, c in zip(symbols, xyz)
    ]
    return {"id": f"mol{index:03d}", "atoms": atoms, "targets": [round(float(target), 6)]}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/sample100.jsonl")
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    with open(args.out, "w") as f:
        f.write(json.dumps({"task_kind": "regression", "task_count": 1}) + "\n")
        for i in range(args.count):
            f.write(json.dumps(molecule(rng, i)) + "\n")


if __name__ == "__main__":
    main()
