#!/usr/bin/env python3
"""Regenerate the shipped scenario files under scenarios/.

The 10-population / 15-resource topology is ours: deterministic rings
with forward chords, binary rates.  Each file declares its initial
state explicitly; there is no hidden default.
"""

import json
import os

import numpy as np

N, M = 10, 15
OUT = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def ring_chords(size, offsets):
    mat = np.zeros((size, size))
    for i in range(size):
        for off in offsets:
            mat[i, (i + off) % size] = 1.0
    return mat


def topology():
    beta = ring_chords(N, [-1, 1, 3, 5])
    flow = ring_chords(M, [-1, 1, 4])
    alpha = flow.copy()
    np.fill_diagonal(alpha, -flow.sum(axis=0))
    beta_w = np.zeros((N, M))
    c_w = np.zeros((M, N))
    for i in range(N):
        beta_w[i, i % M] = 1.0
        beta_w[i, (i + 7) % M] = 1.0
    for j in range(M):
        c_w[j, j % N] = 1.0
    return beta, alpha, beta_w, c_w


def initial_state():
    x = [0.2 if i % 2 == 0 else 0.05 for i in range(N)]
    w = [0.1] * M
    return {"x": x, "w": w}


def scenario(name, d, d_w, c_w, regime, analyses):
    beta, alpha, beta_w, base_c_w = topology()
    return name, {
        "population": {"beta": beta.tolist(), "delta": [d] * N},
        "infrastructure": {"alpha": alpha.tolist(), "delta_w": list(d_w)},
        "coupling": {"beta_w": beta_w.tolist(),
                     "c_w": (c_w if c_w is not None else base_c_w).tolist()},
        "regime": regime,
        "initial_state": initial_state(),
        "t_end": 200.0,
        "samples": 200,
        "seed": 1,
        "analyses": analyses,
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    base = {"spectral": True, "equilibrium": True, "simulate": True}
    d_w3 = [0.0] * M
    d_w3[0] = 100.0
    scenarios = [
        scenario("fig2a", 5.0, [5.0] * M, None, "A2", base),
        scenario("fig2b", 2.0, [2.0] * M, None, "A2", base),
        scenario("fig3", 4.0, d_w3, None, "A1", base),
        scenario("fig5a", 3.0, [0.2] * M, np.zeros((M, N)), "A2",
                 {**base, "sis": True}),
        scenario("fig5b", 3.0, [0.2] * M, None, "A2",
                 {**base, "sis": True, "compare": True}),
    ]
    for name, cfg in scenarios:
        path = os.path.join(OUT, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(path)


if __name__ == "__main__":
    main()
