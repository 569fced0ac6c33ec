#!/usr/bin/env python3
"""Timing comparison of the two numerical kernel backends.

Builds surrogate subproblems exactly as the outer solver poses them
(majorant coefficients from knot enumeration, concave gradient linearized
at a random reference) plus coordinate-descent lasso problems on the
interaction basis, then times every importable backend on each instance.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 5] [--seed 0]
"""

import argparse
import time

import numpy as np

from tailrule._kernels import PENALTY_L1, PENALTY_L2, PENALTY_QUAD, backends
from tailrule.data import TrialDataset
from tailrule.dca import shared_majorant_terms
from tailrule.models import DecisionFunction
from tailrule.pls import expand_basis

KIND_NAMES = {PENALTY_L2: "l2", PENALTY_L1: "l1", PENALTY_QUAD: "quad"}


def random_dataset(gen, n, p):
    X = gen.normal(size=(n, p))
    action = gen.choice([-1, 1], size=n)
    outcome = gen.normal(size=n) * (1.0 + gen.random(n))
    return TrialDataset(X, action, outcome, gen.uniform(0.2, 0.8, size=n))


def subproblem_instance(gen, n, p, kind):
    data = random_dataset(gen, n, p)
    F, hs = shared_majorant_terms(data, 0.6)
    ref = DecisionFunction(
        form="linear", weights=gen.normal(size=p) * 0.3, intercept=float(gen.normal() * 0.1)
    )
    gw, gb = hs[int(gen.integers(n))].gradient(ref)
    Q = None
    if kind == PENALTY_QUAD:
        M = gen.normal(size=(p, p))
        Q = M @ M.T + np.eye(p)
    return dict(
        Z=data.X, y=data.action.astype(float), c1=F.a1, c2=F.a2,
        gw=gw, gb=gb, lam=0.05, penalty_kind=kind, Q=Q, delta=1.0,
        w0=np.zeros(p), b0=0.0, grad_tol=1e-8, max_iter=4000,
    )


def lasso_instance(gen, n, p):
    data = random_dataset(gen, n, p)
    Phi = np.ascontiguousarray(expand_basis(data.X, data.action))
    penalized = np.ones(Phi.shape[1], dtype=np.uint8)
    penalized[0] = 0
    return dict(
        Phi=Phi, target=data.outcome, lam=0.1, penalized=penalized,
        beta0=np.zeros(Phi.shape[1]), tol=1e-8, max_sweeps=10000,
    )


def time_call(fn, kwargs, repeats):
    fn(**kwargs)  # warm-up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(**kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timed repeats; min is reported")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    impls = backends()
    names = sorted(impls)
    if len(impls) == 1:
        print("note: only the pure-python backend is importable; build the "
              "extension to compare (pip install -e . --no-build-isolation)")

    rows = []
    for kind in (PENALTY_L2, PENALTY_L1, PENALTY_QUAD):
        for n, p in ((100, 10), (200, 20), (400, 20)):
            gen = np.random.default_rng(args.seed)
            inst = subproblem_instance(gen, n, p, kind)
            times, outs = {}, {}
            for name in names:
                times[name], outs[name] = time_call(
                    impls[name].solve_surrogate_subproblem, inst, args.repeats
                )
            rows.append((f"subproblem/{KIND_NAMES[kind]}", f"n={n} p={p}", times, outs))

    for n, p in ((200, 20), (1000, 20), (1000, 50)):
        gen = np.random.default_rng(args.seed + 1)
        inst = lasso_instance(gen, n, p)
        times, outs = {}, {}
        for name in names:
            times[name], outs[name] = time_call(impls[name].lasso_cd, inst, args.repeats)
        rows.append(("lasso_cd", f"n={n} p={p}", times, outs))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  {'size':<12}" + "".join(f"{nm:>12}" for nm in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, size, times, outs in rows:
        line = f"{label:<{width}}  {size:<12}"
        for nm in names:
            line += f"{times[nm] * 1e3:>10.2f}ms"
        if len(names) == 2:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
            # the backends must walk the same iteration path
            assert outs["python"][2] == outs["compiled"][2], label
            assert np.allclose(outs["python"][0], outs["compiled"][0], rtol=1e-9, atol=1e-12)
        print(line)


if __name__ == "__main__":
    main()
