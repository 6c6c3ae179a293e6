"""Slopes of the P_N, R_N and I_N errors for f = |x|^p (1 - x^2) against the declared regularity.

The declared index is m = floor(p + 1/2); the expected slopes are -m (L2) and 1 - m (H1).
Even integer p gives a polynomial, so those exponents are not meaningful here.
"""
import argparse
import math

import numpy as np

from pseudospec.forms import BoundaryBasis, assemble_A, project_A
from pseudospec.jacobi import gauss_lobatto
from pseudospec.spaces import error_norms, interpolate, project_L2
from pseudospec.study import fit_rate


def rates(p, mu, ns):
    f = lambda x: np.abs(x) ** p * (1 - x**2)  # noqa: E731
    df = lambda x: np.sign(x) * np.abs(x) ** (p - 1) * (p * (1 - x**2) - 2 * x**2)  # noqa: E731
    cols = {"P_N L2": [], "P_N H1": [], "R_N L2": [], "R_N H1": [], "I_N L2": [], "I_N H1": []}
    for n in ns:
        basis = BoundaryBasis(n, mu)
        mats = assemble_A(lambda x: 1 + 0 * x, lambda x: 1 + 0 * x, basis, gauss_lobatto(256, mu))
        for name, approx in (("P_N", project_L2(f, n, mu)),
                             ("R_N", project_A(f, mats, basis, df=df)),
                             ("I_N", interpolate(f, gauss_lobatto(n, mu)))):
            l2, h1 = error_norms(approx, f, df, m=256)
            cols[f"{name} L2"].append(l2)
            cols[f"{name} H1"].append(h1)
    return {k: fit_rate(ns, v) for k, v in cols.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[1, 2.5, 3, 5])
    ap.add_argument("--mu", type=float, nargs="+", default=[-0.5, 0.0, 0.25])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 16, 32, 64])
    args = ap.parse_args()
    header = None
    for p in args.p:
        m = math.floor(p + 0.5)
        for mu in args.mu:
            r = rates(p, mu, args.n)
            if header is None:
                header = ["p", "m", "mu"] + list(r)
                print(",".join(header))
            print(",".join([f"{p:g}", str(m), f"{mu:g}"] + [f"{v:.2f}" for v in r.values()]))


if __name__ == "__main__":
    main()
