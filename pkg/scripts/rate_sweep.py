"""Fitted convergence rates of one study config across several weight exponents mu.

    python3 scripts/rate_sweep.py configs/limited_regularity.json --mu -0.5 0 0.25 0.5
"""
import argparse
import copy

from pseudospec.study import StudyConfig, run_study


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--mu", type=float, nargs="+", default=[-0.5, 0.0, 0.25])
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--reference", action="store_true", help="errors against a Galerkin reference run")
    args = p.parse_args()

    base = StudyConfig.load(args.config)
    print("mu,scheme,rate_l2w,rate_h1w,err_l2w_maxN,err_h1w_maxN")
    for mu in args.mu:
        cfg = copy.deepcopy(base)
        cfg.mu = mu
        cfg.validate()
        rep = run_study(cfg, threads=args.threads, reference=args.reference or cfg.exact is None)
        for scheme in cfg.schemes:
            rates = rep.rates.get(scheme, {})
            _, l2 = rep.errors(scheme, "l2w")
            _, h1 = rep.errors(scheme, "h1w")
            print(f"{mu:g},{scheme},{rates.get('l2w', float('nan')):.3f},{rates.get('h1w', float('nan')):.3f},"
                  f"{l2[-1]:.3e},{h1[-1]:.3e}")


if __name__ == "__main__":
    main()
