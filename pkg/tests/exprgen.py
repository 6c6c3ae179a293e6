"""Random smooth expressions over x, t, v for derivative fuzzing."""
import numpy as np

SMOOTH_UNARY = ("sin", "cos", "exp", "tanh")


def random_expr(rng, depth=3):
    """Text of a random expression that is smooth and finite on (-1, 1)^3."""
    if depth == 0 or rng.random() < 0.2:
        choice = rng.integers(0, 5)
        if choice < 3:
            return "xtv"[choice]
        if choice == 3:
            return "pi"
        return f"{rng.uniform(-3, 3):.3f}"
    kind = rng.integers(0, 9)
    a = random_expr(rng, depth - 1)
    if kind < 3:
        b = random_expr(rng, depth - 1)
        return f"({a} {'+-*'[kind]} {b})"
    if kind == 3:
        return f"({a}) / (2 + sin({random_expr(rng, depth - 1)}))"
    if kind == 4:
        return f"({a})^{int(rng.integers(0, 4))}"
    if kind == 5:
        return f"sqrt(1 + ({a})^2)"
    if kind == 6:
        return f"log(3 + tanh({a}))"
    if kind == 7:
        return f"pow(2 + cos({a}), {rng.uniform(-1.5, 1.5):.2f})"
    return f"{SMOOTH_UNARY[rng.integers(0, len(SMOOTH_UNARY))]}({a})"


def fd_check(ex, text, rng, h=1e-5, points=5):
    """Largest violation of |diff - central difference| <= 1e-6 (1 + |value|); <= 0 means pass."""
    e = ex.parse(text)
    worst = -np.inf
    for var in "xtv":
        d = ex.diff(e, var)
        for _ in range(points):
            p = dict(zip("xtv", rng.uniform(-0.9, 0.9, 3)))
            lo, hi = dict(p), dict(p)
            lo[var] -= h
            hi[var] += h
            fd = (ex.evaluate(e, **hi) - ex.evaluate(e, **lo)) / (2 * h)
            val = ex.evaluate(d, **p)
            worst = max(worst, abs(val - fd) - 1e-6 * (1 + abs(val)))
    return worst
