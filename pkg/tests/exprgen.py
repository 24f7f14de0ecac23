"""Random well-behaved expressions over the metric grammar, for oracle tests."""

import numpy as np

SAFE_UNARY = [
    "sin({})",
    "cos({})",
    "exp(sin({}))",
    "ln(1+({})^2)",
    "sqrt(2+cos({}))",
    "abs(3+sin({}))",
    "-({})",
]


def random_expr(rng, n, depth=3):
    """Source text of a random expression in ``x1..xn`` with bounded derivatives."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return f"x{rng.integers(1, n + 1)}"
        return repr(round(float(rng.uniform(-2, 2)), 3))
    kind = rng.integers(0, 4)
    a = random_expr(rng, n, depth - 1)
    if kind == 0:
        return SAFE_UNARY[rng.integers(len(SAFE_UNARY))].format(a)
    if kind == 1:
        return f"({a})^{rng.integers(0, 4)}"
    b = random_expr(rng, n, depth - 1)
    if kind == 2:
        op = ["+", "-", "*"][rng.integers(3)]
        return f"({a}) {op} ({b})"
    return f"({a}) / (1.5+sin({b}))"


def fd_grad(f, x, h=None):
    h = h if h is not None else np.cbrt(np.finfo(float).eps)
    g = np.empty(len(x))
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hess(f, x, h=1e-4):
    n = len(x)
    H = np.empty((n, n))
    I = np.eye(n) * h
    for k in range(n):
        for m in range(n):
            H[k, m] = (f(x + I[k] + I[m]) - f(x + I[k] - I[m]) - f(x - I[k] + I[m])
                       + f(x - I[k] - I[m])) / (4 * h * h)
    return H
