"""Benchmark problems on the unit cylinder [0,1] x (0,1)^d.

Every problem provides the first-order-system data f1 (scalar forcing),
f2 (vector forcing) and u0 (initial datum) as vectorized callables.  Space-
time callables take (n, 1+d) arrays with the time coordinate first; u0 takes
(n, d) spatial points.  Problems with a known solution also expose `exact`.
"""

import numpy as np


class Problem:
    def __init__(self, name, dim, f1, f2, u0, exact=None):
        self.name = name
        self.dim = dim
        self.f1 = f1
        self.f2 = f2
        self.u0 = u0
        self.exact = exact
        self.T = 1.0


def _const_f1(c, dim):
    def f1(pts):
        return np.full(len(pts), float(c))
    return f1


def _zero_f2(dim):
    def f2(pts):
        return np.zeros((len(pts), dim))
    return f2


def _make_registry():
    reg = {}

    def smooth_exact(pts):
        pts = np.atleast_2d(pts)
        return np.exp(-np.pi ** 2 * pts[:, 0]) * np.sin(np.pi * pts[:, 1])

    reg["1d-smooth"] = Problem(
        "1d-smooth", 1,
        f1=_const_f1(0.0, 1),
        f2=_zero_f2(1),
        u0=lambda x: np.sin(np.pi * np.atleast_2d(x)[:, 0]),
        exact=smooth_exact)

    reg["1d-nonmatching"] = Problem(
        "1d-nonmatching", 1,
        f1=_const_f1(2.0, 1),
        f2=_zero_f2(1),
        u0=lambda x: np.ones(len(np.atleast_2d(x))))

    reg["1d-interior-kink"] = Problem(
        "1d-interior-kink", 1,
        f1=_const_f1(1.0, 1),
        f2=_zero_f2(1),
        u0=lambda x: 1.0 - 2.0 * np.abs(np.atleast_2d(x)[:, 0] - 0.5))

    reg["1d-boundary-singularity"] = Problem(
        "1d-boundary-singularity", 1,
        f1=_const_f1(0.0, 1),
        f2=_zero_f2(1),
        u0=lambda x: np.sqrt(np.atleast_2d(x)[:, 0])
        * (1.0 - np.atleast_2d(x)[:, 0]))

    reg["2d-nonmatching"] = Problem(
        "2d-nonmatching", 2,
        f1=_const_f1(0.0, 2),
        f2=_zero_f2(2),
        u0=lambda x: np.ones(len(np.atleast_2d(x))))

    def kink_u0(x):
        x = np.atleast_2d(x)
        r = np.hypot(x[:, 0] - 0.5, x[:, 1] - 0.5)
        return r * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    reg["2d-interior-kink"] = Problem(
        "2d-interior-kink", 2,
        f1=_const_f1(0.0, 2),
        f2=_zero_f2(2),
        u0=kink_u0)

    def bsing_u0(x):
        x = np.atleast_2d(x)
        return (x[:, 0] ** 0.75 * (1.0 - x[:, 0])
                * x[:, 1] * (1.0 - x[:, 1]))

    reg["2d-boundary-singularity"] = Problem(
        "2d-boundary-singularity", 2,
        f1=_const_f1(0.0, 2),
        f2=_zero_f2(2),
        u0=bsing_u0)

    return reg


REGISTRY = _make_registry()


def get_problem(name):
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise KeyError(f"unknown problem {name!r}; available: {known}")
