"""Monomial and Legendre helpers used by the element constructions."""

import numpy as np
from numpy.polynomial import legendre as npleg


def monomial_exponents(deg, d):
    """Exponent tuples of all monomials in d variables of total degree <= deg."""
    if d == 1:
        return [(a,) for a in range(deg + 1)]
    if d == 2:
        return [(a, b) for s in range(deg + 1) for a in range(s, -1, -1)
                for b in (s - a,)]
    if d == 3:
        return [(a, b, s - a - b) for s in range(deg + 1)
                for a in range(s, -1, -1) for b in range(s - a, -1, -1)]
    raise ValueError(f"unsupported dimension {d}")


def mono_vander(points, exponents):
    """Vandermonde matrix V[p, m] = prod_i x_p[i]**e_m[i]."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.ones((pts.shape[0], len(exponents)))
    for m, exp in enumerate(exponents):
        for i, e in enumerate(exp):
            if e:
                V[:, m] *= pts[:, i] ** e
    return V


def mono_diff_matrix(exponents, axis):
    """Matrix D with (D c) the coefficients of d/dx_axis of c."""
    index = {exp: i for i, exp in enumerate(exponents)}
    D = np.zeros((len(exponents), len(exponents)))
    for m, exp in enumerate(exponents):
        e = exp[axis]
        if e:
            lower = list(exp)
            lower[axis] -= 1
            D[index[tuple(lower)], m] = e
    return D


def shifted_legendre(n):
    """Monomial coefficients (length n+1) of the L2(0,1)-orthonormal
    Legendre polynomial of degree n."""
    c = np.zeros(n + 1)
    c[n] = 1.0
    poly = npleg.leg2poly(c)  # coefficients on [-1, 1]
    # substitute x -> 2t - 1 and normalize (norm on [0,1] is 1/sqrt(2n+1))
    out = np.zeros(n + 1)
    for j, a in enumerate(poly):
        # a * (2t-1)^j
        for i in range(j + 1):
            out[i] += a * _binom(j, i) * (2.0 ** i) * ((-1.0) ** (j - i))
    return out * np.sqrt(2 * n + 1)


def _binom(n, k):
    from math import comb
    return comb(n, k)


def polyval_1d(coeffs, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for i in range(len(coeffs) - 1, -1, -1):
        out = out * t + coeffs[i]
    return out


def polyder_1d(coeffs):
    n = len(coeffs)
    if n <= 1:
        return np.zeros(1)
    return coeffs[1:] * np.arange(1, n)
