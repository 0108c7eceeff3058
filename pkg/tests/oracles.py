"""Independent reference computations used by the test-suite.

Nothing here calls into the assembly or solver code paths it checks; hat
functions are evaluated pointwise from node coordinates and every integral
goes through QUADPACK.
"""

import itertools
import math
import warnings

import mpmath
import numpy as np
from scipy import integrate


def cns_mpmath(dim, s, dps=40):
    with mpmath.workdps(dps):
        s = mpmath.mpf(s)
        return float(s * 4**s * mpmath.gamma(mpmath.mpf(dim) / 2 + s) / (mpmath.pi ** (mpmath.mpf(dim) / 2) * mpmath.gamma(1 - s)))


def hat(nodes, i):
    unit = np.zeros(nodes.size)
    unit[i] = 1.0
    return lambda x: float(np.interp(x, nodes, unit))


def gagliardo_bruteforce(nodes, x_l, x_r, atoms, epsrel=1e-11):
    """Dense ``B`` by nested adaptive quadrature over every cell pair of the truncated set Q."""
    n = nodes.size
    cells = list(zip(nodes[:-1], nodes[1:]))
    interior = [(a >= x_l - 1e-12) and (b <= x_r + 1e-12) for a, b in cells]
    hats = [hat(nodes, i) for i in range(n)]
    B = np.zeros((n, n))
    for e, f in itertools.combinations_with_replacement(range(len(cells)), 2):
        if not (interior[e] or interior[f]):
            continue
        (a0, a1), (b0, b1) = cells[e], cells[f]
        dofs = sorted({e, e + 1, f, f + 1})
        for s, c in atoms:
            weight = c * cns_mpmath(1, s) / 2.0
            mult = 1.0 if e == f else 2.0
            for i, j in itertools.combinations_with_replacement(dofs, 2):
                phi_i, phi_j = hats[i], hats[j]

                def integrand(y, x):
                    r = abs(x - y)
                    if r == 0.0:
                        return 0.0
                    return (phi_i(x) - phi_i(y)) * (phi_j(x) - phi_j(y)) / r ** (1.0 + 2.0 * s)

                val = _nested_quad(integrand, a0, a1, b0, b1, epsrel)
                B[i, j] += weight * mult * val
                if i != j:
                    B[j, i] += weight * mult * val
    return B


def _nested_quad(integrand, a0, a1, b0, b1, epsrel):
    """``int_{a0}^{a1} int_{b0}^{b1} integrand(y, x) dy dx`` with the diagonal passed as a breakpoint."""

    def inner(x):
        pts = [x] if b0 < x < b1 else None
        # roundoff warnings near the shared corner; the comparison itself judges accuracy
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(integrand, b0, b1, args=(x,), points=pts, epsabs=1e-15, epsrel=epsrel,
                                  limit=200)[0]

    pts = [b for b in (b0, b1) if a0 < b < a1] or None
    return integrate.quad(inner, a0, a1, points=pts, epsabs=1e-15, epsrel=epsrel, limit=200)[0]


def extension_quad(u, x, x_l, x_r, atoms, cns):
    """Exterior value from the quotient of two kernel integrals, both by adaptive quadrature."""
    num = den = 0.0
    for s, c in atoms:
        k = lambda y: abs(x - y) ** (-1.0 - 2.0 * s)
        num += c * cns(1, s) * integrate.quad(lambda y: u(y) * k(y), x_l, x_r, epsabs=0, epsrel=1e-13, limit=200)[0]
        den += c * cns(1, s) * integrate.quad(k, x_l, x_r, epsabs=0, epsrel=1e-13, limit=200)[0]
    return num / den


def directional_fd(fun, u, v, h=1e-5):
    return (fun(u + h * v) - fun(u - h * v)) / (2.0 * h)


def appendix_l2_quad(n):
    f = lambda x: (x ** (1.0 + 1.0 / n) * (x - 1.0) ** 2 - x * (x - 1.0) ** 2) ** 2
    return integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=200)[0]


def gauss_legendre_mass(density, n_nodes):
    return integrate.quad(density, 0.0, 1.0, epsabs=1e-15, epsrel=1e-14)[0]


def analytic_neumann_eigs(length, k):
    return [((j * math.pi) / length) ** 2 for j in range(k)]
