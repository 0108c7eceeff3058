"""Two fully worked examples, recomputed and checked claim by claim.

``run_remark_example`` extends the identity on (-1, 1) to the exterior so
that the nonlocal Neumann condition holds, then shows the positive part of
that function violates it at every sampled exterior point.

``run_appendix_example`` follows the sequence ``u_n = x^(1+1/n) (x-1)^2``
on (0, 1): it converges to ``u = x (x-1)^2`` in L2 and H1 while every
``u_n`` has zero slope at 0 and the limit does not.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .discretization import Mesh1D, build_mesh, extension, neumann_residual
from .exceptions import DomainError
from .measure import SpectralMeasure, from_atoms

__all__ = [
    "Claim",
    "ExampleReport",
    "DEFAULT_EXTERIOR_POINTS",
    "run_remark_example",
    "run_appendix_example",
    "appendix_bound",
]

DEFAULT_EXTERIOR_POINTS = (-1.5, -2.0, -4.0, 1.5, 2.0, 4.0)
TOL = 1e-8


@dataclass
class Claim:
    name: str
    value: float
    tolerance: float
    passed: bool
    anchor: str
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: value={self.value:.6e} tol={self.tolerance:.1e} ({self.anchor}){' ' + self.detail if self.detail else ''}"


@dataclass
class ExampleReport:
    name: str
    claims: list[Claim] = field(default_factory=list)
    quantities: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.claims) and all(c.passed for c in self.claims)

    def add(self, name, value, tolerance, passed, anchor, detail=""):
        self.claims.append(Claim(name, float(value), float(tolerance), bool(passed), anchor, detail))

    def lines(self) -> list[str]:
        return [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"] + ["  " + c.line() for c in self.claims]

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "claims": [asdict(c) for c in self.claims],
                "quantities": self.quantities}


# ------------------------------------------------------------------ remark


def _remark_case(report: ExampleReport, label: str, measure: SpectralMeasure, mesh: Mesh1D, points):
    x_in = mesh.nodes[mesh.interior_dofs]
    ident = x_in.copy()
    ext = extension(ident, points, measure, mesh)
    left = points < mesh.x_l
    worst = int(np.argmax(np.where(left, ext, -np.inf)))
    report.add(f"{label}: extension <= 0 left of the domain", ext[worst], 0.0, bool(np.all(ext[left] <= 0.0)),
               "remark/sign-of-extension", f"worst x={points[worst]:g}")

    res = np.array([_residual_interior(ident, x, v, measure, mesh) for x, v in zip(points, ext)])
    worst = int(np.argmax(np.abs(res)))
    report.add(f"{label}: Neumann residual at the extension", abs(res[worst]), TOL, bool(np.all(np.abs(res) <= TOL)),
               "remark/construction", f"worst x={points[worst]:g}")

    plus_in = np.maximum(ident, 0.0)
    plus_ext = np.maximum(ext, 0.0)
    res_plus = np.array([_residual_interior(plus_in, x, v, measure, mesh) for x, v in zip(points, plus_ext)])
    worst = int(np.argmax(res_plus))
    report.add(f"{label}: residual of the positive part < 0", res_plus[worst], 0.0, bool(np.all(res_plus < 0.0)),
               "remark/positive-part", f"worst x={points[worst]:g}")
    report.quantities[label] = {"points": points.tolist(), "extension": ext.tolist(),
                                "residual": res.tolist(), "residual_positive_part": res_plus.tolist()}


def _residual_interior(u_in, x, value, measure, mesh):
    u = np.zeros(mesh.n_nodes)
    u[mesh.interior_dofs] = u_in
    return neumann_residual(u, float(x), measure, mesh, value_at_x=value)


def run_remark_example(measure: SpectralMeasure | None = None, mesh: Mesh1D | None = None,
                       exterior_points=DEFAULT_EXTERIOR_POINTS, extra_measures=None) -> ExampleReport:
    """Sign claims for the extension of the identity and its positive part.

    Runs on ``measure`` (default a single atom at 1/2) and on every entry of
    ``extra_measures`` (default: atoms at 0.3 and 0.7), plus the constant
    control case, whose extension must reproduce the constant.
    """
    measure = from_atoms([(0.5, 1.0)]) if measure is None else measure
    if measure.is_zero:
        raise DomainError("the example needs a nonzero measure")
    mesh = build_mesh((-1.0, 1.0), 8.0, 128, 32) if mesh is None else mesh
    if (mesh.x_l, mesh.x_r) != (-1.0, 1.0):
        raise DomainError("the example is posed on (-1, 1)")
    points = np.asarray(exterior_points, dtype=float)
    if np.any((points >= -1.0) & (points <= 1.0)):
        raise DomainError("exterior points must lie outside [-1, 1]")
    if extra_measures is None:
        extra_measures = {"atoms 0.3/0.7": from_atoms([(0.3, 1.0), (0.7, 1.0)])}

    report = ExampleReport("remark: positive part leaves the Neumann space")
    _remark_case(report, "measure", measure, mesh, points)
    for label, mu in extra_measures.items():
        _remark_case(report, label, mu, mesh, points)

    ones = np.ones(mesh.n_in + 1)
    ext1 = extension(ones, points, measure, mesh)
    res1 = np.array([_residual_interior(ones, x, v, measure, mesh) for x, v in zip(points, ext1)])
    dev = float(max(np.max(np.abs(ext1 - 1.0)), np.max(np.abs(res1))))
    report.add("control: constant extends to itself with zero residual", dev, TOL, dev <= TOL, "remark/control")
    return report


# ---------------------------------------------------------------- appendix


def appendix_bound(n: int) -> float:
    """Closed-form ``int_0^1 (x^(1/n) - 1)^2 dx`` bounding the squared L2 distance."""
    return 1.0 / (1.0 + 2.0 / n) - 2.0 / (1.0 + 1.0 / n) + 1.0


def _u(x):
    return x * (x - 1.0) ** 2


def _du(x):
    return (x - 1.0) ** 2 + 2.0 * x * (x - 1.0)


def _un(n):
    a = 1.0 + 1.0 / n
    return lambda x: x**a * (x - 1.0) ** 2


def _dun(n):
    a = 1.0 + 1.0 / n
    return lambda x: a * x ** (1.0 / n) * (x - 1.0) ** 2 + 2.0 * x**a * (x - 1.0)


def _quad(fun):
    # the integrands have an x^(1/n) singularity in their derivatives at 0
    val, _ = integrate.quad(fun, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=400, points=[1e-12, 1e-6, 1e-3])
    return val


def run_appendix_example(n_list=(1, 2, 5, 10, 100, 1000, 10000)) -> ExampleReport:
    """Checks on ``u_n = x^(1+1/n) (x-1)^2`` and its limit ``x (x-1)^2``."""
    ns = [int(n) for n in n_list]
    if not ns or any(n < 1 or n != m for n, m in zip(ns, n_list)):
        raise DomainError("n_list must hold positive integers")
    ns = sorted(set(ns))
    report = ExampleReport("appendix: Neumann sequence with a non-Neumann limit")

    bounds = [appendix_bound(n) for n in ns]
    l2 = [_quad(lambda x, f=_un(n): (f(x) - _u(x)) ** 2) for n in ns]
    h1 = [_quad(lambda x, d=_dun(n): (d(x) - _du(x)) ** 2) for n in ns]
    report.quantities = {"n": ns, "bound": bounds, "l2_sq": l2, "h1_seminorm_sq": h1}

    if 1 in ns:
        b1 = bounds[ns.index(1)]
        report.add("bound at n=1 equals 1/3", abs(b1 - 1.0 / 3.0), TOL, abs(b1 - 1.0 / 3.0) <= TOL, "appendix/closed-form")
    gap = max(q - b for q, b in zip(l2, bounds))
    report.add("quadrature <= bound for all n", gap, TOL, gap <= TOL, "appendix/closed-form")
    positive = all(b > 0 for b in bounds)
    decreasing = all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
    report.add("bound positive and decreasing in n", bounds[-1], 0.0, positive and decreasing, "appendix/closed-form")
    report.add("bound -> 0", bounds[-1], 1e-3, bounds[-1] <= 1e-3 * bounds[0], "appendix/limit",
               f"ratio last/first={bounds[-1] / bounds[0]:.3e}")
    report.add("L2 distance -> 0", l2[-1], 1e-3, all(b < a for a, b in zip(l2, l2[1:])) and l2[-1] <= 1e-3 * l2[0],
               "appendix/limit")
    report.add("H1 seminorm distance -> 0", h1[-1], 1e-3,
               all(b < a for a, b in zip(h1, h1[1:])) and h1[-1] <= 1e-3 * h1[0], "appendix/limit")

    slopes = [abs(_dun(n)(0.0)) for n in ns]
    report.add("u_n'(0) = 0 for every n", max(slopes), TOL, max(slopes) <= TOL, "appendix/neumann-sequence")
    report.add("u'(0) = 1", abs(_du(0.0) - 1.0), TOL, abs(_du(0.0) - 1.0) <= TOL, "appendix/limit-slope")
    # the limit slope survives in the difference quotient; the sequence's slopes only vanish as h -> 0
    h = 1e-6
    fd = (_u(h) - _u(0.0)) / h
    report.add("difference quotient of u at 0 near 1", abs(fd - 1.0), 1e-5, abs(fd - 1.0) <= 1e-5, "appendix/limit-slope")
    return report
