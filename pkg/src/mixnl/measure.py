"""Finite measures on the fractional orders (0, 1).

A measure is stored as a finite list of weighted atoms ``(s_k, c_k)``.
Continuous densities are reduced to atoms by Gauss-Legendre quadrature
before they reach the assembly code, so every operator in the package
sees the same representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import DegenerateMeasureError, DegenerateOperatorError, DomainError

__all__ = [
    "SpectralMeasure",
    "OrderBookkeeping",
    "from_atoms",
    "from_density",
    "density_from_spec",
    "s_sharp",
    "cns_constant",
]


@dataclass(frozen=True)
class SpectralMeasure:
    """Weighted atoms ``(order, weight)`` sorted by order, orders pairwise distinct."""

    orders: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.orders) != len(self.weights):
            raise DomainError("orders and weights must have the same length")

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.orders, self.weights))

    @property
    def mass(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def is_zero(self) -> bool:
        return len(self.orders) == 0

    def scaled(self, factor: float) -> "SpectralMeasure":
        if factor < 0:
            raise DomainError("a measure can only be scaled by a nonnegative factor")
        return from_atoms([(s, factor * c) for s, c in self.atoms])

    def __add__(self, other: "SpectralMeasure") -> "SpectralMeasure":
        return from_atoms(self.atoms + other.atoms)

    def __len__(self):
        return len(self.orders)


@dataclass(frozen=True)
class OrderBookkeeping:
    s_sharp: float
    critical_exponent: float
    dim: int = 1

    def is_subcritical(self, p: float) -> bool:
        return 2.0 < p < self.critical_exponent


def from_atoms(pairs: Iterable[Sequence[float]]) -> SpectralMeasure:
    """Build a measure from ``(order, weight)`` pairs, merging repeated orders.

    >>> from_atoms([(0.3, 1.0), (0.3, 2.0)]).atoms
    [(0.3, 3.0)]
    """
    merged: dict[float, list[float]] = {}
    for pair in pairs:
        s, c = (float(v) for v in pair)
        if not (0.0 < s < 1.0) or not math.isfinite(s):
            raise DomainError(f"order {s!r} is not in (0, 1)")
        if not (c >= 0.0) or not math.isfinite(c):
            raise DomainError(f"weight {c!r} for order {s} must be finite and >= 0")
        merged.setdefault(s, []).append(c)
    orders = sorted(merged)
    # fsum over a sorted copy keeps the merge independent of input order
    weights = tuple(math.fsum(sorted(merged[s])) for s in orders)
    return SpectralMeasure(tuple(orders), weights)


def from_density(density: Callable[[np.ndarray], np.ndarray], n_nodes: int) -> SpectralMeasure:
    """Reduce ``omega(s) ds`` on (0, 1) to ``n_nodes`` Gauss-Legendre atoms."""
    if int(n_nodes) != n_nodes or n_nodes < 1:
        raise DomainError("n_nodes must be a positive integer")
    x, w = np.polynomial.legendre.leggauss(int(n_nodes))
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    values = np.asarray(density(nodes), dtype=float) * np.ones_like(nodes)
    if np.any(~np.isfinite(values)):
        raise DomainError("density is not finite at a quadrature node")
    if np.any(values < 0):
        k = int(np.argmin(values))
        raise DomainError(f"density is negative at s={nodes[k]:.6g}")
    atoms = weights * values
    if not np.any(atoms > 0):
        raise DegenerateMeasureError("density vanishes at every quadrature node")
    return from_atoms(zip(nodes, atoms))


def density_from_spec(kind: str, params: dict | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Built-in densities: ``constant`` (``value``) and ``power`` (``coef * s**exponent``)."""
    params = dict(params or {})
    if kind == "constant":
        value = float(params.get("value", 1.0))
        return lambda s: np.full_like(np.asarray(s, dtype=float), value)
    if kind == "power":
        coef = float(params.get("coef", 1.0))
        exponent = float(params.get("exponent", 1.0))
        return lambda s: coef * np.asarray(s, dtype=float) ** exponent
    raise DomainError(f"unknown density kind {kind!r}")


def s_sharp(measure: SpectralMeasure, alpha: float, dim: int = 1) -> OrderBookkeeping:
    """Top effective order and the associated critical exponent.

    With ``alpha != 0`` the local term dominates and the order is 1; otherwise
    the largest atom carrying positive weight is used.
    """
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    if alpha != 0:
        top = 1.0
    else:
        positive = [s for s, c in measure.atoms if c > 0]
        if not positive:
            raise DegenerateOperatorError("alpha = 0 with a zero measure leaves no operator")
        top = max(positive)
    crit = 2.0 * dim / (dim - 2.0 * top) if dim > 2.0 * top else math.inf
    return OrderBookkeeping(s_sharp=top, critical_exponent=crit, dim=dim)


def cns_constant(dim: int, s: float) -> float:
    """Normalising constant ``s 4^s Gamma(N/2+s) / (pi^{N/2} Gamma(1-s))``."""
    if not (0.0 < s < 1.0):
        raise DomainError(f"order {s!r} is not in (0, 1)")
    if dim < 1:
        raise DomainError("dimension must be a positive integer")
    log_c = (
        math.log(s)
        + s * math.log(4.0)
        + math.lgamma(0.5 * dim + s)
        - 0.5 * dim * math.log(math.pi)
        - math.lgamma(1.0 - s)
    )
    return math.exp(log_c)
