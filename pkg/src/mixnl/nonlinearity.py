"""Nonlinear source terms and grid certification of their structural hypotheses."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DomainError, HypothesisViolation
from .measure import OrderBookkeeping

__all__ = [
    "PowerNonlinearity",
    "Nonlinearity",
    "ARReport",
    "HypothesisCheck",
    "default_t_grid",
    "check_AR",
    "sv12_check",
    "c_r_constant",
]

_POS_FLOOR = 1e-300


@dataclass(frozen=True)
class PowerNonlinearity:
    """``f(x, t) = a |t|^(p-2) t`` with primitive ``F = (a/p) |t|^p``."""

    a: float = 1.0
    p: float = 4.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("coefficient a must be > 0")
        if not self.p > 2:
            raise DomainError("exponent p must be > 2")

    def f(self, t, x=None):
        t = np.asarray(t, dtype=float)
        return self.a * np.abs(t) ** (self.p - 2.0) * t

    def F(self, t, x=None):
        t = np.asarray(t, dtype=float)
        return (self.a / self.p) * np.abs(t) ** self.p

    def df(self, t, x=None):
        t = np.asarray(t, dtype=float)
        return self.a * (self.p - 1.0) * np.abs(t) ** (self.p - 2.0)

    def describe(self) -> dict:
        return {"kind": "power", "a": self.a, "p": self.p}


@dataclass(frozen=True)
class Nonlinearity:
    """User-supplied ``f``, its primitive ``F`` and derivative ``df`` (all vectorised in ``t``).

    ``p`` is the claimed growth exponent used by the hypothesis checks.
    """

    f_fn: Callable
    F_fn: Callable
    df_fn: Callable
    p: float
    name: str = "custom"

    def f(self, t, x=None):
        return np.asarray(self.f_fn(np.asarray(t, dtype=float)), dtype=float) * np.ones(np.shape(t))

    def F(self, t, x=None):
        return np.asarray(self.F_fn(np.asarray(t, dtype=float)), dtype=float) * np.ones(np.shape(t))

    def df(self, t, x=None):
        return np.asarray(self.df_fn(np.asarray(t, dtype=float)), dtype=float) * np.ones(np.shape(t))

    def describe(self) -> dict:
        return {"kind": self.name, "p": self.p}


def nonlinearity_from_spec(spec: dict) -> PowerNonlinearity:
    spec = dict(spec)
    kind = spec.pop("kind", "power")
    if kind != "power":
        raise DomainError(f"unknown nonlinearity kind {kind!r}")
    return PowerNonlinearity(a=float(spec.get("a", 1.0)), p=float(spec.get("p", 4.0)))


# ---------------------------------------------------------------- certification


@dataclass
class HypothesisCheck:
    holds: bool
    constants: dict = field(default_factory=dict)
    witness: float | None = None
    note: str = ""


@dataclass
class ARReport:
    AR1: HypothesisCheck
    AR2: HypothesisCheck
    AR3: HypothesisCheck
    AR4: HypothesisCheck
    AR5: HypothesisCheck
    grid: dict
    sv12: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(getattr(self, k).holds for k in ("AR1", "AR2", "AR3", "AR4", "AR5"))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["holds"] = self.holds
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def default_t_grid(T: float = 10.0, n_linear: int = 2001, n_log: int = 200) -> np.ndarray:
    """Symmetric grid on ``[-T, T]``: uniform samples plus log-spaced refinement near 0."""
    pos = np.unique(np.concatenate([np.linspace(0.0, T, n_linear)[1:], np.geomspace(1e-8, T, n_log)]))
    return np.concatenate([-pos[::-1], [0.0], pos])


def _validate_grid(t_grid):
    t = np.unique(np.asarray(t_grid, dtype=float))
    T = min(-t.min(), t.max())
    if T < 10.0:
        raise DomainError("t_grid must cover [-10, 10]")
    nonzero = np.abs(t[t != 0])
    if nonzero.size == 0 or nonzero.min() > 1e-3:
        raise DomainError("t_grid needs refinement near 0 (samples with |t| <= 1e-3)")
    return t, T


def check_AR(nl, bookkeeping: OrderBookkeeping, t_grid=None, theta: float | None = None, r: float = 0.0) -> ARReport:
    """Certify the growth, superquadraticity and sign conditions at every grid sample.

    ``theta`` defaults to the growth exponent ``p`` of ``nl``; the lower
    bound exponent is taken equal to ``theta``.
    """
    t, T = _validate_grid(default_t_grid() if t_grid is None else t_grid)
    p = float(nl.p)
    f, F = nl.f(t), nl.F(t)
    abs_t = np.abs(t)
    rnd = 64 * np.finfo(float).eps

    # growth bound with a1 = sup_{|t|<=1}|f|, a2 = sup_{|t|>=1} |f|/|t|^(p-1)
    small, big = abs_t <= 1.0, abs_t >= 1.0
    a1 = float(np.max(np.abs(f[small]))) if small.any() else 0.0
    a2 = float(np.max(np.abs(f[big]) / abs_t[big] ** (p - 1.0))) if big.any() else 0.0
    if isinstance(nl, PowerNonlinearity):
        a1 = max(a1, nl.a)
        a2 = max(a2, nl.a)
    envelope = a1 + a2 * abs_t ** (p - 1.0)
    bad = np.abs(f) > envelope * (1 + rnd)
    subcritical = bookkeeping.is_subcritical(p)
    ar1 = HypothesisCheck(
        holds=bool(subcritical and a1 > 0 and a2 > 0 and not bad.any()),
        constants={"a1": a1, "a2": a2, "p": p, "critical_exponent": bookkeeping.critical_exponent},
        witness=float(t[np.argmax(bad)]) if bad.any() else None,
        note="" if subcritical else "p is not in (2, critical exponent)",
    )

    # f(t)/t -> 0 along t = 2^-m
    dyadic = 2.0 ** -np.arange(0, 61)
    ratio = np.abs(nl.f(dyadic) / dyadic)
    tail = ratio[-10:]
    ar2_ok = bool(tail[-1] <= 1e-8 * max(ratio[0], 1.0) and np.all(np.diff(tail) <= rnd * tail[:-1]))
    ar2 = HypothesisCheck(holds=ar2_ok, constants={"smallest_t": float(dyadic[-1]), "ratio_at_smallest_t": float(tail[-1])},
                          witness=None if ar2_ok else float(dyadic[-1]))

    # 0 < theta F <= f t for |t| > r
    ft = f * t
    outside = abs_t > r
    if theta is None:
        theta = p
    theta = float(theta)
    pos_fail = outside & (F <= _POS_FLOOR)
    ineq_fail = outside & (theta * F > ft + rnd * np.abs(ft))
    fail = pos_fail | ineq_fail
    ar3 = HypothesisCheck(
        holds=bool(theta > 2.0 and not fail.any()),
        constants={"theta": theta, "r": float(r), "max_gap_theta_F_minus_ft": float(np.max(theta * F[outside] - ft[outside]))},
        witness=float(t[np.argmax(fail)]) if fail.any() else None,
        note="" if theta > 2.0 else "theta must exceed 2",
    )

    # F >= a3 |t|^theta_tilde - a4 with a4 >= 0
    theta_t = theta
    a3 = float(np.min(F[big] / abs_t[big] ** theta_t)) if big.any() else 0.0
    deficit = a3 * abs_t**theta_t - F
    a4 = float(max(0.0, np.max(deficit)))
    if a4 <= rnd * max(1.0, float(np.max(np.abs(F)))):
        a4 = 0.0
    ar4 = HypothesisCheck(
        holds=bool(a3 > 0 and theta_t > 2.0),
        constants={"theta_tilde": theta_t, "a3": a3, "a4": a4},
        witness=None if a3 > 0 else float(t[np.argmin(F)]),
    )

    neg = F < 0
    ar5 = HypothesisCheck(holds=not neg.any(), constants={"min_F": float(F.min())},
                          witness=float(t[np.argmax(neg)]) if neg.any() else None)

    grid = {"T": float(T), "n_samples": int(t.size), "min_abs_nonzero": float(np.min(abs_t[abs_t > 0]))}
    return ARReport(ar1, ar2, ar3, ar4, ar5, grid)


def sv12_check(nl, eps: float, t_grid=None) -> float:
    """Smallest grid-certified ``delta`` with ``|F| <= eps t^2 + delta |t|^p``
    and ``|f| <= 2 eps |t| + p delta |t|^(p-1)``.

    Raises :class:`HypothesisViolation` when the required ``delta`` keeps
    growing toward the end of the grid (growth faster than ``|t|^p``).
    """
    if not eps > 0:
        raise DomainError("eps must be > 0")
    t = np.asarray(default_t_grid() if t_grid is None else t_grid, dtype=float)
    p = float(nl.p)
    abs_t = np.abs(t[t != 0])
    tt = t[t != 0]
    need_F = np.maximum(np.abs(nl.F(tt)) - eps * abs_t**2, 0.0) / abs_t**p
    need_f = np.maximum(np.abs(nl.f(tt)) - 2.0 * eps * abs_t, 0.0) / (p * abs_t ** (p - 1.0))
    need = np.maximum(need_F, need_f)
    delta = float(need.max()) if need.size else 0.0

    # eps-free envelopes must stay bounded: increments over dyadic blocks have to shrink
    T = abs_t.max()
    probe = np.array([T / 4.0, T / 2.0, T])
    for env_fn in (lambda q: np.abs(nl.F(q)) / q**p, lambda q: np.abs(nl.f(q)) / q ** (p - 1.0)):
        env = np.maximum(env_fn(probe), env_fn(-probe))
        inc1, inc2 = env[1] - env[0], env[2] - env[1]
        if inc2 > 1e-12 * max(env[2], 1e-300) and inc2 >= inc1 * (1.0 - 1e-9):
            raise HypothesisViolation(
                f"no finite delta certifies the bound at eps={eps}: growth exceeds |t|^p near |t|={T}",
                witness=float(T),
            )
    return delta


def c_r_constant(r: float, p: float, theta: float, delta1: float, omega_length: float) -> float:
    """``(2 r^2 + p delta(1) r^p + theta r^2 + theta delta(1) r^p) |omega|``."""
    return (2 * r**2 + p * delta1 * r**p + theta * r**2 + theta * delta1 * r**p) * omega_length
