"""Kinetics and closed forms for the three-species infection model.

The model tracks uninfected target cells u1, infected cells u2 and free
virus u3.  Uninfected cells are produced at constant rate theta, die at
rate a and become infected by contact with virus through a saturating
incidence u1*u3/(1+u3).  Infected cells die at rate c and shed virus at a
rate that is itself damped by the ambient virus load, k*u2/(1+u3); virus
decays at rate q:

    f1 = theta - a*u1 - b*u1*u3/(1 + u3)
    f2 = b*u1*u3/(1 + u3) - c*u2
    f3 = k*u2/(1 + u3) - q*u3

Everything downstream (boundary-value solvers, the moving-front simulation,
regime classification) consumes these rates through this module, so the
sign conventions and the saturating factors live in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ThresholdError

__all__ = [
    "ModelParams",
    "StateTriple",
    "reaction",
    "basic_reproduction_number",
    "persistence_condition",
    "ubar1_closed_form",
    "farfield_limits",
    "udbar1_farfield",
    "homogeneous_fixed_point",
    "principal_eigenvalue",
    "domain_length_condition",
]


@dataclass(frozen=True)
class ModelParams:
    """Kinetic constants, diffusivities and front-response coefficients.

    All rates are per unit time; ``theta`` is a production rate per unit
    volume.  ``d1..d3`` are diffusivities of the three species, ``mu1..mu3``
    weight each species' boundary flux in the front expansion law, and
    ``h0`` is the initial front position.  Every entry must be positive
    and finite, except the front weights which may be zero (a frozen
    boundary is a legitimate limit case).
    """

    theta: float
    a: float
    b: float
    c: float
    k: float
    q: float
    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 1.0
    h0: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValueError(f"parameter {f.name!r} must be a number, got {v!r}")
            least = 0.0 if f.name in ("mu1", "mu2", "mu3") else None
            if not math.isfinite(v) or (v <= 0.0 if least is None else v < least):
                raise ValueError(f"parameter {f.name!r} must be positive and finite, got {v!r}")

    @property
    def diffusivities(self) -> tuple[float, float, float]:
        return (self.d1, self.d2, self.d3)

    @property
    def front_weights(self) -> tuple[float, float, float]:
        return (self.mu1, self.mu2, self.mu3)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelParams":
        """Build from a config mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {"theta", "a", "b", "c", "k", "q"} - set(raw)
        if missing:
            raise ValueError(f"missing required parameter keys: {sorted(missing)}")
        return cls(**{k: float(v) for k, v in raw.items()})


@dataclass(frozen=True)
class StateTriple:
    """A nonnegative (u1, u2, u3) state; components may be scalars or arrays."""

    u1: object
    u2: object
    u3: object

    def __post_init__(self):
        for name in ("u1", "u2", "u3"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            if np.any(v < 0.0):
                raise ValueError(f"{name} must be nonnegative")


def reaction(p: ModelParams, s: StateTriple, rho_override=None):
    """Evaluate the three kinetic rates at a state.

    Parameters
    ----------
    p : ModelParams
    s : StateTriple
        Scalar or array-valued state.
    rho_override : array_like, optional
        When given, the infection source in f2 uses this prescribed
        uninfected-cell density in place of ``s.u1`` (the infected/virus
        pair is then driven by a frozen coefficient).  In that mode f1 is
        meaningless and is returned as NaN.

    Returns
    -------
    (f1, f2, f3) : tuple
        Rates with the same shape as the state components.
    """
    u1 = np.asarray(s.u1, dtype=float)
    u2 = np.asarray(s.u2, dtype=float)
    u3 = np.asarray(s.u3, dtype=float)
    sat = u3 / (1.0 + u3)
    rho = u1 if rho_override is None else np.asarray(rho_override, dtype=float)
    f2 = p.b * rho * sat - p.c * u2
    f3 = p.k * u2 / (1.0 + u3) - p.q * u3
    if rho_override is None:
        f1 = p.theta - p.a * u1 - p.b * u1 * sat
    else:
        f1 = np.full_like(np.asarray(f2, dtype=float), np.nan)
        if f1.ndim == 0:
            f1 = float("nan")
    return f1, f2, f3


def basic_reproduction_number(p: ModelParams) -> float:
    """R0 = k*b*theta / (a*c*q), the expected secondary infections at the
    virus-free state.  Infection dies out for R0 <= 1 and can persist above."""
    return p.k * p.b * p.theta / (p.a * p.c * p.q)


def persistence_condition(p: ModelParams) -> bool:
    """True when R0 + sqrt(R0) > b/a.

    This is the strengthened threshold under which the full lower chain of
    equilibrium bounds exists, hence spreading of the infection can be
    certified by a two-sided squeeze rather than inferred.
    """
    r0 = basic_reproduction_number(p)
    return r0 + math.sqrt(r0) > p.b / p.a


def ubar1_closed_form(p: ModelParams, d: float, x):
    """Virus-free steady profile of the uninfected cells on the half line.

    With the cell density pinned to 0 at x = 0 and no infection sink, the
    steady state of ``theta - a*u1`` with diffusivity ``d`` is

        (theta/a) * (1 - exp(-x*sqrt(a/d))).

    ``d`` is an explicit argument; the equilibrium chain passes the species-1
    diffusivity ``p.d1``.
    """
    if d <= 0.0 or not math.isfinite(d):
        raise ValueError(f"diffusivity must be positive, got {d!r}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("x must be nonnegative")
    out = (p.theta / p.a) * (1.0 - np.exp(-x * math.sqrt(p.a / d)))
    return float(out) if out.ndim == 0 else out


def farfield_limits(p: ModelParams, beta: float) -> tuple[float, float]:
    """Far-field limits of the infected/virus pair driven by a constant
    uninfected-cell level ``beta``.

    Returns ``(u2_limit, u3_limit)`` where

        u3_limit = sqrt(b*k*beta/(c*q)) - 1
        u2_limit = b*beta*(1 - sqrt(c*q/(b*k*beta)))/c

    Raises
    ------
    ThresholdError
        If ``b*k*beta <= c*q`` (at or below threshold the pair has no
        positive far field).
    """
    if not (beta > 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be positive and finite, got {beta!r}")
    ratio = p.b * p.k * beta / (p.c * p.q)
    if ratio <= 1.0:
        raise ThresholdError(
            f"b*k*beta = {p.b * p.k * beta:g} does not exceed c*q = {p.c * p.q:g}; "
            "no positive far field exists"
        )
    u3 = math.sqrt(ratio) - 1.0
    u2 = p.b * beta * (1.0 - math.sqrt(1.0 / ratio)) / p.c
    return (u2, u3)


def udbar1_farfield(p: ModelParams) -> float:
    """Far-field level of the uninfected cells when suppressed by the
    worst-case (upper) virus plateau:

        theta*sqrt(R0) / ((a + b)*sqrt(R0) - b).

    Algebraically this is the root of ``theta - a*u - b*u*w/(1+w)`` with
    ``w = sqrt(R0) - 1``.  Raises ``ValueError`` when the denominator is
    not positive (the formula then has no meaning as a density).
    """
    s = math.sqrt(basic_reproduction_number(p))
    denom = (p.a + p.b) * s - p.b
    if denom <= 0.0:
        raise ValueError(f"denominator (a+b)*sqrt(R0)-b = {denom:g} is not positive")
    return p.theta * s / denom


def homogeneous_fixed_point(p: ModelParams, rho: float):
    """Positive space-homogeneous rest point of the pair kinetics driven by a
    constant cell level ``rho``:  ``(v, w)`` with

        w = sqrt(b*k*rho/(c*q)) - 1,   v = (q/k)*w*(1 + w).

    Returns ``None`` when ``b*k*rho/(c*q) <= 1`` (no positive rest point;
    returning None rather than (0, 0) keeps the threshold case loud).
    """
    if not (rho > 0.0 and math.isfinite(rho)):
        raise ValueError(f"rho must be positive and finite, got {rho!r}")
    ratio = p.b * p.k * rho / (p.c * p.q)
    if ratio <= 1.0:
        return None
    w = math.sqrt(ratio) - 1.0
    v = (p.q / p.k) * w * (1.0 + w)
    return (v, w)


def principal_eigenvalue(l: float) -> float:
    """Smallest Dirichlet eigenvalue of -u'' on (0, l): (pi/l)**2."""
    if not (l > 0.0 and math.isfinite(l)):
        raise ValueError(f"interval length must be positive, got {l!r}")
    return (math.pi / l) ** 2


def domain_length_condition(p: ModelParams, l: float, eps: float, beta: float) -> bool:
    """True when a domain of length ``l`` is long enough for the infected/virus
    pair to grow against diffusive leakage:

        b*k*(beta - eps) > (c + d2*lam1(l)) * (q + d3*lam1(l)),

    with lam1 the principal Dirichlet eigenvalue.  False for short domains,
    flips to true as ``l`` grows whenever ``b*k*(beta-eps) > c*q``.
    """
    if eps < 0.0 or eps >= beta:
        raise ValueError("eps must satisfy 0 <= eps < beta")
    lam = principal_eigenvalue(l)
    return p.b * p.k * (beta - eps) > (p.c + p.d2 * lam) * (p.q + p.d3 * lam)
