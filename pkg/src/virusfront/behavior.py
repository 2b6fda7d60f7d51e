"""Long-run regime classification from a finished simulation.

Three verdicts are possible:

* ``Extinction``            -- R0 <= 1, the infected/virus sup-norms have
  fallen below the extinction tolerance, and the cells have relaxed to
  their virus-free profile on the comparison window;
* ``PersistenceVerified``   -- R0 > 1, the strengthened threshold holds,
  and the final profiles sit inside the two-sided equilibrium squeeze on
  the window (within slack);
* ``PersistenceUnverified`` -- everything else: the one-sided regime
  (strengthened threshold fails, only the upper squeeze is checkable), or
  measured margins that fail their tolerance.  This is a first-class
  outcome, not an error.

Each measured criterion lands in ``evidence`` with its margin, so a failed
classification says exactly which bound broke and by how much.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .equilibrium import EquilibriumChain
from .fbsim import Trajectory
from .model import ModelParams, basic_reproduction_number, persistence_condition, ubar1_closed_form

__all__ = ["Criterion", "ClassificationResult", "classify"]

log = logging.getLogger(__name__)

EXTINCTION = "Extinction"
PERSISTENCE_VERIFIED = "PersistenceVerified"
PERSISTENCE_UNVERIFIED = "PersistenceUnverified"


@dataclass(frozen=True)
class Criterion:
    """One measured check: ``margin`` is how far inside the bound the worst
    node sits (negative = violated by that amount)."""

    passed: bool
    margin: float
    threshold: float
    detail: str = ""


@dataclass
class ClassificationResult:
    r0: float
    persistence_ok: bool
    regime: str
    evidence: dict = field(default_factory=dict)
    quiescent: bool = True

    def to_json_dict(self) -> dict:
        return {
            "R0": self.r0,
            "cond_2_26": self.persistence_ok,
            "regime": self.regime,
            "quiescent": self.quiescent,
            "evidence": {
                name: {
                    "passed": c.passed,
                    "margin": c.margin,
                    "threshold": c.threshold,
                    "detail": c.detail,
                }
                for name, c in self.evidence.items()
            },
        }


def _window_values(traj: Trajectory, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Final profiles interpolated onto a fine window grid (cubic, since the
    physical node spacing grows with the front)."""
    snap = traj.final_snapshot
    xmax = min(window, snap.h * (1.0 - 2.0 / (traj.n + 1)))
    xs = np.linspace(0.0, xmax, 401)
    vals = np.stack([CubicSpline(snap.x, snap.U[i])(xs) for i in range(3)])
    return xs, vals


def _quiescent(traj: Trajectory) -> tuple[bool, float]:
    """Worst relative sup-norm drift over the last 10% of observer times.

    Returns (all components below 1e-6, the worst measured drift).  Tiny
    absolute drifts (< 1e-8) are treated as settled regardless of scale so
    decayed components do not divide by their own noise.
    """
    m = traj.t.size
    tail = max(2, int(math.ceil(0.1 * m)))
    seg = traj.sup[:, -tail:]
    drift = np.abs(seg[:, -1] - seg[:, 0])
    scale = np.maximum(np.abs(seg[:, -1]), 1e-8)
    settled = (drift < 1e-8) | (drift / scale < 1e-6)
    worst = float(np.max(np.where(drift < 1e-8, 0.0, drift / scale)))
    return bool(np.all(settled)), worst


def classify(
    p: ModelParams,
    trajectory: Trajectory,
    chain: EquilibriumChain | None = None,
    window: float = 10.0,
    slack_rel: float = 0.02,
    slack_abs: float = 1e-3,
    extinction_tol: float = 1e-4,
) -> ClassificationResult:
    """Classify the long-run regime of a finished run.

    For R0 > 1 a :class:`EquilibriumChain` on the same window is required
    (``ValueError`` otherwise); the squeeze slack is ``slack_rel`` of the
    bounding profile plus ``slack_abs`` pointwise.  The function is pure
    measurement: it never mutates the trajectory and identical inputs give
    identical results.
    """
    r0 = basic_reproduction_number(p)
    pers_ok = persistence_condition(p)
    result = ClassificationResult(
        r0=r0, persistence_ok=pers_ok, regime=PERSISTENCE_UNVERIFIED
    )
    result.quiescent, worst_drift = _quiescent(trajectory)
    result.evidence["quiescence"] = Criterion(
        passed=result.quiescent,
        margin=1e-6 - worst_drift,
        threshold=1e-6,
        detail=(
            f"worst relative sup-norm drift {worst_drift:.3e} over the "
            "final 10% of the run"
            + ("" if result.quiescent else "; verdict rests on the time budget")
        ),
    )

    if r0 <= 1.0:
        sup2 = float(trajectory.sup[1, -1])
        sup3 = float(trajectory.sup[2, -1])
        result.evidence["extinction_sup_u2"] = Criterion(
            passed=sup2 <= extinction_tol,
            margin=extinction_tol - sup2,
            threshold=extinction_tol,
        )
        result.evidence["extinction_sup_u3"] = Criterion(
            passed=sup3 <= extinction_tol,
            margin=extinction_tol - sup3,
            threshold=extinction_tol,
        )
        xs, vals = _window_values(trajectory, window)
        ref = ubar1_closed_form(p, p.d1, xs)
        err = float(np.max(np.abs(vals[0] - ref)))
        result.evidence["u1_converges_to_virus_free_profile"] = Criterion(
            passed=err <= 1e-3,
            margin=1e-3 - err,
            threshold=1e-3,
            detail=f"max deviation {err:.3e} on [0, {xs[-1]:.3g}]",
        )
        keys = (
            "extinction_sup_u2",
            "extinction_sup_u3",
            "u1_converges_to_virus_free_profile",
        )
        all_ok = all(result.evidence[k].passed for k in keys)
        result.regime = EXTINCTION if all_ok else PERSISTENCE_UNVERIFIED
        return result

    if chain is None:
        raise ValueError("classification above threshold requires an equilibrium chain")

    xs, vals = _window_values(trajectory, window)
    win_nodes = chain.upper_u1.profile.grid.nodes
    keep = win_nodes <= xs[-1]
    xw = win_nodes[keep]
    sim = np.stack([CubicSpline(xs, vals[i])(xw) for i in range(3)])

    uppers = [
        chain.upper_u1.profile.values[0][keep],
        chain.upper_u23.profile.values[0][keep],
        chain.upper_u23.profile.values[1][keep],
    ]
    for i, bound in enumerate(uppers):
        slack = slack_rel * bound + slack_abs
        worst = float(np.max(sim[i] - (bound + slack)))
        result.evidence[f"upper_squeeze_u{i + 1}"] = Criterion(
            passed=worst <= 0.0,
            margin=-worst,
            threshold=0.0,
            detail=f"slack {slack_rel:g}*bound + {slack_abs:g}",
        )

    if pers_ok and chain.complete:
        lowers = [
            chain.lower_u1.profile.values[0][keep],
            chain.lower_u23.profile.values[0][keep],
            chain.lower_u23.profile.values[1][keep],
        ]
        for i, bound in enumerate(lowers):
            slack = slack_rel * bound + slack_abs
            worst = float(np.max((bound - slack) - sim[i]))
            result.evidence[f"lower_squeeze_u{i + 1}"] = Criterion(
                passed=worst <= 0.0,
                margin=-worst,
                threshold=0.0,
                detail=f"slack {slack_rel:g}*bound + {slack_abs:g}",
            )
        keys = [f"{side}_squeeze_u{i}" for side in ("upper", "lower") for i in (1, 2, 3)]
        all_ok = all(result.evidence[k].passed for k in keys)
        result.regime = PERSISTENCE_VERIFIED if all_ok else PERSISTENCE_UNVERIFIED
    else:
        result.regime = PERSISTENCE_UNVERIFIED
        result.evidence["lower_squeeze"] = Criterion(
            passed=False, margin=0.0, threshold=0.0,
            detail="strengthened threshold fails; lower squeeze unavailable",
        )

    log.info("classified regime=%s (R0=%.4g)", result.regime, r0)
    return result
