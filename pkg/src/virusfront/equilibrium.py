"""Half-line steady states by domain continuation, and the bound chain.

Steady states on [0, inf) are approximated by solving on [0, l] and
doubling l until the restriction to a fixed window [0, L] stops moving.
The grid spacing is pinned by the window resolution so restrictions of
successive solves are node-aligned and comparable without interpolation.

``build_chain`` assembles the two-sided squeeze used to certify spreading:

1. ``upper_u1``  -- uninfected cells with no infection drain (their largest
   possible profile);
2. ``upper_u23`` -- infected/virus pair driven by that generous cell supply
   (largest pair profiles);
3. ``lower_u1``  -- uninfected cells suppressed by the upper virus profile
   (their smallest profile);
4. ``lower_u23`` -- pair driven by that depleted cell supply (smallest pair
   profiles), which exists only under the strengthened threshold
   R0 + sqrt(R0) > b/a.

Long-run solutions of the moving-front problem are expected to settle
between the lower and upper links on any fixed window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .bvp import PAIR, SCALAR, TRIPLE, BvpSpec, Grid, Profile, solve_robust
from .errors import ContinuationError, SolverError, ThresholdError
from .model import (
    ModelParams,
    basic_reproduction_number,
    farfield_limits,
    persistence_condition,
    ubar1_closed_form,
    udbar1_farfield,
)

__all__ = [
    "HalfLineSolution",
    "EquilibriumChain",
    "continue_to_halfline",
    "build_chain",
    "solve_full_equilibrium",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HalfLineSolution:
    """A half-line steady state, recorded on the comparison window.

    ``profile`` lives on [0, window]; ``farfield`` holds the measured
    plateau per component (mean of the full profile over the subinterval
    [0.8, 0.9] of the final truncation length); ``converged_l`` is the
    truncation length at which the window stopped moving.
    """

    window: float
    profile: Profile
    farfield: tuple
    converged_l: float

    def extended(self, grid: Grid, comp: int = 0) -> np.ndarray:
        """Sample one component on a longer node-aligned grid, extending by
        the far-field constant beyond the window."""
        own = self.profile.grid
        if abs(grid.dx - own.dx) > 1e-12 * own.dx:
            raise ValueError("extension requires the same grid spacing")
        out = np.full(grid.n + 2, float(self.farfield[comp]))
        m = min(own.n + 2, grid.n + 2)
        out[:m] = self.profile.values[comp, :m]
        return out


def _plateau(values: np.ndarray, nodes: np.ndarray, l: float) -> tuple:
    sel = (nodes >= 0.8 * l) & (nodes <= 0.9 * l)
    return tuple(float(np.mean(values[i, sel])) for i in range(values.shape[0]))


def continue_to_halfline(
    spec_builder,
    window_grid: Grid,
    rtol: float = 1e-6,
    l0: float | None = None,
    l_max: float | None = None,
) -> HalfLineSolution:
    """Solve on doubling truncations until the window restriction settles.

    Parameters
    ----------
    spec_builder : callable
        Maps a :class:`Grid` on [0, l] to the :class:`BvpSpec` to solve
        there (boundary data may depend on l).
    window_grid : Grid
        The comparison window [0, L]; its spacing is reused for every
        truncation so restrictions are node-aligned.
    rtol : float
        Relative max-norm change of the restriction between consecutive
        doublings below which continuation stops.
    l0, l_max : float
        First truncation length (must exceed the window) and the cap at
        which :class:`ContinuationError` is raised.

    Notes
    -----
    For the pair coupling the driving profile must sit above threshold at
    its far end (``b*k*rho(l) > c*q``), otherwise no positive pair exists
    and :class:`ThresholdError` is raised.
    """
    L, dx = window_grid.l, window_grid.dx
    if l0 is None:
        l0 = 4.0 * L
    if l_max is None:
        l_max = 64.0 * l0
    if not (l0 > L):
        raise ValueError("first truncation length must exceed the window")
    p = None
    prev = None
    l = float(l0)
    while l <= l_max * (1.0 + 1e-9):
        n_l = int(round(l / dx)) - 1
        grid = Grid((n_l + 1) * dx, n_l)
        spec = spec_builder(grid)
        p = spec.params
        if spec.coupling == PAIR:
            beta_end = float(spec.rho[-1])
            if p.b * p.k * beta_end <= p.c * p.q:
                raise ThresholdError(
                    "driving profile sits at/below threshold at the far end "
                    f"(b*k*rho(l) = {p.b * p.k * beta_end:g} <= c*q = {p.c * p.q:g})"
                )
        sol = solve_robust(spec)
        restr = sol.values[:, : window_grid.n + 2]
        if prev is not None:
            scale = max(float(np.max(np.abs(restr))), 1e-300)
            change = float(np.max(np.abs(restr - prev))) / scale
            log.debug("continuation l=%.6g window change %.3e", grid.l, change)
            if change < rtol:
                return HalfLineSolution(
                    window=L,
                    profile=Profile(window_grid, restr),
                    farfield=_plateau(sol.values, grid.nodes, grid.l),
                    converged_l=grid.l,
                )
        prev = restr
        l *= 2.0
    raise ContinuationError(
        f"window still moving at l_max={l_max:g} (rtol={rtol:g})"
    )


@dataclass(frozen=True)
class EquilibriumChain:
    """The four half-line links bounding long-run behaviour, ordered
    lower_u1 <= upper_u1 (cells) and lower pair <= upper pair.

    ``lower_u23`` is ``None`` when the strengthened threshold fails; the
    chain is then incomplete and only the upper squeeze is available.
    """

    params: ModelParams
    r0: float
    persistence_ok: bool
    upper_u1: HalfLineSolution
    upper_u23: HalfLineSolution
    lower_u1: HalfLineSolution
    lower_u23: HalfLineSolution | None

    @property
    def complete(self) -> bool:
        return self.lower_u23 is not None

    def summary(self) -> dict:
        """JSON-ready digest: threshold numbers, measured vs predicted far
        fields, converged truncation lengths, and both candidate orderings
        of the cell bounds (the adopted one puts the suppressed profile at
        the bottom)."""
        p_far = {
            "upper_u1": self.upper_u1.farfield,
            "upper_u23": self.upper_u23.farfield,
            "lower_u1": self.lower_u1.farfield,
        }
        conv = {
            "upper_u1": self.upper_u1.converged_l,
            "upper_u23": self.upper_u23.converged_l,
            "lower_u1": self.lower_u1.converged_l,
        }
        if self.complete:
            p_far["lower_u23"] = self.lower_u23.farfield
            conv["lower_u23"] = self.lower_u23.converged_l
        p = self.params
        predicted = {
            "upper_u1": (p.theta / p.a,),
            "upper_u23": farfield_limits(p, p.theta / p.a),
            "lower_u1": (udbar1_farfield(p),),
        }
        if self.complete:
            predicted["lower_u23"] = farfield_limits(p, udbar1_farfield(p))
        errors = {
            k: max(
                abs(m - t) / max(abs(t), 1e-300)
                for m, t in zip(p_far[k], predicted[k])
            )
            for k in predicted
        }
        lo = self.lower_u1.profile.values[0]
        up = self.upper_u1.profile.values[0]
        return {
            "R0": self.r0,
            "cond_2_26": self.persistence_ok,
            "farfields": {k: list(v) for k, v in p_far.items()},
            "farfields_predicted": {k: list(v) for k, v in predicted.items()},
            "farfield_max_rel_error": errors,
            "converged_l": conv,
            "cell_bound_ordering": {
                "adopted": "lower_u1 <= upper_u1",
                "lower_below_upper": bool(np.all(lo <= up + 1e-9)),
                "upper_below_lower": bool(np.all(up <= lo + 1e-9)),
            },
        }


def build_chain(
    p: ModelParams,
    window: float = 10.0,
    n: int = 400,
    rtol: float = 1e-6,
    l0: float | None = None,
    l_max: float | None = None,
) -> EquilibriumChain:
    """Assemble the four-link bound chain on a common window.

    Requires R0 > 1 (below that no positive pair exists anywhere and
    :class:`ThresholdError` is raised).  Each link is continued to the
    half line with the previous link's profile as frozen coefficient,
    extended beyond the window by its measured far field.
    """
    r0 = basic_reproduction_number(p)
    if r0 <= 1.0:
        raise ThresholdError(f"R0 = {r0:g} <= 1: no positive equilibrium chain")
    wg = Grid(window, n)
    if l0 is None:
        l0 = max(
            40.0 * math.sqrt(max(p.diffusivities) / min(p.a, p.c, p.q)),
            4.0 * window,
        )

    def scalar_free(grid: Grid) -> BvpSpec:
        return BvpSpec(
            grid=grid,
            params=p,
            coupling=SCALAR,
            right_values=(ubar1_closed_form(p, p.d1, grid.l),),
            diffusivities=(p.d1,),
        )

    upper_u1 = continue_to_halfline(scalar_free, wg, rtol, l0, l_max)
    log.info("chain link upper_u1 converged at l=%.6g", upper_u1.converged_l)

    # Right closure: pin the truncation to the known limit values so the
    # plateau is clean at moderate l.  A zero closure would converge to the
    # same window restriction but its boundary layer decays slowly and
    # pollutes the far-field estimate unless l is several times larger.
    upper_limits = farfield_limits(p, float(upper_u1.farfield[0]))

    def pair_upper(grid: Grid) -> BvpSpec:
        return BvpSpec(
            grid=grid,
            params=p,
            coupling=PAIR,
            right_values=upper_limits,
            rho=upper_u1.extended(grid, 0),
        )

    upper_u23 = continue_to_halfline(pair_upper, wg, rtol, l0, l_max)
    log.info("chain link upper_u23 converged at l=%.6g", upper_u23.converged_l)

    suppressed = udbar1_farfield(p)

    def scalar_suppressed(grid: Grid) -> BvpSpec:
        return BvpSpec(
            grid=grid,
            params=p,
            coupling=SCALAR,
            right_values=(suppressed,),
            rho=upper_u23.extended(grid, 1),
            diffusivities=(p.d1,),
        )

    lower_u1 = continue_to_halfline(scalar_suppressed, wg, rtol, l0, l_max)
    log.info("chain link lower_u1 converged at l=%.6g", lower_u1.converged_l)

    lower_u23 = None
    ok = persistence_condition(p)
    if ok:

        lower_limits = farfield_limits(p, float(lower_u1.farfield[0]))

        def pair_lower(grid: Grid) -> BvpSpec:
            return BvpSpec(
                grid=grid,
                params=p,
                coupling=PAIR,
                right_values=lower_limits,
                rho=lower_u1.extended(grid, 0),
            )

        lower_u23 = continue_to_halfline(pair_lower, wg, rtol, l0, l_max)
        log.info("chain link lower_u23 converged at l=%.6g", lower_u23.converged_l)
    else:
        log.info("strengthened threshold fails; chain left incomplete")

    return EquilibriumChain(
        params=p,
        r0=r0,
        persistence_ok=ok,
        upper_u1=upper_u1,
        upper_u23=upper_u23,
        lower_u1=lower_u1,
        lower_u23=lower_u23,
    )


def solve_full_equilibrium(
    p: ModelParams,
    window: float = 10.0,
    n: int = 400,
    rtol: float = 1e-6,
    right_bc: str = "chain",
    l0: float | None = None,
    l_max: float | None = None,
) -> HalfLineSolution:
    """Continue the fully coupled three-species steady state to the half line.

    ``right_bc`` selects the truncation closure: ``"chain"`` pins the right
    boundary to the upper-chain far-field levels, ``"zero"`` to zero.  Both
    converge to the same window values; if the requested variant fails to
    converge the other is tried before giving up.  For R0 <= 1 the infected
    and virus components of the result are numerically zero.
    """
    if right_bc not in ("chain", "zero"):
        raise ValueError(f"right_bc must be 'chain' or 'zero', got {right_bc!r}")
    wg = Grid(window, n)
    if l0 is None:
        l0 = max(
            40.0 * math.sqrt(max(p.diffusivities) / min(p.a, p.c, p.q)),
            4.0 * window,
        )
    r0 = basic_reproduction_number(p)

    def builder_for(variant: str):
        if variant == "zero":
            rv = lambda grid: (0.0, 0.0, 0.0)  # noqa: E731
        else:
            if r0 > 1.0:
                pair_far = farfield_limits(p, p.theta / p.a)
            else:
                pair_far = (0.0, 0.0)
            rv = lambda grid: (  # noqa: E731
                ubar1_closed_form(p, p.d1, grid.l),
                pair_far[0],
                pair_far[1],
            )

        def build(grid: Grid) -> BvpSpec:
            return BvpSpec(
                grid=grid,
                params=p,
                coupling=TRIPLE,
                right_values=rv(grid),
            )

        return build

    variants = (right_bc, "zero" if right_bc == "chain" else "chain")
    last_err = None
    for variant in variants:
        try:
            return continue_to_halfline(builder_for(variant), wg, rtol, l0, l_max)
        except SolverError as err:
            last_err = err
            log.warning("full equilibrium with %s closure failed: %s", variant, err)
    raise last_err
