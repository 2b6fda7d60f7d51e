"""Two-point boundary-value solvers for the steady states of the model.

Steady profiles solve ``-d_i u_i'' = f_i(u)`` on (0, l) with homogeneous
Dirichlet data on the left and prescribed values on the right.  Three
couplings occur:

* ``scalar-logistic``  -- one component, ``theta - a*u`` optionally damped
  by a frozen virus profile ``w(x)``: ``theta - a*u - b*u*w/(1+w)``;
* ``pair-given-rho``   -- the infected/virus pair (u2, u3) driven by a frozen
  uninfected-cell profile ``rho(x)``;
* ``full-triple``      -- all three species coupled.

Discretisation is second-order central differences on a uniform grid.
``solve_newton`` is the workhorse (damped Newton, banded direct factor-
isation); ``monotone_bracket`` refines coupled lower/upper solution pairs
with the classic shifted-operator sweep, which also serves as a globaliser
when Newton is started from a poor guess; ``solve_alternating`` realises
the two-step fixed-point map that alternates linear solves between the two
pair components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConsistencyError, IterationError, PositivityError
from .model import ModelParams

__all__ = [
    "Grid",
    "Profile",
    "BvpSpec",
    "SCALAR",
    "PAIR",
    "TRIPLE",
    "residual",
    "default_initial",
    "solve_newton",
    "solve_robust",
    "solve_alternating",
    "monotone_bracket",
    "boundary_flux",
    "write_profile_csv",
]

SCALAR = "scalar-logistic"
PAIR = "pair-given-rho"
TRIPLE = "full-triple"

_NCOMP = {SCALAR: 1, PAIR: 2, TRIPLE: 3}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, l] with n interior nodes (n+2 including ends)."""

    l: float
    n: int

    def __post_init__(self):
        if not (self.l > 0.0 and math.isfinite(self.l)):
            raise ValueError(f"domain length must be positive, got {self.l!r}")
        if self.n < 3:
            raise ValueError(f"need at least 3 interior nodes, got {self.n}")

    @property
    def dx(self) -> float:
        return self.l / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.l, self.n + 2)


class Profile:
    """Immutable grid function with one, two or three components.

    ``values`` has shape (ncomp, n+2) including the boundary nodes.
    """

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.shape[1] != grid.n + 2:
            raise ValueError(
                f"values have {values.shape[1]} nodes, grid has {grid.n + 2}"
            )
        if values.shape[0] not in (1, 2, 3):
            raise ValueError("profiles carry 1..3 components")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> np.ndarray:
        return self.values[i]

    @classmethod
    def constant(cls, grid: Grid, levels, right_values=None) -> "Profile":
        """Constant interior levels with zero left / given right boundary."""
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        vals = np.repeat(levels[:, None], grid.n + 2, axis=1)
        vals[:, 0] = 0.0
        if right_values is not None:
            vals[:, -1] = np.asarray(right_values, dtype=float)
        return cls(grid, vals)


@dataclass(frozen=True)
class BvpSpec:
    """Everything needed to pose one steady-state problem.

    ``rho`` is an optional frozen coefficient sampled on the grid (n+2
    values): the prescribed cell density for the pair coupling, or the
    frozen virus profile damping the scalar equation.  ``right_values``
    are the Dirichlet data at x = l (the left end is always 0).
    ``diffusivities`` defaults to the parameter set's values appropriate
    for the coupling: (d1,), (d2, d3) or (d1, d2, d3).
    """

    grid: Grid
    params: ModelParams
    coupling: str
    right_values: tuple
    rho: np.ndarray | None = None
    diffusivities: tuple | None = None

    def __post_init__(self):
        if self.coupling not in _NCOMP:
            raise ValueError(f"unknown coupling {self.coupling!r}")
        nc = _NCOMP[self.coupling]
        if len(self.right_values) != nc:
            raise ValueError(
                f"{self.coupling} needs {nc} right boundary values, got {len(self.right_values)}"
            )
        if any(v < 0.0 for v in self.right_values):
            raise ValueError("right boundary values must be nonnegative")
        if self.rho is not None:
            rho = np.asarray(self.rho, dtype=float)
            if rho.shape != (self.grid.n + 2,):
                raise ValueError("rho must be sampled on the full grid (n+2 values)")
            if np.any(rho < 0.0):
                raise ValueError("rho must be nonnegative")
            object.__setattr__(self, "rho", rho)
        if self.coupling == PAIR and self.rho is None:
            raise ValueError("pair coupling requires a rho profile")
        if self.diffusivities is None:
            p = self.params
            d = {SCALAR: (p.d1,), PAIR: (p.d2, p.d3), TRIPLE: (p.d1, p.d2, p.d3)}
            object.__setattr__(self, "diffusivities", d[self.coupling])
        elif len(self.diffusivities) != nc:
            raise ValueError("one diffusivity per component")

    @property
    def ncomp(self) -> int:
        return _NCOMP[self.coupling]


def _rates(spec: BvpSpec, U: np.ndarray, nodes: slice) -> np.ndarray:
    """Kinetic rates at the given node slice; U has shape (ncomp, m).

    Virus values are clipped at 0 before entering the saturating factors so
    transient Newton iterates cannot step across the 1/(1+u3) pole.
    """
    p = spec.params
    rho = None if spec.rho is None else spec.rho[nodes]
    if spec.coupling == SCALAR:
        u = U[0]
        if rho is None:
            return (p.theta - p.a * u)[None, :]
        w = np.maximum(rho, 0.0)
        return (p.theta - p.a * u - p.b * u * w / (1.0 + w))[None, :]
    if spec.coupling == PAIR:
        u2, u3 = U
        u3c = np.maximum(u3, 0.0)
        f2 = p.b * rho * u3c / (1.0 + u3c) - p.c * u2
        f3 = p.k * u2 / (1.0 + u3c) - p.q * u3
        return np.stack([f2, f3])
    u1, u2, u3 = U
    u3c = np.maximum(u3, 0.0)
    sat = u3c / (1.0 + u3c)
    f1 = p.theta - p.a * u1 - p.b * u1 * sat
    f2 = p.b * u1 * sat - p.c * u2
    f3 = p.k * u2 / (1.0 + u3c) - p.q * u3
    return np.stack([f1, f2, f3])


def _rate_jacobian(spec: BvpSpec, U: np.ndarray, nodes: slice) -> np.ndarray:
    """Pointwise Jacobian d f_i / d u_j, shape (ncomp, ncomp, m)."""
    p = spec.params
    m = U.shape[1]
    rho = None if spec.rho is None else spec.rho[nodes]
    if spec.coupling == SCALAR:
        J = np.empty((1, 1, m))
        if rho is None:
            J[0, 0] = -p.a
        else:
            w = np.maximum(rho, 0.0)
            J[0, 0] = -p.a - p.b * w / (1.0 + w)
        return J
    if spec.coupling == PAIR:
        u2, u3 = U
        u3c = np.maximum(u3, 0.0)
        live = (u3 > 0.0).astype(float)  # clipped nodes feel no virus sensitivity
        J = np.zeros((2, 2, m))
        J[0, 0] = -p.c
        J[0, 1] = p.b * rho / (1.0 + u3c) ** 2 * live
        J[1, 0] = p.k / (1.0 + u3c)
        J[1, 1] = -p.k * u2 / (1.0 + u3c) ** 2 * live - p.q
        return J
    u1, u2, u3 = U
    u3c = np.maximum(u3, 0.0)
    live = (u3 > 0.0).astype(float)
    sat = u3c / (1.0 + u3c)
    dsat = live / (1.0 + u3c) ** 2
    J = np.zeros((3, 3, m))
    J[0, 0] = -p.a - p.b * sat
    J[0, 2] = -p.b * u1 * dsat
    J[1, 0] = p.b * sat
    J[1, 1] = -p.c
    J[1, 2] = p.b * u1 * dsat
    J[2, 1] = p.k / (1.0 + u3c)
    J[2, 2] = -p.k * u2 * dsat - p.q
    return J


def residual(spec: BvpSpec, values: np.ndarray) -> np.ndarray:
    """Centered-difference residual d_i*u'' + f_i at the interior nodes.

    ``values`` has shape (ncomp, n+2) including boundary nodes; the result
    has shape (ncomp, n).  Zero residual means the discrete steady state is
    satisfied exactly.
    """
    dx2 = spec.grid.dx ** 2
    d = np.asarray(spec.diffusivities)[:, None]
    lap = (values[:, :-2] - 2.0 * values[:, 1:-1] + values[:, 2:]) / dx2
    return d * lap + _rates(spec, values[:, 1:-1], slice(1, -1))


def _apply_bc(spec: BvpSpec, values: np.ndarray) -> np.ndarray:
    values[:, 0] = 0.0
    values[:, -1] = np.asarray(spec.right_values, dtype=float)
    return values


def _caps(spec: BvpSpec) -> np.ndarray:
    """A-priori upper levels per component (constant upper solutions)."""
    p = spec.params
    if spec.coupling == SCALAR:
        cap = max(p.theta / p.a, max(spec.right_values))
        return np.array([cap])
    if spec.coupling == PAIR:
        beta_m = float(np.max(spec.rho))
        c2 = p.b * beta_m / p.c
        c3 = p.b * p.k * beta_m / (p.c * p.q)
        return np.maximum(np.array([c2, c3]), np.asarray(spec.right_values))
    r0 = p.k * p.b * p.theta / (p.a * p.c * p.q)
    s = math.sqrt(r0)
    c1 = p.theta / p.a
    c2 = max(p.b * p.theta * (s - 1.0) / (p.a * p.c * s), 0.0) if r0 > 1.0 else 0.0
    c3 = max(s - 1.0, 0.0)
    return np.maximum(np.array([c1, c2, c3]), np.asarray(spec.right_values))


def default_initial(spec: BvpSpec) -> Profile:
    """Constant-cap initial guess with the boundary data imposed."""
    return Profile.constant(spec.grid, _caps(spec), spec.right_values)


def _band_solve(spec: BvpSpec, values: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Newton correction from the banded linearisation (interleaved order)."""
    nc, n = r.shape
    dx2 = spec.grid.dx ** 2
    d = np.asarray(spec.diffusivities)
    Jr = _rate_jacobian(spec, values[:, 1:-1], slice(1, -1))
    bw = nc
    N = nc * n
    ab = np.zeros((2 * bw + 1, N))
    for i in range(nc):
        for j in range(nc):
            # same-node coupling: matrix row (node,i), col (node,j)
            diag = Jr[i, j].copy()
            if i == j:
                diag -= 2.0 * d[i] / dx2
            ab[bw + i - j, j::nc][:n] = diag
    # off-node diffusion couplings (same component, neighbour nodes)
    for i in range(nc):
        off = d[i] / dx2
        # right neighbour: col - row = nc
        ab[bw - nc, nc + i :: nc][: n - 1] = off
        # left neighbour: row - col = nc
        ab[bw + nc, i::nc][: n - 1] = off
    rhs = -r.T.ravel()
    delta = solve_banded((bw, bw), ab, rhs)
    return delta.reshape(n, nc).T


def solve_newton(
    spec: BvpSpec,
    initial: Profile | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Profile:
    """Damped Newton iteration for the discrete steady state.

    Each step is accepted only if it strictly reduces the max-norm residual;
    the step is halved up to 30 times before giving up.  On convergence the
    interior values must be nonnegative (tiny negatives below 1e-13 are
    clipped; anything larger signals a spurious root and raises
    :class:`PositivityError`).

    Returns the converged :class:`Profile` (residual <= tol at every
    interior node).
    """
    if initial is None:
        initial = default_initial(spec)
    values = _apply_bc(spec, np.array(initial.values, dtype=float))
    r = residual(spec, values)
    rnorm = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if rnorm <= tol:
            break
        delta = _band_solve(spec, values, r)
        lam, accepted = 1.0, False
        for _ in range(30):
            trial = values.copy()
            trial[:, 1:-1] += lam * delta
            rt = residual(spec, trial)
            rtnorm = float(np.max(np.abs(rt)))
            if rtnorm < rnorm:
                values, r, rnorm = trial, rt, rtnorm
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise IterationError(
                f"Newton stalled at residual {rnorm:.3e} (no damped step reduced it)",
                residual=rnorm,
            )
    else:
        if rnorm > tol:
            raise IterationError(
                f"Newton did not reach tol={tol:g} in {max_iter} iterations "
                f"(residual {rnorm:.3e})",
                residual=rnorm,
            )
    vmin = float(values[:, 1:-1].min())
    if vmin < -1e-13:
        raise PositivityError(
            f"converged profile has negative interior values (min {vmin:.3e}); "
            "spurious root"
        )
    if vmin < 0.0:
        values = np.maximum(values, 0.0)
    return Profile(spec.grid, values)


def _shifted_solve(grid: Grid, d: float, M: float, rhs: np.ndarray, right: float) -> np.ndarray:
    """Solve (-d*u'' + M*u) = rhs on the interior, u(0)=0, u(l)=right."""
    n = grid.n
    dx2 = grid.dx ** 2
    ab = np.zeros((3, n))
    ab[0, 1:] = -d / dx2
    ab[1, :] = 2.0 * d / dx2 + M
    ab[2, :-1] = -d / dx2
    b = rhs.copy()
    b[-1] += d / dx2 * right
    u = np.empty(n + 2)
    u[0], u[-1] = 0.0, right
    u[1:-1] = solve_banded((1, 1), ab, b)
    return u


def _bracket_constants(spec: BvpSpec, upper: np.ndarray) -> np.ndarray:
    """Shift constants making f_i + M_i*u_i nondecreasing in its own variable
    over the box [0, upper]."""
    p = spec.params
    if spec.coupling == SCALAR:
        return np.array([p.a + p.b])
    if spec.coupling == PAIR:
        cap2 = float(np.max(upper[0]))
        return np.array([p.c, p.q + p.k * cap2])
    cap2 = float(np.max(upper[1]))
    return np.array([p.a + p.b, p.c, p.q + p.k * cap2])


def _bracket_sources(spec: BvpSpec, lo: np.ndarray, up: np.ndarray, nodes: slice):
    """Right-hand sides for one coupled sweep: each component's rate is
    evaluated with cooperating neighbours from its own side of the bracket
    and the one antagonistic coupling (cells vs virus) from the other side."""
    if spec.coupling != TRIPLE:
        f_up = _rates(spec, up, nodes)
        f_lo = _rates(spec, lo, nodes)
        return f_lo, f_up
    # cells are suppressed by virus, so the upper cell equation borrows the
    # lower virus profile and vice versa
    up_mix = np.stack([up[0], up[1], lo[2]])
    lo_mix = np.stack([lo[0], lo[1], up[2]])
    f_up = _rates(spec, up, nodes)
    f_lo = _rates(spec, lo, nodes)
    f_up[0] = _rates(spec, up_mix, nodes)[0]
    f_lo[0] = _rates(spec, lo_mix, nodes)[0]
    return f_lo, f_up


def monotone_bracket(
    spec: BvpSpec, lower: Profile, upper: Profile, sweeps: int = 1
) -> tuple[Profile, Profile]:
    """Refine an ordered lower/upper solution pair by shifted-operator sweeps.

    Each sweep solves, for every component and each side of the bracket,

        (-d_i u'' + M_i u) = M_i u_old + f_i(...)

    with the antagonistic cell/virus coupling taken from the opposite side.
    The upper sequence is nonincreasing, the lower nondecreasing, and any
    exact discrete solution that starts inside the bracket stays inside.

    Raises ``ValueError`` if the pair is not ordered on entry and
    :class:`ConsistencyError` if ordering degrades beyond 1e-10 during the
    sweeps (which would mean the inputs were not genuine bracket solutions).
    """
    if lower.grid != spec.grid or upper.grid != spec.grid:
        raise ValueError("bracket profiles must live on the problem grid")
    lo = np.array(lower.values, dtype=float)
    up = np.array(upper.values, dtype=float)
    if np.any(lo > up + 1e-14):
        raise ValueError("bracket not ordered on entry (lower > upper somewhere)")
    d = np.asarray(spec.diffusivities)
    M = _bracket_constants(spec, up)
    interior = slice(1, -1)
    for _ in range(sweeps):
        f_lo, f_up = _bracket_sources(spec, lo[:, 1:-1], up[:, 1:-1], interior)
        new_up = up.copy()
        new_lo = lo.copy()
        for i in range(spec.ncomp):
            right = spec.right_values[i]
            new_up[i] = _shifted_solve(spec.grid, d[i], M[i], M[i] * up[i, 1:-1] + f_up[i], right)
            new_lo[i] = _shifted_solve(spec.grid, d[i], M[i], M[i] * lo[i, 1:-1] + f_lo[i], right)
        up, lo = new_up, new_lo
        if np.any(lo > up + 1e-10):
            raise ConsistencyError("bracket ordering lost during sweeps")
        lo = np.minimum(lo, up)
    return Profile(spec.grid, lo), Profile(spec.grid, up)


def solve_robust(spec: BvpSpec, tol: float = 1e-10, max_iter: int = 50) -> Profile:
    """Newton from the constant caps, preceded by a few monotone sweeps.

    The sweeps start from the (zero, caps) bracket, so the upper iterate
    stays above the largest nonnegative solution; handing it to Newton
    keeps the iteration out of the basin of the trivial (virus-free) root
    when a positive root exists.  Falls back to many more sweeps if Newton
    still fails.
    """
    zero = Profile.constant(spec.grid, np.zeros(spec.ncomp), np.zeros(spec.ncomp))
    zero = Profile(spec.grid, _apply_bc(spec, np.array(zero.values)))
    caps = default_initial(spec)
    _, upper = monotone_bracket(spec, zero, caps, sweeps=8)
    try:
        return solve_newton(spec, upper, tol=tol, max_iter=max_iter)
    except IterationError:
        _, upper = monotone_bracket(spec, zero, upper, sweeps=400)
        return solve_newton(spec, upper, tol=tol, max_iter=max_iter)


def _inner_virus_solve(
    spec: BvpSpec, u2: np.ndarray, u3_start: np.ndarray, right: float, tol: float
) -> np.ndarray:
    """Newton for the scalar virus equation -d3 u3'' = k*u2/(1+u3) - q*u3."""
    p = spec.params
    grid = spec.grid
    d3 = spec.diffusivities[1]
    dx2 = grid.dx ** 2
    u3 = u3_start.copy()
    u3[0], u3[-1] = 0.0, right
    src2 = u2[1:-1]
    scale = 1.0 + float(np.max(np.abs(u3)))
    for _ in range(60):
        u3c = np.maximum(u3[1:-1], 0.0)
        r = d3 * (u3[:-2] - 2.0 * u3[1:-1] + u3[2:]) / dx2 + p.k * src2 / (1.0 + u3c) - p.q * u3[1:-1]
        if float(np.max(np.abs(r))) <= tol:
            return u3
        dr = -p.k * src2 / (1.0 + u3c) ** 2 - p.q
        ab = np.zeros((3, grid.n))
        ab[0, 1:] = d3 / dx2
        ab[1, :] = -2.0 * d3 / dx2 + dr
        ab[2, :-1] = d3 / dx2
        delta = solve_banded((1, 1), ab, -r)
        u3[1:-1] += delta
        # quadratic convergence stagnates at the roundoff floor of the
        # Laplacian (~d3/dx^2 * eps); accept once updates sit there
        if float(np.max(np.abs(delta))) <= 1e-14 * scale:
            return u3
    raise IterationError("inner virus solve did not converge")


def solve_alternating(
    spec: BvpSpec, zeta: float, tol: float = 1e-10, max_iter: int = 200
) -> Profile:
    """Alternating two-step fixed-point solve of the pair problem.

    Starting from a constant virus profile, repeat: (1) solve the *linear*
    infected-cell equation with the current virus profile frozen, (2) solve
    the scalar virus equation with the new infected-cell profile frozen.
    The map is monotone, so from an upper start the iterates decrease onto
    the largest nonnegative solution.

    ``zeta`` is the shared right boundary value.  For positive ``zeta`` the
    classical construction applies and requires

        b*sup(rho)/(c*(1+zeta)) < 1   and   k/(q*(1+zeta)) < 1,

    which is checked (``ValueError`` otherwise); the converged components
    are then nondecreasing whenever ``rho`` is.  ``zeta = 0`` poses the
    plain zero-boundary pair problem -- the same problem ``solve_newton``
    sees -- and skips that admissibility check, since no positive ``zeta``
    requirement can hold there.

    Convergence is declared on the true residual, not the update size.
    """
    if spec.coupling != PAIR:
        raise ValueError("alternating solve applies to the pair coupling")
    if zeta < 0.0:
        raise ValueError("zeta must be nonnegative")
    p = spec.params
    beta_m = float(np.max(spec.rho))
    if zeta > 0.0:
        if not (p.b * beta_m / (p.c * (1.0 + zeta)) < 1.0 and p.k / (p.q * (1.0 + zeta)) < 1.0):
            raise ValueError(
                f"zeta={zeta:g} too small: needs b*sup(rho)/(c*(1+zeta)) < 1 "
                "and k/(q*(1+zeta)) < 1"
            )
        if np.any(np.diff(spec.rho) < -1e-12):
            raise ValueError("the boundary-lifted construction needs nondecreasing rho")
    work = BvpSpec(
        grid=spec.grid,
        params=spec.params,
        coupling=PAIR,
        right_values=(float(zeta), float(zeta)),
        rho=spec.rho,
        diffusivities=spec.diffusivities,
    )
    grid = spec.grid
    d2, d3 = work.diffusivities
    n = grid.n
    start3 = zeta if zeta > 0.0 else p.b * p.k * beta_m / (p.c * p.q)
    u3 = np.full(n + 2, float(start3))
    u3[0], u3[-1] = 0.0, zeta
    vals = np.zeros((2, n + 2))
    inner_tol = max(1e-13, tol * 1e-2)
    for it in range(max_iter):
        sat = u3[1:-1] / (1.0 + u3[1:-1])
        rhs2 = p.b * spec.rho[1:-1] * sat
        u2 = _shifted_solve(grid, d2, p.c, rhs2, zeta)
        u3 = _inner_virus_solve(work, u2, u3, zeta, inner_tol)
        vals[0], vals[1] = u2, u3
        r = residual(work, vals)
        if float(np.max(np.abs(r))) <= tol:
            vmin = float(vals[:, 1:-1].min())
            if vmin < -1e-13:
                raise PositivityError(f"alternating solve left the cone (min {vmin:.3e})")
            return Profile(grid, np.maximum(vals, 0.0) if vmin < 0.0 else vals)
    raise IterationError(
        f"alternating solve: residual still {float(np.max(np.abs(r))):.3e} "
        f"after {max_iter} outer iterations",
        residual=float(np.max(np.abs(r))),
    )


def boundary_flux(profile: Profile, side: str, comp: int = 0) -> float:
    """One-sided second-order derivative of one component at a boundary.

    Uses the three-point stencil, exact for quadratics.  ``side`` is
    ``"left"`` or ``"right"``.
    """
    u = profile.component(comp)
    dx = profile.grid.dx
    if side == "left":
        return float((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx))
    if side == "right":
        return float((3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dx))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def write_profile_csv(profile: Profile, path) -> None:
    """Write ``x,comp1[,comp2[,comp3]]`` rows at full double precision."""
    names = ",".join(f"comp{i + 1}" for i in range(profile.ncomp))
    xs = profile.grid.nodes
    with open(path, "w") as fh:
        fh.write(f"x,{names}\n")
        for j in range(xs.size):
            row = ",".join(f"{profile.values[i, j]:.17g}" for i in range(profile.ncomp))
            fh.write(f"{xs[j]:.17g},{row}\n")
