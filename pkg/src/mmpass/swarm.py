"""PSO-KPBF: particle swarm search over PA positions, PA propagation constants
and the KPBF dual weights / power split.

Each particle carries four blocks: positions ``x``, the propagation-constant
block (binary/integer selectors, a continuous vector, or nothing when the
constants are fixed), ``z_lambda`` and ``z_p``. Dual weights and power split
are recovered as ``exp(z_lambda)`` and ``softmax(z_p)``.

Random numbers: particle ``i`` owns the ``i``-th child of
``SeedSequence(seed)``. At initialization it draws, in order, ``N`` position
samples, the beta block (``N`` or ``N*M`` values, if any) and ``K`` values of
``z_lambda``. At every iteration it draws one flat vector, split as
``r1_x, r2_x, r1_zl, r2_zl, r1_zp, r2_zp`` followed by ``r1_b, r2_b`` and, for
selectors, the sampling uniforms ``u_b``. Blocks that are not optimized are not
drawn. Draws are fetched ``DRAW_BLOCK`` iterations at a time, which leaves each
particle's stream unchanged. Updates are synchronous: all particles move, then all are evaluated,
then personal and global bests are refreshed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import build_effective_channel, pa_user_distances
from .precoder import (
    MAX_CONDITION,
    ConditioningError,
    kpbf_unnormalized,
    normalize_power,
    softmax,
    sum_rate,
)
from .waveguide import GeometryError, PaConfiguration, WaveguideSpec

logger = logging.getLogger(__name__)

# iterations' worth of random numbers fetched per generator call
DRAW_BLOCK = 64


@dataclass(frozen=True)
class Hyperparams:
    n_particles: int = 50
    iterations: int = 200
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    position_vmax_frac: float = 0.1
    beta_vmax_frac: float = 0.1
    z_vmax: float = 2.0
    binary_vmax: float = 6.0
    z_lambda_bounds: tuple[float, float] = (-15.0, 15.0)
    z_p_bounds: tuple[float, float] = (-5.0, 5.0)
    z_lambda_init: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


# --------------------------------------------------------------------------
# feasibility maps and block updates


def project_positions(x_tentative, x_min: float, x_max: float, d_min: float) -> np.ndarray:
    """Repair tentative PA positions into a sorted, spaced, in-box vector.

    Box-clip, sort, then a forward pass pushing each PA at least ``d_min``
    past its predecessor and a backward pass pulling PAs back under ``x_max``.
    Works on a single vector or row-wise on a ``(P, N)`` batch.
    """
    x = np.clip(np.asarray(x_tentative, dtype=float), x_min, x_max)
    n = x.shape[-1]
    if (n - 1) * d_min > x_max - x_min + 1e-12:
        raise GeometryError(f"{n} PAs with spacing {d_min} do not fit in [{x_min}, {x_max}]")
    x = np.sort(x, axis=-1)
    for i in range(1, n):
        x[..., i] = np.maximum(x[..., i], x[..., i - 1] + d_min)
    x[..., n - 1] = np.minimum(x[..., n - 1], x_max)
    for i in range(n - 2, -1, -1):
        x[..., i] = np.minimum(x[..., i], x[..., i + 1] - d_min)
    return x


def snap_to_grid(x_sorted, grid) -> np.ndarray:
    """Move sorted positions onto distinct, increasing points of ``grid``."""
    grid = np.asarray(grid, dtype=float)
    x = np.asarray(x_sorted, dtype=float)
    n = x.shape[-1]
    if n > grid.size:
        raise GeometryError("more PAs than grid points")
    idx = np.abs(x[..., :, None] - grid).argmin(axis=-1)
    for i in range(1, n):
        idx[..., i] = np.maximum(idx[..., i], idx[..., i - 1] + 1)
    idx[..., n - 1] = np.minimum(idx[..., n - 1], grid.size - 1)
    for i in range(n - 2, -1, -1):
        idx[..., i] = np.minimum(idx[..., i], idx[..., i + 1] - 1)
    return grid[idx]


def snap_to_values(z, values) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    return values[np.abs(np.asarray(z, dtype=float)[..., None] - values).argmin(axis=-1)]


def update_continuous_block(u, v, pbest_u, gbest_u, inertia, c1, c2, rng=None, *,
                            r1=None, r2=None, v_max=np.inf, feasible=None):
    """One PSO step for a real-valued block; returns ``(u_new, v_new)``.

    ``r1``/``r2`` default to element-wise uniforms drawn from ``rng``.
    ``feasible`` maps the moved block back into its feasible set.
    """
    u = np.asarray(u, dtype=float)
    if r1 is None:
        r1 = rng.random(u.shape)
    if r2 is None:
        r2 = rng.random(u.shape)
    v_new = inertia * np.asarray(v, dtype=float) + c1 * r1 * (pbest_u - u) + c2 * r2 * (gbest_u - u)
    v_new = np.clip(v_new, -v_max, v_max)
    u_new = u + v_new
    if feasible is not None:
        u_new = feasible(u_new)
    return u_new, v_new


def sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(v, dtype=float)))


def update_binary_block(b, v_b, pbest_b, gbest_b, inertia, c1, c2, rng=None, *,
                        r1=None, r2=None, u=None, v_max=6.0):
    """BPSO step: velocity update, clamp, then ``b' = 1{u < sigmoid(v')}``."""
    b = np.asarray(b, dtype=float)
    if r1 is None:
        r1 = rng.random(b.shape)
    if r2 is None:
        r2 = rng.random(b.shape)
    if u is None:
        u = rng.random(b.shape)
    v_new = inertia * np.asarray(v_b, dtype=float) + c1 * r1 * (pbest_b - b) + c2 * r2 * (gbest_b - b)
    v_new = np.clip(v_new, -v_max, v_max)
    b_new = (u < sigmoid(v_new)).astype(np.int8)
    return b_new, v_new


def sample_onehot(v, u) -> np.ndarray:
    """Integer selector from per-mode velocities: argmax of ``sigmoid(v) - u``."""
    return np.argmax(sigmoid(v) - u, axis=-1)


def map_selector_to_beta(selector, mode_betas) -> np.ndarray:
    """Selector to PA propagation constants.

    For two modes this is ``beta_1 (1 - b) + beta_2 b``; in general selector
    value ``s`` picks ``mode_betas[s]``.
    """
    betas = np.asarray(mode_betas, dtype=float)
    s = np.asarray(selector)
    if betas.size == 2:
        b = s.astype(float)
        return betas[0] * (1.0 - b) + betas[1] * b
    return betas[s.astype(int)]


# --------------------------------------------------------------------------
# problem definition and fitness


@dataclass
class SwarmProblem:
    """What the swarm optimizes and how a particle is scored.

    ``beta_mode`` is ``"discrete"`` (selectors over the mode constants),
    ``"continuous"`` (an interval) or ``"fixed"`` (``beta_fixed``).
    ``channel="los"`` scores a fully digital array at the PA positions with
    no waveguide in between (one RF chain per antenna).
    """

    spec: WaveguideSpec
    users: np.ndarray
    sigma2: float
    p_max: float
    beta_mode: str = "discrete"
    beta_bounds: tuple[float, float] | None = None
    beta_fixed: np.ndarray | None = None
    fixed_positions: np.ndarray | None = None
    position_grid: np.ndarray | None = None
    z_lambda_grid: np.ndarray | None = None
    z_p_grid: np.ndarray | None = None
    channel: str = "pass"

    def __post_init__(self):
        self.users = np.atleast_2d(np.asarray(self.users, dtype=float))
        if self.users.shape[1] == 2:
            self.users = np.hstack([self.users, np.zeros((self.users.shape[0], 1))])
        if self.beta_mode not in ("discrete", "continuous", "fixed"):
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")
        if self.beta_mode == "continuous":
            if self.beta_bounds is None:
                lo, hi = self.spec.mode_betas.min(), self.spec.mode_betas.max()
                self.beta_bounds = (0.9 * lo, 1.1 * hi)
            if not self.beta_bounds[0] <= self.beta_bounds[1]:
                raise ValueError("beta_bounds must be ordered")
        if self.beta_mode == "fixed":
            if self.beta_fixed is None:
                raise ValueError("beta_fixed is required for beta_mode='fixed'")
            self.beta_fixed = np.broadcast_to(
                np.asarray(self.beta_fixed, dtype=float), (self.n_pas,)
            ).copy()
        if self.fixed_positions is not None:
            self.fixed_positions = np.asarray(self.fixed_positions, dtype=float)
            PaConfiguration(self.fixed_positions, np.zeros(self.n_pas)).check_feasible(self.spec)
        if self.position_grid is not None:
            grid = np.unique(np.asarray(self.position_grid, dtype=float))
            if grid[0] < self.spec.x_min or grid[-1] > self.spec.x_max:
                raise GeometryError("position grid leaves the waveguide")
            if grid.size > 1 and np.diff(grid).min() < self.spec.d_min - 1e-12:
                raise GeometryError("position grid is finer than d_min")
            if grid.size < self.n_pas:
                raise GeometryError("position grid has fewer points than PAs")
            self.position_grid = grid
        if self.channel not in ("pass", "los"):
            raise ValueError(f"unknown channel model {self.channel!r}")
        if not self.sigma2 > 0 or not self.p_max > 0:
            raise ValueError("sigma2 and p_max must be positive")

    @property
    def n_pas(self) -> int:
        return self.spec.n_pas

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    @property
    def n_modes(self) -> int:
        return self.spec.n_modes

    @property
    def optimizes_positions(self) -> bool:
        return self.fixed_positions is None

    @property
    def selector_width(self) -> int:
        """1 for the two-mode bit encoding, M for one-hot selectors."""
        return 1 if self.n_modes == 2 else self.n_modes

    def feasible_positions(self, x) -> np.ndarray:
        s = self.spec
        x = project_positions(x, s.x_min, s.x_max, s.d_min)
        if self.position_grid is not None:
            x = snap_to_grid(x, self.position_grid)
        return x

    def feasible_beta(self, beta) -> np.ndarray:
        return np.clip(beta, *self.beta_bounds)

    def feasible_z(self, z, bounds, grid) -> np.ndarray:
        z = np.clip(z, *bounds)
        if grid is not None:
            z = snap_to_values(z, grid)
        return z

    def channels(self, X, B) -> np.ndarray:
        """Batch of effective channels, shape (P, K, M) or (P, K, N) for "los"."""
        s = self.spec
        if self.channel == "los":
            dist = np.stack([pa_user_distances(s, x, self.users) for x in X])
            h = s.wavelength / (4 * math.pi) / dist * np.exp(-1j * s.wavenumber * dist)
            return h.conj()
        return kernels.heff_batch(
            X, B, s.mode_betas, s.kappa, s.pa_length, self.users,
            s.pa_height, s.wavenumber, s.wavelength / (4 * math.pi),
        )

    def fitness(self, X, B, ZL, ZP):
        """Sum rates and kernel status codes for a batch of particles."""
        H = self.channels(X, B)
        return kernels.kpbf_rate_batch(
            H, np.exp(ZL), softmax(ZP), self.sigma2, self.p_max, MAX_CONDITION
        )


@dataclass
class Particle:
    """Snapshot of one particle's decision variables."""

    x: np.ndarray
    beta_pa: np.ndarray
    z_lambda: np.ndarray
    z_p: np.ndarray
    selector: np.ndarray | None = None
    fitness: float = -np.inf

    @property
    def lam(self) -> np.ndarray:
        return np.exp(self.z_lambda)

    @property
    def p_rel(self) -> np.ndarray:
        return softmax(self.z_p)

    def configuration(self) -> PaConfiguration:
        return PaConfiguration(self.x, self.beta_pa, self.selector)


def evaluate_fitness(particle: Particle, spec: WaveguideSpec, users, sigma2: float,
                     P_max: float, diagnostics: dict | None = None) -> float:
    """Sum rate of one particle through the full library composition.

    A failed KPBF solve scores 0 and bumps ``diagnostics["ill_conditioned"]``.
    """
    from .channel import UserLayout

    layout = users if isinstance(users, UserLayout) else UserLayout(users)
    eff = build_effective_channel(spec, particle.configuration(), layout)
    try:
        W_tilde = kpbf_unnormalized(eff.H_eff, particle.lam, particle.p_rel, sigma2)
    except ConditioningError:
        if diagnostics is not None:
            diagnostics["ill_conditioned"] = diagnostics.get("ill_conditioned", 0) + 1
        return 0.0
    prec = normalize_power(W_tilde, P_max)
    if prec.degenerate and diagnostics is not None:
        diagnostics["degenerate"] = diagnostics.get("degenerate", 0) + 1
    return sum_rate(eff.H_eff, prec.W, sigma2)


# --------------------------------------------------------------------------
# swarm state and the main loop


@dataclass
class SwarmState:
    problem: SwarmProblem
    hyper: Hyperparams
    rngs: list
    X: np.ndarray
    VX: np.ndarray
    S: np.ndarray | None  # selectors (P, N) bits or (P, N) ints
    VS: np.ndarray | None  # (P, N) or (P, N, M)
    B: np.ndarray  # PA propagation constants (P, N)
    VB: np.ndarray | None
    ZL: np.ndarray
    VZL: np.ndarray
    ZP: np.ndarray
    VZP: np.ndarray
    fitness: np.ndarray = field(default=None)
    pbest: dict = field(default_factory=dict)
    pbest_fitness: np.ndarray = field(default=None)
    gbest: dict = field(default_factory=dict)
    gbest_fitness: float = -np.inf
    iteration: int = 0
    trace: list = field(default_factory=list)
    n_evaluations: int = 0
    n_failed: int = 0
    draw_buffer: np.ndarray | None = None
    draw_pos: int = 0

    @property
    def blocks(self) -> dict:
        out = {"X": self.X, "B": self.B, "ZL": self.ZL, "ZP": self.ZP}
        if self.S is not None:
            out["S"] = self.S
        return out


def _selector_to_beta(problem: SwarmProblem, S) -> np.ndarray:
    if problem.selector_width == 1:
        return map_selector_to_beta(S, problem.spec.mode_betas)
    return problem.spec.mode_betas[S]


def initialize_swarm(problem: SwarmProblem, hyper: Hyperparams, seed: int) -> SwarmState:
    P, N, K, M = hyper.n_particles, problem.n_pas, problem.n_users, problem.n_modes
    s = problem.spec
    rngs = [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(P)]

    X = np.empty((P, N))
    S = VS = VB = None
    B = np.empty((P, N))
    ZL = np.empty((P, K))
    if problem.beta_mode == "discrete":
        S = np.empty((P, N), dtype=np.int64)
        VS = np.zeros((P, N) if problem.selector_width == 1 else (P, N, M))
    for i, rng in enumerate(rngs):
        if problem.optimizes_positions:
            X[i] = np.sort(rng.uniform(s.x_min, s.x_max, N))
        if problem.beta_mode == "discrete":
            if problem.selector_width == 1:
                S[i] = (rng.random(N) < 0.5).astype(np.int64)
            else:
                S[i] = rng.integers(0, M, N)
        elif problem.beta_mode == "continuous":
            B[i] = rng.uniform(*problem.beta_bounds, N)
        ZL[i] = rng.uniform(*hyper.z_lambda_init, K)

    if problem.optimizes_positions:
        X = problem.feasible_positions(X)
    else:
        X[:] = problem.fixed_positions
    if problem.beta_mode == "discrete":
        B = _selector_to_beta(problem, S)
    elif problem.beta_mode == "continuous":
        VB = np.zeros((P, N))
    else:
        B[:] = problem.beta_fixed
    ZL = problem.feasible_z(ZL, hyper.z_lambda_bounds, problem.z_lambda_grid)
    ZP = problem.feasible_z(np.zeros((P, K)), hyper.z_p_bounds, problem.z_p_grid)

    state = SwarmState(
        problem=problem, hyper=hyper, rngs=rngs,
        X=X, VX=np.zeros((P, N)), S=S, VS=VS, B=B, VB=VB,
        ZL=ZL, VZL=np.zeros((P, K)), ZP=ZP, VZP=np.zeros((P, K)),
    )
    _evaluate(state)
    state.pbest = {k: v.copy() for k, v in state.blocks.items()}
    state.pbest_fitness = state.fitness.copy()
    best = int(np.argmax(state.fitness))
    state.gbest = {k: v[best].copy() for k, v in state.blocks.items()}
    state.gbest_fitness = float(state.fitness[best])
    state.trace.append(state.gbest_fitness)
    return state


def _evaluate(state: SwarmState) -> None:
    rates, status = state.problem.fitness(state.X, state.B, state.ZL, state.ZP)
    state.fitness = rates
    state.n_evaluations += rates.size
    state.n_failed += int(np.count_nonzero(status == kernels.STATUS_ILL_CONDITIONED))


def _draw_layout(problem: SwarmProblem) -> list[tuple[str, int]]:
    N, K = problem.n_pas, problem.n_users
    layout = []
    if problem.optimizes_positions:
        layout += [("r1_x", N), ("r2_x", N)]
    layout += [("r1_zl", K), ("r2_zl", K), ("r1_zp", K), ("r2_zp", K)]
    if problem.beta_mode == "discrete":
        w = N * problem.selector_width
        layout += [("r1_b", w), ("r2_b", w), ("u_b", w)]
    elif problem.beta_mode == "continuous":
        layout += [("r1_b", N), ("r2_b", N)]
    return layout


def _draw(state: SwarmState) -> dict:
    layout = _draw_layout(state.problem)
    total = sum(n for _, n in layout)
    buf = state.draw_buffer
    if buf is None or state.draw_pos == buf.shape[1]:
        buf = np.stack([rng.random((DRAW_BLOCK, total)) for rng in state.rngs])
        state.draw_buffer, state.draw_pos = buf, 0
    flat = buf[:, state.draw_pos]
    state.draw_pos += 1
    out, start = {}, 0
    for name, n in layout:
        out[name] = flat[:, start:start + n]
        start += n
    return out


def step(state: SwarmState) -> None:
    """Advance the swarm by one synchronous iteration."""
    problem, hp = state.problem, state.hyper
    s = problem.spec
    r = _draw(state)
    pb, gb = state.pbest, state.gbest
    w, c1, c2 = hp.inertia, hp.c1, hp.c2

    if problem.optimizes_positions:
        state.X, state.VX = update_continuous_block(
            state.X, state.VX, pb["X"], gb["X"], w, c1, c2,
            r1=r["r1_x"], r2=r["r2_x"], v_max=hp.position_vmax_frac * (s.x_max - s.x_min),
            feasible=problem.feasible_positions,
        )
    state.ZL, state.VZL = update_continuous_block(
        state.ZL, state.VZL, pb["ZL"], gb["ZL"], w, c1, c2,
        r1=r["r1_zl"], r2=r["r2_zl"], v_max=hp.z_vmax,
        feasible=lambda z: problem.feasible_z(z, hp.z_lambda_bounds, problem.z_lambda_grid),
    )
    state.ZP, state.VZP = update_continuous_block(
        state.ZP, state.VZP, pb["ZP"], gb["ZP"], w, c1, c2,
        r1=r["r1_zp"], r2=r["r2_zp"], v_max=hp.z_vmax,
        feasible=lambda z: problem.feasible_z(z, hp.z_p_bounds, problem.z_p_grid),
    )

    if problem.beta_mode == "discrete":
        P, N = state.S.shape
        if problem.selector_width == 1:
            state.S, state.VS = update_binary_block(
                state.S, state.VS, pb["S"], gb["S"], w, c1, c2,
                r1=r["r1_b"], r2=r["r2_b"], u=r["u_b"], v_max=hp.binary_vmax,
            )
            state.S = state.S.astype(np.int64)
        else:
            M = problem.n_modes
            onehot = lambda sel: np.eye(M)[sel]  # noqa: E731
            shape = (P, N, M)
            v_new = (w * state.VS
                     + c1 * r["r1_b"].reshape(shape) * (onehot(pb["S"]) - onehot(state.S))
                     + c2 * r["r2_b"].reshape(shape) * (onehot(gb["S"]) - onehot(state.S)))
            state.VS = np.clip(v_new, -hp.binary_vmax, hp.binary_vmax)
            state.S = sample_onehot(state.VS, r["u_b"].reshape(shape))
        state.B = _selector_to_beta(problem, state.S)
    elif problem.beta_mode == "continuous":
        lo, hi = problem.beta_bounds
        state.B, state.VB = update_continuous_block(
            state.B, state.VB, pb["B"], gb["B"], w, c1, c2,
            r1=r["r1_b"], r2=r["r2_b"], v_max=hp.beta_vmax_frac * (hi - lo),
            feasible=problem.feasible_beta,
        )

    _evaluate(state)
    improved = state.fitness > state.pbest_fitness
    if np.any(improved):
        for k, v in state.blocks.items():
            state.pbest[k][improved] = v[improved]
        state.pbest_fitness[improved] = state.fitness[improved]
    best = int(np.argmax(state.pbest_fitness))
    if state.pbest_fitness[best] > state.gbest_fitness:
        state.gbest = {k: v[best].copy() for k, v in state.pbest.items()}
        state.gbest_fitness = float(state.pbest_fitness[best])
    state.iteration += 1
    state.trace.append(state.gbest_fitness)


@dataclass
class SwarmResult:
    best: Particle
    fitness: float
    W: np.ndarray
    trace: np.ndarray
    n_evaluations: int
    n_failed: int


def gbest_particle(state: SwarmState) -> Particle:
    g = state.gbest
    return Particle(
        x=g["X"].copy(), beta_pa=g["B"].copy(), z_lambda=g["ZL"].copy(), z_p=g["ZP"].copy(),
        selector=None if "S" not in g else g["S"].copy(), fitness=state.gbest_fitness,
    )


def precoder_for(problem: SwarmProblem, particle: Particle) -> np.ndarray:
    """Normalized KPBF precoder of a particle, or zeros when the solve fails."""
    H = problem.channels(particle.x[None], particle.beta_pa[None])[0]
    try:
        W_tilde = kpbf_unnormalized(H, particle.lam, particle.p_rel, problem.sigma2)
    except ConditioningError:
        return np.zeros((H.shape[1], H.shape[0]), dtype=complex)
    return normalize_power(W_tilde, problem.p_max).W


def run_pso_kpbf(problem: SwarmProblem, hyper: Hyperparams | None = None,
                 seed: int = 0) -> SwarmResult:
    """Run PSO-KPBF for ``hyper.iterations`` iterations from a seeded swarm."""
    hyper = hyper or Hyperparams()
    state = initialize_swarm(problem, hyper, seed)
    for _ in range(hyper.iterations):
        step(state)
    best = gbest_particle(state)
    if state.n_failed:
        logger.info("%d of %d KPBF solves were ill-conditioned", state.n_failed, state.n_evaluations)
    return SwarmResult(
        best=best,
        fitness=state.gbest_fitness,
        W=precoder_for(problem, best),
        trace=np.asarray(state.trace),
        n_evaluations=state.n_evaluations,
        n_failed=state.n_failed,
    )

