"""Operating protocols, baselines and the exhaustive grid oracle.

Every strategy takes a :class:`~mmpass.scenario.Scenario`, PSO hyperparameters
and a seed, and returns a :class:`ProtocolResult`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .swarm import (
    Hyperparams,
    Particle,
    SwarmProblem,
    run_pso_kpbf,
)
from .waveguide import WaveguideSpec

PROTOCOLS = ("mode-selection", "mode-combining", "uniform", "single-mode-tdma", "fixed-miso")

# Largest grid the oracle agrees to enumerate.
MAX_ORACLE_EVALUATIONS = 2_000_000


@dataclass
class ProtocolResult:
    protocol: str
    seed: int
    fitness: float
    positions: np.ndarray
    beta_pa: np.ndarray
    lam: np.ndarray
    p_rel: np.ndarray
    W: np.ndarray
    trace: np.ndarray
    n_failed: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def w_power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))


def uniform_combining_beta(mode_betas) -> float:
    """Common PA constant for uniform mode combining.

    The sum of the mode constants halved; for two modes this is their mean,
    which is what is used for any other mode count.
    """
    betas = np.asarray(mode_betas, dtype=float)
    if betas.size == 2:
        return float(betas.sum() / 2.0)
    return float(betas.mean())


def _problem(scenario, **kwargs) -> SwarmProblem:
    return SwarmProblem(
        spec=scenario.waveguide_spec(),
        users=scenario.user_positions(),
        sigma2=scenario.sigma2_watts,
        p_max=scenario.p_max_watts,
        **kwargs,
    )


def _result(protocol, seed, problem, res, **notes) -> ProtocolResult:
    b = res.best
    return ProtocolResult(
        protocol=protocol, seed=seed, fitness=res.fitness,
        positions=b.x, beta_pa=b.beta_pa, lam=b.lam, p_rel=b.p_rel, W=res.W,
        trace=res.trace, n_failed=res.n_failed, notes=dict(notes),
    )


def mode_selection_strategy(scenario, hyper: Hyperparams | None = None, seed: int = 0):
    problem = _problem(scenario, beta_mode="discrete")
    res = run_pso_kpbf(problem, hyper, seed)
    return _result("mode-selection", seed, problem, res, selector=res.best.selector)


def mode_combining_strategy(scenario, hyper: Hyperparams | None = None, seed: int = 0,
                            beta_bounds=None):
    bounds = beta_bounds if beta_bounds is not None else scenario.beta_range()
    problem = _problem(scenario, beta_mode="continuous", beta_bounds=tuple(bounds))
    res = run_pso_kpbf(problem, hyper, seed)
    return _result("mode-combining", seed, problem, res)


def uniform_mode_combining_strategy(scenario, hyper: Hyperparams | None = None, seed: int = 0,
                                    beta=None):
    value = uniform_combining_beta(scenario.mode_betas) if beta is None else float(beta)
    problem = _problem(scenario, beta_mode="fixed", beta_fixed=value)
    res = run_pso_kpbf(problem, hyper, seed)
    return _result("uniform", seed, problem, res, beta=value)


def single_mode_tdma_baseline(scenario, hyper: Hyperparams | None = None, seed: int = 0):
    """Single-mode PASS serving one user per slot of length 1/K.

    The waveguide carries only the fundamental mode and every PA is matched
    to it. PA positions are optimized separately for each slot.
    """
    spec = scenario.waveguide_spec()
    single = WaveguideSpec(
        mode_betas=spec.mode_betas[:1], kappa=spec.kappa[:, :1], pa_length=spec.pa_length,
        x_min=spec.x_min, x_max=spec.x_max, d_min=spec.d_min,
        pa_height=spec.pa_height, carrier_freq=spec.carrier_freq,
    )
    users = scenario.user_positions()
    K = users.shape[0]
    slot_seeds = np.random.SeedSequence([seed, 0x7D4A]).generate_state(K)
    slots = []
    for k in range(K):
        problem = SwarmProblem(
            single, users[k:k + 1], scenario.sigma2_watts, scenario.p_max_watts,
            beta_mode="fixed", beta_fixed=single.mode_betas[0],
        )
        slots.append(run_pso_kpbf(problem, hyper, int(slot_seeds[k])))
    rates = np.array([s.fitness for s in slots])
    trace = np.mean([s.trace for s in slots], axis=0)
    return ProtocolResult(
        protocol="single-mode-tdma", seed=seed, fitness=float(rates.mean()),
        positions=np.array([s.best.x for s in slots]),
        beta_pa=np.array([s.best.beta_pa for s in slots]),
        lam=np.ones(K), p_rel=np.full(K, 1.0 / K),
        # one slot per user, each at full power for 1/K of the time
        W=np.array([s.W[:, 0] for s in slots]).T,
        trace=trace, n_failed=sum(s.n_failed for s in slots),
        notes={"slot_rates": rates},
    )


def fixed_miso_baseline(scenario, hyper: Hyperparams | None = None, seed: int = 0):
    """Fully digital N-antenna MISO array at fixed, uniformly spaced positions.

    Stands in for a hybrid beamforming reference; only the KPBF parameters
    are searched.
    """
    spec = scenario.waveguide_spec()
    positions = np.linspace(spec.x_min, spec.x_max, spec.n_pas)
    problem = _problem(
        scenario, beta_mode="fixed", beta_fixed=spec.mode_betas[0],
        fixed_positions=positions, channel="los",
    )
    res = run_pso_kpbf(problem, hyper, seed)
    out = _result("fixed-miso", seed, problem, res, substitution="fully digital fixed MISO")
    out.beta_pa = np.full(spec.n_pas, np.nan)
    return out


STRATEGIES = {
    "mode-selection": mode_selection_strategy,
    "mode-combining": mode_combining_strategy,
    "uniform": uniform_mode_combining_strategy,
    "single-mode-tdma": single_mode_tdma_baseline,
    "fixed-miso": fixed_miso_baseline,
}


def run_protocol(name: str, scenario, hyper: Hyperparams | None = None, seed: int = 0):
    try:
        strategy = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}") from None
    return strategy(scenario, hyper if hyper is not None else scenario.hyperparams(), seed)


# --------------------------------------------------------------------------
# exhaustive oracle


class GridTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    fitness: float
    particle: Particle
    n_evaluations: int


def oracle_size(n_pas: int, n_users: int, n_positions: int, n_beta: int,
                n_z_lambda: int, n_z_p: int) -> int:
    return (math.comb(n_positions, n_pas) * n_beta**n_pas
            * n_z_lambda**n_users * n_z_p**n_users)


def grid_search_oracle(problem: SwarmProblem, position_grid, z_lambda_grid, z_p_grid,
                       batch: int = 65536) -> OracleResult:
    """Exhaustively maximize the swarm fitness over a Cartesian grid.

    Positions range over increasing tuples of grid points; the PA constants over
    the problem's discrete options (mode constants for selection, the single
    value for fixed constants).
    """
    grid = np.unique(np.asarray(position_grid, dtype=float))
    zl_grid = np.asarray(z_lambda_grid, dtype=float)
    zp_grid = np.asarray(z_p_grid, dtype=float)
    N, K = problem.n_pas, problem.n_users
    if N > 2:
        raise GridTooLarge(f"oracle supports at most 2 PAs, got {N}")
    if problem.beta_mode == "discrete":
        beta_options = problem.spec.mode_betas
    elif problem.beta_mode == "fixed":
        beta_options = np.unique(problem.beta_fixed)
    else:
        raise GridTooLarge("oracle needs a discrete set of propagation constants")
    if beta_options.size > 2:
        raise GridTooLarge("oracle supports at most 2 propagation-constant options per PA")
    if grid.size > 50 or zl_grid.size > 10 or zp_grid.size > 10:
        raise GridTooLarge("oracle grids are limited to 50 positions and 10 z values")
    size = oracle_size(N, K, grid.size, beta_options.size, zl_grid.size, zp_grid.size)
    if size > MAX_ORACLE_EVALUATIONS:
        raise GridTooLarge(f"grid needs {size} evaluations (limit {MAX_ORACLE_EVALUATIONS})")

    spec = problem.spec
    pos_tuples = [c for c in itertools.combinations(grid, N)
                  if N < 2 or np.all(np.diff(c) >= spec.d_min - 1e-12)]
    combos = itertools.product(
        pos_tuples,
        itertools.product(beta_options, repeat=N),
        itertools.product(zl_grid, repeat=K),
        itertools.product(zp_grid, repeat=K),
    )
    best_val, best, count = -np.inf, None, 0
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        X = np.array([c[0] for c in chunk], dtype=float).reshape(-1, N)
        B = np.array([c[1] for c in chunk], dtype=float).reshape(-1, N)
        ZL = np.array([c[2] for c in chunk], dtype=float).reshape(-1, K)
        ZP = np.array([c[3] for c in chunk], dtype=float).reshape(-1, K)
        rates, _ = problem.fitness(X, B, ZL, ZP)
        count += rates.size
        i = int(np.argmax(rates))
        if rates[i] > best_val:
            best_val = float(rates[i])
            best = Particle(x=X[i], beta_pa=B[i], z_lambda=ZL[i], z_p=ZP[i], fitness=best_val)
    return OracleResult(fitness=best_val, particle=best, n_evaluations=count)


__all__ = [
    "PROTOCOLS", "ProtocolResult", "run_protocol", "grid_search_oracle",
    "mode_selection_strategy", "mode_combining_strategy", "uniform_mode_combining_strategy",
    "single_mode_tdma_baseline", "fixed_miso_baseline", "uniform_combining_beta",
    "GridTooLarge", "OracleResult",
]
