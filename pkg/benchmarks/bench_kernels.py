"""Time the compiled and numpy fitness kernels on swarm-sized batches.

    python3 benchmarks/bench_kernels.py [--particles 200] [--repeat 50]
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from mmpass import kernels
from mmpass.precoder import MAX_CONDITION
from mmpass.scenario import default_scenario


def make_inputs(n_particles: int, n_pas: int, seed: int = 0):
    sc = default_scenario(n_pas=n_pas)
    spec = sc.waveguide_spec()
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(spec.x_min, spec.x_max, (n_particles, n_pas)), axis=1)
    B = rng.uniform(*sc.beta_range(), (n_particles, n_pas))
    lam = np.exp(rng.uniform(-2, 2, (n_particles, sc.n_users)))
    p_rel = np.full((n_particles, sc.n_users), 1.0 / sc.n_users)
    geo = (spec.mode_betas, spec.kappa, spec.pa_length, sc.user_positions(), spec.pa_height,
           spec.wavenumber, spec.wavelength / (4 * math.pi))
    return X, B, geo, lam, p_rel, sc.sigma2_watts, sc.p_max_watts


def bench(backend_name: str, inputs, repeat: int) -> dict:
    mod = kernels.get_backend(backend_name)
    X, B, geo, lam, p_rel, sigma2, p_max = inputs
    H = mod.heff_batch(X, B, *geo)
    t_heff = min(timeit.repeat(lambda: mod.heff_batch(X, B, *geo), number=1, repeat=repeat))
    t_rate = min(timeit.repeat(
        lambda: mod.kpbf_rate_batch(H, lam, p_rel, sigma2, p_max, MAX_CONDITION),
        number=1, repeat=repeat,
    ))
    return {"heff": t_heff, "rate": t_rate}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        kernels.get_backend("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")

    print(f"{'N':>3} {'backend':>9} {'heff us/particle':>17} {'rate us/particle':>17}")
    for n_pas in (2, 4, 8, 16):
        inputs = make_inputs(args.particles, n_pas)
        results = {b: bench(b, inputs, args.repeat) for b in backends}
        for b, r in results.items():
            print(f"{n_pas:>3} {b:>9} {1e6 * r['heff'] / args.particles:>17.3f} "
                  f"{1e6 * r['rate'] / args.particles:>17.3f}")
        if len(results) == 2:
            speed = {k: results["python"][k] / results["compiled"][k] for k in ("heff", "rate")}
            print(f"{n_pas:>3} {'speedup':>9} {speed['heff']:>16.1f}x {speed['rate']:>16.1f}x")


if __name__ == "__main__":
    main()
