"""
Per-iteration cost versus array size
====================================

The conventional update factorizes ``N_t x N_t`` systems inside a
bisection; the nonhomogeneous update only multiplies matrices. This
script fits log-log slopes of per-iteration wall time and counts the
large solves each algorithm issues.
"""

import numpy as np

from isacfp import NetworkConfig, SolverOptions, linalg, make_scenario
from isacfp.solvers import init_beamformers, run

sizes = np.array([32, 64, 128])
opts = SolverOptions(max_iters=10, rel_tol=1e-300)

for alg in ("conventional", "nonhomogeneous", "fast"):
    times, solves = [], []
    for N in sizes:
        cfg = NetworkConfig(num_cells=2, users_per_cell=2, tx_antennas=int(N), echo_rx_antennas=int(N),
                            user_antennas=2, streams=2, block_length=4, sensing_weights=1e-8, seed=1)
        _, ch = make_scenario(cfg)
        ch = ch.for_design()
        W0 = init_beamformers(cfg, ch)
        reps = []
        for _ in range(5):
            with linalg.record_solves() as counts:
                _, tr = run(alg, ch, cfg, opts=opts, W0=W0)
            reps.append(tr.rows[-1].elapsed_s / tr.iterations)
        times.append(np.median(reps))
        solves.append(sum(c for (ph, n), c in counts.items() if ph == "update" and n == N) // tr.iterations)
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    print(f"{alg:>15}: ms/iter {[f'{1e3 * t:.2f}' for t in times]}, slope {slope:.2f}, "
          f"N-sized solves per iteration {solves}")

# on small arrays BLAS overhead flattens both slopes; the solve counts are exact
