"""
Majorant strategies for the inverse-free step
=============================================

The step size of the nonhomogeneous update is ``1 / lambda`` with
``lambda`` any upper bound on the largest eigenvalue of an ``N_t x N_t``
matrix. Trace and Frobenius bounds are cheaper but looser.
"""

import numpy as np

from isacfp import NetworkConfig, SolverOptions, make_scenario
from isacfp.fpcore import lambda_max
from isacfp.solvers import init_beamformers, run

# the three bounds on one random PSD matrix
rng = np.random.default_rng(0)
X = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
A = X @ X.conj().T
print("eigvalsh :", np.linalg.eigvalsh(A)[-1])
for kind in ("max", "frobenius", "trace"):
    print(f"{kind:9}:", lambda_max(A, kind))

# looser bounds mean shorter steps and more iterations
cfg = NetworkConfig(num_cells=2, users_per_cell=2, tx_antennas=16, echo_rx_antennas=16,
                    user_antennas=2, streams=2, block_length=8, sensing_weights=1e-8, seed=5)
_, ch = make_scenario(cfg)
design = ch.for_design()
W0 = init_beamformers(cfg, design)
print()
for kind in ("max", "frobenius", "trace"):
    opts = SolverOptions(lambda_strategy=kind, rel_tol=1e-7, max_iters=3000)
    _, tr = run("fast", design, cfg, opts=opts, W0=W0)
    print(f"{kind:9}: {tr.iterations:5d} iterations, objective {tr.final_objective:.6f}, {tr.stop_reason}")
