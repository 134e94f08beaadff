"""
Rate versus Fisher information tradeoff
=======================================

Sweeping the rate weight omega with the sensing weight fixed traces out
the tradeoff. As omega goes to zero the design serves sensing alone and
all three algorithms land on the same point.
"""

from isacfp import NetworkConfig, SolverOptions
from isacfp.harness import NATS_TO_BITS, ExperimentSpec, sweep_tradeoff

cfg = NetworkConfig(num_cells=2, users_per_cell=2, tx_antennas=8, echo_rx_antennas=8,
                    user_antennas=2, streams=2, block_length=4, sensing_weights=1e-14, seed=11)
omegas = [1e-10, 1e-6, 1e-3, 1.0, 1e3]
spec = ExperimentSpec(cfg, SolverOptions(rel_tol=1e-6, max_iters=2000),
                      ("conventional", "nonhomogeneous", "fast"), 1,
                      sweep={"parameter": "omega", "values": omegas})
rows = sweep_tradeoff(spec)

print(f"{'omega':>8} {'algorithm':>15} {'sum rate (bits)':>16} {'sum Fisher':>12}")
for r in rows:
    print(f"{r['omega']:8.0e} {r['algorithm']:>15} {r['sum_rate'] * NATS_TO_BITS:16.4f} {r['sum_fisher']:12.4e}")
