"""Conventional, nonhomogeneous and fast FP solvers for ISAC beamforming.

All three algorithms share the auxiliary updates for ``Gamma`` and ``Y``
(which only need ``M x M`` solves). They differ in how ``Ytilde`` and ``W``
are refreshed:

* ``conventional``: exact ``Ytilde = Q^{-1} Gdot W`` and
  ``W = (eta I + L)^{-1} Lambda`` with ``eta`` found by bisection;
* ``nonhomogeneous``: one majorized gradient step for ``Ytilde`` and a
  projected gradient step for ``W``, no ``N_t``- or ``N_r``-sized solve;
* ``fast``: the nonhomogeneous iteration preceded by Nesterov extrapolation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import ConfigError, DomainError, NumericalError
from .fpcore import MajorantStrategy, lambda_max
from .linalg import herm
from .metrics import (Weights, interference_covariance, objective, received_blocks,
                      sensing_interference, total_covariance, _own)
from .scenario import ChannelSet

__all__ = [
    "ALGORITHMS",
    "AuxState",
    "SolverOptions",
    "TraceRow",
    "IterationTrace",
    "init_beamformers",
    "update_gamma",
    "update_Y",
    "update_Ytilde_exact",
    "update_Ytilde_grad",
    "assemble_Lambda",
    "assemble_L",
    "assemble_L_parts",
    "update_W_exact",
    "project_power",
    "update_W_projected",
    "gradient_fo",
    "extrapolation_weight",
    "run",
]

ALGORITHMS = ("conventional", "nonhomogeneous", "fast")


@dataclass
class AuxState:
    Gamma: np.ndarray       # (L, K, d, d)
    Y: np.ndarray           # (L, K, M, d)
    Ytilde: np.ndarray      # (L, K, Nr, d)
    Z: np.ndarray           # (L, K, Nt, d)
    Ztilde: np.ndarray      # (L, K, Nr, d)
    lam: np.ndarray         # (L,)
    lamtilde: np.ndarray    # (L,)
    eta: np.ndarray         # (L,)

    @classmethod
    def zeros(cls, ch: ChannelSet, d: int) -> "AuxState":
        L, K, M, Nt, Nr = ch.dims
        c = complex
        return cls(np.zeros((L, K, d, d), c), np.zeros((L, K, M, d), c),
                   np.zeros((L, K, Nr, d), c), np.zeros((L, K, Nt, d), c),
                   np.zeros((L, K, Nr, d), c), np.ones(L), np.ones(L), np.zeros(L))

    def copy(self) -> "AuxState":
        return AuxState(**{k: v.copy() for k, v in self.__dict__.items()})


@dataclass(frozen=True)
class SolverOptions:
    algorithm: str = "fast"
    lambda_strategy: MajorantStrategy = field(default_factory=MajorantStrategy)
    rel_tol: float = 1e-6
    max_iters: int = 2000
    time_limit_s: float | None = None
    bisection_tol: float = 1e-10
    bisection_max_iters: int = 200
    init: str = "matched_filter"
    record_every: int = 1
    restart_on_decrease: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if isinstance(self.lambda_strategy, str):
            object.__setattr__(self, "lambda_strategy", MajorantStrategy(kind=self.lambda_strategy))
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.init not in ("matched_filter", "random"):
            raise ConfigError(f"unknown init mode {self.init!r}")
        if self.record_every < 1:
            raise ConfigError("record_every must be at least 1")

    def replace(self, **changes) -> "SolverOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class TraceRow:
    iter: int
    elapsed_s: float
    objective: float
    sum_rate: float
    sum_fisher: float
    step_diagnostics: dict | None = None


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)
    algorithm: str = ""
    truncated: bool = False
    stop_reason: str = ""
    iterations: int = 0

    def append(self, row: TraceRow) -> None:
        if self.rows and row.iter <= self.rows[-1].iter:
            raise ValueError("trace iterations must be strictly increasing")
        self.rows.append(row)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    @property
    def iters(self) -> np.ndarray:
        return np.array([r.iter for r in self.rows])

    @property
    def elapsed(self) -> np.ndarray:
        return np.array([r.elapsed_s for r in self.rows])

    @property
    def final_objective(self) -> float:
        return self.rows[-1].objective


# ---------------------------------------------------------------------------
# initialization

def _scale_to_budget(W: np.ndarray, power_w: np.ndarray) -> np.ndarray:
    K = W.shape[1]
    norms = np.sqrt(np.sum(np.abs(W) ** 2, axis=(2, 3), keepdims=True))
    norms[norms == 0] = 1.0
    target = np.sqrt(np.asarray(power_w, float) / K)[:, None, None, None]
    return W / norms * target


def init_beamformers(cfg, ch: ChannelSet, mode: str = "matched_filter", rng=None) -> np.ndarray:
    """Feasible starting beamformers using the whole budget, split equally over users.

    ``matched_filter`` takes the first ``d`` orthonormal directions of
    ``H_{lk,l}^H``; ``random`` draws complex Gaussian entries.
    """
    L, K, M, Nt, _ = ch.dims
    d = cfg.streams
    if mode == "matched_filter":
        W = np.zeros((L, K, Nt, d), complex)
        for l in range(L):
            for k in range(K):
                Q, R = np.linalg.qr(herm(ch.H[l, k, l]))
                ph = np.diag(R).copy()
                ph[ph == 0] = 1.0
                Q = Q * (ph / np.abs(ph))[None, :]
                n = min(d, Q.shape[1])
                W[l, k, :, :n] = Q[:, :n]
    elif mode == "random":
        rng = np.random.default_rng(rng)
        W = (rng.standard_normal((L, K, Nt, d)) + 1j * rng.standard_normal((L, K, Nt, d))) / math.sqrt(2)
    else:
        raise ConfigError(f"unknown init mode {mode!r}")
    return _scale_to_budget(W, cfg.power_w)


# ---------------------------------------------------------------------------
# auxiliary updates

def _psd_floor(G: np.ndarray) -> np.ndarray:
    G = linalg.hermitize(G)
    w, V = np.linalg.eigh(G)
    if np.all(w >= 0):
        return G
    w = np.maximum(w, 0.0)
    return (V * w[..., None, :]) @ herm(V)


def update_gamma(ch: ChannelSet, W: np.ndarray, HW=None) -> np.ndarray:
    """``Gamma = S^H F^{-1} S`` with ``S = H_{lk,l} W_{lk}`` for every user."""
    HW = received_blocks(ch, W) if HW is None else HW
    S = _own(HW)
    F = interference_covariance(ch, W, HW=HW)
    return _psd_floor(herm(S) @ linalg.solve(F, S))


def update_Y(ch: ChannelSet, W: np.ndarray, HW=None) -> np.ndarray:
    """``Y = U^{-1} S`` with ``U`` the full received covariance."""
    HW = received_blocks(ch, W) if HW is None else HW
    return linalg.solve(total_covariance(ch, W, HW), _own(HW))


def update_Ytilde_exact(ch: ChannelSet, W: np.ndarray, Q=None) -> np.ndarray:
    """``Ytilde = Q_hat^{-1} Gdot W``; needs an ``N_r x N_r`` solve per BS."""
    Q = sensing_interference(ch, W) if Q is None else Q
    GdW = ch.Gdot[:, None] @ W
    L, K, Nr, d = GdW.shape
    stacked = np.moveaxis(GdW, 1, 2).reshape(L, Nr, K * d)
    X = linalg.solve(Q, stacked)
    return np.moveaxis(X.reshape(L, Nr, K, d), 2, 1)


def update_Ytilde_grad(ch: ChannelSet, W: np.ndarray, Ztilde: np.ndarray, lamtilde, Q=None) -> np.ndarray:
    """Inverse-free ``Ytilde = Ztilde + (Gdot W - Q_hat Ztilde) / lamtilde``."""
    lamtilde = np.asarray(lamtilde, dtype=float)
    if np.any(lamtilde <= 0):
        raise DomainError("lamtilde must be positive")
    Q = sensing_interference(ch, W) if Q is None else Q
    GdW = ch.Gdot[:, None] @ W
    return Ztilde + (GdW - Q[:, None] @ Ztilde) / lamtilde[:, None, None, None]


def assemble_Lambda(ch: ChannelSet, aux: AuxState, weights: Weights) -> np.ndarray:
    """``Lambda = omega H^H Y (I + Gamma) + 2T beta Gdot^H Ytilde`` per user."""
    L, K = weights.omega.shape
    l = np.arange(L)
    Hown = ch.H[l, :, l]                                    # (L, K, M, Nt)
    d = aux.Gamma.shape[-1]
    comm = herm(Hown) @ aux.Y @ (np.eye(d) + aux.Gamma)
    sens = herm(ch.Gdot)[:, None] @ aux.Ytilde
    return (weights.omega[..., None, None] * comm
            + 2.0 * ch.block_length * weights.beta[:, None, None, None] * sens)


def assemble_L_parts(ch: ChannelSet, aux: AuxState, weights: Weights):
    """Communication and sensing parts of ``L_l``, each of shape (L, N_t, N_t)."""
    d = aux.Gamma.shape[-1]
    # A[i, j, l] = H_{ij,l}^H Y_ij
    A = herm(ch.H) @ aux.Y[:, :, None]                      # (L, K, L, Nt, d)
    C = (weights.omega[..., None, None] * (np.eye(d) + aux.Gamma))[:, :, None]
    comm = np.einsum("ijlnd,ijlmd->lnm", A @ C, A.conj())
    # B[i, l, j] = G_{il}^H Ytilde_ij, zero for i == l
    B = herm(ch.Gcross)[:, :, None] @ aux.Ytilde[:, None]   # (L, L, K, Nt, d)
    sens = 2.0 * ch.block_length * np.einsum("i,iljnd,iljmd->lnm", weights.beta, B, B.conj())
    return linalg.hermitize(comm), linalg.hermitize(sens)


def assemble_L(ch: ChannelSet, aux: AuxState, weights: Weights) -> np.ndarray:
    """Quadratic coefficient ``L_l`` of the transformed objective in ``W_lk``."""
    comm, sens = assemble_L_parts(ch, aux, weights)
    return linalg.hermitize(comm + sens)


# ---------------------------------------------------------------------------
# W updates

def update_W_exact(ch: ChannelSet, aux: AuxState, weights: Weights, power_w,
                   bisection_tol: float = 1e-10, bisection_max_iters: int = 200,
                   Lmat=None, Lam=None, eta0=None):
    """``W = (eta I + L)^{-1} Lambda`` with the smallest feasible ``eta >= 0``.

    Returns ``(W, eta)``. Each ``eta`` trial costs one ``N_t x N_t`` solve.
    """
    Lmat = assemble_L(ch, aux, weights) if Lmat is None else Lmat
    Lam = assemble_Lambda(ch, aux, weights) if Lam is None else Lam
    nL, K, Nt, d = Lam.shape
    P = np.broadcast_to(np.asarray(power_w, float), (nL,))
    W = np.empty_like(Lam)
    etas = np.zeros(nL)
    I = np.eye(Nt)
    for l in range(nL):
        rhs = np.moveaxis(Lam[l], 0, 1).reshape(Nt, K * d)

        def trial(eta):
            try:
                X = linalg.solve(eta * I + Lmat[l], rhs)
            except np.linalg.LinAlgError:
                return None, math.inf
            p = float(np.sum(np.abs(X) ** 2))
            return X, (p if math.isfinite(p) else math.inf)

        X, p = trial(0.0)
        if p <= P[l]:
            eta = 0.0
        else:
            lo = 0.0
            hi = 2.0 * eta0[l] if eta0 is not None and eta0[l] > 0 else 1.0
            X, p = trial(hi)
            grow = 0
            while p > P[l]:
                lo, hi = hi, 2.0 * hi
                X, p = trial(hi)
                grow += 1
                if grow > 2000:
                    raise NumericalError("bisection bracket did not close", diagnostics={"bs": l, "eta_hi": hi})
            for it in range(bisection_max_iters):
                if P[l] - p <= bisection_tol * P[l] or hi - lo <= bisection_tol * hi:
                    break
                mid = 0.5 * (lo + hi)
                Xm, pm = trial(mid)
                if pm > P[l]:
                    lo = mid
                else:
                    hi, X, p = mid, Xm, pm
            else:
                raise NumericalError("bisection did not converge",
                                     diagnostics={"bs": l, "eta_lo": lo, "eta_hi": hi, "power": p})
            eta = hi
        W[l] = np.moveaxis(X.reshape(Nt, K, d), 1, 0)
        etas[l] = eta
    return W, etas


def project_power(W: np.ndarray, power_w) -> np.ndarray:
    """Scale each BS's beamformers onto its power ball if they exceed it."""
    P = np.broadcast_to(np.asarray(power_w, float), (W.shape[0],))
    p = np.sum(np.abs(W) ** 2, axis=(1, 2, 3))
    over = p > P
    if not np.any(over):
        return W
    out = W.copy()
    out[over] *= np.sqrt(P[over] / p[over])[:, None, None, None]
    return out


def update_W_projected(ch: ChannelSet, aux: AuxState, weights: Weights, power_w,
                       Lmat=None, Lam=None) -> np.ndarray:
    """Projected step ``P(Z + (Lambda - L Z) / lam)``; no large solve."""
    lam = np.asarray(aux.lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("lam must be positive")
    Lmat = assemble_L(ch, aux, weights) if Lmat is None else Lmat
    Lam = assemble_Lambda(ch, aux, weights) if Lam is None else Lam
    What = aux.Z + (Lam - Lmat[:, None] @ aux.Z) / lam[:, None, None, None]
    return project_power(What, power_w)


def refresh_aux(ch: ChannelSet, W: np.ndarray, d: int | None = None) -> AuxState:
    """Auxiliaries at their exact optima for ``W`` (``Z = W``, ``Ztilde = Ytilde``)."""
    HW = received_blocks(ch, W)
    aux = AuxState.zeros(ch, W.shape[-1] if d is None else d)
    aux.Gamma = update_gamma(ch, W, HW)
    aux.Y = update_Y(ch, W, HW)
    aux.Ytilde = update_Ytilde_exact(ch, W)
    aux.Z = W.copy()
    aux.Ztilde = aux.Ytilde.copy()
    return aux


def gradient_fo(ch: ChannelSet, W: np.ndarray, weights: Weights) -> np.ndarray:
    """Gradient of the objective with respect to ``conj(W)``, per user.

    Obtained as ``Lambda - L W`` with the auxiliaries refreshed exactly at
    ``W``; the real and imaginary directional derivatives are twice its real
    and imaginary parts.
    """
    aux = refresh_aux(ch, W)
    return assemble_Lambda(ch, aux, weights) - assemble_L(ch, aux, weights)[:, None] @ W


def extrapolation_weight(tau: int) -> float:
    """Nesterov momentum ``max((tau - 2) / (tau + 1), 0)``."""
    if tau < 1:
        raise DomainError("tau must be >= 1")
    return max((tau - 2) / (tau + 1), 0.0)


# ---------------------------------------------------------------------------
# driver

def _majorants(mats: np.ndarray, strategy: MajorantStrategy, vecs: list, floor: np.ndarray):
    lams = np.empty(mats.shape[0])
    for l, A in enumerate(mats):
        lam, v = lambda_max(A, strategy, v0=vecs[l], return_vector=True)
        if v is not None:
            vecs[l] = v
        lams[l] = max(lam, floor[l])
    return lams


def run(algorithm: str, ch: ChannelSet, cfg, weights: Weights | None = None,
        opts: SolverOptions | None = None, rng=None, W0: np.ndarray | None = None):
    """Run one of ``ALGORITHMS`` from a feasible start.

    ``W0`` overrides the initialization given by ``opts.init``. Returns
    ``(W, trace)``; ``trace.truncated`` is set when an iteration or time
    limit stopped the run, in which case the best iterate seen is returned.
    Wall time in the trace excludes objective evaluation.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    opts = SolverOptions(algorithm=algorithm) if opts is None else opts.replace(algorithm=algorithm)
    weights = Weights.from_config(cfg) if weights is None else weights
    P = cfg.power_w
    strategy = opts.lambda_strategy
    W = init_beamformers(cfg, ch, opts.init, rng) if W0 is None else np.array(W0, dtype=complex)
    nL = W.shape[0]
    d = W.shape[-1]
    aux = AuxState.zeros(ch, d)
    lam_floor = 1e-12 * P
    vecs_L = [None] * nL
    vecs_Q = [None] * nL

    trace = IterationTrace(algorithm=algorithm)
    clock = time.perf_counter
    elapsed = 0.0

    def evaluate(W_):
        with linalg.phase("objective"):
            return objective(ch, W_, weights)

    t0 = clock()
    if algorithm != "conventional":
        # one exact solve before the loop; the audit tags it separately
        with linalg.phase("init"):
            aux.Ytilde = update_Ytilde_exact(ch, W)
        aux.Ztilde = aux.Ytilde.copy()
    elapsed += clock() - t0

    ob = evaluate(W)
    if not math.isfinite(ob.weighted_sum):
        raise NumericalError("non-finite objective at the starting point", iteration=0)
    trace.append(TraceRow(0, 0.0, ob.weighted_sum, ob.sum_rate, ob.sum_fisher))
    best_W, best_f = W, ob.weighted_sum
    f_prev = ob.weighted_sum
    W_prev = W
    stop_reason = "max_iters"
    recorded_last = True

    for it in range(1, opts.max_iters + 1):
        t0 = clock()
        diag = {}
        if algorithm == "fast":
            ups = extrapolation_weight(max(it - 1, 1))
            V = W + ups * (W - W_prev)
            W_prev = W
            W = V
        else:
            W_prev = W
        HW = received_blocks(ch, W)
        if algorithm == "conventional":
            aux.Gamma = update_gamma(ch, W, HW)
            aux.Y = update_Y(ch, W, HW)
            aux.Ytilde = update_Ytilde_exact(ch, W)
            Lmat = assemble_L(ch, aux, weights)
            Lam = assemble_Lambda(ch, aux, weights)
            W, aux.eta = update_W_exact(ch, aux, weights, P, opts.bisection_tol,
                                        opts.bisection_max_iters, Lmat, Lam, eta0=aux.eta)
            diag["eta"] = aux.eta.tolist()
        else:
            aux.Z = W.copy()
            aux.Gamma = update_gamma(ch, W, HW)
            aux.Y = update_Y(ch, W, HW)
            Q = sensing_interference(ch, W)
            aux.lamtilde = _majorants(Q, strategy, vecs_Q, np.full(nL, ch.sigma2_bs))
            aux.Ytilde = update_Ytilde_grad(ch, W, aux.Ztilde, aux.lamtilde, Q)
            aux.Ztilde = aux.Ytilde.copy()
            Lmat = assemble_L(ch, aux, weights)
            Lam = assemble_Lambda(ch, aux, weights)
            aux.lam = _majorants(Lmat, strategy, vecs_L, lam_floor)
            W = update_W_projected(ch, aux, weights, P, Lmat, Lam)
            diag["lam"] = aux.lam.tolist()
            diag["lamtilde"] = aux.lamtilde.tolist()
        elapsed += clock() - t0

        ob = evaluate(W)
        f = ob.weighted_sum
        if not math.isfinite(f):
            raise NumericalError(f"non-finite objective at iteration {it}", iteration=it)
        if f > best_f:
            best_W, best_f = W, f
        if algorithm == "fast" and opts.restart_on_decrease and f < f_prev:
            W_prev = W
        done = abs(f - f_prev) <= opts.rel_tol * abs(f)
        timed_out = opts.time_limit_s is not None and elapsed >= opts.time_limit_s
        recorded_last = it % opts.record_every == 0 or done or timed_out or it == opts.max_iters
        if recorded_last:
            trace.append(TraceRow(it, elapsed, f, ob.sum_rate, ob.sum_fisher, diag or None))
        f_prev = f
        trace.iterations = it
        if done:
            stop_reason = "converged"
            break
        if timed_out:
            stop_reason = "time_limit"
            break

    trace.stop_reason = stop_reason
    trace.truncated = stop_reason != "converged"
    return (best_W if trace.truncated else W), trace
