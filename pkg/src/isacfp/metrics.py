"""Rates, Fisher information and the weighted ISAC objective.

Beamformers are a complex array ``W`` of shape ``(L, K, N_t, d)``. Rates
are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError
from .linalg import herm
from .scenario import ChannelSet, NetworkConfig

__all__ = [
    "Weights",
    "ObjectiveBreakdown",
    "received_blocks",
    "total_covariance",
    "interference_covariance",
    "user_rate",
    "sensing_interference",
    "fisher_information",
    "objective",
    "check_feasible",
    "bs_power",
]


@dataclass(frozen=True)
class Weights:
    omega: np.ndarray   # (L, K)
    beta: np.ndarray    # (L,)

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "Weights":
        return cls(cfg.omega, cfg.beta)


def received_blocks(ch: ChannelSet, W: np.ndarray) -> np.ndarray:
    """``HW[l, k, i, j] = H[l, k, i] @ W[i, j]``, shape (L, K, L, K, M, d)."""
    return ch.H[:, :, :, None] @ W[None, None]


def _gram(blocks: np.ndarray, n_lead: int) -> np.ndarray:
    # sum over all middle block indices of B B^H
    lead = blocks.shape[:n_lead]
    m, d = blocks.shape[-2:]
    flat = np.moveaxis(blocks.reshape(lead + (-1, m, d)), -2, -3).reshape(lead + (m, -1))
    return flat @ herm(flat)


def total_covariance(ch: ChannelSet, W: np.ndarray, HW=None) -> np.ndarray:
    """Full received covariance ``U[l, k]`` including the user's own signal."""
    if ch.sigma2 <= 0:
        raise DomainError("user noise power must be positive")
    HW = received_blocks(ch, W) if HW is None else HW
    M = HW.shape[-2]
    return _gram(HW, 2) + ch.sigma2 * np.eye(M)


def _own(HW: np.ndarray) -> np.ndarray:
    L, K = HW.shape[:2]
    l, k = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    return HW[l, k, l, k]


def interference_covariance(ch: ChannelSet, W: np.ndarray, l=None, k=None, HW=None) -> np.ndarray:
    """Interference-plus-noise covariance ``F`` at user ``(l, k)``.

    Without ``l``/``k`` all users are returned as an ``(L, K, M, M)`` array.
    """
    HW = received_blocks(ch, W) if HW is None else HW
    S = _own(HW)
    F = total_covariance(ch, W, HW) - S @ herm(S)
    F = linalg.hermitize(F)
    return F if l is None else F[l, k]


def user_rate(ch: ChannelSet, W: np.ndarray, l=None, k=None) -> np.ndarray:
    """``ln|I + S^H F^{-1} S|`` with ``S = H_{lk,l} W_{lk}``; all users if no index given."""
    HW = received_blocks(ch, W)
    S = _own(HW)
    F = interference_covariance(ch, W, HW=HW)
    with linalg.phase("metrics"):
        gamma = herm(S) @ linalg.solve(F, S)
    d = S.shape[-1]
    _, logdet = np.linalg.slogdet(np.eye(d) + linalg.hermitize(gamma))
    R = np.maximum(logdet, 0.0)
    return R if l is None else float(R[l, k])


def sensing_interference(ch: ChannelSet, W: np.ndarray, l=None) -> np.ndarray:
    """``Q_hat[l]``: echo-array interference from other BSs plus noise."""
    if ch.sigma2_bs <= 0:
        raise DomainError("BS noise power must be positive")
    GW = ch.Gcross[:, :, None] @ W[None]          # (L, L, K, Nr, d); zero on i == l
    Nr = GW.shape[-2]
    Q = linalg.hermitize(_gram(GW, 1) + ch.sigma2_bs * np.eye(Nr))
    return Q if l is None else Q[l]


def fisher_information(ch: ChannelSet, W: np.ndarray, l=None) -> np.ndarray:
    """``J[l] = 2T * sum_k tr((Gdot W)^H Q_hat^{-1} (Gdot W))``."""
    Q = sensing_interference(ch, W)
    GdW = ch.Gdot[:, None] @ W                    # (L, K, Nr, d)
    L, K, Nr, d = GdW.shape
    stacked = np.moveaxis(GdW, 1, 2).reshape(L, Nr, K * d)
    with linalg.phase("metrics"):
        X = linalg.solve(Q, stacked)
    J = 2.0 * ch.block_length * np.real(np.einsum("lij,lij->l", stacked.conj(), X))
    J = np.maximum(J, 0.0)
    return J if l is None else float(J[l])


@dataclass(frozen=True)
class ObjectiveBreakdown:
    rates: np.ndarray      # (L, K), nats
    fisher: np.ndarray     # (L,)
    weighted_sum: float
    sum_rate: float
    sum_fisher: float

    def to_dict(self) -> dict:
        return {
            "sum_rate_nats": self.sum_rate,
            "sum_fisher": self.sum_fisher,
            "weighted_sum": self.weighted_sum,
            "rates_nats": self.rates.tolist(),
            "fisher": self.fisher.tolist(),
        }


def objective(ch: ChannelSet, W: np.ndarray, weights: Weights) -> ObjectiveBreakdown:
    """Weighted sum of user rates and per-BS Fisher information."""
    R = user_rate(ch, W)
    J = fisher_information(ch, W)
    ws = float(np.sum(weights.omega * R) + np.sum(weights.beta * J))
    return ObjectiveBreakdown(R, J, ws, float(R.sum()), float(J.sum()))


def bs_power(W: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(W) ** 2, axis=(1, 2, 3))


def check_feasible(W: np.ndarray, power_w, rel_eps: float = 1e-9):
    """Return ``(feasible, slack)`` for the per-BS power budgets ``power_w``.

    ``power_w`` may also be a :class:`NetworkConfig`.
    """
    if isinstance(power_w, NetworkConfig):
        power_w = power_w.power_w
    P = np.broadcast_to(np.asarray(power_w, dtype=float), (W.shape[0],))
    slack = P - bs_power(W)
    return bool(np.all(slack >= -rel_eps * P)), slack
