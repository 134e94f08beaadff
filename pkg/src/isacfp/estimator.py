"""Echo synthesis and grid-search DoA estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scenario import ChannelSet

__all__ = [
    "EchoObservation",
    "EstimationReport",
    "synthesize_echo",
    "doa_objective",
    "estimate_theta",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EchoObservation:
    Psi_tilde: np.ndarray   # (L, N_r, T)
    X: np.ndarray           # (L, N_t, T)
    S: np.ndarray           # (L, K, d, T)


@dataclass(frozen=True)
class EstimationReport:
    theta_hat: np.ndarray
    theta_true: np.ndarray
    per_bs_sq_err: np.ndarray
    mean_sq_err: float
    max_sq_err: float
    grid_resolution: float

    @classmethod
    def from_estimates(cls, theta_hat, theta_true, grid_resolution=0.0) -> "EstimationReport":
        theta_hat = np.asarray(theta_hat, float)
        theta_true = np.asarray(theta_true, float)
        err = (theta_hat - theta_true) ** 2
        return cls(theta_hat, theta_true, err, float(err.mean()), float(err.max()), float(grid_resolution))

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.tolist(),
            "theta_true": self.theta_true.tolist(),
            "per_bs_sq_err": self.per_bs_sq_err.tolist(),
            "mean_sq_err": self.mean_sq_err,
            "max_sq_err": self.max_sq_err,
            "grid_resolution": self.grid_resolution,
        }


def _qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    # unit-modulus symbols, so (1/T) E[S S^H] = I exactly
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=shape)))


def synthesize_echo(ch: ChannelSet, W: np.ndarray, rng, noise: bool = True) -> EchoObservation:
    """Received echoes ``Psi[l] = sum_i G[l, i] X[i] + noise`` for QPSK symbols.

    ``ch`` supplies the true response matrices; noise entries are
    CN(0, sigma2_bs).
    """
    rng = np.random.default_rng(rng)
    L, K, Nt, d = W.shape
    T = ch.block_length
    S = _qpsk(rng, (L, K, d, T))
    X = np.einsum("lknd,lkdt->lnt", W, S)
    G = ch.echo_channels()
    Psi = np.einsum("lirn,int->lrt", G, X)
    if noise:
        Nr = Psi.shape[1]
        Psi = Psi + math.sqrt(ch.sigma2_bs / 2) * (rng.standard_normal((L, Nr, T))
                                                   + 1j * rng.standard_normal((L, Nr, T)))
    return EchoObservation(Psi, X, S)


def doa_objective(Psi_tilde: np.ndarray, X: np.ndarray, xi: float, theta, n_r: int, n_t: int):
    """``|tr(G(theta)^H Psi X^H)|^2 / ||G(theta) X||_F^2`` for the ULA response model.

    ``theta`` may be an array; the ratio is evaluated elementwise.
    """
    if xi == 0 or not np.any(X):
        raise DomainError("doa_objective needs nonzero X and reflection coefficient")
    theta = np.asarray(theta, dtype=float)
    th = np.atleast_1d(theta)
    m_r, m_t = np.arange(n_r), np.arange(n_t)
    ar = np.exp(-1j * np.pi * np.outer(np.sin(th), m_r))      # (n, n_r)
    at = np.exp(-1j * np.pi * np.outer(np.sin(th), m_t))      # (n, n_t)
    # G = xi ar at^T; tr(G^H Psi X^H) = xi * ar^H (Psi X^H) conj(at)
    C = Psi_tilde @ X.conj().T
    num = np.abs(xi * np.einsum("nr,rt,nt->n", ar.conj(), C, at.conj())) ** 2
    atX = at @ X                                              # (n, T)
    den = xi ** 2 * n_r * np.sum(np.abs(atX) ** 2, axis=1)
    out = num / den
    return float(out[0]) if theta.ndim == 0 else out


def _golden_max(f, a: float, b: float, iters: int):
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def estimate_theta(obs: EchoObservation, ch: ChannelSet, center=None, halfwidth: float = 0.1,
                   points: int = 401, refine_iters: int = 20) -> EstimationReport:
    """Grid-search the DoA of every BS around ``center`` (default: rough DoAs).

    The argmax over a uniform grid (ties go to the smallest angle) is refined
    by golden-section search over the neighboring grid cells; the refined
    angle is kept only if it strictly improves the ratio.
    """
    if points < 2:
        raise DomainError("grid needs at least 2 points")
    L, _, _, Nt, Nr = ch.dims
    center = ch.theta_rough if center is None else np.broadcast_to(np.asarray(center, float), (L,))
    step = 2 * halfwidth / (points - 1)
    theta_hat = np.empty(L)
    for l in range(L):
        grid = center[l] + np.linspace(-halfwidth, halfwidth, points)
        vals = doa_objective(obs.Psi_tilde[l], obs.X[l], ch.xi[l], grid, Nr, Nt)
        i = int(np.argmax(vals))
        best_t, best_v = grid[i], vals[i]
        if refine_iters > 0:
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
            f = lambda t: doa_objective(obs.Psi_tilde[l], obs.X[l], ch.xi[l], t, Nr, Nt)
            t_ref, v_ref = _golden_max(f, a, b, refine_iters)
            if v_ref > best_v * (1 + 1e-12):
                best_t = t_ref
        theta_hat[l] = best_t
    return EstimationReport.from_estimates(theta_hat, ch.theta_true, step)
