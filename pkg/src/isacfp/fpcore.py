"""Fractional-programming building blocks.

Spectral majorants for the nonhomogeneous bound, the bound itself, the
closed-form values of the quadratic and Lagrangian dual transforms, and the
full two-level surrogate used to check the majorization argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError
from .linalg import herm

__all__ = [
    "MajorantStrategy",
    "lambda_max",
    "power_method",
    "nonhomogeneous_majorant",
    "quadratic_transform_value",
    "ldt_value",
    "surrogate_gs_value",
]

STRATEGY_ALIASES = {
    "max": "exact_lambda_max",
    "exact": "exact_lambda_max",
    "exact_lambda_max": "exact_lambda_max",
    "trace": "trace",
    "frobenius": "frobenius",
    "fro": "frobenius",
}


@dataclass(frozen=True)
class MajorantStrategy:
    """How an upper bound on the largest eigenvalue is obtained."""

    kind: str = "exact_lambda_max"
    power_iters: int = 50
    power_tol: float = 1e-8
    safety_factor: float = 1.0 + 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_ALIASES:
            raise DomainError(f"unknown majorant strategy {self.kind!r}")
        object.__setattr__(self, "kind", STRATEGY_ALIASES[self.kind])
        if self.safety_factor < 1:
            raise DomainError("safety_factor must be >= 1")
        if not self.power_tol > 0:
            raise DomainError("power_tol must be positive")
        if self.power_iters < 1:
            raise DomainError("power_iters must be positive")

    @property
    def cli_name(self) -> str:
        return {"exact_lambda_max": "max"}.get(self.kind, self.kind)


def _start_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def power_method(A: np.ndarray, iters: int = 50, tol: float = 1e-8, v0=None, seed: int = 0):
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    Stops once successive Rayleigh quotients agree to relative ``tol``.
    Returns ``(rayleigh_quotient, unit_vector)``.
    """
    n = A.shape[0]
    v = _start_vector(n, seed) if v0 is None else v0 / np.linalg.norm(v0)
    rho = 0.0
    for _ in range(iters):
        w = A @ v
        rho_new = float(np.real(np.vdot(v, w)))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, v
        v = w / nrm
        if abs(rho_new - rho) <= tol * abs(rho_new):
            rho = rho_new
            break
        rho = rho_new
    return rho, v


def _check_hermitian(A: np.ndarray, tol: float = 1e-10) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("expected a square matrix")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - herm(A)) > tol * max(scale, np.finfo(float).tiny):
        raise DomainError("matrix is not Hermitian")


def lambda_max(A: np.ndarray, strategy: MajorantStrategy | str = MajorantStrategy(),
               v0=None, return_vector: bool = False):
    """Upper bound on ``lambda_max(A)`` for Hermitian PSD ``A``.

    ``exact_lambda_max`` runs the power method and inflates the Rayleigh
    quotient by ``safety_factor``; ``trace`` and ``frobenius`` are the cheap
    bounds ``tr(A) >= ||A||_F >= lambda_max(A)``. ``v0`` warm-starts the
    power method. A zero matrix gives 0.
    """
    if isinstance(strategy, str):
        strategy = MajorantStrategy(kind=strategy)
    _check_hermitian(A)
    vec = None
    if strategy.kind == "trace":
        lam = float(np.real(np.trace(A)))
    elif strategy.kind == "frobenius":
        lam = float(np.linalg.norm(A))
    else:
        rho, vec = power_method(A, strategy.power_iters, strategy.power_tol, v0, strategy.seed)
        lam = rho * strategy.safety_factor
    lam = max(lam, 0.0)
    return (lam, vec) if return_vector else lam


def nonhomogeneous_majorant(L: np.ndarray, K_scalar: float, X: np.ndarray, Z: np.ndarray) -> float:
    """Upper bound on ``tr(X^H L X)`` valid when ``K_scalar >= lambda_max(L)``.

    Tight at ``Z = X``.
    """
    X, Z = np.atleast_2d(X), np.atleast_2d(Z)
    if X.shape != Z.shape or L.shape[1] != X.shape[0]:
        raise DomainError("shape mismatch between L, X and Z")
    KmL = K_scalar * np.eye(L.shape[0]) - L
    val = (K_scalar * np.vdot(X, X)
           - 2.0 * np.real(np.vdot(X, KmL @ Z))
           + np.vdot(Z, KmL @ Z))
    return float(np.real(val))


def quadratic_transform_value(sqrtA: np.ndarray, B: np.ndarray, Y: np.ndarray, C: np.ndarray) -> float:
    """``tr(2 Re{sqrtA^H Y C} - Y^H B Y C)``.

    For fixed ``sqrtA, B, C`` this is maximized at ``Y = B^{-1} sqrtA`` where
    it equals ``tr(C sqrtA^H B^{-1} sqrtA)``.
    """
    if sqrtA.shape != Y.shape or B.shape[0] != Y.shape[0] or C.shape[0] != Y.shape[1]:
        raise DomainError("shape mismatch")
    val = 2.0 * np.real(np.trace(herm(sqrtA) @ Y @ C)) - np.real(np.trace(herm(Y) @ B @ Y @ C))
    return float(val)


def ldt_value(Gamma: np.ndarray, sqrtA: np.ndarray, B: np.ndarray) -> float:
    """Lagrangian dual transform of ``ln|I + sqrtA^H B^{-1} sqrtA|``.

    Returns ``ln|I+G| - tr(G) + tr((I+G) sqrtA^H (A+B)^{-1} sqrtA)`` with
    ``A = sqrtA sqrtA^H``; the maximum over ``G`` is attained at
    ``G = sqrtA^H B^{-1} sqrtA``.
    """
    w = np.linalg.eigvalsh(linalg.hermitize(Gamma))
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise DomainError("Gamma must be positive semidefinite")
    d = Gamma.shape[0]
    A = sqrtA @ herm(sqrtA)
    with linalg.phase("fpcore"):
        ratio = herm(sqrtA) @ linalg.solve(A + B, sqrtA)
    _, logdet = np.linalg.slogdet(np.eye(d) + Gamma)
    val = logdet - np.real(np.trace(Gamma)) + np.real(np.trace((np.eye(d) + Gamma) @ ratio))
    return float(val)


def surrogate_gs_value(ch, W, aux, weights) -> float:
    """Value of the doubly-majorized surrogate at ``W`` for fixed auxiliaries.

    ``aux`` supplies ``Gamma, Y, Ytilde, Z, Ztilde, lam, lamtilde``. The
    transmit quadratic is bounded around ``Z`` with ``lam``; the echo-side
    quadratic ``tr(Yt^H Q(Z, W) Yt)``, where ``Q(Z, W)`` is the interference
    matrix linearized around ``Z``, is bounded around ``Ztilde`` with
    ``lamtilde``. With the auxiliaries refreshed at ``W_hat`` the value
    equals the objective at ``W_hat`` and lower-bounds it elsewhere.
    """
    from .solvers import assemble_L_parts, assemble_Lambda

    nL, nK, _, _, Nr = ch.dims
    T = ch.block_length
    omega, beta = weights.omega, weights.beta
    Gam, Y, Yt, Z, Zt = aux.Gamma, aux.Y, aux.Ytilde, aux.Z, aux.Ztilde
    d = W.shape[-1]
    I_d = np.eye(d)
    Lam = assemble_Lambda(ch, aux, weights)
    D, _ = assemble_L_parts(ch, aux, weights)

    GZ = ch.Gcross[:, :, None] @ Z[None]              # (L, L, K, Nr, d)
    G2WZ = ch.Gcross[:, :, None] @ (2 * W - Z)[None]
    Qzw = np.einsum("lijnd,lijmd->lnm", GZ, G2WZ.conj())
    Qzw = linalg.hermitize(Qzw) + ch.sigma2_bs * np.eye(Nr)

    total = 0.0
    for l in range(nL):
        for k in range(nK):
            w, z = W[l, k], Z[l, k]
            val = 2.0 * np.real(np.vdot(w, Lam[l, k]))
            val -= aux.lam[l] * np.linalg.norm(w - z) ** 2
            val -= np.real(np.vdot(2 * w - z, D[l] @ z))
            if beta[l]:
                val -= 2.0 * T * beta[l] * nonhomogeneous_majorant(Qzw[l], aux.lamtilde[l], Yt[l, k], Zt[l, k])
            val += omega[l, k] * (np.linalg.slogdet(I_d + Gam[l, k])[1] - np.real(np.trace(Gam[l, k])))
            val -= omega[l, k] * ch.sigma2 * np.real(np.trace((I_d + Gam[l, k]) @ herm(Y[l, k]) @ Y[l, k]))
            total += val
    return float(total)
