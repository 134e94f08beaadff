"""Synthetic multi-cell ISAC scenarios.

Everything here is deterministic given a seed: the hexagonal topology, the
large-scale fading, the Rayleigh small-scale fading, and the monostatic
response matrices of each BS toward the single shared target.

Array conventions used throughout the package (uniform dimensions)::

    H      (L, K, L, M, N_t)   H[l, k, i] : BS i -> user (l, k)
    Gcross (L, L, N_r, N_t)    Gcross[l, i] : BS i -> BS l echo array, zero for i == l
    Gresp  (L, N_r, N_t)       xi_l * a_r(theta_l) a_t(theta_l)^T
    Gdot   (L, N_r, N_t)       d Gresp / d theta_l
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "NetworkConfig",
    "Topology",
    "ChannelSet",
    "dbm_to_watts",
    "build_topology",
    "pathloss_db",
    "steering_vector",
    "steering_derivative",
    "build_response",
    "generate_channels",
    "make_scenario",
    "load_config",
    "write_positions_csv",
]


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def _broadcast(value, shape, name):
    arr = np.asarray(value, dtype=float)
    try:
        return np.broadcast_to(arr, shape).copy()
    except ValueError:
        raise ConfigError(f"{name} has shape {arr.shape}, expected scalar or {shape}") from None


@dataclass(frozen=True)
class NetworkConfig:
    """Declarative description of one multi-cell ISAC network.

    Scalars given for per-BS or per-user quantities (power, reflection
    coefficient, weights) are broadcast; the accessors ``power_w``,
    ``xi``, ``omega`` and ``beta`` always return full arrays in linear units.
    """

    num_cells: int = 7
    users_per_cell: int = 3
    tx_antennas: int = 16
    echo_rx_antennas: int = 16
    user_antennas: int = 4
    streams: int = 4
    block_length: int = 30
    power_budget_dbm: float | Sequence[float] = 20.0
    noise_user_dbm: float = -80.0
    noise_bs_dbm: float = -70.0
    reflection_coeff: float | Sequence[float] = 1e-3
    rate_weights: float | Sequence = 1.0
    sensing_weights: float | Sequence[float] = 1e-14
    bs_spacing_m: float = 800.0
    shadowing_std_db: float = 8.0
    pathloss_offset_db: float = 15.3
    pathloss_slope: float = 37.6
    target_position_m: tuple[float, float] | None = (500.0, -1000.0)
    rough_doa_error_rad: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("num_cells", "users_per_cell", "tx_antennas", "echo_rx_antennas",
                     "user_antennas", "streams", "block_length"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.streams > self.user_antennas:
            raise ConfigError("streams must not exceed user_antennas")
        if self.num_cells > 7:
            raise ConfigError("the hexagonal layout supports at most 7 cells")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be an unsigned integer")
        L, K = self.num_cells, self.users_per_cell
        for name, shape in (("power_budget_dbm", (L,)), ("reflection_coeff", (L,)),
                            ("rate_weights", (L, K)), ("sensing_weights", (L,))):
            arr = _broadcast(getattr(self, name), shape, name)
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} must be finite")
            if name != "power_budget_dbm" and np.any(arr < 0):
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("noise_user_dbm", "noise_bs_dbm", "pathloss_offset_db", "pathloss_slope"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.bs_spacing_m > 0:
            raise ConfigError("bs_spacing_m must be positive")
        if not self.shadowing_std_db >= 0 or not self.rough_doa_error_rad >= 0:
            raise ConfigError("shadowing_std_db and rough_doa_error_rad must be nonnegative")

    @property
    def power_w(self) -> np.ndarray:
        return dbm_to_watts(_broadcast(self.power_budget_dbm, (self.num_cells,), "power_budget_dbm"))

    @property
    def sigma2(self) -> float:
        return float(dbm_to_watts(self.noise_user_dbm))

    @property
    def sigma2_bs(self) -> float:
        return float(dbm_to_watts(self.noise_bs_dbm))

    @property
    def xi(self) -> np.ndarray:
        return _broadcast(self.reflection_coeff, (self.num_cells,), "reflection_coeff")

    @property
    def omega(self) -> np.ndarray:
        return _broadcast(self.rate_weights, (self.num_cells, self.users_per_cell), "rate_weights")

    @property
    def beta(self) -> np.ndarray:
        return _broadcast(self.sensing_weights, (self.num_cells,), "sensing_weights")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, np.ndarray):
                d[key] = value.tolist()
            elif isinstance(value, tuple):
                d[key] = list(value)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        data = dict(data)
        for key in ("power_budget_dbm", "reflection_coeff", "sensing_weights", "rate_weights"):
            if isinstance(data.get(key), list):
                data[key] = tuple(tuple(v) if isinstance(v, list) else v for v in data[key])
        if isinstance(data.get("target_position_m"), list):
            data["target_position_m"] = tuple(data["target_position_m"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


def load_config(path) -> NetworkConfig:
    """Read a :class:`NetworkConfig` from a JSON file with snake_case keys."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return NetworkConfig.from_dict(data.get("scenario", data))


# ---------------------------------------------------------------------------
# topology

_HEX_ANGLES = np.deg2rad(np.arange(6) * 60.0)


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray          # (L, 2)
    user_positions: np.ndarray        # (L, K, 2)
    target_positions: np.ndarray      # (n_targets, 2)
    wraparound_images: np.ndarray     # (L, n_images, 2); image 0 is the BS itself

    def distance_to_bs(self, points: np.ndarray) -> np.ndarray:
        """Wrap-around distance from every BS to each point.

        Returns an array of shape ``points.shape[:-1] + (L,)``.
        """
        points = np.asarray(points, dtype=float)
        diff = points[..., None, None, :] - self.wraparound_images
        return np.linalg.norm(diff, axis=-1).min(axis=-1)


def _hex_sites(L: int, spacing: float) -> np.ndarray:
    sites = [(0.0, 0.0)] + [(spacing * math.cos(a), spacing * math.sin(a)) for a in _HEX_ANGLES]
    return np.array(sites[:L])


def _wrap_shifts(spacing: float) -> np.ndarray:
    # translation vectors of the 7-cell cluster on the hexagonal lattice
    base = spacing * np.array([2.5, math.sqrt(3) / 2])
    rot = [np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]) for a in _HEX_ANGLES]
    return np.array([r @ base for r in rot])


def build_topology(cfg: NetworkConfig, rng: np.random.Generator) -> Topology:
    """Place BSs on a hexagonal grid and drop users near their cell edge.

    ``L = 7`` gives the center cell plus its six neighbors with wrap-around;
    smaller ``L`` uses the first sites of the same layout without wrap-around.
    Users sit at radius uniform in ``[0.8, 1.0]`` of the inscribed cell radius.
    """
    L, K = cfg.num_cells, cfg.users_per_cell
    if not 1 <= L <= 7:
        raise ConfigError(f"unsupported number of cells {L} for the hexagonal layout")
    bs = _hex_sites(L, cfg.bs_spacing_m)
    if L == 7:
        shifts = np.vstack([np.zeros((1, 2)), _wrap_shifts(cfg.bs_spacing_m)])
    else:
        shifts = np.zeros((1, 2))
    images = bs[:, None, :] + shifts[None, :, :]

    inscribed = cfg.bs_spacing_m / 2.0
    radius = inscribed * rng.uniform(0.8, 1.0, size=(L, K))
    angle = rng.uniform(0.0, 2 * math.pi, size=(L, K))
    users = bs[:, None, :] + np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)

    if cfg.target_position_m is None:
        r = inscribed * math.sqrt(rng.uniform())
        a = rng.uniform(0.0, 2 * math.pi)
        target = np.array([[r * math.cos(a), r * math.sin(a)]])
    else:
        target = np.array([cfg.target_position_m], dtype=float)
    return Topology(bs, users, target, images)


def write_positions_csv(topo: Topology, path) -> None:
    """Write BS, user and target positions as ``entity,type,x_m,y_m``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "type", "x_m", "y_m"])
        for l, (x, y) in enumerate(topo.bs_positions):
            writer.writerow([f"bs{l}", "bs", repr(float(x)), repr(float(y))])
        for l in range(topo.user_positions.shape[0]):
            for k, (x, y) in enumerate(topo.user_positions[l]):
                writer.writerow([f"user{l}_{k}", "user", repr(float(x)), repr(float(y))])
        for t, (x, y) in enumerate(topo.target_positions):
            writer.writerow([f"target{t}", "target", repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# propagation and array response

def pathloss_db(distance_m, shadow_db=0.0, offset_db=15.3, slope=37.6):
    """Distance-dependent path loss ``offset + slope*log10(d) + shadow`` in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    out = offset_db + slope * np.log10(d) + shadow_db
    return float(out) if np.ndim(out) == 0 else out


def steering_vector(theta: float, n_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response; entry ``m`` is ``exp(-j*pi*m*sin(theta))``."""
    if n_antennas < 1:
        raise DomainError("n_antennas must be at least 1")
    m = np.arange(n_antennas)
    return np.exp(-1j * np.pi * m * np.sin(theta))


def steering_derivative(theta: float, n_antennas: int) -> np.ndarray:
    """Derivative of :func:`steering_vector` with respect to ``theta``."""
    m = np.arange(n_antennas)
    return -1j * np.pi * m * np.cos(theta) * steering_vector(theta, n_antennas)


def build_response(xi: float, theta: float, n_r: int, n_t: int):
    """Return ``(Gresp, Gdot)`` for reflection coefficient ``xi`` at angle ``theta``."""
    ar, at = steering_vector(theta, n_r), steering_vector(theta, n_t)
    dar, dat = steering_derivative(theta, n_r), steering_derivative(theta, n_t)
    G = xi * np.outer(ar, at)
    Gdot = xi * (np.outer(dar, at) + np.outer(ar, dat))
    return G, Gdot


@dataclass(frozen=True)
class ChannelSet:
    H: np.ndarray
    Gcross: np.ndarray
    Gresp: np.ndarray
    Gdot: np.ndarray
    theta_true: np.ndarray
    theta_rough: np.ndarray
    xi: np.ndarray
    sigma2: float
    sigma2_bs: float
    block_length: int
    design_angles: str = "true"

    @property
    def dims(self):
        """``(L, K, M, N_t, N_r)``."""
        L, K, _, M, Nt = self.H.shape
        return L, K, M, Nt, self.Gresp.shape[1]

    def at_angles(self, theta, label: str = "custom") -> "ChannelSet":
        """Copy with the response matrices rebuilt at the given DoAs."""
        L, _, _, Nt, Nr = self.dims
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (L,))
        Gs, Gd = zip(*(build_response(self.xi[l], theta[l], Nr, Nt) for l in range(L)))
        return replace(self, Gresp=np.array(Gs), Gdot=np.array(Gd), design_angles=label)

    def for_design(self) -> "ChannelSet":
        """Response matrices at the rough DoAs, as available to the BSs."""
        return self.at_angles(self.theta_rough, label="rough")

    def echo_channels(self) -> np.ndarray:
        """``G[l, i]`` with the response matrix on the diagonal, shape (L, L, N_r, N_t)."""
        G = self.Gcross.copy()
        idx = np.arange(G.shape[0])
        G[idx, idx] = self.Gresp
        return G


def _crandn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _true_doa(bs: np.ndarray, target: np.ndarray) -> np.ndarray:
    # ULA along x; angle from broadside, folded into [-pi/2, pi/2]
    diff = target[None, :] - bs
    return np.arcsin(np.clip(diff[:, 0] / np.linalg.norm(diff, axis=1), -1.0, 1.0))


def generate_channels(cfg: NetworkConfig, topo: Topology, rng: np.random.Generator) -> ChannelSet:
    """Draw every channel of the network.

    Each link gets an independent log-normal shadowing draw and i.i.d.
    CN(0, 1) fading scaled by the square root of its linear path gain.
    """
    L, K = cfg.num_cells, cfg.users_per_cell
    M, Nt, Nr = cfg.user_antennas, cfg.tx_antennas, cfg.echo_rx_antennas
    pl = dict(offset_db=cfg.pathloss_offset_db, slope=cfg.pathloss_slope)

    d_user = topo.distance_to_bs(topo.user_positions)          # (L, K, L)
    shadow = cfg.shadowing_std_db * rng.standard_normal(d_user.shape)
    gain = 10.0 ** (-pathloss_db(d_user, shadow, **pl) / 10.0)
    H = np.sqrt(gain)[..., None, None] * _crandn(rng, (L, K, L, M, Nt))

    Gcross = np.zeros((L, L, Nr, Nt), dtype=complex)
    if L > 1:
        d_bs = topo.distance_to_bs(topo.bs_positions)           # (L, L): [l, i]
        off = ~np.eye(L, dtype=bool)
        shadow_bs = cfg.shadowing_std_db * rng.standard_normal((L, L))
        gain_bs = np.zeros((L, L))
        gain_bs[off] = 10.0 ** (-pathloss_db(d_bs[off], shadow_bs[off], **pl) / 10.0)
        Gcross = np.sqrt(gain_bs)[..., None, None] * _crandn(rng, (L, L, Nr, Nt))

    theta_true = _true_doa(topo.bs_positions, topo.target_positions[0])
    theta_rough = theta_true + rng.uniform(-cfg.rough_doa_error_rad, cfg.rough_doa_error_rad, L)
    xi = cfg.xi
    Gs, Gd = zip(*(build_response(xi[l], theta_true[l], Nr, Nt) for l in range(L)))
    return ChannelSet(H=H, Gcross=Gcross, Gresp=np.array(Gs), Gdot=np.array(Gd),
                      theta_true=theta_true, theta_rough=theta_rough, xi=xi,
                      sigma2=cfg.sigma2, sigma2_bs=cfg.sigma2_bs, block_length=cfg.block_length)


def make_scenario(cfg: NetworkConfig, seed: int | np.random.SeedSequence | None = None):
    """Build ``(topology, channels)`` from ``cfg`` using ``seed`` (default ``cfg.seed``)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    topo = build_topology(cfg, rng)
    return topo, generate_channels(cfg, topo, rng)
