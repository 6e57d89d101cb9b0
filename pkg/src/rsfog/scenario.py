"""Problem instances: system parameters, user drops, task sizes and channels.

Channels are returned already divided by the noise standard deviation, so
every SINR expression downstream uses unit noise power.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

MIN_DISTANCE_KM = 1e-3

# independent RNG streams inside one seed
_STREAM_POSITIONS = 0
_STREAM_TASKS = 1
_STREAM_CHANNELS = 2


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration."""


def dbm_to_watt(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0) * 1e-3


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the fog network plus AO solver controls.

    Defaults reproduce the reference simulation setup (8 users, 10 dBm per
    user, 30 dBm at the BS, 3 Mcycles/s per user, 1 Gcycles/s server).
    """

    K: int = 8
    A_ut: int = 2
    A_br: int = 2
    A_bt: int = 4
    A_u: int = 2
    P_k_dBm: float = 10.0
    P_b_dBm: float = 30.0
    F_k_cyc_s: float = 3e6
    F_b_cyc_s: float = 1e9
    omega_cyc_bit: float = 297.2
    kappa: float = 1e-24
    epsilon_compress: float = 0.5
    bandwidth_hz: float = 10e6
    noise_dBm: float = -100.0
    cell_radius_m: float = 100.0
    L_min_bit: float = 1e6
    L_max_bit: float = 5e6
    tol_ao: float = 1e-4
    max_iter: int = 30

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        for name in ("A_ut", "A_br", "A_bt", "A_u"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.A_u > min(self.A_ut, self.A_br):
            raise ConfigError(
                f"A_u={self.A_u} exceeds min(A_ut, A_br)={min(self.A_ut, self.A_br)}")
        positive = ("F_k_cyc_s", "F_b_cyc_s", "omega_cyc_bit", "kappa",
                    "bandwidth_hz", "cell_radius_m", "L_min_bit", "L_max_bit")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0 < self.epsilon_compress <= 1:
            raise ConfigError("epsilon_compress must lie in (0, 1]")
        if self.L_min_bit > self.L_max_bit:
            raise ConfigError("L_min_bit exceeds L_max_bit")
        if self.cell_radius_m / 1e3 <= MIN_DISTANCE_KM:
            raise ConfigError("cell radius must exceed the 1 m exclusion zone")
        if not self.tol_ao > 0 or self.max_iter < 1:
            raise ConfigError("tol_ao must be > 0 and max_iter >= 1")

    @property
    def P_k(self) -> float:
        """Per-user power budget in watts."""
        return float(dbm_to_watt(self.P_k_dBm))

    @property
    def P_b(self) -> float:
        """BS power budget in watts."""
        return float(dbm_to_watt(self.P_b_dBm))

    @property
    def noise_w(self) -> float:
        return float(dbm_to_watt(self.noise_dBm))

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: (int if f.type in ("int", int) else float) for f in fields(SystemConfig)}


def parse_config_text(text: str, base: SystemConfig | None = None) -> SystemConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment, unknown keys raise."""
    base = base or SystemConfig()
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        caster = _FIELD_TYPES[key]
        try:
            if caster is int:
                as_float = float(value)
                if not as_float.is_integer():
                    raise ValueError
                updates[key] = int(as_float)
            else:
                updates[key] = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return base.replace(**updates)


def load_config(path) -> SystemConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: SystemConfig) -> str:
    return "".join(f"{k}={v!r}\n" for k, v in cfg.to_dict().items())


def path_loss_db(d_km):
    """Large-scale path loss ``128.1 + 37.6 log10(d)`` with d in km."""
    d = np.asarray(d_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be strictly positive")
    out = 128.1 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def channel_gain(d_km, noise_dBm: float):
    """Amplitude scale g such that g**2 = 10^(-PL/10) / sigma^2."""
    return np.sqrt(10.0 ** (-np.asarray(path_loss_db(d_km)) / 10.0) / dbm_to_watt(noise_dBm))


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(positions, cfg: SystemConfig, seed: int, rng=None):
    """Noise-normalised Rayleigh channels for every user.

    Returns
    -------
    H_up : ndarray, shape (K, A_ut, A_br)
        Uplink channel matrices; the BS receives ``H_k^H W x``.
    h_down : ndarray, shape (K, A_bt)
        Downlink channel vectors; user k receives ``h_k^H x``.
    """
    positions = np.asarray(positions, dtype=float)
    if rng is None:
        rng = np.random.default_rng([seed, _STREAM_CHANNELS])
    g = np.atleast_1d(channel_gain(positions, cfg.noise_dBm))
    K = positions.shape[0]
    H_up = g[:, None, None] * _crandn(rng, (K, cfg.A_ut, cfg.A_br))
    h_down = g[:, None] * _crandn(rng, (K, cfg.A_bt))
    return H_up, h_down


@dataclass(frozen=True, eq=False)
class Scenario:
    cfg: SystemConfig
    positions: np.ndarray  # km
    L_bit: np.ndarray
    H_up: np.ndarray
    h_down: np.ndarray
    seed: int
    omega: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.omega is None:
            object.__setattr__(self, "omega", np.full(self.cfg.K, self.cfg.omega_cyc_bit))
        for arr in (self.positions, self.L_bit, self.H_up, self.h_down, self.omega):
            arr.setflags(write=False)

    @property
    def K(self) -> int:
        return self.cfg.K

    def with_config(self, cfg: SystemConfig) -> "Scenario":
        """Same drops and channels under different scalar parameters."""
        if cfg.K != self.cfg.K or (cfg.A_ut, cfg.A_br, cfg.A_bt) != (
                self.cfg.A_ut, self.cfg.A_br, self.cfg.A_bt):
            raise ConfigError("with_config cannot change dimensions")
        return Scenario(cfg, self.positions, self.L_bit, self.H_up, self.h_down,
                        self.seed, np.full(cfg.K, cfg.omega_cyc_bit))

    def serialize(self) -> bytes:
        doc = {
            "cfg": self.cfg.to_dict(),
            "seed": self.seed,
            "positions": self.positions.tolist(),
            "L_bit": self.L_bit.tolist(),
            "omega": self.omega.tolist(),
            "H_up": [self.H_up.real.tolist(), self.H_up.imag.tolist()],
            "h_down": [self.h_down.real.tolist(), self.h_down.imag.tolist()],
        }
        return json.dumps(doc, sort_keys=True).encode("utf-8")


def draw_distances(rng, K: int, radius_km: float) -> np.ndarray:
    # uniform over the annulus MIN_DISTANCE_KM <= d <= radius
    u = rng.random(K)
    return np.sqrt(MIN_DISTANCE_KM ** 2 + u * (radius_km ** 2 - MIN_DISTANCE_KM ** 2))


def build_scenario(cfg: SystemConfig, seed: int) -> Scenario:
    cfg.validate()
    radius_km = cfg.cell_radius_m / 1e3
    positions = draw_distances(np.random.default_rng([seed, _STREAM_POSITIONS]), cfg.K, radius_km)
    u = np.random.default_rng([seed, _STREAM_TASKS]).random(cfg.K)
    # the same uniforms map monotonically onto [L_min, L_max], so sweeps over
    # L_max stay paired within a seed
    L_bit = cfg.L_min_bit + u * (cfg.L_max_bit - cfg.L_min_bit)
    H_up, h_down = draw_channels(positions, cfg, seed)
    return Scenario(cfg, positions, L_bit, H_up, h_down, int(seed))
