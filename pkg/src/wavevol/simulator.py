"""Synthetic intraday paths with known integrated variance and jump variation.

The latent log price is a jump diffusion discretized by Euler-Maruyama on the
observation grid; the observed price adds i.i.d. noise.  Time is measured in
days, so ``sigma`` is a daily volatility and one grid step is ``1/N`` day.

Every day draws from its own RNG stream derived from ``(seed, day_index)``,
so days can be generated in any order or in parallel with identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_STREAM_DAY = 0
_STREAM_LEVELS = 1


@dataclass(frozen=True)
class VolSpec:
    """Volatility path specification.

    kind:
        ``constant``: ``sigma`` all day.
        ``diurnal``: ``sigma`` times a U-shaped intraday factor normalized to
        unit mean square, so the expected IV is still ``sigma**2``.
        ``stochastic``: log variance follows an Ornstein-Uhlenbeck process
        around ``log(sigma**2)`` with mean reversion ``kappa`` (per day) and
        volatility ``vol_of_vol``.  Each day starts from a daily chain that
        uses the exact OU transition over one day.
    """

    kind: str = "constant"
    sigma: float = 0.01
    diurnal_amplitude: float = 0.5
    kappa: float = 0.1
    vol_of_vol: float = 0.3

    def __post_init__(self):
        if self.kind not in ("constant", "diurnal", "stochastic"):
            raise ConfigError(f"unknown volatility kind {self.kind!r}")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.kind == "stochastic" and (self.kappa <= 0 or self.vol_of_vol < 0):
            raise ConfigError("stochastic volatility needs kappa > 0 and vol_of_vol >= 0")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; see the module docstring for units."""

    N: int = 276
    days: int = 1
    mu: float = 0.0
    vol: VolSpec = field(default_factory=VolSpec)
    eta: float = 0.0
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_std: float = 0.0
    noise: str = "gaussian"
    noise_df: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if self.eta < 0 or self.jump_intensity < 0 or self.jump_std < 0:
            raise ConfigError("eta, jump_intensity and jump_std must be >= 0")
        if self.noise not in ("gaussian", "student_t"):
            raise ConfigError(f"unknown noise law {self.noise!r}")
        if self.noise == "student_t" and self.noise_df <= 2:
            raise ConfigError("student-t noise needs df > 2 for a finite variance")


@dataclass
class SimulatedDay:
    day_index: int
    y: np.ndarray
    p: np.ndarray
    noise: np.ndarray
    sigma2: np.ndarray
    true_iv: float
    true_jv: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.y)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_sizes)


def _rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def daily_log_variance(cfg: SimConfig) -> np.ndarray:
    """Opening log variance of every day for the stochastic volatility option."""
    vs = cfg.vol
    base = 2.0 * math.log(vs.sigma) if vs.sigma > 0 else -np.inf
    out = np.full(cfg.days, base)
    if vs.kind != "stochastic" or vs.sigma == 0:
        return out
    a = math.exp(-vs.kappa)
    sd = vs.vol_of_vol * math.sqrt((1 - a * a) / (2 * vs.kappa))
    stationary = vs.vol_of_vol / math.sqrt(2 * vs.kappa)
    e = _rng(cfg.seed, _STREAM_LEVELS).standard_normal(cfg.days)
    dev = stationary * e[0]
    out[0] = base + dev
    for t in range(1, cfg.days):
        dev = a * dev + sd * e[t]
        out[t] = base + dev
    return out


def _sigma2_path(cfg: SimConfig, rng: np.random.Generator, start_logvar: float) -> np.ndarray:
    vs, N = cfg.vol, cfg.N
    if vs.sigma == 0:
        return np.zeros(N)
    if vs.kind == "constant":
        return np.full(N, vs.sigma**2)
    if vs.kind == "diurnal":
        u = (np.arange(N) + 0.5) / N
        shape = 1.0 + vs.diurnal_amplitude * np.cos(2 * math.pi * u)
        return vs.sigma**2 * shape**2 / np.mean(shape**2)
    dt = 1.0 / N
    a = math.exp(-vs.kappa * dt)
    sd = vs.vol_of_vol * math.sqrt((1 - a * a) / (2 * vs.kappa))
    base = 2.0 * math.log(vs.sigma)
    e = rng.standard_normal(N)
    dev = np.empty(N)
    d = start_logvar - base
    for k in range(N):
        dev[k] = d
        d = a * d + sd * e[k]
    return np.exp(base + dev)


def simulate_day(cfg: SimConfig, day_index: int = 0, logvar0: float | None = None) -> SimulatedDay:
    """One day of N Euler steps plus noise; deterministic in ``(cfg.seed, day_index)``."""
    N = cfg.N
    rng = _rng(cfg.seed, _STREAM_DAY, day_index)
    dt = 1.0 / N
    if logvar0 is None and cfg.vol.kind == "stochastic":
        logvar0 = float(daily_log_variance(cfg)[min(day_index, cfg.days - 1)])
    # fixed draw order keeps days reproducible whatever the options
    shocks = rng.standard_normal(N)
    sigma2 = _sigma2_path(cfg, rng, logvar0 if logvar0 is not None else 0.0)
    n_arrivals = int(rng.poisson(cfg.jump_intensity)) if cfg.jump_intensity > 0 else 0
    steps = rng.integers(0, N, size=n_arrivals)
    sizes = rng.normal(cfg.jump_mean, cfg.jump_std, size=n_arrivals) if n_arrivals else np.zeros(0)
    if cfg.eta > 0:
        if cfg.noise == "gaussian":
            noise = cfg.eta * rng.standard_normal(N + 1)
        else:
            scale = math.sqrt((cfg.noise_df - 2) / cfg.noise_df)
            noise = cfg.eta * scale * rng.standard_t(cfg.noise_df, size=N + 1)
    else:
        noise = np.zeros(N + 1)

    # arrivals sharing a step merge into one jump
    jump_times = np.unique(steps)
    jump_sizes = np.array([sizes[steps == s].sum() for s in jump_times]) if n_arrivals else np.zeros(0)
    jumps = np.zeros(N)
    jumps[jump_times] = jump_sizes

    increments = cfg.mu * dt + np.sqrt(sigma2 * dt) * shocks + jumps
    p = np.concatenate([[0.0], np.cumsum(increments)])
    y = p + noise
    return SimulatedDay(
        day_index=day_index,
        y=y,
        p=p,
        noise=noise,
        sigma2=sigma2,
        true_iv=float(np.sum(sigma2) * dt),
        true_jv=float(np.sum(jump_sizes**2)),
        jump_times=jump_times.astype(int) + 1,
        jump_sizes=jump_sizes,
    )


def simulate_days(cfg: SimConfig) -> list[SimulatedDay]:
    levels = daily_log_variance(cfg) if cfg.vol.kind == "stochastic" else [None] * cfg.days
    return [simulate_day(cfg, i, levels[i]) for i in range(cfg.days)]


@dataclass
class RealizedGarchSample:
    """Daily series generated by the log-linear Realized (Jump-)GARCH model."""

    r: np.ndarray
    x: np.ndarray
    h: np.ndarray
    z: np.ndarray
    u: np.ndarray
    jv: np.ndarray


def simulate_realized_garch(params: dict, T: int, seed: int = 0, h1: float | None = None,
                            jv=None) -> RealizedGarchSample:
    """Simulate ``T`` days from the log-linear Realized GARCH(1,1).

    ``params`` uses the names of ``wavevol.models`` (``omega, beta, gamma,
    xi, psi, tau1, tau2, sigma_u`` and optionally ``gamma_j``).  ``jv`` is an
    exogenous non-negative jump-variation series entering through
    ``gamma_j * log(1 + jv)``.  Without ``h1`` the recursion starts at the
    stationary mean of ``log h``.
    """
    rng = np.random.default_rng([seed, 7])
    om, be, ga = params["omega"], params["beta"], params["gamma"]
    xi, psi = params["xi"], params["psi"]
    t1, t2, su = params["tau1"], params["tau2"], params["sigma_u"]
    gj = params.get("gamma_j", 0.0)
    jv = np.zeros(T) if jv is None else np.asarray(jv, dtype=float)
    z = rng.standard_normal(T)
    u = su * rng.standard_normal(T)
    if h1 is None:
        persistence = be + ga * psi
        lh = (om + ga * (xi + t2)) / (1.0 - persistence)
    else:
        lh = math.log(h1)
    lh_path = np.empty(T)
    lx = np.empty(T)
    for t in range(T):
        if t > 0:
            lh = om + be * lh + ga * lx[t - 1] + gj * math.log1p(jv[t - 1])
        lh_path[t] = lh
        lx[t] = xi + psi * lh + t1 * z[t] + t2 * z[t] ** 2 + u[t]
    h = np.exp(lh_path)
    return RealizedGarchSample(r=np.sqrt(h) * z, x=np.exp(lx), h=h, z=z, u=u, jv=jv)
