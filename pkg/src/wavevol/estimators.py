"""Daily realized measures: RV, BV, TSRV, Parzen realized kernel, JV and JWTSRV.

All functions take one day of intraday log returns or log prices on a
regular grid and return variances in daily units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BandwidthError, DataError, InsufficientDataError
from .wavelet import JumpDetection, detect_jumps, get_filter, jump_adjust, modwt

logger = logging.getLogger(__name__)

MU1 = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    Attributes:
        c_tsrv: Constant in the subgrid count ``G = round(c * N**(2/3))``.
        kernel_bandwidth: Realized kernel bandwidth ``H``; ``None`` picks
            ``round(c_rk * N**(3/5))``.
        c_rk: Constant of the automatic kernel bandwidth.
        wavelet: Filter for the scale decomposition.
        jump_wavelet: Filter for level-1 jump detection.
        levels: Wavelet levels ``J^m``; the decomposition has ``levels + 1`` bands.
        bv_stagger: Offset between the paired absolute returns of BV.
        small_sample: Apply the small-sample corrections to TSRV, JWTSRV and BV.
        floor_negative: Floor negative two-scale estimates at zero.
    """

    c_tsrv: float = 1.0
    kernel_bandwidth: int | None = None
    c_rk: float = 1.0
    wavelet: str = "d4"
    jump_wavelet: str = "haar"
    levels: int = 4
    bv_stagger: int = 1
    small_sample: bool = True
    floor_negative: bool = True

    def __post_init__(self):
        if self.c_tsrv <= 0 or self.c_rk <= 0:
            raise ValueError("c_tsrv and c_rk must be positive")
        if self.kernel_bandwidth is not None and self.kernel_bandwidth < 0:
            raise ValueError("kernel bandwidth must be >= 0")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.bv_stagger < 0:
            raise ValueError("bv_stagger must be >= 0")


def rv(r) -> float:
    r = np.asarray(r, dtype=float)
    if r.size < 1:
        raise InsufficientDataError("rv needs at least one return")
    return float(np.dot(r, r))


def bv(r, stagger: int = 1, small_sample: bool = True) -> float:
    """Staggered bipower variation.

    ``mu1**-2 * N/(N-stagger-1) * sum |r_k| |r_{k-stagger-1}|``; ``stagger=0``
    is the classic adjacent-pair estimator, ``stagger=1`` skips one return to
    break the noise-induced first-order autocorrelation.
    """
    a = np.abs(np.asarray(r, dtype=float))
    N = a.size
    lag = stagger + 1
    if N < stagger + 2:
        raise InsufficientDataError(f"bv with stagger {stagger} needs at least {stagger + 2} returns, got {N}")
    total = float(np.dot(a[lag:], a[:-lag]))
    scale = N / (N - lag) if small_sample else 1.0
    return scale * total / MU1**2


def subgrid_count(N: int, c: float = 1.0) -> int:
    return int(min(N, max(1, round(c * N ** (2.0 / 3.0)))))


def subgrid_returns(y, G: int) -> list[np.ndarray]:
    """Returns on each of the ``G`` sparse grids.

    Subgrid ``g`` keeps prices ``g, g+G, g+2G, ...`` together with the day's
    first and last price, so every subgrid spans the whole day.
    """
    y = np.asarray(y, dtype=float)
    N = len(y) - 1
    out = []
    for g in range(G):
        idx = np.arange(g, N + 1, G)
        if idx[0] != 0:
            idx = np.concatenate([[0], idx])
        if idx[-1] != N:
            idx = np.concatenate([idx, [N]])
        out.append(np.diff(y[idx]))
    return out


@dataclass
class TwoScale:
    value: float
    G: int
    nbar: float
    raw: float
    floored: bool = False


def _two_scale(average: float, full: float, nbar: float, N: int, G: int, small_sample: bool) -> float:
    if G == 1:
        # avg == all exactly; the adjusted estimator reduces to the full-grid value
        return full if small_sample else 0.0
    est = average - (nbar / N) * full
    if small_sample:
        est /= 1.0 - nbar / N
    return est


def tsrv(y, cfg: EstimatorConfig | None = None, G: int | None = None) -> TwoScale:
    """Two-scale realized variance from the log-price path ``y`` (N+1 points).

    ``nbar`` is the mean number of returns per subgrid, which makes the
    noise bias of the subgrid average cancel exactly against the full grid.
    """
    cfg = cfg or EstimatorConfig()
    y = np.asarray(y, dtype=float)
    N = len(y) - 1
    if N < 2:
        raise InsufficientDataError(f"tsrv needs at least 2 returns, got {N}")
    G = subgrid_count(N, cfg.c_tsrv) if G is None else int(G)
    if not 1 <= G <= N:
        raise ValueError(f"subgrid count must be in [1, {N}], got {G}")
    subs = subgrid_returns(y, G)
    nbar = float(np.mean([len(s) for s in subs]))
    full = rv(np.diff(y))
    average = float(np.mean([np.dot(s, s) for s in subs]))
    raw = _two_scale(average, full, nbar, N, G, cfg.small_sample)
    if raw < 0 and cfg.floor_negative:
        return TwoScale(0.0, G, nbar, raw, floored=True)
    return TwoScale(raw, G, nbar, raw)


def parzen(x):
    """Parzen kernel weight."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x <= 0.5, 1 - 6 * x**2 + 6 * x**3, np.where(x <= 1.0, 2 * (1 - x) ** 3, 0.0))


def kernel_bandwidth(N: int, c: float = 1.0) -> int:
    return int(min(N - 1, max(0, round(c * N ** 0.6))))


def realized_kernel(r, H: int | None = None, c_rk: float = 1.0) -> float:
    """Parzen realized kernel without end-effect correction.

    ``gamma_0 + sum_{h=1}^{H} k((h-1)/H) * 2 * gamma_h`` with
    ``gamma_h = sum_k r_k r_{k-h}``.
    """
    r = np.asarray(r, dtype=float)
    N = r.size
    if H is None:
        H = kernel_bandwidth(N, c_rk)
    if H < 0 or H >= N:
        raise BandwidthError(f"bandwidth {H} must satisfy 0 <= H < N = {N}")
    out = float(np.dot(r, r))
    for h in range(1, H + 1):
        out += 2.0 * float(parzen((h - 1) / H)) * float(np.dot(r[h:], r[:-h]))
    return out


def jump_variation(jd: JumpDetection) -> float:
    return jd.variation()


@dataclass
class Jwtsrv:
    total: float
    components: np.ndarray
    jv: float
    G: int
    jumps: JumpDetection
    floored: bool = False
    raw_components: np.ndarray = field(default=None, repr=False)


def _redistribute(comp: np.ndarray) -> tuple[np.ndarray, bool]:
    """Floor negative bands at zero and take the deficit proportionally from the positive ones."""
    neg = comp < 0
    if not neg.any():
        return comp, False
    total = comp.sum()
    if total <= 0:
        return np.zeros_like(comp), True
    pos = np.where(neg, 0.0, comp)
    return pos * (total / pos.sum()), True


def wavelet_energies(r, levels: int, filt) -> np.ndarray:
    """Energy of the return series in each of ``levels + 1`` MODWT bands."""
    return modwt(r, filt, levels, check_depth=False).energies()


def jwtsrv(y, cfg: EstimatorConfig | None = None, G: int | None = None) -> Jwtsrv:
    """Jump-adjusted wavelet two-scale realized variance.

    Jumps are flagged on level-1 coefficients of the price path and removed;
    the adjusted returns are then split into ``levels + 1`` MODWT bands on the
    full grid and on each subgrid, and the two-scale correction is applied
    band by band.  Band energies add up to the return energy, so the total
    equals TSRV of the jump-adjusted path.
    """
    cfg = cfg or EstimatorConfig()
    y = np.asarray(y, dtype=float)
    N = len(y) - 1
    filt = get_filter(cfg.wavelet)
    if N < filt.length:
        raise InsufficientDataError(f"jwtsrv needs at least {filt.length} returns, got {N}")
    jd = detect_jumps(y, cfg.jump_wavelet)
    ya = jump_adjust(y, jd)
    G = subgrid_count(N, cfg.c_tsrv) if G is None else int(G)
    if not 1 <= G <= N:
        raise ValueError(f"subgrid count must be in [1, {N}], got {G}")

    full = wavelet_energies(np.diff(ya), cfg.levels, filt)
    subs = subgrid_returns(ya, G)
    nbar = float(np.mean([len(s) for s in subs]))
    # equal-length subgrids are transformed as one stack
    by_len: dict[int, list[np.ndarray]] = {}
    for s in subs:
        by_len.setdefault(len(s), []).append(s)
    acc = np.zeros(cfg.levels + 1)
    for stack in by_len.values():
        acc += wavelet_energies(np.vstack(stack), cfg.levels, filt).sum(axis=1)
    average = acc / G

    raw = np.array([_two_scale(a, f, nbar, N, G, cfg.small_sample) for a, f in zip(average, full)])
    comp, floored = (_redistribute(raw) if cfg.floor_negative else (raw, False))
    total = float(comp.sum())
    return Jwtsrv(total=total, components=comp, jv=jd.variation(), G=G, jumps=jd,
                  floored=floored, raw_components=raw)


@dataclass
class DailyMeasures:
    date: str
    n: int
    rv: float
    bv: float
    tsrv: float
    rk: float
    jv: float
    jwtsrv: float
    components: np.ndarray
    G: int
    n_jumps: int = 0
    flags: tuple = ()

    MEASURES = ("rv", "bv", "tsrv", "rk", "jwtsrv")

    def measure(self, name: str, scale: int | None = None) -> float:
        if scale is not None:
            return float(self.components[scale - 1])
        return float(getattr(self, name))


def estimate_day(y, cfg: EstimatorConfig | None = None, date: str = "") -> DailyMeasures:
    """All measures for one day of log prices ``y`` on a common grid."""
    cfg = cfg or EstimatorConfig()
    y = np.asarray(y, dtype=float)
    r = np.diff(y)
    try:
        ts = tsrv(y, cfg)
        jw = jwtsrv(y, cfg, G=ts.G)
        H = cfg.kernel_bandwidth if cfg.kernel_bandwidth is not None else kernel_bandwidth(len(r), cfg.c_rk)
        rk = realized_kernel(r, H)
        b = bv(r, cfg.bv_stagger, cfg.small_sample)
    except DataError as exc:
        raise type(exc)(f"{date}: {exc}") from exc
    flags = []
    if ts.floored:
        flags.append("tsrv_floored")
    if jw.floored:
        flags.append("jwtsrv_floored")
    if rk < 0 and cfg.floor_negative:
        flags.append("rk_floored")
        rk = 0.0
    return DailyMeasures(
        date=date, n=len(r), rv=rv(r), bv=b, tsrv=ts.value, rk=rk, jv=jw.jv,
        jwtsrv=jw.total, components=jw.components, G=ts.G, n_jumps=jw.jumps.count,
        flags=tuple(flags),
    )
