"""Maximal-overlap discrete wavelet transform and wavelet jump detection.

Filters follow the Percival-Walden conventions: the wavelet filter is the
quadrature mirror of the scaling filter, ``h[l] = (-1)**l * g[L-1-l]``, and
MODWT filters are the DWT filters divided by sqrt(2).  Boundaries are
circular, which keeps the energy decomposition exact for any sample length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, LevelDepthError

MAD_NORMAL = 0.6745

_SQRT3 = math.sqrt(3.0)

_SCALING = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "d4": np.array([1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3]) / (4 * math.sqrt(2.0)),
    "la8": np.array([
        -0.0757657147893407, -0.0296355276459541, 0.4976186676324578,
        0.8037387518052163, 0.2978577956055422, -0.0992195435769354,
        -0.0126039672622612, 0.0322231006040713,
    ]),
}


@dataclass(frozen=True)
class WaveletFilter:
    """MODWT filter pair.

    Attributes:
        name: Filter identifier (``haar``, ``d4``, ``la8``).
        h: MODWT wavelet (high-pass) coefficients.
        g: MODWT scaling (low-pass) coefficients.
        shift: Lag at which the level-1 response to a unit step peaks.  A
            price jump between grid points ``k-1`` and ``k`` shows up most
            strongly in coefficient ``k + shift``.
    """

    name: str
    h: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    shift: int = 0

    @property
    def length(self) -> int:
        return len(self.h)


def get_filter(name: str = "d4") -> WaveletFilter:
    key = name.lower()
    if key not in _SCALING:
        raise ValueError(f"unknown wavelet filter {name!r}; choose from {sorted(_SCALING)}")
    g_dwt = _SCALING[key]
    L = len(g_dwt)
    h_dwt = np.array([(-1) ** l * g_dwt[L - 1 - l] for l in range(L)])
    h = h_dwt / math.sqrt(2.0)
    g = g_dwt / math.sqrt(2.0)
    # step response of the level-1 filter is the running sum of h
    shift = int(np.argmax(np.abs(np.cumsum(h)[: L - 1])))
    return WaveletFilter(name=key, h=h, g=g, shift=shift)


def max_level(n: int, filt: WaveletFilter) -> int:
    """Deepest level whose equivalent filter is not wider than the data."""
    return int(math.floor(math.log2(n / (filt.length - 1) + 1)))


@dataclass
class ModwtPyramid:
    """MODWT coefficients.

    ``W`` has shape ``(levels, ..., n)``; ``V`` is the scaling coefficient
    vector at the deepest level, shape ``(..., n)``.
    """

    W: np.ndarray
    V: np.ndarray

    @property
    def levels(self) -> int:
        return self.W.shape[0]

    def energies(self) -> np.ndarray:
        """Energy per band: ``levels`` wavelet levels followed by the scaling band."""
        wav = np.sum(self.W**2, axis=-1)
        return np.concatenate([wav, np.sum(self.V**2, axis=-1)[None, ...]], axis=0)


def modwt(x, filt: WaveletFilter | str = "d4", levels: int = 1, check_depth: bool = True) -> ModwtPyramid:
    """Pyramid MODWT with circular boundary.

    ``x`` may be 1-D or a stack of equal-length series along the last axis.
    With ``check_depth=False`` any depth is accepted; the circular transform
    stays energy preserving even when the filter wraps the data several times,
    which is what the subgrid pass of the two-scale estimator relies on.
    """
    if isinstance(filt, str):
        filt = get_filter(filt)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if levels < 1:
        raise LevelDepthError("levels must be >= 1")
    if check_depth:
        if n < filt.length:
            raise InsufficientDataError(f"need at least {filt.length} points for {filt.name}, got {n}")
        deepest = max_level(n, filt)
        if levels > deepest:
            raise LevelDepthError(f"{levels} levels requested but at most {deepest} fit {n} points with {filt.name}")
    elif n < 1:
        raise InsufficientDataError("empty input")

    lags = np.arange(filt.length)
    base = np.arange(n)[:, None]
    V = x
    W = []
    for j in range(1, levels + 1):
        idx = (base - (2 ** (j - 1)) * lags[None, :]) % n
        block = V[..., idx]
        W.append(block @ filt.h)
        V = block @ filt.g
    return ModwtPyramid(W=np.stack(W, axis=0), V=V)


def mad_scale(w1) -> float:
    """Median-absolute-deviation scale of level-1 coefficients, sqrt(2)*median|W|/0.6745."""
    w1 = np.asarray(w1, dtype=float)
    if w1.size == 0:
        raise InsufficientDataError("no coefficients")
    return math.sqrt(2.0) * float(np.median(np.abs(w1))) / MAD_NORMAL


@dataclass
class JumpDetection:
    """Jumps flagged on one day.

    ``k`` holds grid indices (1..N) of the flagged returns, i.e. the return
    from ``y[k-1]`` to ``y[k]``; ``sizes`` holds those returns.
    """

    d: float
    threshold: float
    n: int
    k: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def count(self) -> int:
        return len(self.k)

    def variation(self) -> float:
        return float(np.sum(self.sizes**2))


def detect_jumps(y, filt: WaveletFilter | str = "haar") -> JumpDetection:
    """Flag intraday returns whose level-1 MODWT coefficient beats the universal threshold.

    The transform runs on the log-price path ``y`` (N+1 points).  Return ``k``
    is tested on coefficient ``k + filt.shift``.  Coefficients touched by the
    circular wrap (first ``L-1`` positions) are never flagged, but they do
    enter the MAD scale.  For filters longer than Haar a jump leaks into
    neighbouring coefficients, so only the local maximum of ``|W|`` within
    the filter support is kept.
    """
    if isinstance(filt, str):
        filt = get_filter(filt)
    y = np.asarray(y, dtype=float)
    N = len(y) - 1
    if N < filt.length:
        raise InsufficientDataError(f"need at least {filt.length} returns, got {N}")
    w1 = modwt(y, filt, 1).W[0]
    d = mad_scale(w1)
    threshold = d * math.sqrt(2.0 * math.log(N))

    L = filt.length
    absw = np.abs(w1)
    valid = np.zeros(N + 1, dtype=bool)
    valid[L - 1 :] = True
    over = valid & (absw > threshold)
    if L > 2 and over.any():
        half = L - 2
        masked = np.where(valid, absw, -np.inf)
        padded = np.concatenate([np.full(half, -np.inf), masked, np.full(half, -np.inf)])
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * half + 1)
        over &= absw >= windows.max(axis=1)
    t = np.flatnonzero(over)
    k = t - filt.shift
    k = k[(k >= 1) & (k <= N)]
    sizes = y[k] - y[k - 1]
    return JumpDetection(d=d, threshold=threshold, n=N, k=k.astype(int), sizes=sizes)


def jump_adjust(y, jd: JumpDetection) -> np.ndarray:
    """Remove detected jump returns from the path.

    Every level from ``k`` on is shifted by ``-size`` so the adjusted return
    at ``k`` loses the jump and all other returns stay as they were.
    """
    y = np.asarray(y, dtype=float)
    if jd.count == 0:
        return y.copy()
    step = np.zeros_like(y)
    np.add.at(step, jd.k, jd.sizes)
    return y - np.cumsum(step)
