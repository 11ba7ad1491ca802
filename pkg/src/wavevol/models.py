"""GARCH(1,1) and log-linear Realized (Jump-)GARCH(1,1) by Gaussian QMLE.

Realized GARCH::

    r_t      = sqrt(h_t) z_t
    log h_t  = omega + beta log h_{t-1} + gamma log x_{t-1} [+ gamma_j log(1 + jv_{t-1})]
    log x_t  = xi + psi log h_t + tau1 z_t + tau2 z_t**2 + u_t

The variance recursion is linear in ``log h`` and does not feed on ``z``, so
the filter and its parameter derivatives are plain first-order linear
filters.  The log-likelihood, its per-observation scores and the sandwich
covariance are all computed from closed-form derivatives.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, stats

from .errors import AlignmentError, ConvergenceError, InsufficientDataError, NumericError, SingularFitError

logger = logging.getLogger(__name__)

LOG2PI = math.log(2.0 * math.pi)
X_FLOOR = 1e-12
MIN_OBS = 100

FAMILIES = ("garch", "realized_garch", "realized_jgarch", "realized_jgarch_scale")
MEASURES = ("rv", "bv", "tsrv", "rk", "jwtsrv")

_RG_PARAMS = ("omega", "beta", "gamma", "xi", "psi", "tau1", "tau2", "sigma_u")
_RJG_PARAMS = ("omega", "beta", "gamma", "gamma_j", "xi", "psi", "tau1", "tau2", "sigma_u")
_GARCH_PARAMS = ("omega", "alpha", "beta")


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus the realized measure that drives it.

    ``realized_jgarch_scale`` uses JWTSRV band ``scale`` (1-based) as ``x``
    together with the jump variation; ``measure`` is ignored for it.
    """

    family: str = "realized_garch"
    measure: str = "jwtsrv"
    scale: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == "realized_jgarch_scale":
            if self.scale is None or self.scale < 1:
                raise ValueError("the per-scale model needs scale >= 1")
        elif self.scale is not None:
            raise ValueError("scale is only valid for realized_jgarch_scale")
        if self.family != "garch" and self.family != "realized_jgarch_scale" and self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")

    @property
    def include_jumps(self) -> bool:
        return self.family in ("realized_jgarch", "realized_jgarch_scale")

    @property
    def realized(self) -> bool:
        return self.family != "garch"

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.family == "garch":
            return _GARCH_PARAMS
        return _RJG_PARAMS if self.include_jumps else _RG_PARAMS

    @property
    def label(self) -> str:
        if self.family == "garch":
            return "garch"
        if self.family == "realized_jgarch_scale":
            return f"realized_jgarch_scale{self.scale}"
        return f"{self.family}_{self.measure}"

    def to_dict(self) -> dict:
        return {"family": self.family, "measure": self.measure, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(family=d["family"], measure=d.get("measure", "jwtsrv"), scale=d.get("scale"))


@dataclass
class ModelData:
    """Aligned daily inputs: returns, realized measure, jump variation.

    ``target`` optionally holds the variance proxy used when scoring
    forecasts; it defaults to ``x``.
    """

    r: np.ndarray
    x: np.ndarray | None = None
    jv: np.ndarray | None = None
    dates: list | None = None
    target: np.ndarray | None = None
    n_floored: int = 0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        T = len(self.r)
        if self.x is not None:
            x = np.asarray(self.x, dtype=float)
            if len(x) != T:
                raise AlignmentError(f"x has {len(x)} values for {T} returns")
            low = x < X_FLOOR
            self.n_floored = int(np.count_nonzero(low))
            self.x = np.where(low, X_FLOOR, x)
        if self.jv is not None:
            self.jv = np.asarray(self.jv, dtype=float)
            if len(self.jv) != T:
                raise AlignmentError(f"jv has {len(self.jv)} values for {T} returns")
            if np.any(self.jv < 0):
                raise ValueError("jump variation must be non-negative")
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=float)
            if len(self.target) != T:
                raise AlignmentError(f"target has {len(self.target)} values for {T} returns")
        if self.dates is not None and len(self.dates) != T:
            raise AlignmentError("dates and returns differ in length")

    def __len__(self):
        return len(self.r)

    def slice(self, start: int = 0, stop: int | None = None) -> "ModelData":
        def cut(a):
            return None if a is None else a[start:stop]
        return ModelData(self.r[start:stop], cut(self.x), cut(self.jv), cut(self.dates), cut(self.target))

    @property
    def proxy(self) -> np.ndarray:
        return self.target if self.target is not None else self.x

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.r).tobytes()).hexdigest()

    @classmethod
    def from_measures(cls, dates, returns, measures, spec: ModelSpec, target: str | None = None) -> "ModelData":
        """Build inputs for ``spec`` from a list of ``DailyMeasures`` aligned with ``returns``."""
        if len(measures) != len(returns):
            raise AlignmentError(f"{len(measures)} measure rows for {len(returns)} returns")
        for d, m in zip(dates, measures):
            if m.date and d and m.date != d:
                raise AlignmentError(f"return date {d} does not match measure date {m.date}")
        x = jv = None
        if spec.realized:
            x = np.array([m.measure(spec.measure, spec.scale) for m in measures])
        if spec.include_jumps:
            jv = np.array([m.jv for m in measures])
        tgt_name = target or (spec.measure if spec.realized else "rv")
        tgt = np.array([m.measure(tgt_name, spec.scale if target is None else None) for m in measures])
        return cls(np.asarray(returns, dtype=float), x, jv, list(dates), tgt)


def _as_vector(theta, spec: ModelSpec) -> np.ndarray:
    if isinstance(theta, dict):
        return np.array([float(theta.get(n, 0.0)) for n in spec.param_names])
    v = np.asarray(theta, dtype=float)
    if v.shape != (len(spec.param_names),):
        raise ValueError(f"expected {len(spec.param_names)} parameters for {spec.label}")
    return v


def _as_dict(vec, spec: ModelSpec) -> dict:
    return {n: float(v) for n, v in zip(spec.param_names, vec)}


def _ar1(drive: np.ndarray, coef: float, first: float) -> np.ndarray:
    """``out[0] = first``, ``out[t] = coef * out[t-1] + drive[t]``."""
    out = np.empty(len(drive))
    out[0] = first
    if len(drive) > 1:
        out[1:], _ = signal.lfilter([1.0], [1.0, -coef], drive[1:], zi=[coef * first])
    return out


def _lagged(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[1:] = a[:-1]
    return out


def default_h1(r) -> float:
    v = float(np.var(np.asarray(r, dtype=float)))
    if not v > 0:
        raise SingularFitError("returns are constant")
    return v


@dataclass
class States:
    h: np.ndarray
    z: np.ndarray
    u: np.ndarray | None = None


def _check_finite(a: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        raise NumericError(f"non-finite {what} at t={int(np.argmax(bad)) + 1}")


def _rg_core(v, data: ModelData, h1: float, include_jumps: bool, want_grad: bool):
    if include_jumps:
        om, be, ga, gj, xi, psi, t1, t2, su = v
    else:
        om, be, ga, xi, psi, t1, t2, su = v
        gj = 0.0
    lx = np.log(data.x)
    lj = np.log1p(data.jv) if include_jumps else None
    drive = om + ga * _lagged(lx)
    if include_jumps:
        drive = drive + gj * _lagged(lj)
    lh = _ar1(drive, be, math.log(h1))
    _check_finite(lh, "log h")
    with np.errstate(over="ignore"):
        h = np.exp(lh)
    _check_finite(h, "h")
    z = data.r * np.exp(-0.5 * lh)
    u = lx - xi - psi * lh - t1 * z - t2 * z**2
    lr = -0.5 * (LOG2PI + lh + z**2)
    lxr = -0.5 * (LOG2PI + 2.0 * math.log(su) + (u / su) ** 2)
    states = States(h, z, u)
    if not want_grad:
        return states, lr, lxr, None

    T = len(lh)
    # d log h_t / d(omega, beta, gamma[, gamma_j]) via the same AR(1) recursion
    d_om = _ar1(np.ones(T), be, 0.0)
    d_be = _ar1(_lagged(lh), be, 0.0)
    d_ga = _ar1(_lagged(lx), be, 0.0)
    dlh = [d_om, d_be, d_ga]
    if include_jumps:
        dlh.append(_ar1(_lagged(lj), be, 0.0))
    s2 = su * su
    dlr_dlh = -0.5 * (1.0 - z**2)
    du_dlh = -psi + 0.5 * t1 * z + t2 * z**2
    dlx_du = -u / s2
    dl_dlh = dlr_dlh + dlx_du * du_dlh
    cols = [dl_dlh * d for d in dlh]
    cols += [u / s2, u * lh / s2, u * z / s2, u * z**2 / s2, -1.0 / su + u**2 / (s2 * su)]
    return states, lr, lxr, np.column_stack(cols)


def _garch_core(v, data: ModelData, h1: float, want_grad: bool):
    om, al, be = v
    r2 = data.r**2
    drive = om + al * _lagged(r2)
    h = _ar1(drive, be, h1)
    _check_finite(h, "h")
    if np.any(h <= 0):
        raise NumericError(f"non-positive variance at t={int(np.argmax(h <= 0)) + 1}")
    lr = -0.5 * (LOG2PI + np.log(h) + r2 / h)
    states = States(h, data.r / np.sqrt(h))
    if not want_grad:
        return states, lr, np.zeros_like(lr), None
    T = len(h)
    d_om = _ar1(np.ones(T), be, 0.0)
    d_al = _ar1(_lagged(r2), be, 0.0)
    d_be = _ar1(_lagged(h), be, 0.0)
    dl_dh = -0.5 * (1.0 / h - r2 / h**2)
    return states, lr, np.zeros_like(lr), np.column_stack([dl_dh * d_om, dl_dh * d_al, dl_dh * d_be])


def _evaluate(theta, spec: ModelSpec, data: ModelData, h1: float | None, want_grad: bool):
    v = _as_vector(theta, spec)
    h1 = default_h1(data.r) if h1 is None else float(h1)
    if spec.family == "garch":
        return _garch_core(v, data, h1, want_grad)
    if data.x is None:
        raise ValueError(f"{spec.label} needs a realized measure")
    if spec.include_jumps and data.jv is None:
        raise ValueError(f"{spec.label} needs jump variation")
    if v[-1] <= 0:
        raise NumericError("sigma_u must be positive")
    return _rg_core(v, data, h1, spec.include_jumps, want_grad)


def filter_states(theta, spec: ModelSpec, data: ModelData, h1: float | None = None) -> States:
    """Conditional variances and residuals at ``theta``.

    ``h1`` defaults to the sample variance of the returns.
    """
    return _evaluate(theta, spec, data, h1, want_grad=False)[0]


def loglik(theta, spec: ModelSpec, data: ModelData, h1: float | None = None) -> tuple[float | None, float]:
    """``(joint, partial)`` log-likelihood; ``joint`` is ``None`` for plain GARCH."""
    _, lr, lxr, _ = _evaluate(theta, spec, data, h1, want_grad=False)
    partial = float(lr.sum())
    if spec.family == "garch":
        return None, partial
    return partial + float(lxr.sum()), partial


def scores(theta, spec: ModelSpec, data: ModelData, h1: float | None = None) -> np.ndarray:
    """Per-observation derivative of the maximized log-likelihood, shape ``(T, k)``."""
    return _evaluate(theta, spec, data, h1, want_grad=True)[3]


def gradient(theta, spec: ModelSpec, data: ModelData, h1: float | None = None) -> np.ndarray:
    return scores(theta, spec, data, h1).sum(axis=0)


def objective(theta, spec: ModelSpec, data: ModelData, h1: float | None = None) -> float:
    """The maximized criterion: joint likelihood for realized families, partial for GARCH."""
    joint, partial = loglik(theta, spec, data, h1)
    return partial if joint is None else joint


def persistence(theta: dict) -> float:
    if "alpha" in theta:
        return theta["alpha"] + theta["beta"]
    return theta["beta"] + theta["gamma"] * theta["psi"]


@dataclass
class FitResult:
    spec: ModelSpec
    params: dict
    se: dict
    loglik_joint: float | None
    loglik_partial: float
    states: States = field(repr=False)
    h1: float
    n_obs: int
    convergence: dict = field(default_factory=dict)
    data_digest: str = ""

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def objective(self) -> float:
        return self.loglik_partial if self.loglik_joint is None else self.loglik_joint

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "theta": self.params,
            "se": self.se,
            "loglik_joint": self.loglik_joint,
            "loglik_partial": self.loglik_partial,
            "h1": self.h1,
            "n_obs": self.n_obs,
            "convergence": self.convergence,
            "data_digest": self.data_digest,
        }

    @classmethod
    def from_dict(cls, d: dict, data: ModelData | None = None) -> "FitResult":
        """Rebuild a fit artifact; states are refiltered when ``data`` is given."""
        spec = ModelSpec.from_dict(d["spec"])
        states = filter_states(d["theta"], spec, data, d["h1"]) if data is not None else States(np.zeros(0), np.zeros(0))
        return cls(spec, dict(d["theta"]), dict(d.get("se", {})), d.get("loglik_joint"), d["loglik_partial"],
                   states, d["h1"], d["n_obs"], dict(d.get("convergence", {})), d.get("data_digest", ""))


# ---------------------------------------------------------------- estimation

_PENALTY = 1e3
_EDGE = 1.0 - 1e-4
# |psi| bound: beyond it gamma -> 0, psi -> inf traces a ridge on which h is
# constant and log x follows its own autoregression
PSI_MAX = 10.0


def _free_bounds(spec: ModelSpec) -> list | None:
    if spec.family == "garch":
        return None
    b = [(None, None)] * len(spec.param_names)
    b[spec.param_names.index("psi")] = (-PSI_MAX, PSI_MAX)
    # |beta| < 1 keeps the filter for log h invertible
    b[spec.param_names.index("beta")] = (-_EDGE, _EDGE)
    return b


def _projected_gnorm(grad: np.ndarray, phi: np.ndarray, bounds: list | None) -> float:
    """Max-norm of the gradient, ignoring pulls past an active bound."""
    g = np.array(grad, dtype=float)
    if bounds is not None:
        for i, (lo, hi) in enumerate(bounds):
            if lo is not None and (phi[i] <= lo + 1e-6 and g[i] > 0 or phi[i] >= hi - 1e-6 and g[i] < 0):
                g[i] = 0.0
    return float(np.max(np.abs(g)))


def _inside(phi: np.ndarray, bounds: list | None, strict: bool = False) -> bool:
    if bounds is None:
        return True
    for x, (lo, hi) in zip(phi, bounds):
        if lo is None:
            continue
        if (strict and not lo + 1e-6 < x < hi - 1e-6) or not lo <= x <= hi:
            return False
    return True


def _to_free(theta: dict, spec: ModelSpec, scale: np.ndarray) -> np.ndarray:
    if spec.family == "garch":
        a, b = theta["alpha"], theta["beta"]
        rest = 1.0 - a - b
        return np.array([math.log(theta["omega"]), math.log(a / rest), math.log(b / rest)])
    v = _as_vector(theta, spec).copy()
    v[-1] = math.log(v[-1])
    return v * scale


def _from_free(phi: np.ndarray, spec: ModelSpec, scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Natural parameters and the Jacobian of the free-to-natural map."""
    if spec.family == "garch":
        om = math.exp(phi[0])
        ea, eb = math.exp(phi[1]), math.exp(phi[2])
        den = 1.0 + ea + eb
        a, b = ea / den, eb / den
        jac = np.zeros((3, 3))
        jac[0, 0] = om
        jac[1, 1], jac[1, 2] = a * (1 - a), -a * b
        jac[2, 1], jac[2, 2] = -a * b, b * (1 - b)
        return np.array([om, a, b]), jac
    v = phi / scale
    v[-1] = math.exp(v[-1])
    jac = np.diag(1.0 / scale)
    jac[-1, -1] *= v[-1]
    return v, jac


def _rescale(theta: dict, spec: ModelSpec, c: float) -> dict:
    """Parameters for the same model on returns divided by ``exp(c)``.

    Log variances and log measures shift by ``-2c``; ``z`` and ``u`` are
    unchanged.  ``jv`` is left in its own units.
    """
    out = dict(theta)
    if spec.family == "garch":
        out["omega"] = theta["omega"] * math.exp(-2.0 * c)
        return out
    out["omega"] = theta["omega"] - 2.0 * c * (1.0 - theta["beta"] - theta["gamma"])
    out["xi"] = theta["xi"] - 2.0 * c * (1.0 - theta["psi"])
    return out


def _penalty(v: np.ndarray, spec: ModelSpec) -> tuple[float, np.ndarray]:
    """Quadratic penalty outside ``|beta + gamma psi| < 1`` and its gradient."""
    grad = np.zeros(len(v))
    if spec.family == "garch":
        return 0.0, grad
    names = spec.param_names
    ib, ig, ip = names.index("beta"), names.index("gamma"), names.index("psi")
    p = v[ib] + v[ig] * v[ip]
    excess = abs(p) - _EDGE
    if excess <= 0:
        return 0.0, grad
    s = math.copysign(1.0, p)
    grad[ib], grad[ig], grad[ip] = s, s * v[ip], s * v[ig]
    return _PENALTY * excess**2, 2 * _PENALTY * excess * grad


def _ols(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef, y - X @ coef


def initial_params(spec: ModelSpec, data: ModelData) -> dict:
    """Deterministic starting point inside the admissible region.

    GARCH starts from a conventional ``(0.05, 0.90)`` split of persistence
    with variance matching the sample.  Realized families regress ``log x``
    on the log variances of a GARCH pre-fit for ``(xi, psi, sigma_u)`` and
    project the pre-fit log variance on its lag and lagged ``log x`` for
    ``(omega, beta, gamma)``.
    """
    var = default_h1(data.r)
    if spec.family == "garch":
        return {"omega": 0.05 * var, "alpha": 0.05, "beta": 0.90}
    g = fit(ModelSpec("garch"), ModelData(data.r), min_obs=0, compute_se=False)
    lh = np.log(g.states.h)
    lx = np.log(data.x)
    T = len(lh)
    (xi, psi), resid = _ols(lx, np.column_stack([np.ones(T), lh]))
    su = max(float(np.std(resid)), 1e-3)
    X = np.column_stack([np.ones(T - 1), lh[:-1], lx[:-1]])
    (om, be, ga), _ = _ols(lh[1:], X)
    if not (0.0 <= be < 1.0) or ga < 0:
        be, ga = 0.5, 0.3 / max(abs(psi), 1e-3)
    if abs(be + ga * psi) >= 0.98:
        shrink = 0.9 / abs(be + ga * psi)
        be, ga = be * shrink, ga * shrink
    # match the sample mean of log h given the chosen dynamics
    om = float(np.mean(lh[1:] - be * lh[:-1] - ga * lx[:-1]))
    theta = {"omega": om, "beta": be, "gamma": ga, "xi": float(xi), "psi": float(psi),
             "tau1": 0.0, "tau2": 0.0, "sigma_u": su}
    if spec.include_jumps:
        theta["gamma_j"] = 0.0
    return theta


def sandwich_se(theta: dict, spec: ModelSpec, data: ModelData, h1: float) -> dict:
    """QMLE-robust standard errors ``sqrt(diag(A^-1 B A^-1))``."""
    v = _as_vector(theta, spec)
    S = scores(v, spec, data, h1)
    B = S.T @ S
    k = len(v)
    A = np.empty((k, k))
    g0 = S.sum(axis=0)
    for i in range(k):
        step = 1e-5 * max(1.0, abs(v[i]))
        up, dn = v.copy(), v.copy()
        up[i] += step
        dn[i] -= step
        try:
            gu = gradient(up, spec, data, h1)
        except NumericError:
            gu = None
        try:
            gd = gradient(dn, spec, data, h1)
        except NumericError:
            gd = None
        # one-sided near the edge of the admissible region
        if gu is not None and gd is not None:
            A[:, i] = (gu - gd) / (2 * step)
        elif gu is not None:
            A[:, i] = (gu - g0) / step
        elif gd is not None:
            A[:, i] = (g0 - gd) / step
        else:
            return {n: float("nan") for n in spec.param_names}
    A = 0.5 * (A + A.T)
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return {n: float("nan") for n in spec.param_names}
    cov = Ainv @ B @ Ainv
    diag = np.diag(cov)
    return {n: (math.sqrt(d) if d >= 0 else float("nan")) for n, d in zip(spec.param_names, diag)}


def fit(spec: ModelSpec, data: ModelData, start: dict | None = None, h1: float | None = None,
        min_obs: int = MIN_OBS, maxiter: int = 2000, compute_se: bool = True, gtol: float = 1e-6) -> FitResult:
    """Maximize the QMLE criterion with BFGS on transformed parameters.

    Realized families maximize the joint ``l(r, x)``, GARCH the return
    likelihood.  The search runs on returns standardized by their sample
    deviation (measures by its square), so results do not depend on the
    units of the data.  ``sigma_u`` is optimized on the log scale, the GARCH
    coefficients through a softmax that keeps ``alpha + beta < 1``; the
    Realized GARCH stationarity region is a penalty, since ``psi`` enters it
    bilinearly.  ``|psi|`` is kept within ``PSI_MAX``; a solution on that
    bound is kept and flagged in ``convergence["at_bound"]``, as is one
    with ``|beta|`` at 1.
    """
    T = len(data)
    if T < min_obs:
        raise InsufficientDataError(f"{spec.label}: {T} observations, need at least {min_obs}")
    if not np.var(data.r) > 0:
        raise SingularFitError("returns are constant")
    h1 = default_h1(data.r) if h1 is None else float(h1)
    sd = math.sqrt(default_h1(data.r))
    c = math.log(sd)
    sdata = ModelData(data.r / sd, None if data.x is None else data.x / sd**2, data.jv)
    sh1 = h1 / sd**2
    theta0 = _rescale(start, spec, c) if start is not None else initial_params(spec, sdata)
    if spec.include_jumps:
        theta0.setdefault("gamma_j", 0.0)
    scale = np.ones(len(spec.param_names))
    if spec.include_jumps:
        lj_sd = float(np.std(np.log1p(sdata.jv)))
        scale[spec.param_names.index("gamma_j")] = lj_sd if lj_sd > 0 else 1.0
    phi0 = _to_free(theta0, spec, scale)

    def negll(phi):
        v, jac = _from_free(phi, spec, scale)
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                _, lr, lxr, sc = _evaluate(v, spec, sdata, sh1, want_grad=True)
            except NumericError:
                return np.inf, np.zeros_like(phi)
            val = lr.sum() + lxr.sum()
            g = sc.sum(axis=0)
        if not (np.isfinite(val) and np.all(np.isfinite(g))):
            return np.inf, np.zeros_like(phi)
        pen, pgrad = _penalty(v, spec)
        return -(val - pen) / T, -(jac.T @ (g - pgrad)) / T

    f0, _ = negll(phi0)
    if not np.isfinite(f0):
        raise NumericError(f"{spec.label}: log-likelihood not finite at the starting point")
    bounds = _free_bounds(spec)
    method = "BFGS"
    res = optimize.minimize(negll, phi0, jac=True, method="BFGS", options={"maxiter": maxiter, "gtol": gtol})
    best, fbest = (res.x, res.fun) if res.fun <= f0 and _inside(res.x, bounds) else (phi0, f0)
    if not res.success or best is phi0:
        # BFGS often stops on line-search precision near the optimum, or runs
        # off along the psi ridge; polish inside the box, restarting the
        # curvature estimate while it still helps
        for _ in range(4):
            res2 = optimize.minimize(negll, best, jac=True, method="L-BFGS-B", bounds=bounds,
                                     options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-15})
            if res2.fun > fbest:
                break
            gain = fbest - res2.fun
            best, fbest, res, method = res2.x, res2.fun, res2, "L-BFGS-B"
            if _projected_gnorm(negll(best)[1], best, bounds) <= 1e-3 or gain < 1e-12:
                break
    gnorm = _projected_gnorm(negll(best)[1], best, bounds)
    at_bound = not _inside(best, bounds, strict=True)
    v, _ = _from_free(best, spec, scale)
    params = _rescale(_as_dict(v, spec), spec, -c)
    report = {"method": method, "iterations": int(res.nit), "grad_norm": gnorm,
              "status": int(res.status), "message": str(res.message), "at_bound": at_bound}
    if at_bound:
        logger.warning("%s: estimate on the boundary of the parameter box (|psi| <= %g, |beta| < 1)",
                       spec.label, PSI_MAX)
    if gnorm > 1e-3:
        raise ConvergenceError(f"{spec.label}: optimizer stopped with gradient norm {gnorm:.2e} ({res.message})",
                               best=params)
    start_obj = objective(_rescale(theta0, spec, -c), spec, data, h1)
    states = filter_states(params, spec, data, h1)
    joint, partial = loglik(params, spec, data, h1)
    se = sandwich_se(params, spec, data, h1) if compute_se else {}
    report["objective_start"] = start_obj
    report["persistence"] = persistence(params)
    return FitResult(spec, params, se, joint, partial, states, h1, T, report, data.digest())


def fixed_fit(spec: ModelSpec, theta: dict, data: ModelData, h1: float | None = None) -> FitResult:
    """Wrap given parameters as a fit (no estimation)."""
    h1 = default_h1(data.r) if h1 is None else float(h1)
    params = _as_dict(_as_vector(theta, spec), spec)
    joint, partial = loglik(params, spec, data, h1)
    return FitResult(spec, params, {}, joint, partial, filter_states(params, spec, data, h1), h1, len(data),
                     {"method": "fixed"}, data.digest())


# ---------------------------------------------------------------- comparison

@dataclass
class LikelihoodRatio:
    restricted: str
    unrestricted: str
    statistic: float
    df: int
    p_value: float


def likelihood_ratio(restricted: FitResult, unrestricted: FitResult) -> LikelihoodRatio:
    df = unrestricted.n_params - restricted.n_params
    if df < 0:
        raise ValueError("unrestricted model has fewer parameters")
    stat = max(0.0, 2.0 * (unrestricted.objective - restricted.objective))
    if stat == 0.0:
        p = 1.0
    else:
        p = float(stats.chi2.sf(stat, df)) if df > 0 else float("nan")
    return LikelihoodRatio(restricted.spec.label, unrestricted.spec.label, stat, df, p)


def _nested(small: ModelSpec, big: ModelSpec) -> bool:
    return small.family == "realized_garch" and big.family == "realized_jgarch" and small.measure == big.measure


@dataclass
class ModelComparison:
    rows: list
    tests: list

    def ranking(self) -> list[str]:
        """Labels sorted by the return log-likelihood, best first."""
        return [r["label"] for r in sorted(self.rows, key=lambda r: -r["loglik_partial"])]


def compare_models(fits: list[FitResult]) -> ModelComparison:
    """Likelihood table plus LR tests for each nested Realized / Jump pair.

    GARCH and realized families are only comparable through the return
    likelihood, which is what :meth:`ModelComparison.ranking` uses.
    """
    if not fits:
        return ModelComparison([], [])
    ref = fits[0]
    for f in fits[1:]:
        if f.n_obs != ref.n_obs or (f.data_digest and ref.data_digest and f.data_digest != ref.data_digest):
            raise AlignmentError(f"{f.spec.label} was fitted on a different return sample than {ref.spec.label}")
    rows = [{"label": f.spec.label, "family": f.spec.family, "k": f.n_params,
             "loglik_partial": f.loglik_partial, "loglik_joint": f.loglik_joint} for f in fits]
    tests = [likelihood_ratio(a, b) for a in fits for b in fits if _nested(a.spec, b.spec)]
    return ModelComparison(rows, tests)
