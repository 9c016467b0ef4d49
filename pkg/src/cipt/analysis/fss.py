"""Finite-size-scaling collapse with a hand-rolled Levenberg-Marquardt fit.

Data at tuning parameter q (control rate for the static ansatz, time for the
dynamic one) and several sizes L is rescaled to

    x = (q - q_c) * L**e_x,    y_tilde = L**e_y * y,

and the quality of collapse is the mean squared deviation of each rescaled
point from the straight line through its two nearest neighbors in x order
(one-sided extrapolation at the two ends), normalized by the propagated
uncertainty of that comparison:

    sigma_tilde**2 = s**2 + (w_lo * s_lo)**2 + (w_hi * s_hi)**2

with w the interpolation weights and s = L**e_y * sigma the rescaled
per-point errors. The loss is averaged over points, so a good collapse with
honest error bars sits near 1.

Exponent layout:
  static   e_x = 1/nu, e_y = m*beta/nu, free params (q_c, nu, beta)
  dynamic  q is time, q_c == 0, e_x = -z, e_y = m*beta, free params (z, beta)
where m is 1 for mean-like observables and 2 for variance-like ones.

The dynamic fit runs internally on nu = -1/z so both ansatzes share one code
path; errors transform back as dz = dnu / nu**2 (as used by the source
analyses; not derived here beyond first-order propagation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import (FitFailureError, InsufficientDataError, ParameterError,
                      SingularLossError)

ANSATZE = ("static", "dynamic")
_JAC_STEP = 1e-5
_LAMBDA0 = 1e-3
_MAX_ITER = 200
_REL_TOL = 1e-9
#: additive multi-start offsets per free parameter (internal space)
_START_OFFSETS = {"p_c": 0.05, "nu": 0.3, "nu_dyn": 0.15, "beta": 0.3}


@dataclass(frozen=True)
class CollapseInput:
    """Points (q_i, L_i, y_i, sigma_i) plus the ansatz and fit window.

    window semantics: with window_scale "absolute", keep q in [w0, w1]; with
    "per_size" (the dynamic default), keep w0 <= q <= w1 * L, i.e. an
    absolute lower cut and an upper cut proportional to the size.
    """

    q: np.ndarray
    L: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    ansatz: str = "static"
    beta_multiplier: int = 1
    window: tuple[float, float] | None = None
    window_scale: str = "absolute"

    def __post_init__(self):
        for name in ("q", "L", "y", "sigma"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.float64))
        n = len(self.q)
        if not (len(self.L) == len(self.y) == len(self.sigma) == n):
            raise ParameterError("point arrays must have equal length")
        if self.ansatz not in ANSATZE:
            raise ParameterError(f"unknown ansatz {self.ansatz!r}")
        if len(np.unique(self.L)) < 2:
            raise ParameterError("need points from at least 2 system sizes")
        if np.any(self.sigma < 0) or not np.all(np.isfinite(self.sigma)):
            raise ParameterError("sigma must be finite and non-negative")
        if self.beta_multiplier not in (1, 2):
            raise ParameterError("beta_multiplier must be 1 or 2")
        if self.window_scale not in ("absolute", "per_size"):
            raise ParameterError(f"unknown window_scale {self.window_scale!r}")
        # per_size bounds live on different scales (absolute lower bound,
        # fraction-of-L upper bound), so ordering is only checked as given
        # for absolute windows
        if (self.window is not None and self.window_scale == "absolute"
                and self.window[0] > self.window[1]):
            raise ParameterError("empty fit window")

    def windowed(self):
        """(q, L, y, sigma) restricted to the fit window."""
        if self.window is None:
            return self.q, self.L, self.y, self.sigma
        w0, w1 = self.window
        if self.window_scale == "per_size":
            mask = (self.q >= w0) & (self.q <= w1 * self.L)
        else:
            mask = (self.q >= w0) & (self.q <= w1)
        return self.q[mask], self.L[mask], self.y[mask], self.sigma[mask]


@dataclass
class FitResult:
    ansatz: str
    window: tuple[float, float] | None
    params: dict
    errors: dict
    chi2_nu: float
    n_points: int
    converged: bool = True
    n_iterations: int = 0
    n_starts: int = 1
    loss_history: list = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {"ansatz": self.ansatz,
                "window": list(self.window) if self.window else None,
                "params": dict(self.params), "errors": dict(self.errors),
                "chi2_nu": self.chi2_nu, "n_points": self.n_points}


def _scaled_points(q, L, y, sigma, q_c, nu, e_y):
    x = (q - q_c) * L ** (1.0 / nu)
    scale = L ** e_y
    return x, scale * y, scale * sigma


def _neighbor_terms(x, yt, st):
    """Deviation from the two-neighbor line and its propagated variance.

    Interior points interpolate between their x-neighbors; the first and
    last extrapolate the line through the two nearest points on their one
    available side. Returns (dev, var) in sorted-x order.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs, ys, ss = x[order], yt[order], st[order]

    lo = np.concatenate(([1], np.arange(0, n - 2), [n - 3]))
    hi = np.concatenate(([2], np.arange(2, n), [n - 2]))
    dx = xs[hi] - xs[lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        w_hi = (xs - xs[lo]) / dx
        w_lo = (xs[hi] - xs) / dx
    flat = dx == 0.0  # all three x coincide; the line degenerates to a mean
    if np.any(flat):
        w_hi[flat] = 0.5
        w_lo[flat] = 0.5
    interp = w_lo * ys[lo] + w_hi * ys[hi]
    var = ss ** 2 + (w_lo * ss[lo]) ** 2 + (w_hi * ss[hi]) ** 2
    dev = ys - interp
    if np.any((var == 0.0) & (dev != 0.0)):
        raise SingularLossError(
            "coincident rescaled points with zero uncertainty disagree")
    return dev, var


def _interp_loss(x, yt, st) -> float:
    """Mean squared normalized deviation from the neighbor line."""
    dev, var = _neighbor_terms(x, yt, st)
    res2 = np.zeros(len(x))
    ok = var > 0.0
    res2[ok] = dev[ok] ** 2 / var[ok]
    return float(res2.mean())


def _internal_loss(theta_full, data_arrays, ansatz, m) -> float:
    """theta_full = (q_c, nu, beta) in internal space; inf on bad domain."""
    q_c, nu, beta = theta_full
    if ansatz == "static":
        if nu <= 0:
            return math.inf
        e_y = m * beta / nu
    else:
        if nu >= 0:  # nu = -1/z, so z > 0 <=> nu < 0
            return math.inf
        e_y = m * beta
    q, L, y, sigma = data_arrays
    try:
        x, yt, st = _scaled_points(q, L, y, sigma, q_c, nu, e_y)
    except (OverflowError, FloatingPointError):
        return math.inf
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(yt))):
        return math.inf
    return _interp_loss(x, yt, st)


def collapse_loss(params: dict, data: CollapseInput) -> float:
    """Collapse quality at explicit parameter values.

    params: static ansatz {"p_c", "nu", "beta"}, dynamic {"z", "beta"}.
    """
    arrays = data.windowed()
    if len(arrays[0]) < 3:
        raise InsufficientDataError("need at least 3 points after windowing")
    if data.ansatz == "static":
        nu = params["nu"]
        if nu <= 0:
            raise ParameterError("nu must be positive")
        theta = (params["p_c"], nu, params.get("beta", 0.0))
    else:
        z = params["z"]
        if z <= 0:
            raise ParameterError("z must be positive")
        theta = (0.0, -1.0 / z, params.get("beta", 0.0))
    loss = _internal_loss(theta, arrays, data.ansatz, data.beta_multiplier)
    if math.isinf(loss):
        raise ParameterError("parameters outside the ansatz domain")
    return loss


def _jacobian(fun, theta, n_res):
    """Central-difference Jacobian of the residual vector."""
    k = len(theta)
    jac = np.empty((n_res, k))
    for j in range(k):
        h = _JAC_STEP * max(abs(theta[j]), 1.0)
        for _ in range(4):
            tp = theta.copy()
            tm = theta.copy()
            tp[j] += h
            tm[j] -= h
            rp = fun(tp)
            rm = fun(tm)
            if rp is not None and rm is not None:
                jac[:, j] = (rp - rm) / (2.0 * h)
                break
            h /= 10.0  # step crossed a domain boundary; shrink
        else:
            return None
    return jac


def _lm_minimize(fun, theta0):
    """Levenberg-Marquardt on a residual-vector function.

    fun(theta) returns the residual vector or None outside the domain.
    Returns (theta, loss, n_iter, converged).
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    r = fun(theta)
    if r is None:
        return theta, math.inf, 0, False
    loss = float(r @ r)
    lam = _LAMBDA0
    converged = False
    it = 0
    for it in range(1, _MAX_ITER + 1):
        jac = _jacobian(fun, theta, len(r))
        if jac is None:
            break
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(a), 1e-12)
        stepped = False
        while lam < 1e14:
            try:
                delta = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = fun(theta + delta)
            if r_new is not None:
                loss_new = float(r_new @ r_new)
                if loss_new <= loss:
                    stepped = True
                    break
            lam *= 10.0
        if not stepped:
            converged = True  # no downhill direction left at huge damping
            break
        theta = theta + delta
        drop = loss - loss_new
        r, loss = r_new, loss_new
        lam = max(lam / 10.0, 1e-14)
        if drop <= _REL_TOL * max(loss, 1e-300):
            converged = True
            break
    return theta, loss, it, converged


def _start_grid(theta0, free_idx, offsets):
    grids = []
    for j in range(3):
        if j in free_idx:
            d = offsets[j]
            grids.append([theta0[j] - d, theta0[j], theta0[j] + d])
        else:
            grids.append([theta0[j]])
    starts = []
    for a in grids[0]:
        for b in grids[1]:
            for c in grids[2]:
                starts.append(np.array([a, b, c]))
    return starts


def fit_collapse(data: CollapseInput, init_guess: dict,
                 fixed: dict | None = None) -> FitResult:
    """Best-collapse parameters with standard errors.

    init_guess uses the natural parametrization (p_c/nu/beta static, z/beta
    dynamic); fixed maps parameter names to pinned values. Multi-start over
    a 3-point grid per free parameter; the best converged start wins. If no
    start converges a FitFailureError carrying the best attempt is raised.
    """
    fixed = dict(fixed or {})
    arrays = data.windowed()
    n = len(arrays[0])
    if n < 3:
        raise InsufficientDataError("need at least 3 points after windowing")
    m = data.beta_multiplier
    ansatz = data.ansatz
    sqrt_n = math.sqrt(n)

    if ansatz == "static":
        theta0 = np.array([
            fixed.get("p_c", init_guess.get("p_c", 0.5)),
            fixed.get("nu", init_guess.get("nu", 1.0)),
            fixed.get("beta", init_guess.get("beta", 0.0))])
        free_idx = [i for i, name in enumerate(("p_c", "nu", "beta"))
                    if name not in fixed]
        offsets = [_START_OFFSETS["p_c"], _START_OFFSETS["nu"],
                   _START_OFFSETS["beta"]]
    else:
        z0 = fixed.get("z", init_guess.get("z", 2.0))
        if z0 <= 0:
            raise ParameterError("z guess must be positive")
        theta0 = np.array([0.0, -1.0 / z0,
                           fixed.get("beta", init_guess.get("beta", 0.0))])
        free_idx = [i for i, name in enumerate(("p_c", "z", "beta"))
                    if name not in fixed and name != "p_c"]
        offsets = [0.0, _START_OFFSETS["nu_dyn"], _START_OFFSETS["beta"]]

    def residuals_full(theta_full):
        nu = theta_full[1]
        if (nu <= 0) if ansatz == "static" else (nu >= 0):
            return None
        return _residual_vector(theta_full, arrays, ansatz, m, sqrt_n)

    def embed(theta_free):
        full = theta0.copy()
        full[free_idx] = theta_free
        return full

    def fun(theta_free):
        return residuals_full(embed(theta_free))

    best = None
    starts = _start_grid(theta0, free_idx, offsets)
    losses = []
    for start in starts:
        theta, loss, n_iter, conv = _lm_minimize(fun, start[free_idx])
        losses.append(loss)
        # lowest loss wins; convergence of the winner is judged afterwards
        if best is None or loss < best[0]:
            best = (loss, theta, n_iter, conv)
    loss, theta_free, n_iter, conv = best
    theta_full = embed(theta_free)

    se_free = _standard_errors(fun, theta_free, loss, n)
    result = _assemble_result(ansatz, data.window, theta_full, free_idx,
                              se_free, loss, n, conv, n_iter,
                              len(starts), losses)
    if not conv:
        raise FitFailureError(
            f"best start did not converge within {_MAX_ITER} iterations "
            f"(loss {loss:.4g})", best=result)
    return result


def _residual_vector(theta_full, arrays, ansatz, m, sqrt_n):
    """Signed residuals scaled so their sum of squares equals the loss."""
    q_c, nu, beta = theta_full
    e_y = m * beta / nu if ansatz == "static" else m * beta
    q, L, y, sigma = arrays
    x, yt, st = _scaled_points(q, L, y, sigma, q_c, nu, e_y)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(yt))):
        return None
    dev, var = _neighbor_terms(x, yt, st)
    res = np.zeros(len(x))
    ok = var > 0.0
    res[ok] = dev[ok] / np.sqrt(var[ok])
    return res / sqrt_n


def _standard_errors(fun, theta_free, loss, n):
    k = len(theta_free)
    if k == 0 or n <= k:
        return np.full(k, np.nan)
    r = fun(np.asarray(theta_free, dtype=np.float64))
    if r is None:
        return np.full(k, np.nan)
    jac = _jacobian(fun, np.asarray(theta_free, dtype=np.float64), len(r))
    if jac is None:
        return np.full(k, np.nan)
    a = jac.T @ jac
    try:
        cov = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(a)
    s2 = loss / (n - k)
    var = np.diag(cov) * s2
    return np.sqrt(np.maximum(var, 0.0))


def _assemble_result(ansatz, window, theta_full, free_idx, se_free, loss, n,
                     converged, n_iter, n_starts, losses):
    se_full = {i: float(se_free[j]) for j, i in enumerate(free_idx)}
    q_c, nu, beta = (float(v) for v in theta_full)
    if ansatz == "static":
        params = {"p_c": q_c, "nu": nu, "beta": beta, "z": None}
        errors = {"p_c": se_full.get(0), "nu": se_full.get(1),
                  "beta": se_full.get(2), "z": None}
    else:
        z = -1.0 / nu
        dz = se_full.get(1)
        if dz is not None:
            dz = dz / nu ** 2
        params = {"p_c": None, "nu": None, "beta": beta, "z": float(z)}
        errors = {"p_c": None, "nu": None, "beta": se_full.get(2), "z": dz}
    return FitResult(ansatz=ansatz, window=window, params=params,
                     errors=errors, chi2_nu=float(loss), n_points=n,
                     converged=converged, n_iterations=n_iter,
                     n_starts=n_starts, loss_history=losses)
