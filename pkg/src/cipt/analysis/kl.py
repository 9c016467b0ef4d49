"""KL divergence between mixtures of a point mass at zero and a density.

Sampled fluctuation observables pile up exactly at zero (absorbed
trajectories) on top of a continuous bulk, so each sample set is split at
|x| <= atom_tol into an atom weight w and a continuous remainder, and

    KL = w_p log(w_p/w_q) + (1-w_p) log((1-w_p)/(1-w_q)) + (1-w_p) D_cont

where D_cont is the KL between the continuous parts, estimated as the
p-sample average of log(p_hat/q_hat) under Gaussian kernel densities with
Silverman bandwidths. p_hat is evaluated leave-one-out so a sample never
scores against its own kernel. All density math runs in log space through a
chunked logsumexp, so far-tail evaluations come out as large negative logs
instead of underflowing to zero; no artificial floor is needed.

When the q side gives zero probability to a category the p side occupies,
the divergence is genuinely infinite: the result carries kl = inf and
infinite = True. Enabling laplace_smoothing instead adds one pseudo-count
to the q-side atom split, keeping both weights strictly inside (0, 1).

The uncertainty is a bootstrap over both sample sets (resample, re-split,
re-estimate); replicates that come out infinite are excluded from the
standard error and counted separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

_LOG_2PI_HALF = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KLConfig:
    atom_tol: float = 1e-12
    n_bootstrap: int = 100
    laplace_smoothing: bool = False
    seed: int = 0
    chunk_size: int = 512

    def __post_init__(self):
        if self.atom_tol < 0 or self.n_bootstrap < 0 or self.chunk_size < 1:
            raise ParameterError("invalid KL configuration")


@dataclass(frozen=True)
class KLResult:
    kl: float
    stderr: float
    infinite: bool
    w_p: float
    w_q: float
    d_cont: float
    n_p: int
    n_q: int
    n_infinite_replicates: int = 0

    def __iter__(self):
        return iter((self.kl, self.stderr))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """0.9 min(std, IQR/1.34) n^(-1/5); falls back to std when IQR is 0."""
    n = len(samples)
    if n < 2:
        return 0.0
    std = float(np.std(samples))
    q25, q75 = np.percentile(samples, [25.0, 75.0])
    iqr_scale = (q75 - q25) / 1.34
    spread = min(std, iqr_scale) if iqr_scale > 0 else std
    return 0.9 * spread * n ** (-0.2)


def log_kde(eval_x: np.ndarray, samples: np.ndarray, bandwidth: float,
            exclude_self: bool = False, chunk_size: int = 512) -> np.ndarray:
    """log of the Gaussian-kernel density of samples, at eval_x.

    exclude_self requires eval_x to BE the sample array (leave-one-out: the
    kernel centered on sample i is dropped when evaluating at sample i).
    """
    samples = np.asarray(samples, dtype=np.float64)
    eval_x = np.asarray(eval_x, dtype=np.float64)
    n = len(samples)
    m = n - 1 if exclude_self else n
    if m < 1 or bandwidth <= 0:
        return np.full(len(eval_x), -np.inf)
    log_norm = math.log(m) + math.log(bandwidth) + _LOG_2PI_HALF
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    out = np.empty(len(eval_x))
    for start in range(0, len(eval_x), chunk_size):
        block = eval_x[start:start + chunk_size, None]
        z = -(block - samples[None, :]) ** 2 * inv
        peak = z.max(axis=1)
        acc = np.exp(z - peak[:, None]).sum(axis=1)
        if exclude_self:
            acc = acc - np.exp(-peak)  # the self kernel contributes exp(0)
            acc = np.maximum(acc, 1e-300)
        out[start:start + chunk_size] = peak + np.log(acc) - log_norm
    return out


def _continuous_kl(p_cont, q_cont, chunk_size):
    """Sample-average KL of the continuous parts; inf when q cannot cover p."""
    if len(p_cont) == 0:
        return 0.0
    if len(q_cont) == 0:
        return math.inf
    h_p = silverman_bandwidth(p_cont)
    h_q = silverman_bandwidth(q_cont)
    if h_q <= 0:
        # q collapses to a point; p spread over it diverges
        if h_p <= 0 and len(np.unique(p_cont)) == 1 and p_cont[0] == q_cont[0]:
            return 0.0
        return math.inf
    if h_p <= 0:
        return math.inf
    log_p = log_kde(p_cont, p_cont, h_p, exclude_self=True,
                    chunk_size=chunk_size)
    log_q = log_kde(p_cont, q_cont, h_q, chunk_size=chunk_size)
    return float(np.mean(log_p - log_q))


def _mixture_terms(w_p, w_q):
    """The two atom-weight terms; inf where q has zero mass under p."""
    total = 0.0
    for a, b in ((w_p, w_q), (1.0 - w_p, 1.0 - w_q)):
        if a > 0.0:
            if b <= 0.0:
                return math.inf
            total += a * math.log(a / b)
    return total


def _kl_once(p, q, config: KLConfig):
    """(kl, w_p, w_q, d_cont) for one pair of sample sets."""
    atoms_p = np.abs(p) <= config.atom_tol
    atoms_q = np.abs(q) <= config.atom_tol
    w_p = float(atoms_p.mean())
    c_q = int(atoms_q.sum())
    if config.laplace_smoothing:
        w_q = (c_q + 1.0) / (len(q) + 2.0)
    else:
        w_q = c_q / len(q)
    p_cont = p[~atoms_p]
    q_cont = q[~atoms_q]

    kl = _mixture_terms(w_p, w_q)
    d_cont = 0.0
    if math.isfinite(kl) and w_p < 1.0:
        d_cont = _continuous_kl(p_cont, q_cont, config.chunk_size)
        kl += (1.0 - w_p) * d_cont
    return kl, w_p, w_q, d_cont


def kl_divergence(samples_p, samples_q,
                  config: KLConfig | None = None) -> KLResult:
    """KL(p || q) between two delta-plus-continuum sample sets.

    Unpacks as (kl, stderr); the full KLResult carries the atom weights,
    the continuous term, and the infinite-divergence flag.
    """
    config = config or KLConfig()
    p = np.asarray(samples_p, dtype=np.float64).ravel()
    q = np.asarray(samples_q, dtype=np.float64).ravel()
    if len(p) == 0 or len(q) == 0:
        raise ParameterError("both sample sets must be non-empty")
    if not (np.isfinite(p).all() and np.isfinite(q).all()):
        raise ParameterError("samples must be finite")

    kl, w_p, w_q, d_cont = _kl_once(p, q, config)
    infinite = not math.isfinite(kl)

    stderr = float("nan")
    n_inf = 0
    if not infinite and config.n_bootstrap > 0:
        rng = np.random.default_rng(config.seed)
        reps = []
        for _ in range(config.n_bootstrap):
            pb = p[rng.integers(0, len(p), size=len(p))]
            qb = q[rng.integers(0, len(q), size=len(q))]
            val = _kl_once(pb, qb, config)[0]
            if math.isfinite(val):
                reps.append(val)
            else:
                n_inf += 1
        if len(reps) >= 2:
            stderr = float(np.std(reps, ddof=1))
    return KLResult(kl=float(kl), stderr=stderr, infinite=infinite, w_p=w_p,
                    w_q=w_q, d_cont=float(d_cont), n_p=len(p), n_q=len(q),
                    n_infinite_replicates=n_inf)
