"""Mixture-of-generalized-Gaussians estimation.

The learner is an EM loop whose M-step is solved approximately per
component: a few fixed-point rounds on (mu, sigma) followed by a
safeguarded Newton-Raphson update of the shape parameter beta.  With
``fix_beta=1`` the whole scheme collapses to textbook Gaussian-mixture
EM, which the tests exploit as an oracle.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import digamma, logsumexp, polygamma

from .ggd import BETA_MAX, BETA_MIN, GgdParams

__all__ = [
    "GGMM_FORMAT_VERSION",
    "Ggmm",
    "EmConfig",
    "FitReport",
    "neg_mean_log_likelihood",
    "e_step",
    "m_step_weights",
    "fp_update_mean",
    "fp_update_cov",
    "beta_score",
    "newton_update_beta",
    "fit_component",
    "init_model",
    "fit",
]

GGMM_FORMAT_VERSION = 1

_LOG_2 = np.log(2.0)

# A component whose mixture weight drops below this is considered
# collapsed and gets re-seeded.
_COLLAPSE_WEIGHT = 1e-8


class Ggmm:
    """A K-component mixture of generalized Gaussians.

    Parameters
    ----------
    weights : array_like, shape (K,)
        Positive mixture weights summing to 1 (within 1e-10).
    components : sequence of GgdParams
        All of the same dimension p.
    """

    def __init__(self, weights, components):
        weights = np.asarray(weights, dtype=float)
        components = list(components)
        if weights.ndim != 1 or weights.size != len(components):
            raise ValueError("need one weight per component")
        if len(components) < 1:
            raise ValueError("mixture needs at least one component")
        if np.any(weights <= 0):
            raise ValueError("mixture weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        p = components[0].p
        for k, comp in enumerate(components):
            if comp.p != p:
                raise ValueError(
                    f"component {k} has dimension {comp.p}, expected {p}"
                )
        self.weights = weights
        self.components = components
        self.weights.flags.writeable = False

    @property
    def K(self):
        return len(self.components)

    @property
    def p(self):
        return self.components[0].p

    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            if self.p == 1:
                return x.reshape(-1, 1)
            if x.size == self.p:
                return x.reshape(1, -1)
            raise ValueError(
                f"dimension mismatch: got vector of size {x.size}, expected {self.p}"
            )
        if x.ndim == 2 and x.shape[1] == self.p:
            return x
        raise ValueError(f"expected shape (n, {self.p}), got {x.shape}")

    def weighted_log_pdfs(self, x):
        """Matrix of log w_k + log f(x_i | theta_k), shape (n, K)."""
        pts = self._as_points(x)
        out = np.empty((pts.shape[0], self.K))
        for k, comp in enumerate(self.components):
            out[:, k] = comp.log_pdf(pts)
        out += np.log(self.weights)
        return out

    def log_pdf(self, x):
        """Log mixture density, shape (n,)."""
        return logsumexp(self.weighted_log_pdfs(x), axis=1)

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "format_version": GGMM_FORMAT_VERSION,
            "p": self.p,
            "K": self.K,
            "weights": [float(w) for w in self.weights],
            "components": [
                {
                    "mu": comp.mu.tolist(),
                    "sigma": comp.sigma.reshape(-1).tolist(),
                    "beta": float(comp.beta),
                }
                for comp in self.components
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        """Rebuild a mixture, re-validating every invariant."""
        try:
            version = doc["format_version"]
            if version != GGMM_FORMAT_VERSION:
                raise ValueError(f"unsupported mixture format version {version}")
            p = int(doc["p"])
            K = int(doc["K"])
            weights = doc["weights"]
            entries = doc["components"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed mixture document: {exc}") from exc
        if len(entries) != K or len(weights) != K:
            raise ValueError("mixture document has inconsistent K")
        components = []
        for entry in entries:
            try:
                mu = np.asarray(entry["mu"], dtype=float)
                sigma = np.asarray(entry["sigma"], dtype=float)
                beta = float(entry["beta"])
            except (KeyError, TypeError) as exc:
                raise ValueError(f"malformed component entry: {exc}") from exc
            if mu.size != p or sigma.size != p * p:
                raise ValueError("component dimensions disagree with header")
            components.append(GgdParams(mu, sigma.reshape(p, p), beta))
        return cls(weights, components)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class EmConfig:
    """Controls for the EM / fixed-point learner.

    ``cov_reg=None`` resolves at fit time to 1e-6 times the mean
    per-coordinate data variance.  ``fix_beta`` pins the shape parameter
    (set it to 1 for the Gaussian-mixture baseline).
    """

    K: int
    max_outer_iters: int = 200
    fp_inner_iters: int = 3
    newton_iters: int = 10
    rel_tol: float = 1e-5
    cov_reg: float | None = None
    delta_floor: float = 1e-10
    beta_bounds: tuple[float, float] = (BETA_MIN, BETA_MAX)
    fix_beta: float | None = None
    init: str = "kmeans-assign"
    seed: int = 0
    omit_cov_shape_factor: bool = False

    def __post_init__(self):
        for name in ("K", "max_outer_iters", "fp_inner_iters", "newton_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.cov_reg is not None and self.cov_reg < 0:
            raise ValueError("cov_reg must be >= 0")
        if self.delta_floor <= 0:
            raise ValueError("delta_floor must be positive")
        lo, hi = self.beta_bounds
        if not (BETA_MIN <= lo < hi <= BETA_MAX):
            raise ValueError(
                f"beta_bounds must satisfy {BETA_MIN} <= lo < hi <= {BETA_MAX}"
            )
        if self.fix_beta is not None and not (lo <= self.fix_beta <= hi):
            raise ValueError("fix_beta must lie within beta_bounds")
        if self.init not in ("random-responsibility", "kmeans-assign"):
            raise ValueError(f"unknown init scheme {self.init!r}")


@dataclass
class FitReport:
    """Diagnostics from one fit: NLL trace, iteration count, resets."""

    nll_trace: list[float]
    n_outer_iters: int
    converged: bool
    cov_reg: float
    resets: list[tuple[int, int]] = field(default_factory=list)
    rejected_updates: list[tuple[int, int]] = field(default_factory=list)
    monotonicity_violations: list[int] = field(default_factory=list)


def _check_data(data, p=None):
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("data must be a nonempty (N, p) array")
    if p is not None and x.shape[1] != p:
        raise ValueError(f"data dimension {x.shape[1]} does not match model p={p}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    return x


def _check_responsibilities(resp):
    resp = np.asarray(resp, dtype=float)
    if resp.ndim != 2:
        raise ValueError("responsibilities must be an (N, K) matrix")
    if np.any(resp < 0):
        raise ValueError("responsibilities must be nonnegative")
    rows = resp.sum(axis=1)
    if np.abs(rows - 1.0).max() > 1e-10:
        raise ValueError("responsibility rows must sum to 1")
    return resp


def neg_mean_log_likelihood(model, data):
    """Mean negative log mixture density over the samples."""
    x = _check_data(data, model.p)
    return float(-logsumexp(model.weighted_log_pdfs(x), axis=1).mean())


def e_step(model, data):
    """Posterior responsibilities, computed row-wise in log space."""
    x = _check_data(data, model.p)
    lw = model.weighted_log_pdfs(x)
    return np.exp(lw - logsumexp(lw, axis=1, keepdims=True))


def m_step_weights(resp):
    """Mixture weights as column means of the responsibilities."""
    return _check_responsibilities(resp).mean(axis=0)


def fp_update_mean(data, alphas, current, delta_floor=1e-10):
    """One fixed-point update of the component mean.

    mu <- sum_i a_i d_i^(beta-1) x_i / sum_i a_i d_i^(beta-1), with the
    Mahalanobis forms d_i taken against the current (mu, sigma) and
    clamped below by ``delta_floor`` (d^(beta-1) diverges at d=0 for
    beta < 1).
    """
    x = _check_data(data, current.p)
    alphas = np.asarray(alphas, dtype=float)
    deltas = np.maximum(current.mahalanobis_sq(x), delta_floor)
    w = alphas * deltas ** (current.beta - 1.0)
    denom = w.sum()
    if not np.isfinite(denom) or denom <= 0.0:
        raise ValueError("degenerate mean update: weight sum underflowed")
    return (w @ x) / denom


def fp_update_cov(
    data,
    alphas,
    current,
    updated_mu,
    *,
    cov_reg=0.0,
    delta_floor=1e-10,
    omit_shape_factor=False,
):
    """One fixed-point update of the component covariance.

    sigma <- beta * sum_i a_i d_i^(beta-1) (x_i-mu)(x_i-mu)^T / sum_i a_i
    plus ``cov_reg * I``, symmetrized.  The Mahalanobis forms use the
    freshly updated mean and the pre-update sigma, which makes the
    beta=1 case exactly the Gaussian M-step.  The leading factor beta
    comes from gradient stationarity of the weighted log-likelihood;
    ``omit_shape_factor=True`` drops it (both forms coincide at beta=1).
    """
    x = _check_data(data, current.p)
    alphas = np.asarray(alphas, dtype=float)
    mu = np.asarray(updated_mu, dtype=float).reshape(-1)
    denom = alphas.sum()
    if not np.isfinite(denom) or denom <= 0.0:
        raise ValueError("degenerate covariance update: weight sum underflowed")
    diff = x - mu
    z = solve_triangular(current.chol, diff.T, lower=True)
    deltas = np.maximum(np.einsum("ij,ij->j", z, z), delta_floor)
    w = alphas * deltas ** (current.beta - 1.0)
    sigma = (diff * w[:, None]).T @ diff / denom
    if not omit_shape_factor:
        sigma = current.beta * sigma
    sigma = sigma + cov_reg * np.eye(current.p)
    return 0.5 * (sigma + sigma.T)


def beta_score(beta, deltas, alphas, p):
    """Score and its derivative for the shape parameter.

    g(beta) is d/dbeta of sum_i a_i log f(x_i | mu, sigma, beta) at
    fixed (mu, sigma), i.e. with d_i fixed:

        g = sum_i a_i [ 1/beta + (p / (2 beta^2)) (psi(p/(2 beta)) + log 2)
                        - 0.5 d_i^beta log d_i ]

    and g' is its analytic derivative (trigamma).  Returns ``(g, g')``.
    """
    beta = float(beta)
    if not (BETA_MIN <= beta <= BETA_MAX):
        raise ValueError(f"beta out of bounds [{BETA_MIN}, {BETA_MAX}]: {beta}")
    deltas = np.asarray(deltas, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if deltas.shape != alphas.shape:
        raise ValueError("deltas and alphas must have the same length")
    if np.any(deltas <= 0):
        raise ValueError("deltas must be clamped to positive values")
    a = p / (2.0 * beta)
    psi = digamma(a)
    tri = polygamma(1, a)
    log_d = np.log(deltas)
    d_pow = deltas**beta
    alpha_sum = alphas.sum()
    g = (1.0 / beta + (p / (2.0 * beta**2)) * (psi + _LOG_2)) * alpha_sum
    g -= 0.5 * (alphas @ (d_pow * log_d))
    g_prime = (
        -1.0 / beta**2
        - (p / beta**3) * (psi + _LOG_2)
        - (p**2 / (4.0 * beta**4)) * tri
    ) * alpha_sum
    g_prime -= 0.5 * (alphas @ (d_pow * log_d**2))
    return float(g), float(g_prime)


def _bisect_beta(deltas, alphas, p, lo, hi):
    """Bisection fallback on the score over [lo, hi].

    Returns the root of g when the sign changes across the bracket,
    otherwise the boundary the likelihood increases toward.
    """
    g_lo, _ = beta_score(lo, deltas, alphas, p)
    g_hi, _ = beta_score(hi, deltas, alphas, p)
    if g_lo <= 0.0 and g_hi <= 0.0:
        return lo
    if g_lo >= 0.0 and g_hi >= 0.0:
        return hi
    a, b, g_a = lo, hi, g_lo
    for _ in range(80):
        mid = 0.5 * (a + b)
        g_mid, _ = beta_score(mid, deltas, alphas, p)
        if g_mid == 0.0:
            return mid
        if (g_a > 0.0) == (g_mid > 0.0):
            a, g_a = mid, g_mid
        else:
            b = mid
    return 0.5 * (a + b)


def newton_update_beta(deltas, alphas, p, beta_init, config):
    """Safeguarded Newton-Raphson solve of the shape score g(beta) = 0.

    Damped Newton steps are clamped to ``config.beta_bounds``; whenever a
    step fails to reduce |g| or the score derivative is nonnegative the
    solver falls back to bisection over the bounds.  Always returns an
    in-bounds value.  If ``config.fix_beta`` is set it is returned
    unchanged.
    """
    if config.fix_beta is not None:
        return float(config.fix_beta)
    lo, hi = config.beta_bounds
    beta = float(np.clip(beta_init, lo, hi))
    deltas = np.asarray(deltas, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    g_tol = 1e-10 * max(1.0, alphas.sum())
    g, g_prime = beta_score(beta, deltas, alphas, p)
    for _ in range(config.newton_iters):
        if abs(g) <= g_tol:
            return beta
        if g_prime >= 0.0:
            return _bisect_beta(deltas, alphas, p, lo, hi)
        step = -g / g_prime
        accepted = False
        for _damp in range(8):
            cand = float(np.clip(beta + step, lo, hi))
            if cand == beta:
                break
            g_cand, gp_cand = beta_score(cand, deltas, alphas, p)
            if abs(g_cand) < abs(g):
                beta, g, g_prime = cand, g_cand, gp_cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if abs(g) <= g_tol:
                return beta
            # Clamped against a boundary that the score points toward.
            if (beta == lo and g < 0.0) or (beta == hi and g > 0.0):
                return beta
            return _bisect_beta(deltas, alphas, p, lo, hi)
    return beta


def fit_component(data, alphas, start, config, cov_reg, n_rounds=None):
    """Weighted single-component solve (the inner fixed-point loop).

    Runs ``n_rounds`` rounds (default ``config.fp_inner_iters``) of
    mean update, covariance update, then Newton update of beta, each
    against the freshest parameters.  Raises ValueError if the updated
    covariance loses positive definiteness; the caller decides whether
    that is fatal.
    """
    x = _check_data(data, start.p)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (x.shape[0],):
        raise ValueError("need one weight per sample")
    rounds = config.fp_inner_iters if n_rounds is None else n_rounds
    comp = start
    for _ in range(rounds):
        mu = fp_update_mean(x, alphas, comp, config.delta_floor)
        sigma = fp_update_cov(
            x,
            alphas,
            comp,
            mu,
            cov_reg=cov_reg,
            delta_floor=config.delta_floor,
            omit_shape_factor=config.omit_cov_shape_factor,
        )
        trial = GgdParams(mu, sigma, comp.beta)
        deltas = np.maximum(trial.mahalanobis_sq(x), config.delta_floor)
        beta = newton_update_beta(deltas, alphas, x.shape[1], comp.beta, config)
        comp = trial if beta == comp.beta else GgdParams(mu, sigma, beta)
    return comp


def _resolve_cov_reg(x, config):
    if config.cov_reg is not None:
        return float(config.cov_reg)
    return float(1e-6 * x.var(axis=0).mean())


def _kmeanspp_indices(x, K, rng):
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(K - 1):
        total = d2.sum()
        if total <= 0.0:
            raise ValueError(f"need at least K={K} distinct points to initialize")
        nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return chosen


def init_model(data, config):
    """Initial mixture, deterministic for a fixed config seed.

    ``random-responsibility`` draws a random row-stochastic matrix and
    applies one Gaussian M-step; ``kmeans-assign`` seeds means k-means++
    style and uses hard-assignment covariances.  All initial betas are 1.
    """
    x = _check_data(data)
    n, p = x.shape
    K = config.K
    if n <= K:
        raise ValueError(f"need more than K={K} samples, got {n}")
    rng = np.random.default_rng(config.seed)
    cov_reg = _resolve_cov_reg(x, config)
    ridge = cov_reg if cov_reg > 0 else 1e-8 * max(x.var(axis=0).mean(), 1.0)
    eye = np.eye(p)

    if config.init == "random-responsibility":
        resp = rng.standard_exponential((n, K))
        resp /= resp.sum(axis=1, keepdims=True)
        weights = resp.mean(axis=0)
        components = []
        for k in range(K):
            a = resp[:, k]
            mu = (a @ x) / a.sum()
            diff = x - mu
            sigma = (diff * a[:, None]).T @ diff / a.sum() + ridge * eye
            components.append(GgdParams(mu, 0.5 * (sigma + sigma.T), 1.0))
        return Ggmm(weights / weights.sum(), components)

    seeds = _kmeanspp_indices(x, K, rng)
    centers = x[seeds]
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)
    weights = np.empty(K)
    components = []
    global_cov = np.cov(x, rowvar=False).reshape(p, p) + ridge * eye
    for k in range(K):
        members = x[assign == k]
        weights[k] = max(len(members), 1) / n
        if len(members) == 0:
            components.append(GgdParams(centers[k], global_cov, 1.0))
            continue
        mu = members.mean(axis=0)
        diff = members - mu
        sigma = diff.T @ diff / len(members) + ridge * eye
        components.append(GgdParams(mu, 0.5 * (sigma + sigma.T), 1.0))
    return Ggmm(weights / weights.sum(), components)


def _reseed_component(x, order, used, ridge):
    """Fresh component at the next-worst-likelihood data point."""
    for idx in order:
        if idx not in used:
            used.add(idx)
            p = x.shape[1]
            sigma = np.cov(x, rowvar=False).reshape(p, p) + ridge * np.eye(p)
            return GgdParams(x[idx], 0.5 * (sigma + sigma.T), 1.0)
    raise ValueError("no data point left to re-seed from")


def _weighted_loglik(alphas, log_f):
    """sum_i a_i log f_i, skipping zero-responsibility samples.

    Samples with a_i = 0 are excluded so that a -inf log density there
    (a point far outside a light-tailed component) cannot poison the sum.
    """
    mask = alphas > 0.0
    return float(np.sum(alphas[mask] * log_f[mask]))


def fit(data, config, init=None):
    """Learn a GGMM by EM with fixed-point/Newton M-steps.

    Parameters
    ----------
    data : array_like, shape (N, p)
        Samples, N > config.K.
    config : EmConfig
    init : Ggmm, optional
        Starting model; defaults to ``init_model(data, config)``.

    Returns
    -------
    (Ggmm, FitReport)

    Collapsed components (weight below 1e-8, or a covariance update that
    loses positive definiteness) are re-seeded from the worst-likelihood
    data point and recorded in the report rather than aborting the fit.

    The truncated fixed-point inner loop does not always increase a
    component's weighted log-likelihood on degenerate data (for example
    patch sets containing bitwise-identical flat patches), so each
    component update is accepted only if it does; rejected updates keep
    the previous parameters and are listed in the report.  Together with
    the exact weight update this keeps the NLL trace non-increasing up
    to floating-point noise.
    """
    x = _check_data(data)
    n = x.shape[0]
    if n <= config.K:
        raise ValueError(f"need more than K={config.K} samples, got {n}")
    cov_reg = _resolve_cov_reg(x, config)
    ridge = cov_reg if cov_reg > 0 else 1e-8 * max(x.var(axis=0).mean(), 1.0)
    model = init_model(x, config) if init is None else init
    if model.p != x.shape[1]:
        raise ValueError("initial model dimension does not match data")
    K = model.K

    nll = neg_mean_log_likelihood(model, x)
    trace = [nll]
    resets = []
    rejected = []
    violations = []
    converged = False
    it = 0
    for it in range(1, config.max_outer_iters + 1):
        lw = model.weighted_log_pdfs(x)
        log_mix = logsumexp(lw, axis=1)
        resp = np.exp(lw - log_mix[:, None])
        weights = resp.mean(axis=0)

        worst_order = np.argsort(log_mix)
        used_seeds = set()
        new_components = []
        reset_mask = np.zeros(K, dtype=bool)
        log_w = np.log(model.weights)
        for k in range(K):
            if weights[k] < _COLLAPSE_WEIGHT:
                new_components.append(_reseed_component(x, worst_order, used_seeds, ridge))
                reset_mask[k] = True
                resets.append((it, k))
                continue
            alphas = resp[:, k]
            old_q = _weighted_loglik(alphas, lw[:, k] - log_w[k])
            try:
                cand = fit_component(x, alphas, model.components[k], config, cov_reg)
            except ValueError:
                new_components.append(_reseed_component(x, worst_order, used_seeds, ridge))
                reset_mask[k] = True
                resets.append((it, k))
                continue
            new_q = _weighted_loglik(alphas, cand.log_pdf(x))
            if new_q >= old_q - 1e-9 * (1.0 + abs(old_q)):
                new_components.append(cand)
            else:
                new_components.append(model.components[k])
                rejected.append((it, k))
        if reset_mask.any():
            weights = weights.copy()
            weights[reset_mask] = 1.0 / K
        model = Ggmm(weights / weights.sum(), new_components)

        new_nll = neg_mean_log_likelihood(model, x)
        trace.append(new_nll)
        improvement = nll - new_nll
        if new_nll > nll + 1e-6:
            violations.append(it)
        elif improvement < config.rel_tol * max(abs(nll), 1e-12):
            nll = new_nll
            converged = True
            break
        nll = new_nll

    return model, FitReport(
        nll_trace=trace,
        n_outer_iters=it,
        converged=converged,
        cov_reg=cov_reg,
        resets=resets,
        rejected_updates=rejected,
        monotonicity_violations=violations,
    )
