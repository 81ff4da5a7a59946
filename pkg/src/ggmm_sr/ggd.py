"""Multivariate generalized Gaussian distributions.

The density of a p-dimensional generalized Gaussian with mean ``mu``,
SPD matrix ``sigma`` and shape parameter ``beta`` is

    f(x) = C_p(beta) / |sigma|^(1/2) * exp(-0.5 * delta(x)^beta)

where ``delta(x) = (x - mu)^T sigma^{-1} (x - mu)`` is the squared
Mahalanobis form.  ``beta = 1`` recovers the multivariate Gaussian,
``beta < 1`` gives heavier tails, ``beta > 1`` lighter ones.
"""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

__all__ = ["BETA_MIN", "BETA_MAX", "log_norm_const", "GgdParams"]

# Permissible range for the shape parameter.  Gamma(p/(2*beta)) and
# 2^(p/(2*beta)) explode as beta -> 0 and the density degenerates to a
# uniform-on-ellipsoid limit for very large beta.
BETA_MIN = 0.1
BETA_MAX = 5.0

_LOG_PI = np.log(np.pi)
_LOG_2 = np.log(2.0)


def log_norm_const(p, beta):
    """Log of the normalizing constant C_p(beta).

    Computed entirely in log space via log-gamma,

        log C_p(beta) = lgamma(p/2) + log(beta) - (p/2) log(pi)
                        - lgamma(p/(2 beta)) - (p/(2 beta)) log(2),

    so it cannot overflow even for large patch dimensions.

    Parameters
    ----------
    p : int
        Dimension, at least 1.
    beta : float
        Shape parameter, strictly positive.

    Returns
    -------
    float
    """
    if p < 1:
        raise ValueError(f"dimension p must be >= 1, got {p}")
    if beta <= 0:
        raise ValueError(f"shape parameter beta must be positive, got {beta}")
    a = p / (2.0 * beta)
    return float(
        gammaln(p / 2.0) + np.log(beta) - (p / 2.0) * _LOG_PI - gammaln(a) - a * _LOG_2
    )


class GgdParams:
    """Parameters of one generalized Gaussian component.

    The Cholesky factorization of ``sigma`` is computed once at
    construction and cached; all later density evaluations go through
    triangular solves, never through an explicit inverse.  Non-SPD input
    is rejected rather than repaired (regularization is the learner's
    job, not the distribution's).

    Instances are immutable and safe to share across threads.

    Parameters
    ----------
    mu : array_like, shape (p,)
        Mean vector.
    sigma : array_like, shape (p, p)
        Symmetric positive definite matrix.
    beta : float
        Shape parameter in ``[BETA_MIN, BETA_MAX]``.
    """

    __slots__ = ("mu", "sigma", "beta", "_chol", "_log_det_sigma")

    def __init__(self, mu, sigma, beta):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        p = mu.size
        if sigma.shape != (p, p):
            raise ValueError(
                f"sigma must be {p}x{p} to match mu, got {sigma.shape}"
            )
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("mu and sigma must be finite")
        asym = np.abs(sigma - sigma.T).max()
        if asym > 1e-12 * max(1.0, np.abs(sigma).max()):
            raise ValueError(f"sigma is not symmetric (max asymmetry {asym:g})")
        beta = float(beta)
        if not (BETA_MIN <= beta <= BETA_MAX):
            raise ValueError(
                f"beta must lie in [{BETA_MIN}, {BETA_MAX}], got {beta}"
            )
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma is not positive definite") from exc

        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self, "_log_det_sigma", float(2.0 * np.sum(np.log(np.diag(chol))))
        )
        for arr in (mu, sigma, chol):
            arr.flags.writeable = False

    def __setattr__(self, name, value):
        raise AttributeError("GgdParams is immutable")

    def __repr__(self):
        return f"GgdParams(p={self.p}, beta={self.beta:g})"

    @property
    def p(self):
        return self.mu.size

    @property
    def chol(self):
        """Lower Cholesky factor L with L @ L.T = sigma."""
        return self._chol

    @property
    def log_det_sigma(self):
        return self._log_det_sigma

    def _as_points(self, x):
        """Coerce input to an (n, p) array; report whether it was a single point."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            if self.p != 1:
                raise ValueError(f"expected a vector of dimension {self.p}")
            return x.reshape(1, 1), True
        if x.ndim == 1:
            if x.size == self.p and self.p != 1:
                return x.reshape(1, -1), True
            if self.p == 1:
                return x.reshape(-1, 1), x.size == 1
            raise ValueError(
                f"dimension mismatch: got vector of size {x.size}, expected {self.p}"
            )
        if x.ndim == 2 and x.shape[1] == self.p:
            return x, False
        raise ValueError(
            f"expected shape (n, {self.p}) or ({self.p},), got {x.shape}"
        )

    def mahalanobis_sq(self, x):
        """Squared Mahalanobis form (x - mu)^T sigma^{-1} (x - mu).

        Accepts a single point of shape (p,) or a batch of shape (n, p);
        returns a float or an (n,) array accordingly.
        """
        pts, single = self._as_points(x)
        z = solve_triangular(self._chol, (pts - self.mu).T, lower=True)
        d = np.einsum("ij,ij->j", z, z)
        # Clip tiny negative rounding residue so callers can rely on >= 0.
        d = np.maximum(d, 0.0)
        return float(d[0]) if single else d

    def log_pdf(self, x):
        """Log density, log C_p(beta) - 0.5 log|sigma| - 0.5 delta^beta."""
        delta = self.mahalanobis_sq(x)
        const = log_norm_const(self.p, self.beta) - 0.5 * self._log_det_sigma
        return const - 0.5 * np.power(delta, self.beta)

    def sample(self, n, seed):
        """Draw ``n`` vectors using the elliptical stochastic representation.

        With s ~ Gamma(shape=p/(2 beta), scale=2), delta = s^(1/beta) and
        u uniform on the unit sphere, mu + sqrt(delta) * L u has the
        target distribution.  Deterministic for a fixed integer seed; a
        ``numpy.random.Generator`` may be passed instead of a seed.

        Returns
        -------
        ndarray, shape (n, p)
        """
        if n < 1:
            raise ValueError(f"sample count must be >= 1, got {n}")
        rng = np.random.default_rng(seed)
        s = rng.gamma(self.p / (2.0 * self.beta), scale=2.0, size=n)
        delta = s ** (1.0 / self.beta)
        u = rng.standard_normal((n, self.p))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.mu + np.sqrt(delta)[:, None] * (u @ self._chol.T)
