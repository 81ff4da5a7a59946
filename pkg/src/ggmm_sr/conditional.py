"""Conditioning a joint generalized Gaussian on an observed block.

A joint vector is split into a leading high-resolution block and a
trailing low-resolution block.  Conditioned on the LR block, the HR
block again follows a generalized Gaussian whose mean is affine in the
observation and whose matrix is the Schur complement; the conditional
mean is the MMSE estimate.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ggd import GgdParams

__all__ = [
    "BlockPartition",
    "ConditionalGgd",
    "conditional_params",
    "mmse_estimate",
    "lr_block_params",
    "select_component",
    "MmseConditioner",
]


@dataclass(frozen=True)
class BlockPartition:
    """Split of a joint dimension into HR-first and LR-last blocks."""

    d_h: int
    d_l: int

    def __post_init__(self):
        if self.d_h < 1 or self.d_l < 1:
            raise ValueError("both block dimensions must be >= 1")

    @property
    def p(self):
        return self.d_h + self.d_l

    def split_mean(self, mu):
        return mu[: self.d_h], mu[self.d_h :]

    def split_cov(self, sigma):
        """Blocks (sigma_hh, sigma_hl, sigma_ll) of a joint matrix."""
        h, l = self.d_h, self.d_h + self.d_l
        return sigma[:h, :h], sigma[:h, h:l], sigma[h:l, h:l]


@dataclass
class ConditionalGgd:
    """Conditional HR-block distribution given an LR observation.

    ``sigma_hat`` is the Schur complement and may be singular, so it is
    kept as a plain matrix rather than a factored GgdParams.
    """

    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    beta_hat: float


def _check_observation(x_l, d_l):
    x = np.asarray(x_l, dtype=float).reshape(-1)
    if x.size != d_l:
        raise ValueError(f"observation has dimension {x.size}, expected {d_l}")
    return x


def conditional_params(joint, part, x_l):
    """Condition a joint GGD on its LR block.

    mu_hat = mu_h + sigma_hl sigma_ll^{-1} (x_l - mu_l),
    sigma_hat = sigma_hh - sigma_hl sigma_ll^{-1} sigma_hl^T,
    beta_hat = beta.  Solves go through a Cholesky factorization of the
    LR block, never an explicit inverse.
    """
    if part.p != joint.p:
        raise ValueError(
            f"partition dimension {part.p} does not match joint dimension {joint.p}"
        )
    x_l = _check_observation(x_l, part.d_l)
    mu_h, mu_l = part.split_mean(joint.mu)
    s_hh, s_hl, s_ll = part.split_cov(joint.sigma)
    factor = cho_factor(s_ll, lower=True)
    gain = cho_solve(factor, s_hl.T).T
    mu_hat = mu_h + gain @ (x_l - mu_l)
    sigma_hat = s_hh - gain @ s_hl.T
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    return ConditionalGgd(mu_hat, sigma_hat, joint.beta)


def mmse_estimate(joint, part, x_l):
    """MMSE point estimate of the HR block: the conditional mean."""
    return conditional_params(joint, part, x_l).mu_hat


def lr_block_params(comp, part):
    """LR-block parameters (mu_l, sigma_ll, beta) read off a joint component.

    For beta != 1 this is not the true marginal of the joint GGD, but it
    is the density the component-selection rule scores against.
    """
    if part.p != comp.p:
        raise ValueError(
            f"partition dimension {part.p} does not match joint dimension {comp.p}"
        )
    _, mu_l = part.split_mean(comp.mu)
    _, _, s_ll = part.split_cov(comp.sigma)
    return GgdParams(mu_l, s_ll, comp.beta)


def select_component(model, part, x_l):
    """Index of the component maximizing log w_k + LR-block log density.

    Ties break toward the lowest index.
    """
    x_l = _check_observation(x_l, part.d_l)
    scores = np.array(
        [
            np.log(w) + lr_block_params(comp, part).log_pdf(x_l)
            for w, comp in zip(model.weights, model.components)
        ]
    )
    return int(np.argmax(scores))


class MmseConditioner:
    """Batched component selection and MMSE estimation for one mixture.

    Precomputes per component the LR-block parameters and the affine map
    ``x_l -> mu_h + gain (x_l - mu_l)`` so that large batches of LR
    observations can be processed with a handful of matrix products.
    Scores and estimates agree exactly with the per-observation
    functions above.
    """

    def __init__(self, model, part):
        if part.p != model.p:
            raise ValueError(
                f"partition dimension {part.p} does not match mixture dimension {model.p}"
            )
        self.part = part
        self.log_weights = np.log(model.weights)
        self.lr_params = [lr_block_params(c, part) for c in model.components]
        self.gains = []
        self.offsets = []
        for comp in model.components:
            mu_h, mu_l = part.split_mean(comp.mu)
            _, s_hl, s_ll = part.split_cov(comp.sigma)
            gain = cho_solve(cho_factor(s_ll, lower=True), s_hl.T).T
            self.gains.append(gain)
            self.offsets.append(mu_h - gain @ mu_l)

    @property
    def K(self):
        return len(self.lr_params)

    def select(self, obs):
        """Selected component index for each row of ``obs`` (n, d_l)."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        scores = np.empty((obs.shape[0], self.K))
        for k, params in enumerate(self.lr_params):
            scores[:, k] = self.log_weights[k] + params.log_pdf(obs)
        return np.argmax(scores, axis=1)

    def estimate(self, obs):
        """MMSE HR-block estimates, shape (n, d_h)."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        selected = self.select(obs)
        out = np.empty((obs.shape[0], self.part.d_h))
        for k in range(self.K):
            rows = np.flatnonzero(selected == k)
            if rows.size:
                out[rows] = obs[rows] @ self.gains[k].T + self.offsets[k]
        return out
