#!/usr/bin/env python3
"""Conditioning a joint generalized Gaussian and MMSE estimation.

Builds a joint distribution over (hidden, observed) blocks, conditions
on observations, and compares the closed-form MMSE estimator against an
affine regressor fit by least squares on the same draws.
"""

import numpy as np

from ggmm_sr import BlockPartition, GgdParams, Ggmm, MmseConditioner, conditional_params

rng = np.random.default_rng(7)

p, d_hidden = 6, 4
a = rng.normal(size=(p, p))
sigma = a @ a.T + 0.5 * p * np.eye(p)
mu = rng.normal(size=p)
part = BlockPartition(d_hidden, p - d_hidden)

print("=== conditional parameters ===")
joint = GgdParams(mu, sigma, 0.8)
obs = rng.normal(size=part.d_l)
cond = conditional_params(joint, part, obs)
print(f"joint dimension {p}, observing the last {part.d_l} coordinates")
print(f"conditional mean: {np.round(cond.mu_hat, 3)}")
print(f"conditional matrix eigenvalues: {np.round(np.linalg.eigvalsh(cond.sigma_hat), 3)}")
print(f"shape parameter is preserved: beta_hat = {cond.beta_hat}")
print("The conditional matrix is the Schur complement and does not depend")
print("on the observation; the mean is affine in it.\n")

print("=== MMSE vs least-squares affine regression (Gaussian case) ===")
joint_gauss = GgdParams(mu, sigma, 1.0)
draws = joint_gauss.sample(20_000, seed=3)
hidden, observed = draws[:, :d_hidden], draws[:, d_hidden:]

conditioner = MmseConditioner(Ggmm([1.0], [joint_gauss]), part)
mmse = conditioner.estimate(observed)
mse_mmse = np.mean(np.sum((hidden - mmse) ** 2, axis=1))

z = np.hstack([observed, np.ones((len(observed), 1))])
w, *_ = np.linalg.lstsq(z, hidden, rcond=None)
mse_ols = np.mean(np.sum((hidden - z @ w) ** 2, axis=1))

print(f"MMSE estimator MSE:      {mse_mmse:.5f}")
print(f"sample-OLS regressor MSE: {mse_ols:.5f}")
print(f"ratio: {mse_mmse / mse_ols:.5f}")
print("The closed-form conditional mean matches the best affine predictor")
print("learned from the data, without ever seeing the draws.")
