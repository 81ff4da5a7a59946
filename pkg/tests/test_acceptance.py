"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Each test registers a pass/fail record; the terminal summary prints one
line per criterion.  Budgets are wall-clock seconds measured around the
work the criterion names.
"""

import json
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln, logsumexp

from ggmm_sr import (
    BlockPartition,
    EmConfig,
    GgdParams,
    Ggmm,
    MmseConditioner,
    conditional_params,
    fit,
    fit_component,
    load_pgm,
    newton_update_beta,
    save_pgm,
)
from ggmm_sr.cli import main
from ggmm_sr.mixture import beta_score

from conftest import random_spd, record_criterion


@pytest.fixture(scope="session")
def camera_hr_path(tmp_path_factory):
    """128x128 ground-truth benchmark image (standard camera test image)."""
    from skimage import data

    cam = data.camera().astype(float) / 255.0
    hr = cam.reshape(128, 4, 128, 4).mean(axis=(1, 3))
    path = tmp_path_factory.mktemp("bench") / "camera128.pgm"
    save_pgm(hr, path)
    return path


def test_criterion_1_density_normalization():
    start = time.perf_counter()
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        g = GgdParams([0.0], [[1.0]], beta)
        total, _ = quad(lambda t: float(np.exp(g.log_pdf(np.array([t])))), -40.0, 40.0)
        worst = max(worst, abs(total - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 1.0
    assert record_criterion(
        "1 density normalization (p=1, beta in {0.5, 1, 2})",
        ok,
        f"max |quadrature - 1| = {worst:.2e}, {elapsed:.2f}s",
    ), worst


def test_criterion_2_gaussian_oracle():
    rng = np.random.default_rng(20)
    worst_pdf = 0.0
    worst_cond = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 6))
        mu = rng.normal(size=p)
        sigma = random_spd(rng, p)
        g = GgdParams(mu, sigma, 1.0)
        x = rng.normal(size=p)
        sign, logdet = np.linalg.slogdet(sigma)
        diff = x - mu
        maha = diff @ np.linalg.solve(sigma, diff)
        closed = -0.5 * (p * np.log(2 * np.pi) + logdet + maha)
        worst_pdf = max(worst_pdf, abs(g.log_pdf(x) - closed))
        if p >= 2:
            dh = int(rng.integers(1, p))
            part = BlockPartition(dh, p - dh)
            x_l = rng.normal(size=p - dh)
            cond = conditional_params(g, part, x_l)
            lam = np.linalg.inv(sigma)
            sigma_alt = np.linalg.inv(lam[:dh, :dh])
            mu_alt = mu[:dh] - sigma_alt @ lam[:dh, dh:] @ (x_l - mu[dh:])
            worst_cond = max(
                worst_cond,
                np.abs(cond.mu_hat - mu_alt).max(),
                np.abs(cond.sigma_hat - sigma_alt).max(),
            )
    ok = worst_pdf <= 1e-10 and worst_cond <= 1e-8
    assert record_criterion(
        "2 Gaussian oracle (log_pdf 1e-10, conditioning 1e-8)",
        ok,
        f"log_pdf err {worst_pdf:.1e}, conditioning err {worst_cond:.1e}",
    )


def test_criterion_3_sampler_moments():
    start = time.perf_counter()
    sigma = np.array([[2.0, 0.4], [0.4, 1.0]])
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        m = (
            2 ** (1 / beta)
            * gamma_fn((2 + 2) / (2 * beta))
            / (2 * gamma_fn(2 / (2 * beta)))
        )
        g = GgdParams([0.0, 0.0], sigma, beta)
        x = g.sample(100_000, 31)
        emp = np.cov(x, rowvar=False)
        target = m * sigma
        worst = max(worst, np.linalg.norm(emp - target) / np.linalg.norm(target))
    elapsed = time.perf_counter() - start
    ok = worst <= 0.05 and elapsed < 10.0
    assert record_criterion(
        "3 sampler moments (p=2, 1e5 draws, 5% Frobenius)",
        ok,
        f"worst relative deviation {worst:.3f}, {elapsed:.1f}s",
    )


def test_criterion_4_score_correctness():
    rng = np.random.default_rng(40)
    h = 1e-5

    def objective(beta, deltas, alphas, p):
        log_c = (
            gammaln(p / 2)
            + np.log(beta)
            - (p / 2) * np.log(np.pi)
            - gammaln(p / (2 * beta))
            - (p / (2 * beta)) * np.log(2.0)
        )
        return alphas.sum() * log_c - 0.5 * (alphas @ deltas**beta)

    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 11))
        n = int(rng.integers(5, 60))
        deltas = rng.uniform(0.05, 10.0, size=n)
        alphas = rng.uniform(0.0, 1.0, size=n)
        beta = rng.uniform(0.2, 4.0)
        g, g_prime = beta_score(beta, deltas, alphas, p)
        fd_g = (objective(beta + h, deltas, alphas, p) - objective(beta - h, deltas, alphas, p)) / (2 * h)
        fd_gp = (
            beta_score(beta + h, deltas, alphas, p)[0]
            - beta_score(beta - h, deltas, alphas, p)[0]
        ) / (2 * h)
        worst = max(
            worst,
            abs(g - fd_g) / max(1.0, abs(fd_g)),
            abs(g_prime - fd_gp) / max(1.0, abs(fd_gp)),
        )
    ok = worst <= 1e-5
    assert record_criterion(
        "4 shape-score matches finite differences (1e-5 relative)",
        ok,
        f"worst relative error {worst:.1e}",
    )


def test_criterion_5_shape_recovery():
    start = time.perf_counter()
    cfg = EmConfig(K=1, newton_iters=25)
    results = {}
    for true_beta, tol in ((0.5, 0.1), (1.0, 0.1), (2.0, 0.2)):
        g = GgdParams([0.0], [[1.0]], true_beta)
        x = g.sample(10_000, 50 + int(10 * true_beta))
        deltas = np.maximum(g.mahalanobis_sq(x), cfg.delta_floor)
        est = newton_update_beta(deltas, np.ones(len(x)), 1, 1.0, cfg)
        results[true_beta] = (est, abs(est - true_beta) <= tol)
    elapsed = time.perf_counter() - start
    ok = all(hit for _, hit in results.values()) and elapsed < 10.0
    detail = ", ".join(f"{t} -> {e:.3f}" for t, (e, _) in results.items())
    assert record_criterion(
        "5 shape recovery from 1e4 samples (+-0.1; +-0.2 at beta=2)",
        ok,
        f"{detail}, {elapsed:.1f}s",
    )


def test_criterion_6_em_monotonicity_and_recovery():
    start = time.perf_counter()
    c1 = GgdParams([-5.0, 0.0], np.eye(2), 0.7)
    c2 = GgdParams([5.0, 0.0], np.eye(2), 1.5)
    x = np.vstack([c1.sample(2000, 61), c2.sample(2000, 62)])
    model, report = fit(x, EmConfig(K=2, seed=6))
    elapsed = time.perf_counter() - start

    max_increase = max(np.diff(report.nll_trace))
    order = np.argsort([c.mu[0] for c in model.components])
    lo, hi = (model.components[k] for k in order)
    mean_err = max(
        np.abs(lo.mu - [-5.0, 0.0]).max(), np.abs(hi.mu - [5.0, 0.0]).max()
    )
    weight_err = np.abs(model.weights - 0.5).max()
    ok = (
        max_increase <= 1e-6
        and mean_err <= 0.1
        and weight_err <= 0.05
        and elapsed < 60.0
    )
    assert record_criterion(
        "6 EM monotonicity + 2-component recovery",
        ok,
        f"max NLL increase {max_increase:.1e}, mean err {mean_err:.3f}, "
        f"weight err {weight_err:.3f}, {elapsed:.1f}s",
    )


def test_criterion_7_gmm_equivalence():
    rng = np.random.default_rng(70)
    n, p = 180, 3
    x = rng.normal(size=(n, p))
    start_model = Ggmm(
        [0.45, 0.55],
        [GgdParams(rng.normal(size=p), random_spd(rng, p), 1.0) for _ in range(2)],
    )
    cov_reg = 1e-5
    cfg = EmConfig(
        K=2, fix_beta=1.0, fp_inner_iters=1, max_outer_iters=1,
        cov_reg=cov_reg, rel_tol=1e-30,
    )
    model, _ = fit(x, cfg, init=start_model)

    def gauss_logpdf(mu, sigma):
        sign, logdet = np.linalg.slogdet(sigma)
        diff = x - mu
        sol = np.linalg.solve(sigma, diff.T).T
        return -0.5 * (p * np.log(2 * np.pi) + logdet + np.einsum("ij,ij->i", diff, sol))

    lw = np.stack(
        [
            np.log(w) + gauss_logpdf(c.mu, c.sigma)
            for w, c in zip(start_model.weights, start_model.components)
        ],
        axis=1,
    )
    resp = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    worst = np.abs(model.weights - resp.mean(axis=0)).max()
    for k in range(2):
        a = resp[:, k]
        mu = a @ x / a.sum()
        diff = x - mu
        sigma = (diff * a[:, None]).T @ diff / a.sum() + cov_reg * np.eye(p)
        worst = max(
            worst,
            np.abs(model.components[k].mu - mu).max(),
            np.abs(model.components[k].sigma - sigma).max(),
        )
    ok = worst <= 1e-10
    assert record_criterion(
        "7 one EM pass equals textbook Gaussian-mixture update (1e-10)",
        ok,
        f"worst elementwise deviation {worst:.1e}",
    )


def test_criterion_8_stationarity_at_convergence():
    true = GgdParams(
        [0.5, -0.3, 0.2],
        np.array([[2.0, 0.4, 0.1], [0.4, 1.0, 0.2], [0.1, 0.2, 0.8]]),
        0.8,
    )
    x = true.sample(2000, 80)
    alphas = np.ones(len(x))
    cfg = EmConfig(K=1, newton_iters=30, cov_reg=0.0)
    start = GgdParams(x.mean(axis=0), np.cov(x, rowvar=False), 1.0)
    comp = fit_component(x, alphas, start, cfg, 0.0, n_rounds=2000)

    deltas = np.maximum(comp.mahalanobis_sq(x), cfg.delta_floor)
    w = alphas * deltas ** (comp.beta - 1.0)
    diff = x - comp.mu
    fp = comp.beta * (diff * w[:, None]).T @ diff / alphas.sum()
    residual = np.linalg.norm(comp.sigma - fp) / np.linalg.norm(comp.sigma)

    def loglik(mu, beta):
        return GgdParams(mu, comp.sigma, beta).log_pdf(x).sum()

    h = 1e-6
    grad = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        grad.append((loglik(comp.mu + e, comp.beta) - loglik(comp.mu - e, comp.beta)) / (2 * h))
    grad.append((loglik(comp.mu, comp.beta + h) - loglik(comp.mu, comp.beta - h)) / (2 * h))
    grad_norm = np.abs(grad).max()

    form = "without shape factor" if cfg.omit_cov_shape_factor else "with shape factor"
    ok = grad_norm < 1e-3 and residual < 1e-6
    assert record_criterion(
        "8 stationarity at FP convergence (grad 1e-3, residual 1e-6)",
        ok,
        f"fd gradient {grad_norm:.1e}, sigma residual {residual:.1e}, "
        f"covariance update form: {form}",
    )


def test_criterion_9_mmse_optimality_proxy():
    rng = np.random.default_rng(90)
    p, dh = 5, 3
    joint = GgdParams(rng.normal(size=p), random_spd(rng, p), 1.0)
    part = BlockPartition(dh, p - dh)
    x = joint.sample(10_000, 91)
    xh, xl = x[:, :dh], x[:, dh:]
    cond = MmseConditioner(Ggmm([1.0], [joint]), part)
    mse_mmse = float(np.mean(np.sum((xh - cond.estimate(xl)) ** 2, axis=1)))
    z = np.hstack([xl, np.ones((len(xl), 1))])
    w, *_ = np.linalg.lstsq(z, xh, rcond=None)
    mse_ols = float(np.mean(np.sum((xh - z @ w) ** 2, axis=1)))
    ok = mse_mmse <= 1.02 * mse_ols
    assert record_criterion(
        "9 MMSE estimator within 1.02x of sample-OLS MSE",
        ok,
        f"ratio {mse_mmse / mse_ols:.4f}",
    )


def test_criterion_10_desk_benchmark(camera_hr_path, tmp_path, capsys):
    start = time.perf_counter()
    code = main(
        [
            "eval", str(camera_hr_path),
            "--out-dir", str(tmp_path / "bench"),
            "--k", "10", "--tau", "4", "--stride-train", "1", "--seed", "7",
        ]
    )
    elapsed = time.perf_counter() - start
    report = json.loads(capsys.readouterr().out)
    p = report["psnr_db"]
    ok = (
        code == 0
        and p["mmse-ggmm"] >= p["nearest"] + 1.0
        and p["mmse-ggmm"] >= p["mmse-gmm"] - 0.2
        and elapsed < 300.0
    )
    assert record_criterion(
        "10 desk benchmark (128x128, K=10, tau=4, q=2)",
        ok,
        f"ggmm {p['mmse-ggmm']:.2f} dB, gmm {p['mmse-gmm']:.2f} dB, "
        f"nearest {p['nearest']:.2f} dB, {elapsed:.0f}s",
    )


def test_criterion_11_cli_determinism(camera_hr_path, tmp_path, capsys):
    hr = load_pgm(camera_hr_path)
    crop_path = tmp_path / "crop.pgm"
    save_pgm(hr[:32, :32], crop_path)
    lr_path = tmp_path / "lr.pgm"
    assert main(["degrade", str(crop_path), "--out", str(lr_path)]) == 0

    train_args = [
        "train", "--hr", str(crop_path), "--lr", str(lr_path),
        "--tau", "2", "--stride-train", "1", "--k", "2",
        "--max-outer-iters", "6", "--seed", "13",
    ]
    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    assert main(train_args + ["--model-out", str(m1)]) == 0
    assert main(train_args + ["--model-out", str(m2)]) == 0
    models_equal = m1.read_bytes() == m2.read_bytes()

    o1, o2 = tmp_path / "o1.pgm", tmp_path / "o2.pgm"
    assert main(["sr", "--lr", str(lr_path), "--model", str(m1), "--out", str(o1)]) == 0
    assert main(["sr", "--lr", str(lr_path), "--model", str(m1), "--out", str(o2)]) == 0
    outputs_equal = o1.read_bytes() == o2.read_bytes()
    capsys.readouterr()

    ok = models_equal and outputs_equal
    assert record_criterion(
        "11 train/sr byte-identical across runs (seed fixed, workers=1)",
        ok,
        f"model files equal: {models_equal}, images equal: {outputs_equal}",
    )


def test_criterion_12_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(120)
    shapes = [(1, 1), (1, 7), (5, 3), (16, 16), (9, 13), (31, 2)]
    all_ok = True
    for i, shape in enumerate(shapes):
        img = rng.integers(0, 256, size=shape).astype(float) / 255.0
        first = tmp_path / f"r{i}a.pgm"
        second = tmp_path / f"r{i}b.pgm"
        save_pgm(img, first)
        loaded = load_pgm(first)
        save_pgm(loaded, second)
        all_ok &= first.read_bytes() == second.read_bytes()
        all_ok &= np.array_equal(loaded, img)
    assert record_criterion(
        "12 PGM save/load identity (byte-exact, 8-bit corpus)",
        all_ok,
        f"{len(shapes)} images",
    )
