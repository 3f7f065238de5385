import math

import numpy as np
import pytest

from plumeid.diagnostics import (
    ChainSummary,
    density_grid,
    geweke,
    iact,
    kernel_density,
    masses_per_sample,
    silverman_bandwidth,
    summarize,
)
from plumeid.domain import GridSpec
from plumeid.inference import Chain

from helpers import ar1_series, geweke_pvalues, ks_statistic_uniform

TRUTH_VECTOR = np.array([325.0, 325.0, 562.5, 625.0, 30.0, 15.0, 50.0, 17.0])


def make_chain(samples):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    return Chain(
        samples=samples,
        log_posteriors=np.zeros(n),
        stages=np.ones(n, dtype=int),
        burn_in=0,
        n_samples=n,
        accept_counts={"stage1": max(n - 1, 0), "stage2": 0, "rejected": 0},
    )


# --- iact -----------------------------------------------------------------------


def test_iact_iid_is_one():
    x = np.random.default_rng(0).standard_normal(100_000)
    assert iact(x) == pytest.approx(1.0, abs=0.1)


def test_iact_ar1_matches_analytic():
    # AR(1) with coefficient 0.9 has tau = (1 + 0.9) / (1 - 0.9) = 19.
    x = ar1_series(0.9, 1_000_000, seed=1)
    assert iact(x) == pytest.approx(19.0, rel=0.2)


def test_iact_doubling_robustness():
    x = ar1_series(0.9, 100_000, seed=2)
    single = iact(x)
    doubled = iact(np.concatenate([x, x]))
    assert doubled == pytest.approx(single, rel=0.05)


def test_iact_rejects_constant_and_short_series():
    with pytest.raises(ValueError):
        iact(np.full(1000, 3.3))
    with pytest.raises(ValueError):
        iact(np.arange(5.0))


def test_iact_affine_invariance():
    x = ar1_series(0.8, 50_000, seed=3)
    assert iact(3.0 * x + 7.0) == pytest.approx(iact(x), rel=1e-10)


# --- geweke ---------------------------------------------------------------------


def test_geweke_identical_segments_give_p_one():
    block = np.sin(np.arange(100.0)) + np.linspace(0, 1, 100)
    series = np.tile(block, 10)  # first 10% and last 50% are exact copies
    assert geweke(series) == pytest.approx(1.0, abs=1e-12)


def test_geweke_detects_shifted_head():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(100_000)
    x[:10_000] += 10.0
    assert geweke(x) < 1e-6


def test_geweke_calibration_on_white_noise():
    # Fixed-seed batch. Pooling 1000 replicates across five seed batches gives
    # KS = 0.019 (95% critical value 0.043), i.e. the p-values are uniform;
    # a 200-replicate batch KS fluctuates by roughly 1.36/sqrt(200) = 0.096.
    ps = geweke_pvalues(n_replicates=200, length=100_000, seed0=1100)
    frac = np.mean(ps < 0.05)
    assert frac == pytest.approx(0.05, abs=0.03)
    assert ks_statistic_uniform(ps) < 0.1


def test_geweke_affine_invariance():
    x = ar1_series(0.5, 50_000, seed=5)
    assert geweke(3.0 * x + 7.0) == pytest.approx(geweke(x), rel=1e-10)


def test_geweke_rejects_short_or_degenerate():
    with pytest.raises(ValueError):
        geweke(np.arange(50.0))
    flat = np.zeros(1000)
    with pytest.raises(ValueError):
        geweke(flat)


# --- kernel density ----------------------------------------------------------------


def test_kernel_density_standard_normal_at_zero():
    x = np.random.default_rng(6).standard_normal(1_000_000)
    dens = kernel_density(x, np.array([0.0]))
    assert dens[0] == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=0.01)


def test_kernel_density_two_point_symmetry():
    x = np.array([-1.0, 1.0])
    dens = kernel_density(x, np.array([-1.0, 0.0, 1.0]))
    assert dens[0] == pytest.approx(dens[2], rel=1e-12)
    assert np.all(dens >= 0.0)


@pytest.mark.parametrize("seed,n", [(7, 500), (8, 5000), (9, 50_000)])
def test_kernel_density_normalization(seed, n):
    x = np.random.default_rng(seed).standard_normal(n) * 2.5 + 1.0
    grid = density_grid(x, num=2001)
    dens = kernel_density(x, grid)
    integral = np.trapezoid(dens, grid)
    assert integral == pytest.approx(1.0, abs=1e-3)


def test_kernel_density_rejects_degenerate():
    with pytest.raises(ValueError):
        kernel_density(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        kernel_density(np.full(10, 2.0), np.array([0.0]))
    with pytest.raises(ValueError):
        silverman_bandwidth(np.full(10, 2.0))


# --- summarize -----------------------------------------------------------------------


def test_summarize_degenerate_truth_chain():
    chain = make_chain(np.tile(TRUTH_VECTOR, (500, 1)))
    summary = summarize(chain, porosity=0.3, grid=GridSpec(), truth=TRUTH_VECTOR)
    np.testing.assert_allclose(summary.means, TRUTH_VECTOR)
    np.testing.assert_allclose(summary.stds, 0.0)
    assert np.all(np.isnan(summary.taus))
    assert np.all(np.isnan(summary.geweke_ps))
    assert summary.masses[0] == pytest.approx(20.4244, rel=0.01)
    assert summary.masses[1] == pytest.approx(43.5802, rel=0.01)
    text = summary.to_text()
    assert "x1_1" in text and "M_2" in text
    assert summary.to_json()["masses"][0] == pytest.approx(20.4244, rel=0.01)


def test_summarize_matches_two_pass_oracle():
    rng = np.random.default_rng(10)
    samples = TRUTH_VECTOR + rng.standard_normal((20_000, 8)) * 2.0
    summary = summarize(make_chain(samples), porosity=0.3, grid=GridSpec())
    for k in range(8):
        col = samples[:, k]
        mean = math.fsum(col) / col.size
        var = math.fsum((v - mean) ** 2 for v in col) / (col.size - 1)
        assert summary.means[k] == pytest.approx(mean, rel=1e-12)
        assert summary.stds[k] == pytest.approx(math.sqrt(var), rel=1e-12)
    assert np.all(np.isfinite(summary.taus))
    assert np.all((summary.geweke_ps >= 0) & (summary.geweke_ps <= 1))


def test_summarize_empty_chain():
    chain = make_chain(np.empty((0, 8)))
    summary = summarize(chain, porosity=0.3, grid=GridSpec())
    assert summary.empty
    assert "no retained samples" in summary.to_text()
    assert summary.to_json()["n_retained"] == 0


def test_masses_per_sample_shape():
    samples = np.tile(TRUTH_VECTOR, (5, 1))
    masses = masses_per_sample(samples, 0.3, GridSpec())
    assert masses.shape == (5, 2)
    np.testing.assert_allclose(masses[:, 0], masses[0, 0])
