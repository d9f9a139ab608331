import math

import numpy as np
import pytest
from scipy import stats

import barn.sampler as sampler_mod
from barn.datasets import Dataset, split
from barn.network import SingleLayerNet, forward
from barn.sampler import (
    Ensemble,
    SamplerConfig,
    accept,
    batch_means_check,
    calibrate_sigma_prior,
    gibbs_sweep,
    log_evidence,
    log_prior_ratio,
    propose,
    run_barn,
    sample_sigma,
)


def size_chain_transition_matrix(p, lam, n_states=30):
    """Brute-force one-step matrix of the size chain on states 1..n_states."""
    P = np.zeros((n_states, n_states))
    for i, m in enumerate(range(1, n_states + 1)):
        if m < n_states:
            a = min(1.0, math.exp(math.log((1 - p) / p) + math.log(lam) - math.log(m + 1)))
            P[i, i + 1] += p * a
            P[i, i] += p * (1 - a)
        else:
            P[i, i] += p  # out-of-range grow counted as a rejection
        if m == 1:
            P[i, i] += 1 - p  # floor shrink is an always-accepted self-move
        else:
            a = min(1.0, math.exp(math.log(p / (1 - p)) + math.log(m) - math.log(lam)))
            P[i, i - 1] += (1 - p) * a
            P[i, i] += (1 - p) * (1 - a)
    return P


def stationary_distribution(P, iters=20_000):
    v = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(iters):
        nxt = v @ P
        if np.max(np.abs(nxt - v)) < 1e-15:
            v = nxt
            break
        v = nxt
    return v / v.sum()


def merged_chi_square(observed_counts, expected_probs, n, min_expected=5.0):
    """Chi-square with tail states merged until every expected count >= 5."""
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, pr in zip(observed_counts, expected_probs):
        acc_o += o
        acc_e += pr * n
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    obs[-1] += acc_o
    exp[-1] += acc_e
    exp = np.array(exp) * (sum(obs) / sum(exp))
    return stats.chisquare(obs, exp)


class TestPropose:
    def test_grow_ratio(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            m2, log_t = propose(3, 0.4, rng)
            if m2 == 4:
                assert log_t == pytest.approx(math.log(0.6 / 0.4))
                assert log_t == pytest.approx(0.405, abs=5e-4)
            else:
                assert m2 == 2
                assert log_t == pytest.approx(math.log(0.4 / 0.6))

    def test_floor_self_move_is_symmetric(self):
        rng = np.random.default_rng(1)
        seen_floor = False
        for _ in range(50):
            m2, log_t = propose(1, 0.4, rng)
            if m2 == 1:
                seen_floor = True
                assert log_t == 0.0
        assert seen_floor

    def test_empirical_grow_frequency(self):
        rng = np.random.default_rng(2)
        grows = sum(propose(5, 0.4, rng)[0] == 6 for _ in range(100_000))
        assert grows / 100_000 == pytest.approx(0.4, abs=0.01)

    def test_rejects_invalid_m(self):
        with pytest.raises(ValueError):
            propose(0, 0.4, np.random.default_rng(3))


class TestPriorRatio:
    def test_unit_mean_one_to_two(self):
        assert log_prior_ratio(2, 1, 1.0) == pytest.approx(math.log(0.5))
        assert log_prior_ratio(2, 1, 1.0) == pytest.approx(-0.6931, abs=5e-5)

    def test_identity(self):
        assert log_prior_ratio(4, 4, 2.3) == 0.0

    def test_mean_two_two_to_three(self):
        # Poisson(2): P(3)/P(2) = 2/3
        assert log_prior_ratio(3, 2, 2.0) == pytest.approx(math.log(2.0 / 3.0))

    def test_large_counts_stable(self):
        val = log_prior_ratio(300, 299, 1.0)
        assert math.isfinite(val)
        assert val == pytest.approx(math.log(1.0 / 300.0))


class TestEvidence:
    def _net(self, d=2):
        return SingleLayerNet(np.zeros((d, 1)), np.zeros(1), np.zeros(1), 0.0, "sigmoid")

    def test_perfect_fit_unit_sigma(self):
        net = self._net()
        X = np.random.default_rng(4).normal(size=(8, 2))
        r = np.zeros(8)
        assert log_evidence(net, X, r, 1.0) == pytest.approx(-4 * math.log(2 * math.pi))

    def test_error_scaling_at_fixed_sigma(self):
        net = self._net()
        rng = np.random.default_rng(5)
        X = rng.normal(size=(10, 2))
        r = rng.normal(size=10)
        sigma = 0.7
        base = log_evidence(net, X, r, sigma)
        doubled = log_evidence(net, X, r * math.sqrt(2), sigma)
        assert doubled - base == pytest.approx(-np.sum(r**2) / (2 * sigma**2))

    def test_matches_per_point_density_oracle(self):
        rng = np.random.default_rng(6)
        net = SingleLayerNet(rng.normal(size=(3, 2)), rng.normal(size=2),
                             rng.normal(size=2), 0.4, "relu")
        X = rng.normal(size=(12, 3))
        r = rng.normal(size=12)
        sigma = 1.3
        pred = forward(net, X)
        expected = sum(stats.norm.logpdf(r[i], loc=pred[i], scale=sigma) for i in range(12))
        assert log_evidence(net, X, r, sigma) == pytest.approx(expected, rel=1e-12)

    def test_monotone_in_squared_error(self):
        net = self._net()
        X = np.random.default_rng(7).normal(size=(6, 2))
        small = log_evidence(net, X, np.full(6, 0.1), 1.0)
        large = log_evidence(net, X, np.full(6, 0.5), 1.0)
        assert large < small

    def test_empty_validation_rejected(self):
        with pytest.raises(ValueError):
            log_evidence(self._net(), np.zeros((0, 2)), np.zeros(0), 1.0)


class TestAccept:
    def test_all_ratios_zero_always_accepts(self):
        rng = np.random.default_rng(8)
        assert all(accept(0.0, 0.0, 0.0, 0.0, rng) for _ in range(100))

    def test_degenerate_new_model_always_rejected(self):
        rng = np.random.default_rng(9)
        assert not any(accept(0.0, -math.inf, -1.0, 0.0, rng) for _ in range(100))

    def test_invariant_to_common_evidence_shift(self):
        # the evidence scale cancels: shifting both log evidences by any
        # constant must leave every accept/reject decision unchanged
        for c in [-1e6, -3.2, 4.7, 1e8]:
            r1 = np.random.default_rng(10)
            r2 = np.random.default_rng(10)
            for _ in range(200):
                base = accept(0.3, -5.0, -4.5, -0.1, r1)
                shifted = accept(0.3, -5.0 + c, -4.5 + c, -0.1, r2)
                assert base == shifted

    def test_acceptance_rate_matches_probability(self):
        rng = np.random.default_rng(11)
        log_a = math.log(0.3)
        hits = sum(accept(log_a, 0.0, 0.0, 0.0, rng) for _ in range(100_000))
        assert hits / 100_000 == pytest.approx(0.3, abs=0.01)

    def test_nan_rejected(self):
        rng = np.random.default_rng(12)
        assert not accept(0.0, -math.inf, -math.inf, 0.0, rng)


class TestSigma:
    def test_moments_match_inverse_gamma(self):
        rng = np.random.default_rng(13)
        nu, lam, n = 10.0, 2.0, 14
        resid = np.random.default_rng(14).normal(size=n)
        shape = 0.5 * (nu + n)
        scale = 0.5 * (nu * lam + float(resid @ resid))
        draws = np.array([sample_sigma(resid, nu, lam, rng) ** 2 for _ in range(100_000)])
        assert draws.mean() == pytest.approx(scale / (shape - 1), rel=0.01)

    def test_larger_residuals_push_sigma_up(self):
        rng1 = np.random.default_rng(15)
        rng2 = np.random.default_rng(15)
        small = np.median([sample_sigma(np.full(20, 0.1), 3, 0.5, rng1) for _ in range(10_000)])
        large = np.median([sample_sigma(np.full(20, 2.0), 3, 0.5, rng2) for _ in range(10_000)])
        assert large > small

    def test_empty_residuals_rejected(self):
        with pytest.raises(ValueError):
            sample_sigma(np.zeros(0), 3.0, 1.0, np.random.default_rng(16))

    def test_positive(self):
        rng = np.random.default_rng(17)
        assert sample_sigma(np.zeros(5) + 0.3, 3.0, 1.0, rng) > 0


class TestCalibrate:
    def test_quantile_condition_via_cdf_oracle(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(100, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=100)
        for nu, q in [(3.0, 0.90), (3.0, 0.5), (10.0, 0.75)]:
            lam = calibrate_sigma_prior(y, X, nu, q)
            resid_std = sampler_mod._ols_residual_std(y, X)
            # oracle: scipy's inverse-gamma CDF at the OLS residual variance
            cdf = stats.invgamma.cdf(resid_std**2, a=nu / 2, scale=nu * lam / 2)
            assert cdf == pytest.approx(q, rel=1e-9)

    def test_median_at_half(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(60, 2))
        y = rng.normal(size=60)
        lam = calibrate_sigma_prior(y, X, 3.0, 0.5)
        sig_hat = sampler_mod._ols_residual_std(y, X)
        draws = stats.invgamma.rvs(a=1.5, scale=3 * lam / 2, size=50_000,
                                   random_state=np.random.default_rng(20))
        frac_below = np.mean(draws < sig_hat**2)
        assert frac_below == pytest.approx(0.5, abs=0.01)

    def test_larger_q_smaller_scale(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(50, 2))
        y = rng.normal(size=50)
        lams = [calibrate_sigma_prior(y, X, 3.0, q) for q in (0.5, 0.75, 0.9, 0.99)]
        assert all(a > b for a, b in zip(lams, lams[1:]))

    def test_pure_noise_uses_target_spread(self):
        rng = np.random.default_rng(22)
        y = rng.normal(size=400) * 2.0
        X = rng.normal(size=(400, 3))  # unrelated to y
        assert sampler_mod._ols_residual_std(y, X) == pytest.approx(np.std(y), rel=0.05)

    def test_singular_fallback(self):
        y = np.array([1.0, 2.0, 3.0])
        X = np.zeros((3, 5))  # n <= d+1 forces the fallback
        assert sampler_mod._ols_residual_std(y, X) == pytest.approx(np.std(y))


def tiny_dataset(n=24, d=2, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + noise * rng.normal(size=n)
    return split(Dataset(X, y), rng=rng)


class TestGibbsSweep:
    def test_single_network_plain_mh(self):
        ds = tiny_dataset(seed=23)
        cfg = SamplerConfig(n_networks=1, seed=3)
        ens, trace = run_barn(ds, cfg)
        assert len(ens.nets) == 1
        assert len(trace) >= cfg.min_iter

    def test_rejection_keeps_identical_network_object(self):
        ds = tiny_dataset(seed=24)
        cfg = SamplerConfig(n_networks=4, seed=4)
        rng = np.random.default_rng(cfg.seed)
        nets = tuple(
            SingleLayerNet(rng.normal(size=(2, 1)), np.zeros(1), rng.normal(size=1), 0.0)
            for _ in range(4)
        )
        ens = Ensemble(nets, 0.5)
        out, flags = gibbs_sweep(ens, ds.train_X, ds.train_y, ds.val_X, ds.val_y, cfg, rng)
        for k, accepted in enumerate(flags):
            if not accepted:
                assert out.nets[k] is nets[k]
            else:
                assert out.nets[k] is not nets[k]

    def test_moves_bounded_by_one_neuron(self):
        ds = tiny_dataset(seed=25)
        _, trace = run_barn(ds, SamplerConfig(n_networks=3, max_iter=30, min_iter=30, seed=5))
        counts = np.array(trace.neuron_counts)
        assert np.all(np.abs(np.diff(counts, axis=0)) <= 1)

    def test_stubbed_evidence_matches_size_chain_oracle(self, monkeypatch):
        # constant likelihood: the sweep reduces to independent size chains
        monkeypatch.setattr(sampler_mod, "log_evidence", lambda *a, **k: 0.0)
        monkeypatch.setattr(sampler_mod, "train", lambda net, *a, **k: net)
        p, lam = 0.4, 1.0
        cfg = SamplerConfig(n_networks=5, grow_prob=p, prior_mean=lam, seed=0)
        rng = np.random.default_rng(26)
        X = np.zeros((2, 1))
        y = np.zeros(2)
        nets = tuple(
            SingleLayerNet(np.zeros((1, 1)), np.zeros(1), np.zeros(1), 0.0) for _ in range(5)
        )
        ens = Ensemble(nets, 1.0)
        counts = np.zeros(31, dtype=int)
        burn, keep = 300, 4000
        for t in range(burn + keep):
            ens, _ = gibbs_sweep(ens, X, y, X, y, cfg, rng)
            if t >= burn:
                for m in ens.neuron_counts:
                    counts[min(m, 30)] += 1
        pi = stationary_distribution(size_chain_transition_matrix(p, lam))
        empirical = counts[1:] / counts.sum()
        assert np.abs(empirical - pi).sum() < 0.05  # total variation, coarse check
        # the same stationary law is the size prior restricted to m >= 1
        poisson = np.array([math.exp(m * math.log(lam) - math.lgamma(m + 1)) for m in range(1, 31)])
        poisson /= poisson.sum()
        assert np.abs(pi - poisson).max() < 1e-9


class TestRunBarn:
    def test_zero_targets_converge_at_min_iter(self):
        rng = np.random.default_rng(27)
        ds = split(Dataset(rng.normal(size=(40, 2)), np.zeros(40)), rng=rng)
        ens, trace = run_barn(ds, SamplerConfig(n_networks=3, seed=6))
        assert len(trace) == 20  # plateau detected at the first allowed check
        rmse = np.sqrt(np.mean((ds.test_y - ens.predict(ds.test_X)) ** 2))
        assert rmse < 1e-6

    def test_seeded_runs_identical(self):
        ds = tiny_dataset(seed=28)
        cfg = SamplerConfig(n_networks=3, max_iter=25, seed=7)
        ens1, tr1 = run_barn(ds, cfg)
        ens2, tr2 = run_barn(ds, cfg)
        assert tr1.phi == tr2.phi
        assert tr1.neuron_counts == tr2.neuron_counts
        assert tr1.sigma_path == tr2.sigma_path
        for a, b in zip(ens1.nets, ens2.nets):
            np.testing.assert_array_equal(a.w_in, b.w_in)
            np.testing.assert_array_equal(a.w_out, b.w_out)

    def test_early_stop_fires_only_after_min_iter(self):
        ds = tiny_dataset(seed=29, noise=1.0)
        for seed in range(5):
            _, trace = run_barn(ds, SamplerConfig(n_networks=2, seed=seed))
            assert len(trace) >= 20

    def test_trace_series_aligned(self):
        ds = tiny_dataset(seed=30)
        _, trace = run_barn(ds, SamplerConfig(n_networks=3, seed=8, max_iter=30))
        assert len(trace.phi) == len(trace.accept_flags) == len(trace.neuron_counts) == len(trace.sigma_path)
        assert all(np.isfinite(trace.phi))

    def test_keep_last_retains_ensembles(self):
        ds = tiny_dataset(seed=31)
        _, trace = run_barn(ds, SamplerConfig(n_networks=2, seed=9, keep_last=3, max_iter=25))
        assert len(trace.kept_ensembles) == 3
        assert all(isinstance(e, Ensemble) for e in trace.kept_ensembles)

    def test_missing_split_rejected(self):
        ds = Dataset(np.zeros((10, 2)), np.zeros(10))
        with pytest.raises(ValueError):
            run_barn(ds, SamplerConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(n_networks=0)
        with pytest.raises(ValueError):
            SamplerConfig(grow_prob=1.0)
        with pytest.raises(ValueError):
            SamplerConfig(prior_mean=0.0)
        with pytest.raises(ValueError):
            SamplerConfig(min_iter=30, max_iter=20)
        with pytest.raises(ValueError):
            SamplerConfig(sigma_prior=(3.0, 1.5))


class TestBatchMeans:
    def test_constant_series(self):
        var, ok = batch_means_check([1.0] * 40, 4, rmse_variance_ref=0.5)
        assert var == 0.0 and ok

    def test_alternating_series_large_variance(self):
        # odd batch size keeps the batch means alternating around 0.5
        phi = ([0.0, 1.0] * 20)[:35]
        var_alt, ok = batch_means_check(phi, 7, rmse_variance_ref=1e-6)
        assert var_alt > 0.005
        assert ok is False
        var_const, _ = batch_means_check([0.5] * 35, 7)
        assert var_alt > var_const == 0.0

    def test_white_noise_scaling(self):
        # batch means of iid noise with variance v have variance ~ v/s
        rng = np.random.default_rng(32)
        v, s, b = 4.0, 50, 8
        ratios = []
        for _ in range(200):
            phi = rng.normal(0, math.sqrt(v), size=s * b)
            ratios.append(batch_means_check(phi, b)[0] / (v / s))
        assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)

    def test_short_trace_rejected(self):
        with pytest.raises(ValueError):
            batch_means_check([1.0, 2.0, 3.0], 2)

    def test_none_reference_returns_no_verdict(self):
        var, ok = batch_means_check(list(range(20)), 2)
        assert ok is None and var > 0


class TestTraceCsv:
    def test_export_columns(self, tmp_path):
        ds = tiny_dataset(seed=33)
        _, trace = run_barn(ds, SamplerConfig(n_networks=3, seed=10, max_iter=22))
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["iteration", "phi", "sigma"]
        assert header[3:6] == ["m_1", "m_2", "m_3"]
        assert header[6:9] == ["accept_1", "accept_2", "accept_3"]
        assert len(lines) - 1 == len(trace)
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[1]) == pytest.approx(trace.phi[0], rel=1e-9)
