import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from sheardisp.ou_process import OUParams, sample_ou, time_grid, integral_variance
from sheardisp.spectral_core import GridFunction
from sheardisp.eff_diffusivity import (
    FlowSpec, lambda_multiplicative, lambda_white, linear_profile, taylor_steady,
)
from sheardisp.monte_carlo import (
    InitialData,
    SimConfig,
    ensemble_pdf,
    evaluate_point_backward,
    simulate_forward,
    simulate_random_wave,
    wind_model_solution,
    _fold,
)
from sheardisp.invariant_measure import cdf_random_wave


class TestConfigAndInitialData:
    def test_sim_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.0)
        with pytest.raises(ValueError):
            SimConfig(n_particles=0)
        with pytest.raises(ValueError):
            SimConfig(pe=-1.0)
        with pytest.raises(ValueError):
            SimConfig(bc="slippery")

    def test_initial_data(self):
        with pytest.raises(ValueError):
            InitialData.gaussian(-1.0)
        g = InitialData.gaussian(0.5)
        assert g.mass == 1.0
        assert g.value(0.0) == pytest.approx(1 / math.sqrt(np.pi), rel=1e-12)
        d = InitialData.delta_line()
        with pytest.raises(ValueError):
            d.value(0.0)
        rw = InitialData.random_wave(2.0, 0.3 + 0.4j)
        assert rw.value(0.0) == pytest.approx(0.6, rel=1e-12)
        with pytest.raises(ValueError):
            rw.sample_particles(10, np.random.default_rng(0))

    @given(st.floats(min_value=-25, max_value=25, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_fold_stays_inside(self, y):
        folded = float(_fold(np.array([y]))[0])
        assert 0.0 <= folded <= 1.0

    def test_fold_is_reflection(self):
        assert _fold(np.array([-0.25]))[0] == pytest.approx(0.25)
        assert _fold(np.array([1.3]))[0] == pytest.approx(0.7)
        assert _fold(np.array([2.4]))[0] == pytest.approx(0.4)


class TestForwardSimulation:
    def test_pure_diffusion_calibration(self):
        # Pe = 0: Var(x) = 2t within 3 SE, y-marginal uniform (chi^2, 20 bins)
        cfg = SimConfig(dt=0.01, n_particles=40_000, seed=11, pe=0.0)
        zero = GridFunction.from_callable(lambda y: 0.0 * y, 64)
        res = simulate_forward(FlowSpec.steady(zero), 1.0, InitialData.delta_line(),
                               10.0, cfg, keep_positions=True)
        var = res.var_x[-1]
        se = 2 * 10.0 * math.sqrt(2 / cfg.n_particles)
        assert abs(var - 20.0) < 3 * se
        assert abs(res.t1bar[-1]) < 4 * math.sqrt(20.0 / cfg.n_particles)
        counts, _ = np.histogram(res.final_y, bins=20, range=(0, 1))
        expected = cfg.n_particles / 20
        stat = float(np.sum((counts - expected) ** 2 / expected))
        assert stat < chi2.ppf(0.99, df=19)

    def test_steady_taylor_dispersion(self):
        v = GridFunction.from_callable(lambda y: y - 0.5, 512)
        cfg = SimConfig(dt=0.01, n_particles=20_000, seed=9, pe=2.0)
        res = simulate_forward(FlowSpec.steady(v), 1.0, InitialData.delta_line(), 20.0, cfg)
        assert abs(res.kappa_estimate[-1] / taylor_steady(v, 2.0) - 1.0) < 0.05

    def test_multiplicative_matches_closed_form(self):
        u = linear_profile()
        path = sample_ou(OUParams(1.0), time_grid(30.0, 0.01), seed=31)
        cfg = SimConfig(dt=0.01, n_particles=30_000, seed=10, pe=1.0)
        res = simulate_forward(FlowSpec.multiplicative(u), 1.0, InitialData.delta_line(),
                               30.0, cfg, path)
        closed = lambda_multiplicative(u, 1.0, 1.0).kappa_eff
        assert abs(res.kappa_estimate[-1] / closed - 1.0) < 0.05

    def test_matches_wind_model_moments_on_same_path(self):
        # first two x-moments of the simulation track the analytic wind
        # model driven by the same xi realization
        u = GridFunction.from_callable(lambda y: y + 0.5, 512)
        gamma, pe, t_end = 1.0, 1.0, 20.0
        path = sample_ou(OUParams(gamma), time_grid(t_end, 0.01), seed=77)
        cfg = SimConfig(dt=0.01, n_particles=40_000, seed=3, pe=pe)
        res = simulate_forward(FlowSpec.multiplicative(u), gamma,
                               InitialData.delta_line(), t_end, cfg, path)
        eig = lambda_multiplicative(u, gamma, pe)
        drift = pe * u.mean() * path.integral[-1]
        var_wind = 2 * eig.kappa_eff * t_end
        se_mean = math.sqrt(var_wind / cfg.n_particles)
        assert abs(res.t1bar[-1] - drift) < 4 * se_mean + 0.05 * abs(drift)
        se_var = var_wind * math.sqrt(2 / cfg.n_particles)
        assert abs(res.var_x[-1] - var_wind) < 4 * se_var + 0.05 * var_wind

    def test_time_step_refinement(self):
        # halving dt moves the kappa estimate by less than the MC error bar
        v = GridFunction.from_callable(lambda y: y - 0.5, 256)
        ks = []
        for dt in (0.02, 0.01):
            cfg = SimConfig(dt=dt, n_particles=20_000, seed=14, pe=2.0)
            res = simulate_forward(FlowSpec.steady(v), 1.0, InitialData.delta_line(),
                                   10.0, cfg)
            ks.append((res.kappa_estimate[-1], res.kappa_standard_error()))
        assert abs(ks[0][0] - ks[1][0]) < 2.5 * math.hypot(ks[0][1], ks[1][1])

    def test_periodic_bc_runs(self):
        u = GridFunction.from_callable(lambda y: np.sin(2 * np.pi * y), 256)
        path = sample_ou(OUParams(1.0), time_grid(2.0, 0.01), seed=5)
        cfg = SimConfig(dt=0.01, n_particles=2_000, seed=6, pe=1.0, bc="periodic")
        res = simulate_forward(FlowSpec.multiplicative(u, bc="periodic"), 1.0,
                               InitialData.delta_line(), 2.0, cfg, path,
                               keep_positions=True)
        assert np.all((res.final_y >= 0) & (res.final_y <= 1))

    def test_y_binned_moments_shape(self):
        zero = GridFunction.from_callable(lambda y: 0.0 * y, 64)
        cfg = SimConfig(dt=0.01, n_particles=5_000, seed=2, pe=0.0)
        res = simulate_forward(FlowSpec.steady(zero), 1.0, InitialData.delta_line(),
                               1.0, cfg, n_y_bins=8)
        assert res.x_mean_by_bin.shape == (8,)
        assert np.all(np.isfinite(res.x_var_by_bin))

    def test_path_grid_mismatch(self):
        u = linear_profile()
        path = sample_ou(OUParams(1.0), time_grid(5.0, 0.02), seed=0)
        cfg = SimConfig(dt=0.01, n_particles=100, seed=0, pe=1.0)
        with pytest.raises(ValueError):
            simulate_forward(FlowSpec.multiplicative(u), 1.0,
                             InitialData.delta_line(), 5.0, cfg, path)
        with pytest.raises(ValueError):
            simulate_forward(FlowSpec.multiplicative(u), 1.0,
                             InitialData.delta_line(), 5.0, cfg, None)

    def test_coarse_dt_warns(self):
        zero = GridFunction.from_callable(lambda y: 0.0 * y, 64)
        cfg = SimConfig(dt=0.1, n_particles=100, seed=0, pe=0.0)
        with pytest.warns(RuntimeWarning):
            simulate_forward(FlowSpec.steady(zero), 1.0, InitialData.delta_line(),
                             1.0, cfg)


class TestBackwardEvaluation:
    def test_time_zero_is_exact(self):
        u = linear_profile()
        path = sample_ou(OUParams(1.0), time_grid(1.0, 0.01), seed=3)
        cfg = SimConfig(dt=0.01, n_particles=100, seed=4, pe=1.0)
        init = InitialData.gaussian(0.5)
        val, se = evaluate_point_backward(FlowSpec.multiplicative(u), 1.0, path,
                                          0.2, 0.5, 0.0, init, cfg)
        assert val == pytest.approx(float(init.value(0.2)), rel=1e-14)
        assert se == 0.0

    def test_heat_kernel_oracle(self):
        # Pe = 0, gaussian(s): T(0, t) = 1/sqrt(2 pi (s + 2t))
        u = linear_profile()
        path = sample_ou(OUParams(1.0), time_grid(0.5, 0.002), seed=3)
        cfg = SimConfig(dt=0.002, n_particles=60_000, seed=4, pe=0.0)
        init = InitialData.gaussian(0.5)
        val, se = evaluate_point_backward(FlowSpec.multiplicative(u), 1.0, path,
                                          0.0, 0.3, 0.5, init, cfg)
        oracle = 1 / math.sqrt(2 * math.pi * (0.5 + 2 * 0.5))
        assert abs(val - oracle) < max(4 * se, 0.01 * oracle)

    def test_matches_wind_model(self):
        u = GridFunction.from_callable(lambda y: y + 0.5, 512)
        gamma, pe = 1.0, 1.0
        path = sample_ou(OUParams(gamma), time_grid(1.0, 0.002), seed=2027)
        eig = lambda_multiplicative(u, gamma, pe)
        init = InitialData.gaussian(0.5)
        cfg = SimConfig(dt=0.002, n_particles=60_000, seed=5, pe=pe)
        x = pe * u.mean() * path.integral[-1]
        wind = float(wind_model_solution(x, 1.0, path, eig, u.mean(), init=init))
        backward, _ = evaluate_point_backward(FlowSpec.multiplicative(u), gamma,
                                              path, x, 0.5, 1.0, init, cfg)
        assert abs(backward / wind - 1.0) < 0.03


class TestWindModel:
    def test_centered_peak(self):
        grid = time_grid(4.0, 0.5)
        from sheardisp.ou_process import OUPath, integrate_path
        path = integrate_path(OUPath(times=grid, values=np.zeros_like(grid)))
        eig = lambda_white(linear_profile(), 1.0)
        val = wind_model_solution(0.0, 4.0, path, eig, ubar=0.5)
        assert float(val) == pytest.approx(
            1 / math.sqrt(4 * math.pi * eig.kappa_eff * 4.0), rel=1e-12)

    def test_zero_mean_flow_is_deterministic(self):
        # ubar = 0 removes the random drift entirely
        p1 = sample_ou(OUParams(1.0), time_grid(2.0, 0.01), seed=1)
        p2 = sample_ou(OUParams(1.0), time_grid(2.0, 0.01), seed=2)
        eig = lambda_white(linear_profile(), 1.0)
        xs = np.linspace(-2, 2, 7)
        v1 = wind_model_solution(xs, 2.0, p1, eig, ubar=0.0)
        v2 = wind_model_solution(xs, 2.0, p2, eig, ubar=0.0)
        assert np.array_equal(v1, v2)

    def test_gaussian_variance_is_exact(self):
        s = 0.5
        grid = time_grid(1.0, 0.01)
        from sheardisp.ou_process import OUPath, integrate_path
        path = integrate_path(OUPath(times=grid, values=np.zeros_like(grid)))
        eig = lambda_multiplicative(linear_profile(), 1.0, 1.0)
        var = s + 2 * eig.kappa_eff * 1.0
        val = wind_model_solution(0.0, 1.0, path, eig, 0.5, init=InitialData.gaussian(s))
        assert float(val) == pytest.approx(1 / math.sqrt(2 * math.pi * var), rel=1e-12)


class TestRandomWave:
    def test_second_moment_prediction_at_fixed_time(self):
        # <T^2(0, t)> from wind-model fields on white-noise paths matches the
        # closed N = 2 moment prediction
        from sheardisp.ou_process import sample_brownian_scaled, time_grid
        from sheardisp.aris_solver import CorrelatorSpec, nth_moment_prediction
        u = GridFunction.from_callable(lambda y: y + 0.5, 512)
        eig = lambda_white(u, 1.0)
        grid = time_grid(1.0, 0.01)
        vals = np.array([
            float(wind_model_solution(0.0, 1.0,
                                      sample_brownian_scaled(grid, 1.0, seed=23, realization=i),
                                      eig, u.mean()))
            for i in range(30_000)])
        predicted = nth_moment_prediction(CorrelatorSpec(2, [0.0, 0.0], 1.0, eig, 1.0))
        assert abs(np.mean(vals**2) / predicted - 1.0) < 0.03

    def test_zero_mean_flow_gaussian_marginal(self):
        # ubar = 0 freezes the phase at a*x, so the marginal at fixed x is a
        # centered Gaussian with variance cos^2(a x)
        grid = time_grid(0.5, 0.01)
        paths = [sample_ou(OUParams(1.0), grid, seed=12, realization=i)
                 for i in range(20_000)]
        a, x = 0.4, 0.8
        samples = simulate_random_wave(a, 1.0, 0.0, 1.0, paths=paths, x=x)
        sigma = abs(math.cos(a * x))
        from scipy.stats import norm
        est = ensemble_pdf(samples)
        assert est.ks_distance(lambda z: norm.cdf(z, scale=sigma)) < 0.012

    def test_uniform_phase_law(self):
        samples = simulate_random_wave(0.5, 1.0, 1.0, 1.0, n=200_000, seed=1)
        est = ensemble_pdf(samples)
        assert abs(est.variance() - 0.5) < 0.01
        assert est.ks_distance(cdf_random_wave) < 0.01

    def test_path_phase_approaches_uniform_law(self):
        # late-time OU phases wrap to near-uniform; both routes must agree
        grid = time_grid(0.05, 0.001)
        paths = [sample_ou(OUParams(1.0), grid, seed=4, realization=i)
                 for i in range(30_000)]
        # a Pe ubar sigma_I >> 2 pi needs a large wavenumber at short times,
        # which deliberately trips the rescaling-regime flag
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            samples = simulate_random_wave(400.0, 1.0, 1.0, 1.0, paths=paths)
        est = ensemble_pdf(samples)
        assert est.ks_distance(cdf_random_wave) < 0.02

    def test_regime_warning(self):
        grid = time_grid(1.0, 0.01)
        paths = [sample_ou(OUParams(1.0), grid, seed=4, realization=i) for i in range(4)]
        with pytest.warns(RuntimeWarning):
            simulate_random_wave(1.0, 1.0, 1.0, 1.0, paths=paths)

    def test_needs_paths_or_count(self):
        with pytest.raises(ValueError):
            simulate_random_wave(0.5, 1.0, 1.0, 1.0)


class TestEnsemblePdf:
    def test_uniform_calibration(self):
        rng = np.random.default_rng(0)
        ks = []
        for n in (2_000, 32_000):
            est = ensemble_pdf(rng.uniform(size=n))
            ks.append(est.ks_distance(lambda x: np.clip(x, 0, 1)))
        # KS shrinks roughly like n^{-1/2}
        assert ks[1] < ks[0]
        assert ks[1] < 1.63 / math.sqrt(32_000)   # 99% band

    def test_normal_against_critical_value(self):
        from scipy.stats import norm
        rng = np.random.default_rng(123)
        est = ensemble_pdf(rng.standard_normal(10_000))
        assert est.ks_distance(norm.cdf) < 1.36 / math.sqrt(10_000)

    def test_histogram_normalized(self):
        rng = np.random.default_rng(5)
        est = ensemble_pdf(rng.standard_normal(5_000), bins=40)
        widths = np.diff(est.bin_edges)
        assert np.sum(est.density * widths) == pytest.approx(1.0, abs=1e-12)

    def test_minimum_sample_guard(self):
        with pytest.raises(ValueError):
            ensemble_pdf(np.zeros(10))
