"""Path samplers against their exact laws (characteristic/Laplace transforms)."""

import numpy as np
import pytest

from relkac.specfun import MassDim, subordinator_laplace
from relkac.paths import (
    RngStream,
    batch_brownian_subordinated,
    batch_subordinated_skeletons,
    counting_measure,
    jump_law,
    sample_brownian,
    sample_jump_batch,
    sample_levy_jumps,
    sample_subordinated,
    sample_subordinator,
    subordinator_increments,
)

N_MC = 50_000


def zscore(values, exact):
    se = values.std(ddof=1) / np.sqrt(len(values))
    return (values.mean() - exact) / se


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(123, 5).generator().normal(size=10)
        b = RngStream(123, 5).generator().normal(size=10)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(123, 0).generator().normal(size=10)
        b = RngStream(123, 1).generator().normal(size=10)
        assert not np.allclose(a, b)


class TestBrownian:
    def test_characteristic_function(self):
        rng = RngStream(7).generator()
        ends = np.array(
            [sample_brownian(0.0, 0.25, 4, 1, rng).values[-1, 0] for _ in range(2000)]
        )
        # E e^{i xi B(1)} = e^{-1/2} at xi = 1
        emp = np.cos(ends)  # symmetric law: imaginary part is noise
        assert abs(zscore(emp, np.exp(-0.5))) < 3

    def test_variance_per_component(self):
        rng = RngStream(8).generator()
        p = sample_brownian(np.zeros(2), 0.5, 2, 2, rng)
        assert p.values.shape == (3, 2)
        inc = np.diff(p.values, axis=0)
        assert inc.shape == (2, 2)

    def test_moments_batch(self):
        rng = RngStream(9).generator()
        ends = sample_brownian(0.0, 1.0 / 16, 16, 1, rng)
        # statistical check on many paths instead
        draws = np.array(
            [sample_brownian(0.0, 1.0 / 4, 4, 1, RngStream(9, i).generator()).values[-1, 0]
             for i in range(3000)]
        )
        assert abs(zscore(draws**2, 1.0)) < 3
        assert abs(zscore(draws, 0.0)) < 3


class TestSubordinator:
    @pytest.mark.parametrize("m", [0.0, 1.0])
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_laplace_transform(self, m, sigma):
        rng = RngStream(11, int(10 * m)).generator()
        t1 = subordinator_increments(rng, 1.0, m, N_MC)
        emp = np.exp(-sigma * t1)
        assert abs(zscore(emp, subordinator_laplace(sigma, 1.0, m))) < 3

    def test_mean_massive(self):
        # -d/dsigma of the transform at 0: E T(1) = 1/m
        rng = RngStream(12).generator()
        t1 = subordinator_increments(rng, 1.0, 1.0, N_MC)
        assert abs(zscore(t1, 1.0)) < 3

    def test_path_nondecreasing(self):
        for m in (0.0, 1.0):
            sp = sample_subordinator(np.linspace(0, 1, 17), m, RngStream(13).generator())
            assert sp.values[0] == 0.0
            assert np.all(np.diff(sp.values) >= 0)

    @pytest.mark.parametrize("m", [0.0, 1.0])
    def test_char_exponent_against_samples(self, m):
        # the two-term characteristic exponent is trusted only because the
        # sampled subordinator reproduces it: E e^{i rho T(1)} = e^{-V(rho)}
        from relkac.specfun import char_exponent

        rng = RngStream(14, int(m)).generator()
        t1 = subordinator_increments(rng, 1.0, m, N_MC)
        for rho in (0.5, 1.0, 2.0):
            emp = np.exp(1j * rho * t1)
            exact = np.exp(-char_exponent(rho, m))
            z_re = abs(emp.real.mean() - exact.real) / (emp.real.std(ddof=1) / np.sqrt(N_MC))
            z_im = abs(emp.imag.mean() - exact.imag) / (emp.imag.std(ddof=1) / np.sqrt(N_MC))
            assert max(z_re, z_im) < 3

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            sample_subordinator([0.5, 1.0], 1.0, RngStream(1).generator())


class TestSubordinated:
    @pytest.mark.parametrize("m,xi,seed", [(1.0, 1.0, 21), (0.0, 1.0, 22), (1.0, 0.5, 23)])
    def test_characteristic_function(self, m, xi, seed):
        md = MassDim(m, 1)
        x, _ = batch_subordinated_skeletons(RngStream(seed).generator(), 1.0, 8, md, N_MC)
        ends = x[:, -1, 0]
        exact = np.exp(-(np.sqrt(xi * xi + m * m) - m))
        assert abs(zscore(np.cos(xi * ends), exact)) < 3
        assert abs(zscore(np.sin(xi * ends), 0.0)) < 3

    def test_trivial_xi(self):
        md = MassDim(1.0, 1)
        x, _ = batch_subordinated_skeletons(RngStream(3).generator(), 1.0, 4, md, 100)
        np.testing.assert_allclose(np.cos(0.0 * x[:, -1, 0]), 1.0)

    def test_fine_brownian_consistency(self):
        # skeleton values coincide with the fine Brownian path at T(t_k)
        s = sample_subordinated(
            np.zeros(2), np.linspace(0, 1, 9), 1.0, 2, RngStream(31).generator(), fine_steps=16
        )
        assert s.brownian is not None
        np.testing.assert_allclose(
            s.path.values, s.brownian.values[s.outer_index], rtol=0, atol=0
        )
        # fine grid times track the subordinator
        np.testing.assert_allclose(s.brownian.times[s.outer_index], s.subordinator.values)

    def test_batch_brownian_shapes(self):
        md = MassDim(1.0, 1)
        b, db, sub_dt, oi = batch_brownian_subordinated(
            RngStream(32).generator(), 0.5, 8, 4, md, 10
        )
        assert b.shape == (10, 33, 1)
        assert oi[-1] == 32
        np.testing.assert_allclose(b[:, 1:] - b[:, :-1], db)


class TestJumpSampler:
    def test_law_massless_closed_forms(self):
        law = jump_law(MassDim(0.0, 1), 0.1)
        # Lambda = 2/(pi eps); per-axis small variance = 2 eps / pi... checked by quadrature
        assert law.lam == pytest.approx(2 / (np.pi * 0.1), rel=1e-10)
        assert law.sigma2_axis == pytest.approx(2 * 0.1 / np.pi, rel=1e-8)

    def test_expected_jump_count(self):
        md = MassDim(1.0, 1)
        batch = sample_jump_batch(RngStream(41).generator(), 1.0, 8, md, 0.1, N_MC // 5)
        law = batch["law"]
        counts = np.bincount(batch["jump_path"], minlength=N_MC // 5).astype(float)
        assert abs(zscore(counts, law.lam * 1.0)) < 3

    def test_jump_symmetry(self):
        md = MassDim(1.0, 1)
        batch = sample_jump_batch(RngStream(42).generator(), 1.0, 8, md, 0.1, 5000)
        y = batch["jump_y"][:, 0]
        assert abs(zscore(y, 0.0)) < 3

    @pytest.mark.parametrize("m", [0.0, 1.0])
    def test_characteristic_function(self, m):
        md = MassDim(m, 1)
        batch = sample_jump_batch(RngStream(43 + int(m)).generator(), 1.0, 4, md, 0.1, N_MC)
        ends = batch["skeleton"][:, -1, 0]
        for xi in (0.5, 1.0, 2.0):
            exact = np.exp(-(np.sqrt(xi * xi + m * m) - m))
            emp = np.cos(xi * ends)
            se = emp.std(ddof=1) / np.sqrt(len(emp))
            assert abs(emp.mean() - exact) <= 3 * se + 5e-3

    def test_cutoff_refinement(self):
        # the charfn error allowance halves when the cutoff halves; both pass
        md = MassDim(0.0, 1)
        for eps, allow in ((0.1, 5e-3), (0.05, 2.5e-3)):
            batch = sample_jump_batch(RngStream(44).generator(), 1.0, 4, md, eps, N_MC)
            ends = batch["skeleton"][:, -1, 0]
            emp = np.cos(ends)
            se = emp.std(ddof=1) / np.sqrt(len(emp))
            assert abs(emp.mean() - np.exp(-1.0)) <= 3 * se + allow

    def test_skeleton_consistent_with_jump_records(self):
        # skeleton endpoint minus the recorded jumps is the Gaussian proxy
        # part: across paths it must be centered with variance sigma2 * t
        md = MassDim(1.0, 1)
        n = 20000
        batch = sample_jump_batch(RngStream(45).generator(), 1.0, 8, md, 0.1, n)
        law = batch["law"]
        jump_total = np.zeros(n)
        np.add.at(jump_total, batch["jump_path"], batch["jump_y"][:, 0])
        w = batch["skeleton"][:, -1, 0] - jump_total
        assert abs(zscore(w, 0.0)) < 3
        assert abs(zscore(w * w, law.sigma2_axis * 1.0)) < 3
        if len(batch["jump_y"]):
            assert np.min(np.abs(batch["jump_y"])) > law.eps_cut

    def test_pre_positions_are_left_limits(self):
        # pre-jump position of the FIRST jump of each path = Gaussian part at
        # s-: normalized by sqrt(sigma2 s) it must be standard normal
        md = MassDim(1.0, 1)
        n = 20000
        batch = sample_jump_batch(RngStream(46).generator(), 1.0, 8, md, 0.1, n)
        law = batch["law"]
        pid = batch["jump_path"]
        first = np.flatnonzero(np.diff(pid, prepend=-1))  # first jump per path
        s = batch["jump_time"][first]
        pre = batch["jump_pre"][first, 0]
        z = pre / np.sqrt(law.sigma2_axis * s)
        assert abs(zscore(z, 0.0)) < 3
        assert abs(zscore(z * z, 1.0)) < 3


class TestCountingMeasure:
    def test_empty_annulus(self):
        p = sample_levy_jumps(0.0, 1.0, 0.0, 1, 0.1, 1 / 16, RngStream(51))
        assert counting_measure(p, 0.0, 1.0, 5.0, 5.0001) in (0, 1)
        assert counting_measure(p, 0.0, 1.0, 100.0, 200.0) == 0

    def test_mean_matches_levy_measure(self):
        # E N((0,1] x {1<|y|<2}) = int_1^2 n dy * 1 = (2/pi) * (1 - 1/2) = 1/pi for m=0, d=1
        md = MassDim(0.0, 1)
        batch = sample_jump_batch(RngStream(52).generator(), 1.0, 4, md, 0.1, N_MC)
        r = np.abs(batch["jump_y"][:, 0])
        sel = (r > 1.0) & (r <= 2.0)
        counts = np.bincount(batch["jump_path"][sel], minlength=N_MC).astype(float)
        assert abs(zscore(counts, 1 / np.pi)) < 3

    def test_interval_additivity(self):
        p = sample_levy_jumps(0.0, 1.0, 0.0, 1, 0.05, 1 / 16, RngStream(53))
        a = counting_measure(p, 0.0, 0.4, 0.0, np.inf)
        b = counting_measure(p, 0.4, 1.0, 0.0, np.inf)
        c = counting_measure(p, 0.0, 1.0, 0.0, np.inf)
        assert a + b == c == len(p.jump_times)

    def test_annulus_intensity_quadrature(self):
        law = jump_law(MassDim(0.0, 1), 0.1)
        # closed form for m=0, d=1: 2/pi int_1^2 r^-2 dr = 1/pi
        assert law.radial_intensity(1.0, 2.0) == pytest.approx(1 / np.pi, rel=1e-9)


class TestFiniteDimensionalLaw:
    def test_two_time_characteristic_function(self):
        # joint law at (t/2, t): E e^{i(xi1 X(t1) + xi2 X(t2))}
        # = e^{-t1 psi(xi1+xi2)} e^{-(t2-t1) psi(xi2)} by independent increments
        md = MassDim(1.0, 1)
        n = 100_000
        x, _ = batch_subordinated_skeletons(RngStream(71).generator(), 1.0, 8, md, n)
        x1, x2 = x[:, 4, 0], x[:, -1, 0]
        psi = lambda xi: np.sqrt(xi * xi + md.m**2) - md.m
        for xi1, xi2 in ((0.5, 1.0), (1.0, -0.5)):
            emp = np.exp(1j * (xi1 * x1 + xi2 * x2))
            exact = np.exp(-0.5 * psi(xi1 + xi2) - 0.5 * psi(xi2))
            assert abs(zscore(emp.real, exact)) < 3
            assert abs(zscore(emp.imag, 0.0)) < 3

    def test_jump_sampler_two_time(self):
        md = MassDim(0.0, 1)
        n = 100_000
        batch = sample_jump_batch(RngStream(72).generator(), 1.0, 8, md, 0.05, n)
        x1, x2 = batch["skeleton"][:, 4, 0], batch["skeleton"][:, -1, 0]
        emp = np.exp(1j * (0.5 * x1 + 1.0 * x2))
        exact = np.exp(-0.5 * 1.5 - 0.5 * 1.0)  # psi(xi) = |xi| at m=0
        se = emp.real.std(ddof=1) / np.sqrt(n)
        assert abs(emp.real.mean() - exact) <= 3 * se + 5e-3


class TestCompensatedMeasureIdentity:
    def test_sum_over_jumps_matches_intensity_integral(self):
        # E sum_jumps f(s, y) = int_0^t ds int f(s,y) n(dy) for f supported above the cutoff
        md = MassDim(1.0, 1)
        eps = 0.1
        batch = sample_jump_batch(RngStream(61).generator(), 1.0, 4, md, eps, N_MC)
        law = batch["law"]

        # f(s, y) = s * 1{0.5<|y|<=1.5}
        r = np.abs(batch["jump_y"][:, 0])
        sel = (r > 0.5) & (r <= 1.5)
        vals = np.zeros(N_MC)
        np.add.at(vals, batch["jump_path"][sel], batch["jump_time"][sel])
        exact = 0.5 * law.radial_intensity(0.5, 1.5)  # int_0^1 s ds = 1/2
        assert abs(zscore(vals, exact)) < 3
