"""Monte Carlo estimator against lattice oracles and exact free-case values."""

import numpy as np
import pytest
from scipy import integrate

from relkac.estimator import (
    MCParams,
    charfn_suite,
    compare_with_oracle,
    estimate,
    make_probe,
    oracle_estimate,
    periodization_tolerance,
)
from relkac.fields import gauge_shift, make_field, make_field_spec, make_gauge
from relkac.lattice import Lattice
from relkac.specfun import MassDim, free_kernel

MD1 = MassDim(1.0, 1)
LAT = Lattice(1, 128, 20.0)


def free_value_quad(g, x, t, md):
    re, _ = integrate.quad(lambda y: float((free_kernel(x - y, t, md) * g(np.array([[y]]))[0]).real),
                           -np.inf, np.inf, limit=400)
    im, _ = integrate.quad(lambda y: float((free_kernel(x - y, t, md) * g(np.array([[y]]))[0]).imag),
                           -np.inf, np.inf, limit=400)
    return re + 1j * im


class TestFreeCase:
    @pytest.mark.parametrize("variant", [1, 2, 3])
    def test_matches_convolution(self, variant):
        fs = make_field("zero", 1)
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=40000, n_slices=16, fine_per_slice=4)
        rep = estimate(variant, fs, g, 0.0, 0.5, MD1, mc, seed=100 + variant)
        exact = free_value_quad(g, 0.0, 0.5, MD1)
        assert abs(rep.mean - exact) <= 3 * rep.stderr + 1e-4

    def test_variant3_windowed_plane_wave(self):
        # free case with an oscillatory probe: the estimator reproduces the
        # convolution against the windowed plane wave (and hence, for a wide
        # window, the characteristic-function value up to window corrections)
        fs = make_field("zero", 1)
        g = make_probe("plane_wave", 1, xi=1.0, width=3.0)
        mc = MCParams(n_paths=40000, n_slices=16, fine_per_slice=4)
        rep = estimate(3, fs, g, 0.0, 1.0, MD1, mc, seed=404)
        exact = free_value_quad(g, 0.0, 1.0, MD1)
        assert abs(rep.mean - exact) <= 3 * rep.stderr + 1e-4

    def test_free_with_potential(self):
        fs = make_field_spec("zero", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=40000, n_slices=32)
        rep = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=7)
        oracle = oracle_estimate(1, fs, g, 0.0, 0.5, MD1, LAT)
        tol = periodization_tolerance(LAT, MD1, g, 0.0, 0.5)
        verdict = compare_with_oracle(rep, oracle, tol + 1e-3)  # small slicing allowance
        assert verdict.passed, verdict.to_dict()


class TestDeterminism:
    def test_bit_identical_reports(self):
        fs = make_field("tanh", 1)
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=5000, n_slices=8, chunk=1024)
        a = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=42)
        b = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=42)
        assert a.mean == b.mean
        assert a.stderr_re == b.stderr_re

    def test_threading_does_not_change_result(self, monkeypatch):
        fs = make_field("tanh", 1)
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=5000, n_slices=8, chunk=512)
        a = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=9)
        monkeypatch.setenv("RELKAC_THREADS", "4")
        b = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=9)
        assert a.mean == b.mean

    def test_seed_changes_result(self):
        fs = make_field("tanh", 1)
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=2000, n_slices=8)
        assert (
            estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=1).mean
            != estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=2).mean
        )


class TestVariantIdentities:
    def test_linear_field_variant_coincidence(self):
        # shared seed => shared paths; linear A => pathwise equal actions
        fs = make_field("linear", 1, matrix=[[0.4]])
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=4000, n_slices=16)
        r1 = estimate(1, fs, g, 0.2, 0.5, MD1, mc, seed=77)
        r2 = estimate(2, fs, g, 0.2, 0.5, MD1, mc, seed=77)
        assert r1.mean == r2.mean

    def test_contraction(self):
        fs = make_field_spec("tanh", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=20000, n_slices=16)
        rep = estimate(2, fs, g, 0.0, 1.0, MD1, mc, seed=3)
        assert abs(rep.mean) <= g.sup_norm + 3 * rep.stderr

    def test_gauge_covariance_of_averaged_variant(self):
        # estimate with (A + grad phi) and probe e^{i phi} g equals
        # e^{i phi(x)} estimate with (A, g), pathwise on shared seeds
        base = make_field("tanh", 1)
        phi = make_gauge("windowed_cubic", 1, width=2.0)
        shifted = gauge_shift(base, phi)
        g = make_probe("gaussian", 1)

        def probe_with_phase(sign):
            def fn(p):
                return np.exp(sign * 1j * phi.phi(p)) * g(p)

            from relkac.estimator import ProbeFunction

            return ProbeFunction("gauged", fn, 1.0)

        mc = MCParams(n_paths=4000, n_slices=16)
        x = 0.3
        lhs = estimate(2, shifted, probe_with_phase(+1), x, 0.5, MD1, mc, seed=55)
        rhs = estimate(2, base, g, x, 0.5, MD1, mc, seed=55)
        phase = np.exp(1j * phi.phi(np.array([[x]])).item())
        assert lhs.mean == pytest.approx(phase * rhs.mean, rel=1e-12)

    def test_gauge_covariance_of_sqrt_variant(self):
        # same identity for the Brownian-subordinator variant; the chain rule
        # holds only in the fine-grid limit, so allow stochastic tolerance
        base = make_field("tanh", 1)
        phi = make_gauge("windowed_cubic", 1, width=2.0)
        shifted = gauge_shift(base, phi)
        g = make_probe("gaussian", 1)
        from relkac.estimator import ProbeFunction

        gauged = ProbeFunction("gauged", lambda p: np.exp(1j * phi.phi(p)) * g(p), 1.0)
        mc = MCParams(n_paths=20000, n_slices=16, fine_per_slice=16)
        x = 0.3
        lhs = estimate(3, shifted, gauged, x, 0.5, MD1, mc, seed=56)
        rhs = estimate(3, base, g, x, 0.5, MD1, mc, seed=56)
        phase = np.exp(1j * phi.phi(np.array([[x]])).item())
        assert abs(lhs.mean - phase * rhs.mean) <= 3 * (lhs.stderr + rhs.stderr) + 2e-3


class TestEndToEnd:
    def test_variant1_tanh_capped_potential(self):
        fs = make_field_spec("tanh", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=60000, n_slices=64)
        rep = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=2024)
        oracle = oracle_estimate(1, fs, g, 0.0, 0.5, MD1, LAT)
        tol = periodization_tolerance(LAT, MD1, g, 0.0, 0.5)
        verdict = compare_with_oracle(rep, oracle, tol + 5e-4)
        assert verdict.passed, verdict.to_dict()
        assert rep.slicing_bias is not None and rep.slicing_bias < 3 * rep.stderr + 1e-3

    def test_jump_sampler_route(self):
        fs = make_field_spec("tanh", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        g = make_probe("gaussian", 1)
        mc = MCParams(n_paths=30000, n_slices=32, sampler="jumps", eps_cut=0.05, chunk=2048)
        rep = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=11)
        oracle = oracle_estimate(1, fs, g, 0.0, 0.5, MD1, LAT)
        assert abs(rep.mean - oracle) <= 3 * rep.stderr + 5e-3

    def test_jump_action_route(self):
        fs = make_field_spec("tanh", "gaussian_well", d=1,
                             potential_params={"depth": 1.0, "width": 1.0})
        g = make_probe("gaussian", 1)
        mc = MCParams(
            n_paths=20000, n_slices=32, sampler="jumps", action="jump",
            eps_cut=0.05, chunk=1024,
        )
        rep = estimate(1, fs, g, 0.0, 0.5, MD1, mc, seed=12)
        oracle = oracle_estimate(1, fs, g, 0.0, 0.5, MD1, LAT)
        assert abs(rep.mean - oracle) <= 3 * rep.stderr + 1e-2  # cutoff-limited route
        assert "compensator_abs" in rep.diagnostics


class TestCharfnSuite:
    @pytest.mark.parametrize("sampler", ["subordinated", "jumps"])
    def test_rows(self, sampler):
        rows = charfn_suite(sampler, MD1, 1.0, [0.0, 0.5, 1.0], 30000, seed=5)
        assert rows[0].exact == 1.0
        assert rows[0].empirical == pytest.approx(1.0)
        for row in rows[1:]:
            allowance = 5e-3 if sampler == "jumps" else 0.0
            assert abs(row.empirical.real - row.exact) <= 3 * row.stderr_re + allowance

    def test_exact_values(self):
        rows = charfn_suite("subordinated", MD1, 1.0, [np.sqrt(3.0)], 100, seed=1)
        assert rows[0].exact == pytest.approx(np.exp(-1.0), rel=1e-12)


class TestValidation:
    def test_mc_params(self):
        with pytest.raises(ValueError):
            MCParams(n_paths=0).validate()
        with pytest.raises(ValueError):
            MCParams(sampler="nope").validate()
        with pytest.raises(ValueError):
            MCParams(action="jump", sampler="subordinated").validate()

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            estimate(5, make_field("zero", 1), make_probe("gaussian", 1),
                     0.0, 1.0, MD1, MCParams(n_paths=10), seed=1)

    def test_probe_registry(self):
        with pytest.raises(KeyError):
            make_probe("nope", 1)
        b = make_probe("bump", 1, width=2.0)
        pts = np.array([[0.0], [1.9], [2.1]])
        vals = b(pts)
        assert vals[0] == pytest.approx(1.0)
        assert vals[2] == 0.0

    def test_report_dict_roundtrip(self):
        fs = make_field("zero", 1)
        g = make_probe("gaussian", 1)
        rep = estimate(1, fs, g, 0.0, 0.5, MD1, MCParams(n_paths=500, n_slices=4), seed=1)
        d = rep.to_dict()
        assert d["n_paths"] == 500
        assert "mc" in d and d["mc"]["sampler"] == "subordinated"
