"""Action functionals: pathwise identities, jump-form structure, stochastic integrals."""

import numpy as np
import pytest

from relkac.actions import (
    action_s1_jump,
    action_s1_sliced,
    action_s2_jump,
    action_s2_sliced,
    action_s3,
    jump_action_terms,
    s3_terms,
    sliced_terms,
)
from relkac.fields import (
    FieldSpec,
    QuadratureError,
    gauge_shift,
    make_field,
    make_field_spec,
    make_gauge,
)
from relkac.paths import (
    CadlagPath,
    MassDim,
    RngStream,
    batch_subordinated_skeletons,
    sample_jump_batch,
    sample_levy_jumps,
    sample_subordinated,
)


def make_path(values, t=1.0):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    k = len(values) - 1
    return CadlagPath(
        x0=values[0].copy(),
        times=np.linspace(0, t, k + 1),
        values=values,
        jump_times=np.empty(0),
        jump_vectors=np.empty((0, values.shape[1])),
        jump_pre_positions=np.empty((0, values.shape[1])),
    )


class TestSlicedActions:
    def test_zero_field_gives_v_riemann(self):
        fs = make_field_spec("zero", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        path = make_path([0.0, 1.0, 2.0], t=1.0)
        av = action_s1_sliced(path, fs)
        mids = np.array([0.5, 1.5])
        assert av.imag_part == 0.0
        assert av.real_part == pytest.approx(np.sum(np.minimum(mids**2, 10)) * 0.5)

    def test_constant_field_telescopes(self):
        # S = i a . (X(t) - x0): the phase sum telescopes exactly
        a = 0.8
        fs = make_field("constant", 1, a_vec=[a])
        vals = np.array([0.0, 0.3, -0.4, 1.7])
        path = make_path(vals)
        av = action_s1_sliced(path, fs)
        assert av.real_part == 0.0
        assert av.imag_part == pytest.approx(a * (vals[-1] - vals[0]), abs=1e-15)
        # e^{-S} is then the conjugated free weight e^{-i a dX}
        assert av.weight == pytest.approx(np.exp(-1j * a * (vals[-1] - vals[0])))

    def test_trivial_when_everything_off(self):
        fs = make_field("zero", 1)
        path = make_path([0.0, 1.0])
        av = action_s1_sliced(path, fs)
        assert av.value == 0
        assert av.weight == 1.0

    def test_linear_pathwise_coincidence(self):
        # S1 == S2 bitwise for linear A on any shared path
        fs = make_field("linear", 2, matrix=[[0.0, -0.3], [0.3, 0.0]])
        rng = RngStream(5).generator()
        x = rng.normal(size=(4, 9, 2))
        v1, p1 = sliced_terms(x, 0.1, fs, rule="midpoint")
        v2, p2 = sliced_terms(x, 0.1, fs, rule="chord")
        np.testing.assert_array_equal(p1, p2)
        np.testing.assert_array_equal(v1, v2)

    def test_square_field_chord_gap(self):
        # d=1, A(z) = z^2, one slice from 0 to 1: midpoint phase 1/4, chord 1/3
        fs = make_field("square", 1, axis=0)
        path = make_path([0.0, 1.0])
        s1 = action_s1_sliced(path, fs)
        s2 = action_s2_sliced(path, fs)
        assert s1.imag_part == pytest.approx(0.25)
        assert s2.imag_part == pytest.approx(1 / 3, rel=1e-12)
        assert s2.imag_part - s1.imag_part == pytest.approx(1 / 12, rel=1e-10)

    def test_gauge_shift_of_chord_action(self):
        # replacing A by A + grad(phi) shifts the chord action by
        # i [phi(end) - phi(start)] exactly (the mean-value identity)
        base = make_field("tanh", 1)
        phi = make_gauge("windowed_cubic", 1, width=2.0)
        shifted = gauge_shift(base, phi)
        vals = np.array([0.0, 0.7, -0.2, 1.1])
        path = make_path(vals)
        s = action_s2_sliced(path, base)
        s_shift = action_s2_sliced(path, shifted)
        dphi = (phi.phi(vals[[-1]][:, None]) - phi.phi(vals[[0]][:, None])).item()
        assert s_shift.imag_part - s.imag_part == pytest.approx(dphi, rel=1e-12)
        assert s_shift.real_part == s.real_part

    def test_gauge_shift_of_midpoint_action_has_residual(self):
        # the midpoint rule does NOT conjugate cleanly: for nonlinear phi the
        # shift differs from i [phi(end) - phi(start)] by a nonzero residual
        base = make_field("tanh", 1)
        phi = make_gauge("windowed_cubic", 1, width=2.0)
        shifted = gauge_shift(base, phi)
        vals = np.array([0.0, 0.7, -0.2, 1.1])
        path = make_path(vals)
        s = action_s1_sliced(path, base)
        s_shift = action_s1_sliced(path, shifted)
        dphi = (phi.phi(vals[[-1]][:, None]) - phi.phi(vals[[0]][:, None])).item()
        assert abs((s_shift.imag_part - s.imag_part) - dphi) > 1e-3

    def test_weight_contraction_under_nonnegative_potential(self):
        # V >= 0 forces |e^{-S}| <= 1 for every path and both sliced rules
        fs = make_field_spec("tanh", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        x, _ = batch_subordinated_skeletons(RngStream(88).generator(), 1.0, 16,
                                            MassDim(1.0, 1), 500)
        for rule in ("midpoint", "chord"):
            v, ph = sliced_terms(x, 1 / 16, fs, rule=rule)
            assert np.all(np.abs(np.exp(-v - 1j * ph)) <= 1.0 + 1e-15)

    def test_shift_argument_translates_fields(self):
        fs = make_field("tanh", 1)
        path = make_path([0.0, 0.5])
        shifted_path = make_path([2.0, 2.5])
        a = action_s1_sliced(path, fs, shift=[2.0])
        b = action_s1_sliced(shifted_path, fs)
        assert a.imag_part == pytest.approx(b.imag_part, rel=1e-14)

    def test_slicing_refinement_rate(self):
        # sliced action on n vs 2n slices: paired means differ by O(1/n)
        md = MassDim(1.0, 1)
        fs = make_field_spec("tanh", "gaussian_well", d=1,
                             potential_params={"depth": 1.0, "width": 1.0})
        x, _ = batch_subordinated_skeletons(RngStream(77).generator(), 1.0, 128, md, 20000)
        means = []
        for k in (16, 32, 64, 128):
            step = 128 // k
            v, ph = sliced_terms(x[:, ::step], 1.0 / k, fs)
            means.append(np.mean(np.exp(-v - 1j * ph)))
        diffs = [abs(means[i] - means[i + 1]) for i in range(3)]
        slopes = np.diff(np.log(diffs)) / np.log(2)
        # O(1/n): each difference roughly halves; accept slope in [-1.5, -0.5]
        assert np.all(slopes < -0.5) and np.all(slopes > -1.8)


class TestJumpActions:
    def test_zero_field_reduces_to_v_integral(self):
        fs = make_field_spec("zero", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        md = MassDim(1.0, 1)
        p = sample_levy_jumps(0.0, 1.0, 1.0, 1, 0.1, 1 / 32, RngStream(9))
        av = action_s1_jump(p, fs, md)
        assert av.imag_part == 0.0
        assert av.real_part > 0
        assert av.diagnostics["compensator"] == 0.0

    def test_constant_field_counts_only_recorded_jumps(self):
        # compensator and p.v. vanish identically (A(x+y/2) - A(x-y/2) = 0);
        # the phase is a * sum of recorded jumps
        a = 0.6
        fs = make_field("constant", 1, a_vec=[a])
        md = MassDim(1.0, 1)
        p = sample_levy_jumps(0.0, 1.0, 1.0, 1, 0.1, 1 / 32, RngStream(10))
        av = action_s1_jump(p, fs, md)
        assert av.diagnostics["compensator"] == pytest.approx(0.0, abs=1e-14)
        assert av.diagnostics["principal_value"] == pytest.approx(0.0, abs=1e-14)
        assert av.imag_part == pytest.approx(a * float(np.sum(p.jump_vectors)), rel=1e-12)

    def test_s1_s2_jump_forms_differ_for_square(self):
        fs = make_field("square", 1, axis=0)
        md = MassDim(1.0, 1)
        p = sample_levy_jumps(0.0, 1.0, 1.0, 1, 0.1, 1 / 32, RngStream(11))
        if len(p.jump_times) == 0:
            pytest.skip("no jumps drawn")
        a1 = action_s1_jump(p, fs, md)
        a2 = action_s2_jump(p, fs, md)
        assert a1.imag_part != a2.imag_part

    def test_batch_terms_shapes(self):
        md = MassDim(1.0, 1)
        fs = make_field("tanh", 1)
        batch = sample_jump_batch(RngStream(12).generator(), 1.0, 16, md, 0.1, 50)
        terms = jump_action_terms(batch, fs)
        for key in ("big_jump_sum", "small_jump_sum", "compensator",
                    "principal_value", "v_integral", "imag"):
            assert terms[key].shape == (50,)

    def test_quadrature_failure_on_kinked_potential(self):
        kinked = FieldSpec(
            d=1,
            a=lambda p: np.abs(p - 0.3),
            v=lambda p: np.zeros(p.shape[:-1]),
            tag="generic",
            name="kinked",
        )
        md = MassDim(1.0, 1)
        batch = sample_jump_batch(RngStream(13).generator(), 1.0, 8, md, 0.1, 4)
        with pytest.raises(QuadratureError):
            jump_action_terms(batch, kinked)

    def test_jump_vs_sliced_expectation(self):
        # dual representations of the same semigroup: MC means agree within
        # combined Monte Carlo + cutoff + slicing error
        md = MassDim(1.0, 1)
        fs = make_field_spec("tanh", "gaussian_well", d=1,
                             potential_params={"depth": 1.0, "width": 1.0})
        n = 20000
        t = 0.5
        x, _ = batch_subordinated_skeletons(RngStream(21).generator(), t, 64, md, n)
        v, ph = sliced_terms(x, t / 64, fs)
        g1 = np.exp(-v - 1j * ph)
        batch = sample_jump_batch(RngStream(22).generator(), t, 64, md, 0.05, n)
        terms = jump_action_terms(batch, fs)
        g2 = np.exp(-terms["real"] - 1j * terms["imag"])
        se = np.hypot(g1.real.std(ddof=1), g1.imag.std(ddof=1)) / np.sqrt(n)
        se2 = np.hypot(g2.real.std(ddof=1), g2.imag.std(ddof=1)) / np.sqrt(n)
        tol = 3 * (se + se2) + 5e-3  # cutoff allowance
        assert abs(g1.mean() - g2.mean()) <= tol


class TestSubordinatedAction:
    def test_zero_field_v_only(self):
        fs = make_field_spec("zero", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        s = sample_subordinated(0.0, np.linspace(0, 1, 9), 1.0, 1,
                                RngStream(31).generator(), fine_steps=8)
        av = action_s3(s, fs)
        assert av.imag_part == 0.0
        assert av.real_part >= 0.0

    def test_pure_gauge_chain_rule(self):
        # A = grad(phi), V = 0: S -> i [phi(B(T(t))) - phi(x0)] on fine grids
        phi = make_gauge("windowed_cubic", 1, width=2.0)
        fs = gauge_shift(make_field("zero", 1), phi)
        rng = RngStream(32).generator()
        errs = []
        for fine in (64, 512):
            s = sample_subordinated(
                0.3, np.linspace(0, 0.5, 9), 1.0, 1,
                RngStream(33).generator(), fine_steps=fine,
            )
            av = action_s3(s, fs)
            end = s.path.values[-1][None, :]
            start = np.array([[0.3]])
            target = (phi.phi(end) - phi.phi(start)).item()
            errs.append(abs(av.imag_part - target))
        assert errs[1] < max(errs[0], 1e-9)  # refinement shrinks the chain-rule error

    def test_ito_stratonovich_gap(self):
        # gap between the midpoint and left-point sums ~ (1/2) int div A ds
        fs = make_field("tanh", 1)
        md = MassDim(1.0, 1)
        gaps, targets = [], []
        for i in range(40):
            s = sample_subordinated(0.0, np.linspace(0, 0.5, 17), 1.0, 1,
                                    RngStream(40 + i).generator(), fine_steps=256)
            av = action_s3(s, fs)
            gaps.append(av.diagnostics["ito_strat_gap"])
            targets.append(0.5 * av.diagnostics["div_integral"])
        gaps, targets = np.array(gaps), np.array(targets)
        resid = gaps - targets
        # per-path fluctuation is O(sqrt(dt)); the average must be much tighter
        assert abs(resid.mean()) < 0.02
        assert np.all(np.abs(resid) < 0.5)

    def test_requires_fine_brownian(self):
        s = sample_subordinated(0.0, np.linspace(0, 1, 5), 1.0, 1, RngStream(50).generator())
        with pytest.raises(ValueError):
            action_s3(s, make_field("zero", 1))


class TestBatchedS3:
    def test_v_trapezoid_on_outer_grid(self):
        fs = make_field_spec("zero", "harmonic_capped", d=1, potential_params={"cap": 10.0})
        b = np.zeros((3, 9, 1))  # frozen paths at the origin
        sub_dt = np.full((3, 8), 0.1)
        out = s3_terms(b, sub_dt, np.arange(0, 9, 2), 1.0, fs)
        np.testing.assert_allclose(out["v_integral"], 0.0)
        np.testing.assert_allclose(out["stratonovich"], 0.0)
