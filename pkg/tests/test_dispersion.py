import json

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from rvlbm import (
    MomentPolynomial,
    SchemeSpec,
    VelocitySet,
    VelocityShift,
    amplification_matrix,
    compare_with_prediction,
    default_basis,
    density,
    dominant_eigenvalue,
    extract_symbol_series,
    fourier_mode_state,
    geometric_dt_sequence,
    step,
)
import rvlbm.dispersion as dispersion
from rvlbm.errors import (
    BranchAmbiguity,
    NonConstantShift,
    PoorFit,
    ValidationError,
)


def d1q2_spec(c=0.5, s1=1.0, u=None):
    vset = VelocitySet(1, 1.0, ((1,), (-1,)))
    shift = VelocityShift.zero() if u is None else VelocityShift.constant((u,))
    return SchemeSpec(vset, default_basis(vset), (0.0, s1), ((1 + c) / 2, (1 - c) / 2), shift)


def d1q3_spec(u=None):
    vset = VelocitySet(1, 1.0, ((0,), (1,), (-1,)))
    basis = (
        MomentPolynomial.constant(1),
        MomentPolynomial.coordinate(1, 0),
        MomentPolynomial.from_terms(1, {(2,): 1.0}),
    )
    shift = VelocityShift.zero() if u is None else VelocityShift.constant((u,))
    return SchemeSpec(vset, basis, (0.0, 1.2, 1.6), (0.5, 0.3, 0.2), shift)


class TestAmplificationMatrix:
    def test_zero_wavevector_is_pure_collision(self):
        spec = d1q2_spec(c=0.3, s1=1.2)
        g = amplification_matrix(spec, [0.0], 0.01)
        ones = np.ones(2)
        e = np.asarray(spec.equilibrium)
        # mass row and equilibrium column are both fixed by collision
        np.testing.assert_allclose(ones @ g.g, ones, atol=1e-15)
        np.testing.assert_allclose(g.g @ e, e, atol=1e-15)
        assert dominant_eigenvalue(g) == pytest.approx(1.0, abs=1e-14)

    def test_no_relaxation_gives_streaming_phases(self):
        spec = d1q2_spec(s1=0.0)
        k, dt = np.array([0.7]), 0.02
        g = amplification_matrix(spec, k, dt)
        phases = np.exp(-1j * spec.vset.velocities @ k * dt)
        np.testing.assert_allclose(g.g, np.diag(phases), atol=1e-15)
        assert np.abs(np.linalg.eigvals(g.g)) == pytest.approx(1.0, abs=1e-12)

    def test_wavevector_shape_checked(self):
        with pytest.raises(ValidationError):
            amplification_matrix(d1q2_spec(), [0.1, 0.2], 0.01)

    def test_space_dependent_shift_rejected(self):
        spec = replace(d1q2_spec(), u_tilde=VelocityShift.sine((0.1,)))
        with pytest.raises(NonConstantShift):
            amplification_matrix(spec, [0.5], 0.01)

    def test_one_step_on_grid_matches_matrix(self):
        spec = d1q2_spec(c=0.3, s1=1.1)
        n, length, mode = 64, 2.0 * np.pi, 3
        rng = np.random.RandomState(5)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        state = fourier_mode_state(spec, (n,), (length,), w, (mode,))
        stepped = step(state, spec)
        k = np.array([2.0 * np.pi * mode / length])
        g = amplification_matrix(spec, k, state.dt)
        expected = (g.g @ w)[:, None] * (state.f / w[:, None])
        np.testing.assert_allclose(stepped.f, expected, atol=1e-13)


class TestDominantEigenvalue:
    def test_identity_branch(self):
        assert dominant_eigenvalue(np.eye(3)) == 1.0 + 0.0j

    def test_follows_hint(self):
        m = np.diag([0.5, 0.9])
        assert dominant_eigenvalue(m, 1.0 + 0j) == pytest.approx(0.9)
        assert dominant_eigenvalue(m, 0.4 + 0j) == pytest.approx(0.5)

    def test_matches_characteristic_polynomial_roots(self):
        rng = np.random.RandomState(11)
        m = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
        picked = dominant_eigenvalue(m)
        roots = np.roots(np.poly(m))
        nearest = roots[np.argmin(np.abs(roots - 1.0))]
        assert picked == pytest.approx(nearest, abs=1e-10)

    def test_near_degenerate_branch_raises(self):
        m = np.diag([1.0 + 1e-10, 1.0 + 2e-10, 0.5])
        with pytest.raises(BranchAmbiguity):
            dominant_eigenvalue(m)

    def test_coincident_eigenvalues_are_not_ambiguous(self):
        m = np.diag([1.0 + 1e-15, 1.0 + 2e-15, 0.5])
        assert dominant_eigenvalue(m) == pytest.approx(1.0, abs=1e-12)

    def test_clear_gap_needs_no_walk(self):
        m = np.diag([1.0 + 1e-10, 0.5])
        assert dominant_eigenvalue(m) == pytest.approx(1.0 + 1e-10, abs=1e-15)


class TestGeometricSequence:
    def test_halving_ladder(self):
        dts = geometric_dt_sequence(0.04, 6)
        np.testing.assert_allclose(dts, 0.04 / 2.0 ** np.arange(6))


class TestExtractSymbolSeries:
    def ladder(self, k=1.0, levels=10):
        return geometric_dt_sequence(0.05 / abs(k), levels)

    def test_zero_wavevector_short_circuits(self):
        series = extract_symbol_series(d1q2_spec(), [0.0], self.ladder())
        assert series.mu == (0j, 0j, 0j)
        assert series.fit_residual == 0.0

    def test_advection_coefficient(self):
        series = extract_symbol_series(d1q2_spec(c=0.5, s1=1.0), [1.0], self.ladder())
        assert series.mu0 == pytest.approx(-0.5j, rel=1e-8)
        assert not series.poor_fit

    def test_diffusion_coefficient(self):
        # sigma (lam^2 - c^2) = 0.5 * 0.75 at s = 1, c = 0.5
        series = extract_symbol_series(d1q2_spec(c=0.5, s1=1.0), [1.0], self.ladder())
        assert series.mu1 == pytest.approx(-0.375, rel=1e-6)

    def test_parity_of_fitted_coefficients(self):
        series = extract_symbol_series(d1q2_spec(c=0.3, s1=1.4), [0.8], self.ladder(0.8))
        assert series.mu0.real == 0.0
        assert series.mu1.imag == 0.0
        assert series.mu2.real == 0.0

    def test_rejects_non_geometric_ladder(self):
        with pytest.raises(ValidationError):
            extract_symbol_series(d1q2_spec(), [1.0], [0.05, 0.02, 0.01, 0.005, 0.002])

    def test_rejects_short_ladder(self):
        with pytest.raises(ValidationError):
            extract_symbol_series(d1q2_spec(), [1.0], geometric_dt_sequence(0.05, 4))

    def test_rejects_negative_steps(self):
        with pytest.raises(ValidationError):
            extract_symbol_series(d1q2_spec(), [1.0], [0.04, 0.02, 0.01, 0.005, -0.0025])

    def test_rejects_oversized_phase(self):
        with pytest.raises(ValidationError):
            extract_symbol_series(d1q2_spec(), [4.0], geometric_dt_sequence(0.05, 10))

    def test_noisy_branch_raises_poor_fit(self, monkeypatch):
        def jittered(spec, k, dts):
            wobble = 1e-5 * np.cos(7.0 * np.arange(len(dts)))
            return np.exp(-0.5j * dts) * (1.0 + wobble)

        monkeypatch.setattr(dispersion, "_branch_values", jittered)
        with pytest.raises(PoorFit):
            extract_symbol_series(d1q2_spec(), [1.0], self.ladder())

    def test_poor_fit_flag_mode(self, monkeypatch):
        def jittered(spec, k, dts):
            wobble = 1e-5 * np.cos(7.0 * np.arange(len(dts)))
            return np.exp(-0.5j * dts) * (1.0 + wobble)

        monkeypatch.setattr(dispersion, "_branch_values", jittered)
        series = extract_symbol_series(d1q2_spec(), [1.0], self.ladder(), on_poor_fit="flag")
        assert series.poor_fit

    @given(st.floats(0.1, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_branch_conjugate_under_wavevector_flip(self, k):
        spec = d1q2_spec(c=0.3, s1=1.4)
        dt = 0.03 / k
        plus = dominant_eigenvalue(amplification_matrix(spec, [k], dt))
        minus = dominant_eigenvalue(amplification_matrix(spec, [-k], dt))
        assert minus == pytest.approx(np.conj(plus), abs=1e-12)

    def test_shift_moves_only_third_order(self):
        k = [0.9]
        series = {
            u: extract_symbol_series(d1q3_spec(u=u), k, self.ladder(0.9))
            for u in (None, 0.2, 0.5)
        }
        base = series[None]
        for u in (0.2, 0.5):
            assert series[u].mu0 == pytest.approx(base.mu0, abs=1e-10)
            assert series[u].mu1 == pytest.approx(base.mu1, abs=1e-9)
        spread = max(abs(series[u].mu2 - base.mu2) for u in (0.2, 0.5))
        assert spread > 1e-6

    def test_two_velocity_collision_is_shift_blind(self):
        # with q = 2 the non-conserved complement is one dimensional, so the
        # relaxed direction cannot depend on the shift: every order coincides
        k = [0.9]
        base = extract_symbol_series(d1q2_spec(c=0.3, s1=1.2), k, self.ladder(0.9))
        moved = extract_symbol_series(d1q2_spec(c=0.3, s1=1.2, u=0.4), k, self.ladder(0.9))
        assert moved.mu == pytest.approx(base.mu, abs=1e-10)


class TestCompareWithPrediction:
    def test_clean_scheme_passes_everywhere(self):
        report = compare_with_prediction(d1q2_spec(c=0.3, s1=1.2), [[0.3], [0.7], [1.1]])
        assert report.passed
        assert [r["k"] for r in report.records] == [[0.3], [0.7], [1.1]]
        for r in report.records:
            assert r["pass"] and not r["poor_fit"]
            assert all(r["order_pass"])

    def test_floor_covers_exactly_vanishing_coefficient(self):
        # s = 2 makes the diffusion coefficient exactly zero; only the
        # absolute floor can admit the measured residual noise
        report = compare_with_prediction(d1q2_spec(c=0.3, s1=2.0), [[0.5], [1.0]])
        assert report.passed
        for r in report.records:
            assert abs(complex(*r["predicted"][1])) == 0.0
            assert r["abs_err"][1] <= 1e-10

    def test_corrupted_predictor_fails_one_order(self, monkeypatch):
        true_predictor = dispersion.predicted_symbols

        def flipped(equation, k):
            mu = true_predictor(equation, k)
            return (mu[0], -mu[1]) + mu[2:]

        monkeypatch.setattr(dispersion, "predicted_symbols", flipped)
        report = compare_with_prediction(d1q2_spec(c=0.5, s1=1.0), [[1.0]])
        assert not report.passed
        assert report.records[0]["order_pass"] == [True, False, True]

    def test_records_sorted_by_wavevector_norm(self):
        report = compare_with_prediction(d1q2_spec(), [[1.1], [0.3], [-0.7]])
        norms = [abs(r["k"][0]) for r in report.records]
        assert norms == sorted(norms)

    def test_json_dict_is_deterministic_and_timing_free(self):
        spec = d1q2_spec(c=0.3, s1=1.2)
        a = compare_with_prediction(spec, [[0.4], [0.8]])
        b = compare_with_prediction(spec, [[0.4], [0.8]])
        assert "elapsed_seconds" not in a.to_json_dict()
        assert "elapsed_seconds" in a.to_json_dict(include_timing=True)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )

    def test_csv_rows_layout(self):
        report = compare_with_prediction(d1q2_spec(), [[0.4], [0.8]])
        rows = report.csv_rows()
        assert rows[0][0] == "k"
        assert len(rows) == 1 + 3 * len(report.records)
        assert [row[1] for row in rows[1:4]] == [0, 1, 2]
