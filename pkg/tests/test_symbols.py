"""Symbol catalog values, admissibility sampling, and the preset table.

Closed-form reference values were computed independently (high-precision
tanh and square roots) and frozen here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitham_lab.spectral import make_grid
from whitham_lab.symbols import (PRESET_NAMES, MultiplierPair, SymbolSpec,
                                 admissibility_range, preset, symbol_eval,
                                 symbol_table, validate_admissible,
                                 weighted_sup_quantity)

# tanh(1) and its square root, from a 40-digit decimal-arithmetic evaluation
TANH_1 = 0.7615941559557649
SQRT_TANH_1 = 0.8726936208978297


class TestSymbolEval:
    def test_sqrt_tanh_ratio_at_one(self):
        spec = SymbolSpec("sqrt_tanh_ratio")
        assert symbol_eval(spec, 1.0) == pytest.approx(SQRT_TANH_1, abs=2e-15)

    def test_tanh_ratio_at_one(self):
        spec = SymbolSpec("tanh_ratio")
        assert symbol_eval(spec, 1.0) == pytest.approx(TANH_1, abs=1e-15)

    def test_removable_singularity_at_origin(self):
        for kind in ("tanh_ratio", "sqrt_tanh_ratio"):
            assert symbol_eval(SymbolSpec(kind), 0.0) == 1.0

    def test_inv_helmholtz_halves_at_unit_wavenumber(self):
        spec = SymbolSpec("inv_helmholtz", b=1.0)
        assert symbol_eval(spec, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_identity_is_one_everywhere(self):
        spec = SymbolSpec("identity", mu=0.25)
        out = symbol_eval(spec, np.array([0.0, 3.0, 100.0]))
        np.testing.assert_array_equal(out, 1.0)

    def test_mu_rescales_the_argument(self):
        """G with mu = 1/4 at |xi| = 2 equals G with mu = 1 at |xi| = 1."""
        a = symbol_eval(SymbolSpec("tanh_ratio", mu=0.25), 2.0)
        b = symbol_eval(SymbolSpec("tanh_ratio", mu=1.0), 1.0)
        assert a == pytest.approx(b, abs=1e-15)

    def test_scalar_in_scalar_out(self):
        out = symbol_eval(SymbolSpec("tanh_ratio"), 2.0)
        assert isinstance(out, float)

    def test_bcs_reduces_to_inv_helmholtz_when_a_is_zero(self):
        r = np.linspace(0.0, 10.0, 41)
        a = symbol_eval(SymbolSpec("bcs_boussinesq", a=0.0, b=1.0 / 6.0), r)
        b = symbol_eval(SymbolSpec("inv_helmholtz", b=1.0 / 6.0), r)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_bcs_domain_guard(self):
        spec = SymbolSpec("bcs_boussinesq", a=1.0, b=0.0)
        with pytest.raises(ValueError, match="bcs_boussinesq undefined"):
            symbol_eval(spec, 2.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown symbol kind"):
            SymbolSpec("whistle")

    def test_mu_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="mu"):
            SymbolSpec("identity", mu=0.0)
        with pytest.raises(ValueError, match="mu"):
            SymbolSpec("identity", mu=1.5)


class TestCustomTable:
    def test_interpolates_linearly(self):
        spec = SymbolSpec("custom_table",
                          table=((0.0, 1.0), (2.0, 0.5), (4.0, 0.5)))
        assert symbol_eval(spec, 1.0) == pytest.approx(0.75)
        assert symbol_eval(spec, 3.0) == pytest.approx(0.5)

    def test_out_of_range_raises(self):
        spec = SymbolSpec("custom_table", table=((0.0, 1.0), (1.0, 1.0)))
        with pytest.raises(ValueError, match="outside its tabulated range"):
            symbol_eval(spec, 2.0)

    def test_needs_two_increasing_knots(self):
        with pytest.raises(ValueError, match="at least two"):
            SymbolSpec("custom_table", table=((0.0, 1.0),))
        with pytest.raises(ValueError, match="strictly increasing"):
            SymbolSpec("custom_table", table=((0.0, 1.0), (0.0, 2.0)))


def _const_pair(c1: float, c2: float, hi: float = 100.0) -> MultiplierPair:
    table1 = ((0.0, c1), (hi, c1))
    table2 = ((0.0, c2), (hi, c2))
    return MultiplierPair(SymbolSpec("custom_table", table=table1),
                          SymbolSpec("custom_table", table=table2))


class TestValidateAdmissible:
    def test_identity_pair_passes_with_unit_sups(self):
        pair = MultiplierPair(SymbolSpec("identity"), SymbolSpec("identity"))
        rep = validate_admissible(pair, (0.0, 64.0))
        assert rep.passed
        assert rep.failures == ()
        assert rep.sup_g1 == pytest.approx(1.0)
        assert rep.min_g1 == pytest.approx(1.0)
        assert rep.sup_weighted_grad_g1 == pytest.approx(0.0, abs=1e-9)

    def test_domination_failure_is_reported(self):
        rep = validate_admissible(_const_pair(1.0, 2.0), (0.0, 50.0))
        assert not rep.passed
        assert any("domination" in f for f in rep.failures)

    def test_vanishing_g1_fails_positivity(self):
        # table extends past the range so the gradient stencil stays inside
        pair = MultiplierPair(
            SymbolSpec("custom_table", table=((0.0, 1.0), (50.0, 0.0), (60.0, 0.0))),
            SymbolSpec("identity"))
        rep = validate_admissible(pair, (0.0, 50.0))
        assert not rep.passed
        assert any("positive" in f for f in rep.failures)

    def test_sample_count_floor(self):
        pair = MultiplierPair(SymbolSpec("identity"), SymbolSpec("identity"))
        with pytest.raises(ValueError, match="at least 64"):
            validate_admissible(pair, (0.0, 10.0), n_samples=32)

    def test_report_records_sampling(self):
        pair = MultiplierPair(SymbolSpec("identity"), SymbolSpec("identity"))
        rep = validate_admissible(pair, (0.0, 10.0), n_samples=128)
        assert rep.n_samples == 128
        assert rep.sample_range == (0.0, 10.0)


class TestPresets:
    @pytest.mark.parametrize("name", ["shallow_water", "abcd", "ddk",
                                      "quasilinear_wb"])
    @pytest.mark.parametrize("mu", [1.0, 0.25, 0.0625])
    def test_shipped_pairs_are_admissible(self, name, mu):
        pair, _ = preset(name, mu=mu)
        rep = validate_admissible(pair, (0.0, 64.0))
        assert rep.passed, rep.failures

    def test_open_pair_fails_domination_by_design(self):
        pair, _ = preset("open_wb")
        rep = validate_admissible(pair, (0.0, 64.0))
        assert not rep.passed
        assert any("domination" in f for f in rep.failures)

    def test_consistency_tags(self):
        assert preset("shallow_water")[1] == "O(mu)"
        assert preset("abcd")[1] == "O(mu^2 + mu*eps)"
        assert preset("ddk")[1] == "O(mu*eps)"
        assert preset("quasilinear_wb")[1] == "O(mu*eps)"

    def test_ddk_squares_its_phase_speed(self):
        """For this pair g1^2 = g2 pointwise."""
        pair, _ = preset("ddk")
        r = np.linspace(0.0, 30.0, 301)
        g1 = symbol_eval(pair.g1, r)
        g2 = symbol_eval(pair.g2, r)
        np.testing.assert_allclose(g1**2, g2, atol=1e-14)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset("kdv")

    def test_preset_names_tuple_is_complete(self):
        for name in PRESET_NAMES:
            pair, tag = preset(name)
            assert isinstance(pair, MultiplierPair)
            assert tag.startswith("O(")


class TestScalingObservable:
    @pytest.mark.parametrize("name", ["ddk", "quasilinear_wb", "abcd"])
    def test_weighted_sup_monotone_in_mu(self, name):
        """Shrinking mu never increases the controlling sup; constants that
        depend only on it are therefore uniform over the shallow regime."""
        vals = [weighted_sup_quantity(preset(name, mu=m)[0], (0.0, 64.0))
                for m in (1.0, 0.25, 0.0625)]
        assert vals[0] >= vals[1] - 1e-12
        assert vals[1] >= vals[2] - 1e-12

    def test_long_wave_defect_is_quadratic_small_mu(self):
        """tanh(r)/r = 1 - r^2/3 + ..., so the distance from the identity
        symbol is bounded by r^2/3 on r <= 1."""
        r = np.linspace(0.0, 1.0, 101)
        vals = symbol_eval(SymbolSpec("tanh_ratio"), r)
        assert np.all(np.abs(vals - 1.0) <= r**2 / 3.0 + 1e-12)

    def test_admissibility_range_covers_4x_grid(self):
        g = make_grid(1, 8, 2.0 * math.pi)  # largest |xi| is the Nyquist 4
        assert admissibility_range(g) == (0.0, 16.0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["identity", "tanh_ratio", "sqrt_tanh_ratio",
                        "inv_helmholtz"]),
       st.floats(0.0, 200.0))
def test_symbols_stay_in_unit_interval(kind, r):
    val = symbol_eval(SymbolSpec(kind, b=1.0), r)
    assert 0.0 <= val <= 1.0 + 1e-12
    assert math.isfinite(val)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 1.0), st.floats(0.0, 50.0))
def test_mu_rescaling_consistency(mu, xi):
    """Evaluating at (mu, xi) always equals (1, sqrt(mu)*xi)."""
    a = symbol_eval(SymbolSpec("tanh_ratio", mu=mu), xi)
    b = symbol_eval(SymbolSpec("tanh_ratio", mu=1.0), math.sqrt(mu) * xi)
    assert a == pytest.approx(b, abs=1e-12)
