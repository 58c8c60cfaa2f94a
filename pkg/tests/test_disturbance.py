import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ropedist import (
    LLAMA2,
    DimensionError,
    DomainError,
    RopeConfig,
    base_theta,
    disturbance_of_thetas,
    estimate_histogram,
    extension_margins,
    kl_disturbance,
)
from ropedist.disturbance import DimDisturbance, aggregate, ood_bins
from ropedist.formats import dumps, margins_csv, report_dict

from oracles import exact_freqs, kl_reference, reference_disturbance, reference_theta

prob_vectors = st.lists(st.integers(0, 50), min_size=1, max_size=40).filter(any).map(
    lambda c: np.array(c, float) / sum(c)
)


class TestKL:
    def test_identical_is_zero(self):
        p = estimate_histogram(0.3, 1000, 360)
        assert kl_disturbance(p, p, 1e-8) == 0.0

    def test_disjoint_point_masses(self):
        # mpmath: log((1 + 1e-8) / 1e-8)
        assert kl_disturbance([1.0, 0.0], [0.0, 1.0], 1e-8) == pytest.approx(18.420680753952365, rel=1e-12)

    def test_half_mass_in_empty_bin(self):
        # mpmath: 0.5 log((0.5+e)/(1+e)) + 0.5 log((0.5+e)/e), e = 1e-8
        assert kl_disturbance([0.5, 0.5], [1.0, 0.0], 1e-8) == pytest.approx(8.517193206416237, rel=1e-12)

    def test_zero_new_mass_contributes_nothing(self):
        assert kl_disturbance([0.0, 1.0], [0.999, 0.001], 1e-8) == pytest.approx(
            math.log((1 + 1e-8) / (0.001 + 1e-8)), rel=1e-14
        )

    def test_errors(self):
        with pytest.raises(DimensionError):
            kl_disturbance([1.0], [0.5, 0.5], 1e-8)
        for eps in (0.0, -1e-8, float("nan")):
            with pytest.raises(DomainError):
                kl_disturbance([1.0], [1.0], eps)

    @given(prob_vectors, st.floats(1e-12, 1e-2))
    def test_self_divergence_zero(self, p, eps):
        assert kl_disturbance(p, p, eps) == 0.0

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 60))
    def test_matches_reference(self, seed, b):
        rng = np.random.default_rng(seed)
        p = rng.random(b) * (rng.random(b) < 0.6)
        q = rng.random(b) * (rng.random(b) < 0.6)
        if p.sum() == 0 or q.sum() == 0:
            return
        p, q = p / p.sum(), q / q.sum()
        assert kl_disturbance(p, q, 1e-8) == pytest.approx(kl_reference(p, q, 1e-8), rel=1e-12, abs=1e-15)


class TestEpsilonSensitivity:
    """Shrinking epsilon moves D materially only through bins with F = 0 < F'."""

    def test_without_ood_bins(self):
        th = base_theta(LLAMA2)[0]
        new = estimate_histogram(th, 8192, 360)
        old = estimate_histogram(th, 4096, 360)
        assert not ood_bins(new, old).any()
        delta = abs(kl_disturbance(new, old, 1e-8) - kl_disturbance(new, old, 1e-10))
        assert 0 < delta < 1e-5

    def test_with_ood_bins(self):
        th = base_theta(LLAMA2)[22]
        new = estimate_histogram(th / 2, 8192, 360)
        old = estimate_histogram(th, 4096, 360)
        ood = ood_bins(new, old)
        assert ood.any()
        delta = kl_disturbance(new, old, 1e-10) - kl_disturbance(new, old, 1e-8)
        # each OOD bin gains about F' * log(100)
        expected = new.freqs[ood].sum() * math.log(100)
        assert delta == pytest.approx(expected, rel=1e-3)


class TestDisturbanceOfThetas:
    def test_base_at_pretrain_len_is_zero(self):
        res = disturbance_of_thetas(base_theta(LLAMA2), LLAMA2, 4096)
        assert res.aggregate == 0.0
        assert np.all(res.per_dim == 0.0)

    def test_aggregate_normalisation(self):
        res = disturbance_of_thetas(base_theta(LLAMA2).values / 2, LLAMA2, 8192)
        assert res.per_dim.size == 64
        assert abs(res.aggregate - 2 * res.per_dim.sum() / 128) <= 1e-12

    def test_matches_reference_small(self):
        cfg = RopeConfig(8, 500.0, 64)
        th = np.array(reference_theta(8, 500.0))
        hat = th * np.array([1.0, 0.5, 1.0, 0.5])
        res = disturbance_of_thetas(hat, cfg, 128, 90, 1e-8)
        ref = reference_disturbance(hat, th, 64, 128, 90, 1e-8)
        np.testing.assert_allclose(res.per_dim, ref, rtol=1e-12, atol=1e-15)

    def test_shorter_target_rejected(self):
        with pytest.raises(DomainError):
            disturbance_of_thetas(base_theta(LLAMA2), LLAMA2, 4095)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            disturbance_of_thetas([1.0, 0.1], LLAMA2, 8192)


@pytest.fixture(scope="module")
def report():
    return extension_margins(LLAMA2, 8192, 360, 1e-8)


class TestExtensionMargins:
    def test_shape_and_aggregates(self, report):
        assert len(report.per_dim) == 64
        assert report.scale == 2.0
        np.testing.assert_array_equal(report.margins, report.d_ext - report.d_int)
        assert abs(report.aggregate_ext - report.d_ext.mean()) <= 1e-12
        assert abs(report.aggregate_int - report.d_int.mean()) <= 1e-12

    @pytest.mark.parametrize("i,sign", [(0, -1), (63, 1)])
    def test_end_pairs_against_oracle(self, report, i, sign):
        th = base_theta(LLAMA2)[i]
        old = exact_freqs(th, 4096, 360)
        d_ext = kl_reference(exact_freqs(th, 8192, 360), old, 1e-8)
        d_int = kl_reference(exact_freqs(th / 2, 8192, 360), old, 1e-8)
        assert report.per_dim[i].d_ext == pytest.approx(d_ext, rel=1e-12)
        assert report.per_dim[i].d_int == pytest.approx(d_int, rel=1e-12)
        assert np.sign(d_ext - d_int) == sign
        assert np.sign(report.per_dim[i].margin) == sign

    def test_extrapolation_column_matches_direct_scoring(self, report):
        res = disturbance_of_thetas(base_theta(LLAMA2), LLAMA2, 8192, 360, 1e-8)
        np.testing.assert_array_equal(res.per_dim, report.d_ext)

    @pytest.mark.parametrize("target", [4096, 2048])
    def test_no_extension_rejected(self, target):
        with pytest.raises(DomainError):
            extension_margins(LLAMA2, target)

    def test_margin_antisymmetric(self, report):
        for r in report.per_dim:
            assert DimDisturbance(r.dim_pair, r.d_int, r.d_ext).margin == -r.margin

    def test_exports(self, report):
        lines = margins_csv(report).splitlines()
        assert lines[0] == "dim_pair,d_ext,d_int,margin"
        assert len(lines) == 65
        first = lines[1].split(",")
        assert float(first[1]) == report.per_dim[0].d_ext
        doc = json.loads(dumps(report_dict(report)))
        assert doc["aggregate_ext"] == report.aggregate_ext
        assert [r["dim_pair"] for r in doc["per_dim"]] == list(range(64))


def test_aggregate_helper():
    assert aggregate([1.0, 2.0, 3.0]) == 2.0


def test_pairs_6_and_22_preferred_strategies(report):
    # interpolation disturbs pair 6 less; pair 22 gains far more OOD bins when interpolated
    assert report.per_dim[6].margin > 0
    assert report.per_dim[22].margin < 0
    th = base_theta(LLAMA2)[22]
    old = estimate_histogram(th, 4096, 360)
    ext = ood_bins(estimate_histogram(th, 8192, 360), old).sum()
    intp = ood_bins(estimate_histogram(th / 2, 8192, 360), old).sum()
    assert 0 < ext < intp
