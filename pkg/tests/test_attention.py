"""Attention strategies: scaled dot-product construction, the bias
magnitude, and the standard / hard / effects-sensitive maps."""

import math

import numpy as np
import pytest

from esattn.attention import (
    EsaConfig,
    RegionPartition,
    build_logits,
    compute_delta,
    esa_attention,
    esa_attention_fixed_delta,
    hard_attention_limit,
    hard_attention_surrogate,
    standard_attention,
)
from esattn.errors import DomainError, ShapeError


def simple_partition(n_queries=4, n_edit=2, n_keys=3):
    return RegionPartition.contiguous(n_queries, n_edit, n_keys=n_keys)


class TestRegionPartition:
    def test_contiguous_layout(self):
        p = RegionPartition.contiguous(6, 2, n_effect=2, n_keys=4)
        assert p.edit == (0, 1)
        assert p.effect == (2, 3)
        assert p.other == (4, 5)
        assert p.aux == (2, 3, 4, 5)
        assert p.object_keys == (0, 1, 2, 3)
        assert p.restore_queries == p.other

    def test_rejects_overlapping_regions(self):
        with pytest.raises(DomainError):
            RegionPartition(n_queries=3, edit=(0, 1), aux=(1, 2))

    def test_rejects_incomplete_cover(self):
        with pytest.raises(DomainError):
            RegionPartition(n_queries=4, edit=(0,), aux=(1, 2))

    def test_rejects_empty_edit(self):
        with pytest.raises(DomainError):
            RegionPartition(n_queries=2, edit=(), aux=(0, 1))

    def test_rejects_key_overlap(self):
        with pytest.raises(DomainError):
            RegionPartition(n_queries=2, edit=(0,), aux=(1,), n_keys=2,
                            object_keys=(0,), background_keys=(0, 1))

    def test_json_roundtrip(self):
        p = RegionPartition(n_queries=5, edit=(0, 4), aux=(1, 2, 3), effect=(1,),
                            n_keys=3, object_keys=(0, 1), background_keys=(2,),
                            restore_queries=(2, 3))
        assert RegionPartition.from_json_dict(p.to_json_dict()) == p


class TestBuildLogits:
    def test_unit_vector_d4(self):
        """A matching unit vector at d = 4 scores 1/sqrt(4) = 1/2."""
        q = np.array([[1.0, 0.0, 0.0, 0.0]])
        np.testing.assert_allclose(build_logits(q, q), [[0.5]], atol=1e-15)

    def test_zero_keys(self):
        q = np.random.default_rng(0).normal(size=(3, 5))
        np.testing.assert_array_equal(build_logits(q, np.zeros((2, 5))), np.zeros((3, 2)))

    def test_orthogonal_pairs(self):
        q = np.array([[1.0, 0.0]])
        k = np.array([[0.0, 2.0]])
        assert build_logits(q, k)[0, 0] == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            build_logits(np.zeros((2, 3)), np.zeros((2, 4)))


class TestComputeDelta:
    def test_constant_logits(self):
        assert compute_delta(np.full((3, 3), 2.5), alpha=1.0) == 0.0

    def test_two_value_spread(self):
        """Entries {0, 2} have population std 1, so delta = alpha."""
        logits = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert compute_delta(logits, 0.1) == pytest.approx(0.1, abs=1e-15)
        assert compute_delta(logits, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_per_column_scope(self):
        logits = np.array([[0.0, 1.0], [2.0, 1.0]])
        np.testing.assert_allclose(compute_delta(logits, 1.0, "per-column"), [1.0, 0.0],
                                   atol=1e-15)

    def test_negative_alpha(self):
        with pytest.raises(DomainError):
            compute_delta(np.zeros((2, 2)), -0.1)


class TestStandardAttention:
    def test_symmetric(self):
        np.testing.assert_allclose(standard_attention([[0.0], [0.0]]), [[0.5], [0.5]],
                                   atol=1e-15)

    def test_log3(self):
        out = standard_attention(np.array([[0.0], [math.log(3.0)]]))
        np.testing.assert_allclose(out[:, 0], [0.25, 0.75], atol=1e-15)

    def test_columns_normalised(self):
        rng = np.random.default_rng(1)
        out = standard_attention(rng.normal(size=(3, 2)))
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-12)


class TestEsaAttention:
    def test_zero_alpha_equals_standard_exactly(self):
        """alpha = 0 reproduces the standard map entry for entry."""
        rng = np.random.default_rng(2)
        part = simple_partition()
        for _ in range(20):
            logits = rng.normal(size=(4, 3))
            a = standard_attention(logits)
            b = esa_attention(logits, part, EsaConfig(alpha_insert=0.0, alpha_restore=0.0))
            np.testing.assert_array_equal(a, b)

    def test_closed_form_two_queries_one_key(self):
        """Known bias on a (0, 0) column gives (e^d, 1)/(e^d + 1)."""
        part = simple_partition(n_queries=2, n_edit=1, n_keys=1)
        delta = 0.3
        out = esa_attention_fixed_delta(np.zeros((2, 1)), part, delta)
        z = math.exp(delta) + 1.0
        np.testing.assert_allclose(out[:, 0], [math.exp(delta) / z, 1.0 / z], atol=1e-15)

    def test_edit_mass_strictly_increases(self):
        """Any positive bias moves object-key mass toward edit queries."""
        rng = np.random.default_rng(3)
        part = RegionPartition.contiguous(8, 3, n_keys=4)
        for _ in range(50):
            logits = rng.normal(size=(8, 4))
            a = standard_attention(logits)
            b = esa_attention_fixed_delta(logits, part, rng.uniform(0.05, 2.0))
            edit = list(part.edit)
            assert np.all(b[edit].sum(axis=0) > a[edit].sum(axis=0))

    def test_edit_mass_monotone_in_alpha(self):
        """Sum of edit mass per object-key column is nondecreasing in alpha."""
        rng = np.random.default_rng(4)
        part = RegionPartition.contiguous(6, 2, n_keys=3)
        logits = rng.normal(size=(6, 3))
        previous = None
        for alpha in (0.0, 0.1, 0.25, 0.5, 1.0, 2.0):
            out = esa_attention(logits, part, EsaConfig(alpha_insert=alpha, alpha_restore=0.0))
            mass = out[list(part.edit)].sum(axis=0)
            if previous is not None:
                assert np.all(mass >= previous - 1e-15)
            previous = mass

    def test_bias_confined_to_object_keys(self):
        """Key columns outside the object set are untouched by insertion bias."""
        rng = np.random.default_rng(5)
        part = RegionPartition(n_queries=4, edit=(0, 1), aux=(2, 3), n_keys=3,
                               object_keys=(0,))
        logits = rng.normal(size=(4, 3))
        a = standard_attention(logits)
        b = esa_attention_fixed_delta(logits, part, 0.7)
        np.testing.assert_array_equal(a[:, 1:], b[:, 1:])
        assert not np.allclose(a[:, 0], b[:, 0])

    def test_restoration_bias_block(self):
        """alpha_restore biases restore queries toward background keys only."""
        rng = np.random.default_rng(6)
        part = RegionPartition(n_queries=6, edit=(0, 1), aux=(2, 3, 4, 5), effect=(2,),
                               n_keys=4, object_keys=(0, 1), background_keys=(2, 3),
                               restore_queries=(3, 4))
        logits = rng.normal(size=(6, 4))
        a = standard_attention(logits)
        b = esa_attention_fixed_delta(logits, part, 0.0, 0.9)
        np.testing.assert_array_equal(a[:, :2], b[:, :2])
        restore = list(part.restore_queries)
        for j in (2, 3):
            assert b[restore, j].sum() > a[restore, j].sum()

    def test_column_stochastic(self):
        rng = np.random.default_rng(7)
        part = simple_partition()
        logits = rng.normal(size=(4, 3))
        cfg = EsaConfig(alpha_insert=0.4, alpha_restore=0.2)
        np.testing.assert_allclose(esa_attention(logits, part, cfg).sum(axis=0), 1.0,
                                   atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            esa_attention(np.zeros((3, 3)), simple_partition(), EsaConfig())


class TestHardModulation:
    def test_surrogate_at_max_is_valid(self):
        rng = np.random.default_rng(8)
        part = simple_partition()
        logits = rng.normal(size=(4, 3))
        out = hard_attention_surrogate(logits, part, float(logits.max()))
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-12)

    def test_surrogate_converges_monotonically(self):
        """Max-norm distance to the exact limit decays along 10, 20, 40."""
        rng = np.random.default_rng(9)
        part = simple_partition()
        logits = rng.normal(size=(4, 3))
        limit = hard_attention_limit(part).as_matrix()
        dists = [np.abs(hard_attention_surrogate(logits, part, m) - limit).max()
                 for m in (10.0, 20.0, 40.0)]
        assert dists[0] > dists[1] > dists[2]

    def test_surrogate_tail_bound(self):
        """Distance to the limit is below 1e-9 once m >= max(S) + 40."""
        rng = np.random.default_rng(10)
        part = simple_partition()
        logits = rng.normal(size=(4, 3))
        limit = hard_attention_limit(part).as_matrix()
        m = float(logits.max()) + 40.0
        assert np.abs(hard_attention_surrogate(logits, part, m) - limit).max() < 1e-9

    def test_edit_rows_tie_within_column(self):
        rng = np.random.default_rng(11)
        part = RegionPartition.contiguous(5, 3, n_keys=2)
        out = hard_attention_surrogate(rng.normal(size=(5, 2)), part, 4.0)
        edit = list(part.edit)
        for j in range(2):
            np.testing.assert_allclose(out[edit, j], out[edit[0], j], rtol=0, atol=1e-15)

    def test_limit_form_values(self):
        """|edit| = 2 over 4 queries: every column is (1/2, 1/2, 0, 0)."""
        part = RegionPartition.contiguous(4, 2, n_keys=3)
        cols = hard_attention_limit(part).as_matrix()
        np.testing.assert_array_equal(cols, np.array([[0.5], [0.5], [0.0], [0.0]]) @ np.ones((1, 3)))

    def test_limit_singleton_edit(self):
        part = RegionPartition.contiguous(3, 1, n_keys=1)
        np.testing.assert_array_equal(hard_attention_limit(part).column(), [1.0, 0.0, 0.0])

    def test_limit_columns_identical(self):
        part = RegionPartition.contiguous(6, 2, n_keys=5)
        cols = hard_attention_limit(part).as_matrix()
        for j in range(1, 5):
            np.testing.assert_array_equal(cols[:, j], cols[:, 0])

    def test_infinite_surrogate_rejected(self):
        with pytest.raises(DomainError):
            hard_attention_surrogate(np.zeros((2, 1)), simple_partition(2, 1, 1), math.inf)


class TestEsaJacobian:
    def test_finite_differences_match_analytic(self):
        """With the bias held fixed, each column's Jacobian is diag(a) - a a^T."""
        rng = np.random.default_rng(12)
        part = RegionPartition.contiguous(8, 2, n_keys=4)
        h = 1e-5
        for _ in range(5):
            logits = rng.normal(size=(8, 4))
            delta = 0.1 * logits.std()
            base = esa_attention_fixed_delta(logits, part, delta)
            for j in range(4):
                a = base[:, j]
                analytic = np.diag(a) - np.outer(a, a)
                fd = np.empty((8, 8))
                for k in range(8):
                    hi, lo = logits.copy(), logits.copy()
                    hi[k, j] += h
                    lo[k, j] -= h
                    fd[:, k] = (esa_attention_fixed_delta(hi, part, delta)[:, j]
                                - esa_attention_fixed_delta(lo, part, delta)[:, j]) / (2 * h)
                rel = np.abs(fd - analytic) / np.abs(analytic)
                assert rel.max() < 1e-6
