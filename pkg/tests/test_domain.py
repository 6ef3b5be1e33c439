"""Domain vocabulary: concepts, databases, errors, dichotomies, sampling."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from dpmulti.domain import (
    PARITY,
    POINT,
    THRESH,
    Concept,
    ConceptClass,
    Distribution,
    EmptyDatabaseError,
    LabeledDistribution,
    MultiLabeledDatabase,
    Universe,
    UniverseMismatchError,
    dichotomy_projection,
    empirical_error,
    evaluate,
    evaluate_many,
    generalization_error,
    load_database,
    parity,
    point,
    sample_database,
    save_database,
    thresh,
    vc_sample_size,
    xor_evaluate,
    zero,
)
from dpmulti.rng import stream

U5 = Universe.indexed(5)
U3 = Universe.indexed(3)
U4 = Universe.indexed(4)
B2 = Universe.bitvectors(2)


class TestEvaluate:
    def test_point(self):
        assert evaluate(point(U5, 2), 2) == 1
        assert evaluate(point(U5, 2), 3) == 0

    def test_thresh_prefix(self):
        assert [evaluate(thresh(U5, 2), x) for x in range(5)] == [1, 1, 1, 0, 0]

    def test_parity_inner_product(self):
        # <(1,1), (1,1)> = 1*1 + 1*1 = 0 mod 2
        assert evaluate(parity(B2, 0b11), 0b11) == 0
        assert evaluate(parity(B2, 0b01), 0b11) == 1

    def test_zero_always_zero(self):
        assert all(evaluate(zero(U5), x) == 0 for x in range(5))

    def test_out_of_universe_rejected(self):
        with pytest.raises(ValueError):
            evaluate(point(U5, 2), 7)

    def test_vectorized_matches_scalar(self):
        rng = stream(1, 0)
        xs = rng.integers(0, 4, size=50)
        for c in (point(B2, 2), thresh(B2, 1), parity(B2, 3), zero(B2)):
            assert (evaluate_many(c, xs) == [evaluate(c, int(x)) for x in xs]).all()

    def test_parity_linearity(self):
        rng = stream(2, 0)
        u = Universe.bitvectors(6)
        for _ in range(50):
            a, b, x = (int(v) for v in rng.integers(0, 64, size=3))
            assert evaluate(parity(u, a ^ b), x) == evaluate(parity(u, a), x) ^ evaluate(parity(u, b), x)


class TestXor:
    def test_self_xor_is_zero(self):
        f = thresh(U5, 3)
        assert all(xor_evaluate(f, f, x) == 0 for x in range(5))

    def test_point_pair(self):
        f, g = point(U3, 0), point(U3, 1)
        assert [xor_evaluate(f, g, x) for x in range(3)] == [1, 1, 0]

    def test_thresh_pair_interval(self):
        f, g = thresh(U5, 1), thresh(U5, 3)
        assert [xor_evaluate(f, g, x) for x in range(5)] == [0, 0, 1, 1, 0]

    def test_universe_mismatch(self):
        with pytest.raises(UniverseMismatchError):
            xor_evaluate(point(U5, 0), point(U3, 0), 0)


class TestEmpiricalError:
    def test_consistent_labels(self):
        c = point(U5, 1)
        db = MultiLabeledDatabase.from_rows(U5, [(x, [evaluate(c, x)]) for x in [0, 1, 1, 4]])
        assert empirical_error(db.view(0), c) == 0

    def test_counted_mismatches(self):
        db = MultiLabeledDatabase.from_rows(U5, [(0, [1]), (1, [0]), (2, [1]), (3, [1])])
        assert empirical_error(db.view(0), point(U5, 2)) == Fraction(2, 4)

    def test_zero_vs_all_ones(self):
        db = MultiLabeledDatabase.from_rows(U5, [(x, [1]) for x in range(5)])
        assert empirical_error(db.view(0), zero(U5)) == 1

    def test_error_times_n_is_integer(self):
        rng = stream(3, 0)
        for _ in range(20):
            xs = rng.integers(0, 5, size=17)
            ys = rng.integers(0, 2, size=(17, 1))
            db = MultiLabeledDatabase(U5, xs, ys.astype(np.uint8))
            err = empirical_error(db.view(0), thresh(U5, 2))
            assert (err * 17).denominator == 1
            assert 0 <= err <= 1

    def test_empty_database(self):
        db = MultiLabeledDatabase(U5, np.array([], dtype=np.int64), np.zeros((0, 1), dtype=np.uint8))
        with pytest.raises(EmptyDatabaseError):
            empirical_error(db.view(0), zero(U5))


class TestGeneralizationError:
    def test_identical_concepts(self):
        d = Distribution.uniform(U5)
        assert generalization_error(d, thresh(U5, 2), thresh(U5, 2)) == 0.0

    def test_distinct_parities_half(self):
        u = Universe.bitvectors(4)
        d = Distribution.uniform(u)
        rng = stream(4, 0)
        for _ in range(10):
            a, b = (int(v) for v in rng.integers(0, 16, size=2))
            if a == b:
                continue
            assert generalization_error(d, parity(u, a), parity(u, b)) == 0.5

    def test_point_vs_zero(self):
        assert generalization_error(Distribution.uniform(U4), point(U4, 0), zero(U4)) == 0.25

    def test_matches_empirical_limit(self):
        # Empirical error on 50k samples sits within 0.02 of the exact value
        # (9+ sigma of the binomial spread, so the seeded check cannot flake).
        u = Universe.indexed(8)
        for trial in range(10):
            rng = stream(5, trial)
            d = Distribution.from_weights(u, rng.random(8) + 0.05)
            c = point(u, int(rng.integers(0, 8)))
            h = thresh(u, int(rng.integers(0, 8)))
            exact = generalization_error(d, c, h)
            db = sample_database(d, [c], 50_000, rng)
            emp = float(np.count_nonzero(evaluate_many(h, db.xs) != db.labels[:, 0])) / db.n
            assert abs(emp - exact) < 0.02


class TestDichotomyProjection:
    def test_empty_points(self):
        proj = dichotomy_projection(ConceptClass(POINT, U3), [])
        assert proj == {(): point(U3, 0)}

    def test_point_example(self):
        proj = dichotomy_projection(ConceptClass(POINT, U3), [0, 1])
        assert set(proj) == {(1, 0), (0, 1), (0, 0)}
        assert proj[(1, 0)].param == 0
        assert proj[(0, 1)].param == 1
        assert proj[(0, 0)].param == 2

    def test_thresh_example(self):
        proj = dichotomy_projection(ConceptClass(THRESH, U3), [0, 2])
        assert set(proj) == {(1, 0), (1, 1)}

    def test_witnesses_realize_their_dichotomy(self):
        rng = stream(6, 0)
        for kind in (POINT, THRESH):
            cclass = ConceptClass(kind, Universe.indexed(9))
            pts = [int(v) for v in rng.integers(0, 9, size=4)]
            for labeling, witness in dichotomy_projection(cclass, pts).items():
                assert tuple(evaluate(witness, p) for p in pts) == labeling

    def test_complete_against_enumeration(self):
        rng = stream(6, 1)
        for kind in (POINT, THRESH):
            cclass = ConceptClass(kind, Universe.indexed(11))
            pts = [int(v) for v in rng.integers(0, 11, size=5)]
            brute = {tuple(evaluate(c, p) for p in pts) for c in cclass.concepts()}
            assert set(dichotomy_projection(cclass, pts)) == brute

    def test_cardinality_bounds(self):
        for kind in (POINT, THRESH):
            for size in (4, 9, 16):
                cclass = ConceptClass(kind, Universe.indexed(size))
                pts = list(range(0, size, 2))
                proj = dichotomy_projection(cclass, pts)
                assert len(proj) <= min(size, 2 ** len(pts))
                if kind == POINT:
                    assert len(proj) == min(size, len(pts) + 1)

    def test_parity_cardinality_is_spanned_subspace(self):
        # Parities realize exactly 2^rank(B) labelings of B.
        u = Universe.bitvectors(4)
        cclass = ConceptClass(PARITY, u)
        rng = stream(6, 2)
        for _ in range(15):
            pts = [int(p) for p in rng.integers(0, 16, size=int(rng.integers(1, 6)))]
            proj = dichotomy_projection(cclass, pts)
            assert len(proj) <= min(len(cclass), 2 ** len(pts))
            assert (len(proj) & (len(proj) - 1)) == 0  # power of two


class TestShatterCertificates:
    """VC dimensions reported to callers, certified by brute force."""

    @staticmethod
    def _shattered(cclass, pts):
        return len(dichotomy_projection(cclass, pts)) == 2 ** len(pts)

    @pytest.mark.parametrize("kind", [POINT, THRESH])
    def test_indexed_classes_have_vc_one(self, kind):
        cclass = ConceptClass(kind, Universe.indexed(16))
        assert cclass.vc_dim == 1
        # Element 0 is labeled 1 by every threshold, so the witness set is {1}.
        assert self._shattered(cclass, [1])
        assert not any(
            self._shattered(cclass, list(pair)) for pair in itertools.combinations(range(16), 2)
        )

    @pytest.mark.parametrize("bits", [3, 4])
    def test_parity_vc_is_bit_width(self, bits):
        u = Universe.bitvectors(bits)
        cclass = ConceptClass(PARITY, u)
        assert cclass.vc_dim == bits
        basis = [1 << i for i in range(bits)]
        assert self._shattered(cclass, basis)
        assert not any(
            self._shattered(cclass, list(sub))
            for sub in itertools.combinations(range(u.size), bits + 1)
        )


class TestSampling:
    def test_point_mass_degenerate(self):
        d = Distribution.point_mass(U5, 3)
        db = sample_database(d, [point(U5, 3)], 40, stream(7, 0))
        assert (db.xs == 3).all()
        assert (db.labels == 1).all()

    def test_unlabeled_k0(self):
        db = sample_database(Distribution.uniform(U5), [], 10, stream(7, 1))
        assert db.k == 0 and db.labels.shape == (10, 0)

    def test_fixed_seed_reproducible(self):
        d = Distribution.uniform(U5)
        concepts = [thresh(U5, 2), point(U5, 4)]
        a = sample_database(d, concepts, 100, stream(7, 2))
        b = sample_database(d, concepts, 100, stream(7, 2))
        assert (a.xs == b.xs).all() and (a.labels == b.labels).all()

    def test_labels_consistent_with_concepts(self):
        d = Distribution.uniform(U5)
        c = thresh(U5, 1)
        db = sample_database(d, [c], 200, stream(7, 3))
        assert (db.labels[:, 0] == evaluate_many(c, db.xs)).all()


class TestLabeledDistribution:
    def test_realizable_matches_concept_labels(self):
        d = Distribution.uniform(U4)
        ld = LabeledDistribution.realizable(d, [point(U4, 1), thresh(U4, 2)])
        db = ld.sample(300, stream(8, 0))
        assert (db.labels[:, 0] == evaluate_many(point(U4, 1), db.xs)).all()
        assert (db.labels[:, 1] == evaluate_many(thresh(U4, 2), db.xs)).all()

    def test_marginal_error_matches_montecarlo(self):
        d = Distribution.uniform(U4)
        probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5], [0.0, 1.0]])
        ld = LabeledDistribution.from_label_probs(d, probs)
        h = thresh(U4, 1)
        exact = ld.marginal_error(0, h)
        db = ld.sample(40_000, stream(8, 1))
        emp = float(np.count_nonzero(evaluate_many(h, db.xs) != db.labels[:, 0])) / db.n
        assert abs(exact - emp) < 0.02


class TestVcSampleSize:
    def test_realizable_example(self):
        assert vc_sample_size(1, 0.1, 0.1, "realizable") == 6940

    def test_agnostic_example(self):
        expected = math.ceil(256 * (math.log(12) + math.log(16)))
        assert vc_sample_size(1, 0.5, 0.5, "agnostic") == expected

    def test_monotone_in_alpha(self):
        assert vc_sample_size(1, 0.05, 0.1) > vc_sample_size(1, 0.1, 0.1)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            vc_sample_size(0, 0.1, 0.1)
        with pytest.raises(ValueError):
            vc_sample_size(1, 1.5, 0.1)


class TestDatabaseFiles:
    def test_round_trip(self, tmp_path):
        db = sample_database(Distribution.uniform(U5), [thresh(U5, 2), point(U5, 0)], 25, stream(9, 0))
        path = tmp_path / "db.txt"
        save_database(db, path)
        back = load_database(path)
        assert back.universe == db.universe
        assert (back.xs == db.xs).all() and (back.labels == db.labels).all()

    def test_bitvector_round_trip(self, tmp_path):
        u = Universe.bitvectors(3)
        db = sample_database(Distribution.uniform(u), [parity(u, 5)], 10, stream(9, 1))
        path = tmp_path / "db.txt"
        save_database(db, path)
        assert load_database(path).universe.bit_width == 3

    def test_header_format(self, tmp_path):
        db = MultiLabeledDatabase.from_rows(U3, [(0, [1, 0]), (2, [0, 1])])
        path = tmp_path / "db.txt"
        save_database(db, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# universe=3 k=2"
        assert lines[1] == "0 1 0"

    def test_bad_row_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# universe=3 k=2\n0 1\n")
        with pytest.raises(ValueError, match="bad.txt:2"):
            load_database(path)


class TestValidation:
    def test_universe_bounds(self):
        with pytest.raises(ValueError):
            Universe.indexed(1)
        with pytest.raises(ValueError):
            Universe.bitvectors(21)

    def test_parity_needs_bitvector_universe(self):
        with pytest.raises(ValueError):
            parity(U5, 1)

    def test_concept_param_range(self):
        with pytest.raises(ValueError):
            point(U3, 3)
        with pytest.raises(ValueError):
            Concept("zero", U3, 1)

    def test_pmf_normalization(self):
        with pytest.raises(ValueError):
            Distribution(U3, np.array([0.5, 0.5, 0.1]))
