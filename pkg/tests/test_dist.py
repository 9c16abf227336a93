import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privht.dist import (
    Alphabet,
    CondPMF,
    Divergence,
    EmpiricalType,
    HypothesisPair,
    JointPMF,
    LogBounds,
    cond_kl,
    cond_type_class_prob,
    cond_type_class_prob_bounds,
    conditional_y_given_x,
    count_joint_types,
    enumerate_joint_types,
    kl,
    marginal_x,
    marginal_y,
    multinomial,
    parse_probability,
    tv,
    type_class_size_bounds,
)
from strategies import rational_pmfs

UNIFORM_ROWS = CondPMF(((F(1, 2), F(1, 2)), (F(1, 2), F(1, 2))))


class TestConstruction:
    def test_rational_masses_must_sum_to_one(self):
        with pytest.raises(ValueError, match="exactly 1"):
            JointPMF([[F(1, 2), F(1, 3)], [0, 0]])

    def test_float_masses_renormalized_within_tolerance(self):
        p = JointPMF([[0.5, 0.25], [0.25, 1e-10]])
        assert not p.exact
        assert math.isclose(sum(p.flat()), 1.0, abs_tol=1e-15)

    def test_float_masses_far_from_one_rejected(self):
        with pytest.raises(ValueError):
            JointPMF([[0.5, 0.25], [0.2, 0.0]])

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            JointPMF([[F(3, 2), F(-1, 2)]])

    def test_strings_parse_exactly(self):
        p = JointPMF([["1/3", "1/3"], ["0", "1/3"]])
        assert p[1, 1] == F(1, 3) and p.exact

    def test_parse_probability_decimal_is_exact(self):
        assert parse_probability("0.1") == F(1, 10)
        with pytest.raises(ValueError):
            parse_probability("one half")
        with pytest.raises(TypeError):
            parse_probability(True)

    def test_alphabet_symbols_distinct(self):
        with pytest.raises(ValueError):
            Alphabet(("a", "a"))
        assert Alphabet.of_size(3).size == 3

    def test_hypothesis_pair_shapes_must_agree(self):
        with pytest.raises(ValueError):
            HypothesisPair(JointPMF([[F(1)]]), JointPMF([[F(1, 2), F(1, 2)]]))


class TestMarginals:
    def test_three_point_null_marginal(self, three_point):
        assert marginal_x(three_point.p0) == (F(2, 3), F(1, 3))
        assert marginal_y(three_point.p0) == (F(1, 3), F(2, 3))

    def test_product_marginal(self):
        p = JointPMF.product((F(1, 4), F(3, 4)), (F(1, 2), F(1, 2)))
        assert marginal_x(p) == (F(1, 4), F(3, 4))

    def test_alternate_conditional_row(self, three_point):
        assert conditional_y_given_x(three_point.p1).rows[1] == (0, 1)

    def test_conditional_undefined_where_marginal_zero(self):
        c = conditional_y_given_x(JointPMF([[F(1, 2), F(1, 2)], [0, 0]]))
        assert not c.defined(1)
        with pytest.raises(KeyError):
            c[1, 0]


class TestDivergences:
    def test_kl_self_is_zero(self, three_point):
        assert kl(three_point.p0, three_point.p0).is_zero()

    def test_kl_equal_marginals(self, three_point):
        assert kl(marginal_x(three_point.p1), marginal_x(three_point.p0)).is_zero()

    def test_kl_support_violation(self, three_point):
        d = kl(JointPMF([[0, 1], [0, 0]]), three_point.p1)
        assert d.infinite and d.value == math.inf

    def test_kl_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl((F(1, 2), F(1, 2)), (F(1),))

    def test_kl_known_value(self, three_point):
        # alternate vs null: (2/3) log2 2 + (1/3) log2 1
        assert kl(three_point.p1, three_point.p0) == Divergence([(F(2, 3), F(2))])
        assert math.isclose(kl(three_point.p1, three_point.p0).value, 2 / 3)

    def test_float_mode_kl(self, three_point):
        v = kl(three_point.p1.to_float(), three_point.p0.to_float())
        assert isinstance(v, float) and math.isclose(v, 2 / 3)

    def test_cond_kl_identical_rows(self, three_point):
        c = conditional_y_given_x(three_point.p0)
        assert cond_kl(c, c, (F(1, 2), F(1, 2))).is_zero()

    def test_cond_kl_point_mass_at_x1(self, three_point):
        q = CondPMF(((F(1), F(0)), (F(0), F(1))))
        d = cond_kl(q, conditional_y_given_x(three_point.p0), (F(0), F(1)))
        assert d.is_zero()

    def test_cond_kl_undefined_q_row(self, three_point):
        q = CondPMF((None, (F(0), F(1))))
        with pytest.raises(ValueError):
            cond_kl(q, conditional_y_given_x(three_point.p0), (F(1, 2), F(1, 2)))

    def test_divergence_exact_equality(self):
        assert Divergence([(F(1), F(4))]) == Divergence([(F(2), F(2))])
        assert Divergence([(F(1), F(4))]) != Divergence([(F(1), F(3))])

    def test_divergence_comparisons_with_tolerance(self):
        d = Divergence([(F(1), F(2))])
        assert d <= 1 and d >= 1 and not d < 1 and not d > 1
        assert Divergence.inf() > 1e300

    def test_composed_conditional_keeps_marginal_divergence(self, three_point):
        # Q_X composed with P_{Y|X} loses nothing beyond the marginal divergence
        qx = (F(1, 5), F(4, 5))
        for theta in (0, 1):
            p = three_point[theta]
            cond = conditional_y_given_x(p)
            q = JointPMF([[qx[x] * cond.rows[x][y] for y in range(2)] for x in range(2)])
            assert kl(q, p) == kl(qx, marginal_x(p))


class TestTV:
    def test_self(self):
        assert tv((F(1, 3), F(2, 3)), (F(1, 3), F(2, 3))) == 0

    def test_disjoint(self):
        assert tv((1, 0), (0, 1)) == 1

    def test_half(self):
        assert tv((1, 0), (F(1, 2), F(1, 2))) == F(1, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            tv((1, 0), (1,))

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(rational_pmfs((2, 2), full_support=True), rational_pmfs((2, 2), full_support=True))
    def test_pinsker_direction(self, p, q):
        bound = math.sqrt(kl(q, p).value * math.log(2) / 2)
        assert float(tv(p, q)) <= bound + 1e-12


class TestTypes:
    def test_single_cell(self):
        assert [t.counts for t in enumerate_joint_types(1, 1, 5)] == [((5,),)]

    def test_two_by_one(self):
        assert len(list(enumerate_joint_types(2, 1, 2))) == 3

    def test_two_by_two_n2(self):
        types = list(enumerate_joint_types(2, 2, 2))
        assert len(types) == 10 == count_joint_types(2, 2, 2)

    def test_lexicographic_and_resumable(self):
        full = [t.flat() for t in enumerate_joint_types(2, 2, 3)]
        assert full == sorted(full, reverse=True) or full == sorted(full)
        assert [t.flat() for t in enumerate_joint_types(2, 2, 3, 5, 9)] == full[5:9]

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            list(enumerate_joint_types(2, 2, 0))

    def test_type_of_sequences(self):
        q = EmpiricalType.of((0, 0, 1, 1), (0, 1, 0, 1), 2, 2)
        assert q.counts == ((1, 1), (1, 1))
        assert q.as_pmf()[0, 0] == F(1, 4)
        assert EmpiricalType.parse("counts=1,1;1,1") == q

    def test_class_sizes(self):
        q = EmpiricalType(((1, 1), (1, 1)))
        assert q.class_size() == 24
        assert q.conditional_class_size() == 4

    def test_multinomial(self):
        assert multinomial((2, 2, 2)) == 90


class TestBounds:
    def test_point_mass_size(self):
        b = type_class_size_bounds((3, 0), 3)
        assert b.exact == 0
        assert math.isclose(b.lower, -2 * math.log2(4)) and b.upper == 0
        assert b.contains()

    def test_balanced_binary(self):
        b = type_class_size_bounds((2, 2))
        assert math.isclose(b.exact, math.log2(6))
        assert math.isclose(b.lower, 4 - 2 * math.log2(5)) and b.upper == 4
        assert b.contains()

    def test_three_symbols(self):
        b = type_class_size_bounds((2, 2, 2))
        assert math.isclose(b.exact, math.log2(90)) and b.contains()

    def test_counts_must_match_n(self):
        with pytest.raises(ValueError):
            type_class_size_bounds((1, 1), 3)

    def test_conditional_prob_matching_rows(self):
        q = EmpiricalType(((2, 0), (0, 2)))
        p = CondPMF(((F(1), F(0)), (F(0), F(1))))
        b = cond_type_class_prob_bounds(q, p)
        assert b.upper == 0 and b.exact == 0 and b.contains()

    def test_conditional_prob_uniform_rows(self):
        q = EmpiricalType(((1, 1), (1, 1)))
        assert cond_type_class_prob(q, UNIFORM_ROWS) == F(1, 4)
        assert cond_type_class_prob(q, UNIFORM_ROWS, method="enumerate") == F(1, 4)
        assert cond_type_class_prob_bounds(q, UNIFORM_ROWS).contains()

    def test_conditional_prob_support_violation(self, three_point):
        q = EmpiricalType(((1, 1), (0, 1)))
        b = cond_type_class_prob_bounds(q, conditional_y_given_x(three_point.p1))
        assert b.exact == -math.inf and b.lower == b.upper == -math.inf and b.contains()

    def test_log_bounds_zero_probability(self):
        assert not LogBounds(-1.0, 0.0).contains(-math.inf)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            cond_type_class_prob(EmpiricalType(((1, 0), (0, 1))), UNIFORM_ROWS, method="guess")

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(st.integers(1, 6), st.data())
    def test_formula_matches_enumeration(self, n, data):
        flat = data.draw(st.lists(st.integers(0, n), min_size=4, max_size=4).filter(lambda v: sum(v) == n)
                         | st.just([n, 0, 0, 0]))
        q = EmpiricalType((flat[:2], flat[2:]))
        p = conditional_y_given_x(data.draw(rational_pmfs((2, 2), full_support=True)))
        assert cond_type_class_prob(q, p) == cond_type_class_prob(q, p, method="enumerate")
