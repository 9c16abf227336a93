import json
import random
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.stats import chisquare

from oracles import brute_audit
from privht.achievability import build_tables, exact_privacy_profile
from privht.protocol import (
    BudgetExceeded,
    OTCorrelation,
    ProtocolError,
    ProtocolFormatError,
    ProtocolSpec,
    audit,
    build_and_reduction,
    cleartext_table,
    coin_flip,
    decode_sequence,
    encode_sequence,
    enumerate_ot,
    load_protocol,
    measure_and_security,
    no_communication,
    protocol_from_dict,
    random_protocol,
    randomized_response,
    required_ot,
    reveal_equality,
    sample_ot,
    secure_table_eval,
    sequence_prior,
    verify_theorem6,
)
from privht.protocol.ot import MAX_EXACT_OT
from privht.protocol.secure_eval import as_prob_table
from privht.protocol.toys import bit_width

AND = [[0, 0], [0, 1]]
XOR = [[0, 1], [1, 0]]
HALF = [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]]

LEAK_FIRST_BIT = {
    "name": "leak-first-bit",
    "parties": ["A", "B"],
    "input_sizes": [4, 4],
    "ot_count": 0,
    "tapes": {"A": 0, "B": 0},
    "schedule": ["A", "B"],
    "next_message": {"0": {"0||": 0, "1||": 0, "*||": 1},
                     "1": {"*||0": 0, "*||1": 1}},
    "decisions": {"A": {"*": 0}, "B": {"*|*|*1": 1, "*": 0}},
}


class TestOT:
    def test_correlation_invariant(self):
        for c in sample_ot(200, seed=1):
            assert c.rb == (c.r1 if c.b else c.r0)

    def test_bad_correlation(self):
        with pytest.raises(ValueError):
            OTCorrelation(0, 1, 1, 0)

    def test_enumerate_single(self):
        items = list(enumerate_ot(1))
        assert len(items) == 8 and all(w == F(1, 8) for w, _ in items)
        assert len({c[0].code for _, c in items}) == 8

    def test_enumerate_budget(self):
        with pytest.raises(OverflowError):
            next(enumerate_ot(MAX_EXACT_OT + 1))
        with pytest.raises(ValueError):
            next(enumerate_ot(-1))

    def test_sampling_is_seeded(self):
        assert sample_ot(20, seed=9) == sample_ot(20, seed=9)

    def test_sampled_marginal_uniform(self):
        codes = [c.code for c in sample_ot(100_000, seed=0)]
        counts = np.bincount(codes, minlength=8)
        assert chisquare(counts).pvalue > 1e-3

    def test_halves(self):
        c = OTCorrelation.from_code(0b110)
        assert c.sender_half == (0, 1) and c.receiver_half == (1, 1)


class TestSpec:
    def test_sequence_codes_round_trip(self):
        for i in range(27):
            assert encode_sequence(decode_sequence(i, 3, 3), 3) == i
        assert decode_sequence(1, 2, 3) == (0, 0, 1)

    def test_prior_is_normalized(self, three_point):
        g, G = sequence_prior(three_point, 2, 0)
        assert sum(map(sum, g)) == G
        assert F(g[0][1], G) == three_point.p0[0, 0] * three_point.p0[0, 1]

    def test_validation(self):
        with pytest.raises(ProtocolError):
            ProtocolSpec("bad", (2, 2), ("C",), {}, {"A": None, "B": None})
        with pytest.raises(ProtocolError):
            ProtocolSpec("bad", (2, 2), ("A",), {}, {"A": None, "B": None})
        with pytest.raises(ProtocolError):
            ProtocolSpec("bad", (2, 2), (), {}, {"A": None})

    def test_budget_guard(self):
        p = secure_table_eval(AND, AND)
        with pytest.raises(BudgetExceeded):
            p.decision_counts(budget=10)

    def test_non_bit_message_rejected(self):
        p = ProtocolSpec("twos", (1, 1), ("A",), {"A": lambda s, x, r, pre: np.full(len(x), 2)},
                         {"A": lambda x, r, t: 0, "B": lambda y, r, t: 0})
        with pytest.raises(ProtocolError):
            p.decision_counts()

    @pytest.mark.parametrize("seed", range(8))
    def test_transcripts_replay(self, seed):
        rng = random.Random(seed)
        p = random_protocol(rng, (2, 3), rounds=3, tape_a=(2,), tape_b=(3,), ot_count=1)
        for c in p.chunks():
            assert p.replay_consistent(c.x, c.y, c.ra, c.rb, c.transcript)
            flipped = c.transcript.copy()
            flipped[:, 0] ^= 1
            assert not p.replay_consistent(c.x, c.y, c.ra, c.rb, flipped)

    def test_sampling_matches_support(self):
        p = coin_flip((2, 2))
        tr, da, db = p.sample(0, 1, 1000, np.random.default_rng(4))
        assert set(da.tolist()) == {0, 1} and tr.shape == (1000, 0)
        again = p.sample(0, 1, 1000, np.random.default_rng(4))
        assert np.array_equal(again[1], da)


class TestSecureEval:
    def test_and_is_perfectly_correct(self):
        pa, pb = secure_table_eval(AND, AND).decision_probabilities()
        assert pa == pb == [[0, 0], [0, 1]]

    def test_required_ot(self):
        assert required_ot((2, 2)) == 2
        assert required_ot((4, 4)) == 6
        assert secure_table_eval(AND, XOR).ot_count == 2

    def test_randomized_half(self):
        pa, pb = secure_table_eval(HALF, HALF).decision_probabilities()
        assert all(v == F(1, 2) for row in pa + pb for v in row)
        assert verify_theorem6(secure_table_eval(HALF, HALF), HALF, HALF)

    def test_constant_table_views_do_not_depend_on_other_input(self):
        zero = [[0, 0], [0, 0]]
        rep = verify_theorem6(secure_table_eval(zero, zero), zero, zero)
        assert rep.passed and rep.counterexample is None

    def test_bad_tables(self):
        with pytest.raises(ValueError):
            as_prob_table([[F(3, 2), 0], [0, 0]])
        with pytest.raises(ValueError):
            secure_table_eval(AND, [[0, 1, 0], [1, 0, 1]])

    def test_xor_rectangular(self):
        t = [[0, 1, 1], [1, 0, F(1, 3)]]
        p = secure_table_eval(t, t)
        assert p.input_sizes == (2, 3)
        assert verify_theorem6(p, t, t)

    def test_cleartext_fails_on_bob_side(self):
        rep = verify_theorem6(cleartext_table(AND, AND), AND, AND)
        assert not rep.passed
        assert "B-view" in rep.counterexample

    def test_leak_to_alice_fails_on_alice_side(self):
        zero = [[0, 0], [0, 0]]
        leak = protocol_from_dict({
            "input_sizes": [2, 2], "schedule": ["B"],
            "next_message": {"0": {"0||": 0, "1||": 1}},
            "decisions": {"A": {"*": 0}, "B": {"*": 0}},
        })
        rep = verify_theorem6(leak, zero, zero)
        assert not rep.passed and "A-view" in rep.counterexample

    def test_wrong_outputs_fail(self):
        rep = verify_theorem6(secure_table_eval(AND, AND), XOR, AND)
        assert not rep.passed


class TestAudit:
    def test_silent_constant(self, three_point):
        rep = audit(no_communication((2, 2)), three_point, 1)
        assert rep.mu("strict") == 0 and rep.mu("weak") == 0
        assert rep.delta["A"] == {0: 0, 1: 1}
        assert rep.delta_max == 1

    def test_reveal_equality_at_n3(self, diagonal):
        rep = audit(reveal_equality(8), diagonal, 3)
        assert rep.delta["A"][0] == F(1, 8)
        assert rep.delta["A"][1] == 0
        assert rep.mu_strict["B"][0] >= F(3, 4)

    def test_domain_mismatch(self, three_point):
        with pytest.raises(ProtocolError):
            audit(no_communication((3, 3)), three_point, 1)

    def test_report_serializes(self, three_point):
        rep = audit(coin_flip((2, 2)), three_point, 1, keep_curves=True)
        doc = json.loads(json.dumps(rep.to_dict()))
        assert doc["summary"]["delta"] == "1/2"
        assert doc["curves"]["A"]["0"]

    @pytest.mark.parametrize("seed", range(10))
    def test_random_protocols_match_oracle(self, three_point, seed):
        rng = random.Random(100 + seed)
        n = 1 if seed < 6 else 2
        sizes = (2 ** n, 2 ** n)
        p = random_protocol(rng, sizes, rounds=rng.randint(1, 3), tape_a=(2,), tape_b=(rng.randint(1, 3),),
                            ot_count=rng.randint(0, 1))
        self._compare(p, three_point, n)

    @pytest.mark.parametrize("factory,n", [
        (lambda: reveal_equality(2), 1),
        (lambda: reveal_equality(4), 2),
        (lambda: randomized_response(1, F(1, 4)), 1),
        (lambda: randomized_response(2, F(1, 3)), 2),
        (lambda: coin_flip((4, 4)), 2),
        (lambda: secure_table_eval(AND, XOR), 1),
    ])
    def test_fleet_matches_oracle(self, diagonal, three_point, factory, n):
        for h in (diagonal, three_point):
            self._compare(factory(), h, n)

    @staticmethod
    def _compare(p, h, n):
        rep = audit(p, h, n)
        ref = brute_audit(p, h, n)
        for party in "AB":
            for theta in (0, 1):
                r = ref[party][theta]
                assert rep.delta[party][theta] == r["delta"]
                assert rep.mu_strict[party][theta] == r["mu_strict"]
                assert rep.mu_weak[party][theta] == r["mu_weak"]
                assert rep.avg_tv[party][theta] == r["avg"]
                for o, v in r["per_input"].items():
                    assert rep.avg_tv_per_input[party][theta][o] == v
                # pointwise privacy implies the pooled version
                assert rep.mu_weak[party][theta] <= rep.mu_strict[party][theta]

    @pytest.mark.slow
    def test_secure_eval_of_type_tables_matches_table_privacy(self, three_point):
        ta, tb = build_tables(three_point, 0.4, 0.25, 2)
        rep = audit(secure_table_eval(ta, tb), three_point, 2)
        for theta in (0, 1):
            assert rep.mu_strict["A"][theta] == exact_privacy_profile(ta, three_point, theta).mu
            assert rep.mu_strict["B"][theta] == exact_privacy_profile(tb, three_point, theta).mu
            assert rep.delta["A"][theta] <= 1


class TestAndReduction:
    def test_reveal_equality(self):
        sec = measure_and_security(build_and_reduction(reveal_equality(8), 3))
        assert sec.err_max == F(1, 8)
        assert sec.tv_b == F(7, 8)
        assert sec.tv_a == F(7, 32)
        assert sec.errors[("A", 1, 1)] == 0

    def test_ideal_and(self):
        sec = measure_and_security(secure_table_eval(AND, AND))
        assert sec.err_max == 0 and sec.tv_a == 0 and sec.tv_b == 0

    def test_rejects_non_binary_inner(self):
        with pytest.raises(ProtocolError):
            build_and_reduction(reveal_equality(3), 1)

    def test_measure_needs_bits(self):
        with pytest.raises(ProtocolError):
            measure_and_security(reveal_equality(4))

    def test_coupling_on_one_one(self):
        # u = v = 1 runs the inner protocol on X = Y = Z, so equality always holds
        p = build_and_reduction(reveal_equality(4), 2)
        pa, pb = p.decision_probabilities()
        assert pa[1][1] == pb[1][1] == 1
        assert pa[0][0] == F(1, 4)

    def test_serializes(self):
        doc = measure_and_security(build_and_reduction(reveal_equality(2), 1)).to_dict()
        assert doc["err_max"] == "1/2" and "A:u=0,v=0" in doc["errors"]


class TestProtocolFiles:
    def test_table_driven_example(self):
        p = protocol_from_dict(LEAK_FIRST_BIT)
        pa, pb = p.decision_probabilities()
        # Bob outputs the high bit of x
        assert pb == [[0] * 4, [0] * 4, [1] * 4, [1] * 4]
        assert pa == [[0] * 4] * 4

    def test_missing_rule_names_state(self):
        doc = json.loads(json.dumps(LEAK_FIRST_BIT))
        doc["next_message"]["0"] = {"0||": 0}
        with pytest.raises(ProtocolError, match="next_message.0.*'1||'"):
            protocol_from_dict(doc).decision_counts()

    def test_schema_error_has_field_path(self):
        doc = json.loads(json.dumps(LEAK_FIRST_BIT))
        doc["schedule"] = ["A", "C"]
        with pytest.raises(ProtocolFormatError, match=r"\$\.schedule\[1\]"):
            protocol_from_dict(doc)

    def test_missing_step(self):
        doc = json.loads(json.dumps(LEAK_FIRST_BIT))
        del doc["next_message"]["1"]
        with pytest.raises(ProtocolFormatError, match="step 1"):
            protocol_from_dict(doc)

    def test_json_syntax_error_has_line(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{\n  "construction": "secure-eval",\n  "tables": \n}')
        with pytest.raises(ProtocolFormatError, match="line 4"):
            load_protocol(path)

    def test_constructions(self, three_point, tmp_path):
        path = tmp_path / "and.json"
        path.write_text(json.dumps({"construction": "secure-eval", "tables": {"A": AND, "B": AND}}))
        assert load_protocol(path).ot_count == 2
        p = protocol_from_dict({"construction": "achievability-secure-eval", "alpha": 0.4, "beta": 0.25},
                               three_point, 2)
        assert p.input_sizes == (4, 4)
        assert protocol_from_dict({"construction": "randomized-response", "flip": "1/3"}, n=2).input_sizes == (4, 4)
        assert protocol_from_dict({"construction": "coin-flip"}, three_point, 1).input_sizes == (2, 2)
        with pytest.raises(ProtocolFormatError, match="sample size"):
            protocol_from_dict({"construction": "randomized-response"})
        with pytest.raises(ProtocolFormatError):
            protocol_from_dict({"construction": "secure-eval"})

    def test_bit_width(self):
        assert [bit_width(s) for s in (1, 2, 3, 4, 5, 8)] == [0, 1, 2, 2, 3, 3]
