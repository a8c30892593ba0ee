import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbqa_env.kb import neighbor_relations
from kbqa_env.rrcg import (
    GateDecision,
    RrcgConfig,
    Scored,
    Tier,
    default_similarity,
    describe,
    executable_relation,
    gate,
    score_candidates,
)

POB = "people.person.place_of_birth"


class TestSimilarity:
    def test_identical(self):
        assert default_similarity(POB, POB) == 1.0

    def test_disjoint(self):
        assert default_similarity("xyz", "abc.def.ghi") == 0.0

    def test_place_of_birth_pinned(self):
        # words: {place, of, birth} vs {people, person, place, of, birth} -> 3 shared of 3 + 5
        # trigrams: 12 of "place of birth" vs 26 of "people person place of birth", all 12 shared
        # Dice = 2 * (3 + 12) / (8 + 38) = 15/23
        s = default_similarity("place of birth", POB)
        assert 0.3 <= s < 1.0
        assert s == pytest.approx(15 / 23, abs=1e-15)

    def test_case_insensitive_equal(self):
        assert default_similarity("People.Person", "people.person") == 1.0

    def test_same_features_distinct_strings_below_one(self):
        a, b = "a.b", "a_b"
        assert default_similarity(a, b) < 1.0

    @given(st.text(min_size=1, max_size=30), st.text(min_size=1, max_size=30))
    def test_properties(self, a, b):
        s = default_similarity(a, b)
        assert 0.0 <= s <= 1.0
        assert s == default_similarity(b, a)
        assert (s == 1.0) == (a.lower() == b.lower())


class TestScoreCandidates:
    def test_exact_first(self):
        cands = {(POB, "in"), ("location.location.containedby", "out"), ("type.object.type", "out")}
        out = score_candidates(default_similarity, POB, cands)
        assert (out[0].relation, out[0].direction, out[0].score) == (POB, "in", 1.0)

    def test_inverse_exact(self):
        cands = {(POB, "in"), (POB, "out")}
        out = score_candidates(default_similarity, "^" + POB, cands)
        assert out[0].direction == "out" and out[0].score == 1.0 and out[0].executable == "^" + POB

    def test_empty(self):
        assert score_candidates(default_similarity, "x", set()) == []

    def test_ties_lexicographic(self):
        out = score_candidates(lambda a, b: 0.5, "x", {("b.b", "in"), ("a.a", "in"), ("a.a", "out")})
        assert [(s.relation, s.direction) for s in out] == [("a.a", "out"), ("a.a", "in"), ("b.b", "in")]

    def test_executable_relation(self):
        assert executable_relation("r.s", "out") == "^r.s"
        assert executable_relation("r.s", "in") == "r.s"


def one(score, rel="r.s", direction="in"):
    return [Scored(rel, direction, score)]


class TestGate:
    @pytest.mark.parametrize("score, tier", [
        (0.97, Tier.AUTO_VALIDATED), (0.95, Tier.AUTO_VALIDATED), (0.949999, Tier.TENTATIVE),
        (0.30, Tier.TENTATIVE), (0.299999, Tier.REJECTED), (0.29, Tier.REJECTED), (0.0, Tier.REJECTED),
    ])
    def test_tiers(self, score, tier):
        assert gate(one(score)).tier is tier

    def test_auto_replacement(self):
        d = gate(one(0.97, "a.b", "out"))
        assert d.replacement == "^a.b" and d.cues == ()

    def test_tentative_top_k(self):
        scored = [Scored(f"r.{i}", "in", 0.9 - i * 0.01) for i in range(8)]
        d = gate(scored, RrcgConfig(0.95, 0.3, 5))
        assert d.tier is Tier.TENTATIVE and d.replacement == "r.0" and len(d.cues) == 5

    def test_rejected_full_list(self):
        scored = [Scored(f"r.{i}", "in", 0.2 - i * 0.01) for i in range(8)]
        d = gate(scored)
        assert d.tier is Tier.REJECTED and d.replacement is None and len(d.cues) == 8

    def test_empty_rejected(self):
        d = gate([])
        assert d == GateDecision(Tier.REJECTED) and d.cues == ()

    @pytest.mark.parametrize("lo, hi, k", [(0.5, 0.5, 5), (-0.1, 0.9, 5), (0.3, 1.1, 5), (0.3, 0.9, 0)])
    def test_bad_config(self, lo, hi, k):
        with pytest.raises(ValueError):
            RrcgConfig(hi, lo, k)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.randoms())
    def test_partition_and_permutation(self, scores, rnd):
        scored = sorted((Scored(f"r.{i}", "in", s) for i, s in enumerate(scores)), key=lambda s: -s.score)
        d = gate(scored)
        top = scored[0].score
        expected = Tier.AUTO_VALIDATED if top >= 0.95 else Tier.TENTATIVE if top >= 0.3 else Tier.REJECTED
        assert d.tier is expected
        ties = [s for s in scored if s.score == top]
        rest = [s for s in scored if s.score != top]
        rnd.shuffle(ties)
        assert gate(ties + rest).tier is expected


class TestDescribe:
    def test_exact_auto_is_silent(self):
        d = gate(one(1.0, POB))
        assert describe(d, POB, {"m.20"}) == ""

    def test_auto_rewrite(self):
        d = gate(one(0.96, POB))
        assert describe(d, "pob", {"m.20"}) == f"[auto-validated] pob -> {POB} (score 0.960)"

    def test_tentative(self):
        d = gate([Scored("a.b", "in", 0.5), Scored("c.d", "out", 0.4)])
        assert describe(d, "ab", {"m.1"}) == "[tentative] ab -> a.b (score 0.500); candidates: a.b (0.500), ^c.d (0.400)"

    def test_rejected_lists_neighbors(self, fixture_kb):
        cands = neighbor_relations(fixture_kb, {"m.01"})
        d = gate(score_candidates(lambda a, b: 0.1, "nonexistent.rel", cands))
        text = describe(d, "nonexistent.rel", {"m.01"})
        assert d.tier is Tier.REJECTED and text.startswith("[rejected] no reliable match for nonexistent.rel")
        for r, direction in cands:
            assert executable_relation(r, direction) in text

    def test_no_neighbors(self):
        assert describe(gate([]), "x.y", {"m.9"}) == "[rejected] m.9 has no neighboring relations"
