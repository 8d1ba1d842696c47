import pytest

from bellselftest.npa.monomials import (
    ALICE,
    BOB,
    ZERO,
    adjoint,
    adjoint_key,
    build_basis,
    canonical_form,
    concat,
    effect_terms,
    product_terms,
    symbol,
)


class TestCanonicalForm:
    def test_idempotence(self):
        a = symbol(ALICE, 0, 0)
        assert canonical_form((a, a)) == (a,)

    def test_orthogonality_same_setting(self):
        # distinct outcomes of the same setting annihilate (n_outcomes = 3)
        a0 = symbol(ALICE, 0, 1)
        a1 = symbol(ALICE, 1, 1)
        assert canonical_form((a0, a1)) is ZERO

    def test_commutation_b_past_a(self):
        b = symbol(BOB, 0, 0)
        a = symbol(ALICE, 0, 1)
        assert canonical_form((b, a)) == (a, b)

    def test_same_party_settings_do_not_commute(self):
        a0 = symbol(ALICE, 0, 0)
        a1 = symbol(ALICE, 0, 1)
        assert canonical_form((a0, a1)) == (a0, a1)
        assert canonical_form((a1, a0)) == (a1, a0)
        assert canonical_form((a0, a1)) != canonical_form((a1, a0))

    def test_idempotence_across_commuting_block(self):
        a = symbol(ALICE, 0, 0)
        b = symbol(BOB, 0, 0)
        assert canonical_form((a, b, a)) == (a, b)


class TestAdjoint:
    def test_reversal(self):
        a0 = symbol(ALICE, 0, 0)
        a1 = symbol(ALICE, 0, 1)
        assert adjoint((a0, a1)) == (a1, a0)

    def test_key_identifies_classes(self):
        a0 = symbol(ALICE, 0, 0)
        a1 = symbol(ALICE, 0, 1)
        assert adjoint_key((a0, a1)) == adjoint_key((a1, a0))

    def test_zero(self):
        assert adjoint(ZERO) is ZERO
        assert adjoint_key(ZERO) is ZERO


class TestBuildBasis:
    def test_level1_chsh(self):
        words = build_basis(2, 2, 2, 2, 1)
        assert len(words) == 5
        assert words[0] == ()

    def test_level2_chsh(self):
        words = build_basis(2, 2, 2, 2, 2)
        assert len(words) == 13
        by_len = {}
        for w in words:
            by_len.setdefault(len(w), []).append(w)
        assert len(by_len[0]) == 1 and len(by_len[1]) == 4
        pairs = by_len[2]
        aa = [w for w in pairs if all(s[0] == ALICE for s in w)]
        bb = [w for w in pairs if all(s[0] == BOB for s in w)]
        ab = [w for w in pairs if len({s[0] for s in w}) == 2]
        assert (len(aa), len(bb), len(ab)) == (2, 2, 4)

    def test_level1_three_outcomes(self):
        words = build_basis(1, 1, 3, 2, 1)
        # identity + two Alice effects (last eliminated) + one Bob effect
        alice_only = build_basis(1, 0, 3, 1, 1)
        assert len(alice_only) == 3
        assert len(words) == 4

    def test_deterministic_order(self):
        assert build_basis(2, 2, 2, 2, 2) == build_basis(2, 2, 2, 2, 2)

    def test_level3_size(self):
        assert len(build_basis(2, 2, 2, 2, 3)) == 25

    def test_level_validation(self):
        with pytest.raises(ValueError):
            build_basis(2, 2, 2, 2, 0)


class TestEffectTerms:
    def test_non_last_outcome(self):
        terms = effect_terms(ALICE, 0, 1, 2)
        assert terms == [(1.0, (symbol(ALICE, 0, 1),))]

    def test_last_outcome_completeness(self):
        terms = effect_terms(ALICE, 2, 0, 3)
        assert (1.0, ()) in terms
        assert (-1.0, (symbol(ALICE, 0, 0),)) in terms
        assert (-1.0, (symbol(ALICE, 1, 0),)) in terms

    def test_product_expansion(self):
        ta = effect_terms(ALICE, 1, 0, 2)   # 1 - A(0,0)
        tb = effect_terms(BOB, 1, 0, 2)     # 1 - B(0,0)
        prod = product_terms(ta, tb)
        a, b = symbol(ALICE, 0, 0), symbol(BOB, 0, 0)
        assert prod == {(): 1.0, (a,): -1.0, (b,): -1.0, (a, b): 1.0}


class TestConcat:
    def test_zero_absorbs(self):
        a = symbol(ALICE, 0, 0)
        assert concat(ZERO, (a,)) is ZERO
        assert concat((a,), ZERO) is ZERO
