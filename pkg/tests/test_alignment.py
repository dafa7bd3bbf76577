import itertools
import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbqe.alignment import (
    Delete,
    Insert,
    Match,
    Shift,
    Substitute,
    levenshtein_align,
    project,
    tercom_align,
)
from perturbqe.errors import InternalInvariantError


def edit_distance_oracle(ref, hyp):
    """Textbook recursive definition, memoized; independent of the DP+traceback."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
        )

    return d(len(ref), len(hyp))


def check_alignment_shape(alignment, ref_len, hyp_len):
    """Every ref index in exactly one Match/Substitute/Delete, every hyp index
    in exactly one Match/Substitute/Insert, cost = non-Match op count."""
    ref_seen = [0] * ref_len
    hyp_seen = [0] * hyp_len
    non_match = 0
    for op in alignment.ops:
        if isinstance(op, Match):
            ref_seen[op.ref_index] += 1
            hyp_seen[op.hyp_index] += 1
        elif isinstance(op, Substitute):
            ref_seen[op.ref_index] += 1
            hyp_seen[op.hyp_index] += 1
            non_match += 1
        elif isinstance(op, Delete):
            ref_seen[op.ref_index] += 1
            non_match += 1
        elif isinstance(op, Insert):
            hyp_seen[op.hyp_index] += 1
            non_match += 1
        else:
            assert isinstance(op, Shift)
            non_match += 1
    assert all(c == 1 for c in ref_seen)
    assert all(c == 1 for c in hyp_seen)
    assert alignment.cost == non_match


class TestLevenshtein:
    def test_identity(self):
        aln = levenshtein_align(["a", "b", "c"], ["a", "b", "c"])
        assert aln.cost == 0
        assert aln.ops == (Match(0, 0), Match(1, 1), Match(2, 2))

    def test_single_deletion(self):
        aln = levenshtein_align(["a", "b", "c"], ["a", "c"])
        assert aln.cost == 1
        assert aln.ops == (Match(0, 0), Delete(1), Match(2, 1))

    def test_empty_ref(self):
        aln = levenshtein_align([], ["x", "y"])
        assert aln.cost == 2
        assert aln.ops == (Insert(0), Insert(1))

    def test_empty_both(self):
        aln = levenshtein_align([], [])
        assert aln.cost == 0
        assert aln.ops == ()

    def test_exhaustive_small_against_oracle(self):
        alphabet = ("a", "b")
        seqs = []
        for length in range(4):
            seqs.extend(itertools.product(alphabet, repeat=length))
        for ref in seqs:
            for hyp in seqs:
                aln = levenshtein_align(ref, hyp)
                assert aln.cost == edit_distance_oracle(ref, hyp)
                check_alignment_shape(aln, len(ref), len(hyp))

    def test_determinism(self):
        ref = ["a", "b", "a", "c", "b"]
        hyp = ["b", "a", "c", "a"]
        first = levenshtein_align(ref, hyp)
        second = levenshtein_align(ref, hyp)
        assert first.ops == second.ops

    @given(
        st.lists(st.sampled_from("abc"), max_size=8),
        st.lists(st.sampled_from("abc"), max_size=8),
    )
    def test_cost_matches_oracle_and_shape(self, ref, hyp):
        aln = levenshtein_align(ref, hyp)
        assert aln.cost == edit_distance_oracle(tuple(ref), tuple(hyp))
        check_alignment_shape(aln, len(ref), len(hyp))


class TestTercom:
    def test_identity(self):
        aln = tercom_align(["a", "b"], ["a", "b"])
        assert aln.cost == 0
        assert aln.ops == (Match(0, 0), Match(1, 1))

    def test_crossing_blocks_shift(self):
        ref = ["a", "b", "c", "d"]
        hyp = ["c", "d", "a", "b"]
        aln = tercom_align(ref, hyp)
        assert aln.cost == 1
        assert len(aln.shifts) == 1
        assert levenshtein_align(ref, hyp).cost == 4

    def test_no_content_overlap_stays_substitutions(self):
        aln = tercom_align(["a", "b"], ["x", "y"])
        assert aln.cost == 2
        assert aln.ops == (Substitute(0, 0), Substitute(1, 1))

    def test_shift_projection_consistency(self):
        ref = ["a", "b", "c", "d"]
        hyp = ["c", "d", "a", "b"]
        aln = tercom_align(ref, hyp)
        assert project(aln, hyp, len(ref)).projected == ("a", "b", "c", "d")

    def test_determinism(self):
        rng = random.Random(99)
        for _ in range(50):
            ref = [rng.choice("abc") for _ in range(rng.randint(0, 12))]
            hyp = [rng.choice("abc") for _ in range(rng.randint(0, 12))]
            assert tercom_align(ref, hyp).ops == tercom_align(ref, hyp).ops

    @settings(max_examples=200)
    @given(
        st.lists(st.sampled_from("abc"), max_size=10),
        st.lists(st.sampled_from("abc"), max_size=10),
    )
    def test_never_worse_than_levenshtein(self, ref, hyp):
        assert tercom_align(ref, hyp).cost <= levenshtein_align(ref, hyp).cost

    @settings(max_examples=100)
    @given(
        st.lists(st.sampled_from("abc"), max_size=8),
        st.lists(st.sampled_from("abc"), max_size=8),
    )
    def test_projection_total_and_shape_correct(self, ref, hyp):
        aln = tercom_align(ref, hyp)
        variant = project(aln, hyp, len(ref))
        assert len(variant.projected) == len(ref)
        placed = sum(1 for tok in variant.projected if tok is not None)
        assert placed + variant.dropped_hyp_tokens == len(hyp)


class TestProject:
    def test_identity_alignment(self):
        hyp = ["x", "y", "z"]
        aln = levenshtein_align(hyp, hyp)
        variant = project(aln, hyp, 3)
        assert variant.projected == ("x", "y", "z")
        assert variant.dropped_hyp_tokens == 0

    def test_shorter_hypothesis_gets_empty_positions(self):
        ref = "Johns Frau ist Journalistin , die Quelle sagte .".split()
        hyp = "Toms Frau ist Journalistin .".split()
        aln = levenshtein_align(ref, hyp)
        variant = project(aln, hyp, len(ref))
        assert variant.projected[0] == "Toms"
        assert variant.projected[1:4] == ("Frau", "ist", "Journalistin")
        assert variant.projected[-1] == "."
        assert variant.projected[4:8] == (None, None, None, None)
        assert variant.dropped_hyp_tokens == 0

    def test_all_deletes(self):
        aln = levenshtein_align(["a", "b", "c"], [])
        variant = project(aln, [], 3)
        assert variant.projected == (None, None, None)

    def test_inserts_are_dropped_and_counted(self):
        ref = ["a"]
        hyp = ["a", "q", "r"]
        variant = project(levenshtein_align(ref, hyp), hyp, 1)
        assert variant.projected == ("a",)
        assert variant.dropped_hyp_tokens == 2

    def test_inconsistent_alignment_rejected(self):
        from perturbqe.alignment import Alignment

        bogus = Alignment(ops=(Match(0, 0), Match(0, 1)), cost=0)
        with pytest.raises(InternalInvariantError):
            project(bogus, ["x", "y"], 2)
