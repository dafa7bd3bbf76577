import pytest
from hypothesis import given
from hypothesis import strategies as st

from perturbqe import postag
from perturbqe.core import TargetMode
from perturbqe.errors import DataError, InvalidInputError, ProviderError
from perturbqe.perturbation import (
    PerturbationSet,
    StaticLexiconProvider,
    TokenizedSentence,
    generate_replacements,
    select_targets,
    tag_pos,
)


def sentence(tokens, tags=None, sid="s"):
    return TokenizedSentence(
        sentence_id=sid,
        tokens=tuple(tokens),
        tags=tuple(tags) if tags else None,
    )


JOHN = sentence(
    ["John", "'s", "wife", "is", "a", "journalist", "."],
    ["NOUN", "PRT", "NOUN", "VERB", "DET", "NOUN", "PUNCT"],
)


class TestSelectTargets:
    def test_content_words(self):
        assert select_targets(JOHN, TargetMode.CONTENT_WORDS) == [0, 2, 3, 5]

    def test_all_tokens(self):
        assert select_targets(JOHN, TargetMode.ALL_TOKENS) == [0, 1, 2, 3, 4, 5, 6]

    def test_all_words_drops_punctuation(self):
        assert select_targets(JOHN, TargetMode.ALL_WORDS) == [0, 1, 2, 3, 4, 5]

    def test_content_words_without_tags_errors(self):
        untagged = sentence(["a", "b"])
        with pytest.raises(DataError):
            select_targets(untagged, TargetMode.CONTENT_WORDS)

    @given(st.lists(st.text(min_size=1, max_size=6), min_size=1, max_size=10))
    def test_mode_inclusion_chain(self, tokens):
        ts = sentence(tokens, postag.tag_tokens(tokens))
        content = set(select_targets(ts, TargetMode.CONTENT_WORDS))
        words = set(select_targets(ts, TargetMode.ALL_WORDS))
        everything = set(select_targets(ts, TargetMode.ALL_TOKENS))
        assert content <= words <= everything


class TestTagPos:
    def test_simple_sentence(self):
        ts = tag_pos("the cat sleeps .")
        assert ts.tokens == ("the", "cat", "sleeps", ".")
        assert ts.tags == ("DET", "NOUN", "VERB", "PUNCT")

    def test_empty_text_errors(self):
        with pytest.raises(DataError):
            tag_pos("")
        with pytest.raises(DataError):
            tag_pos("   ")

    def test_unknown_capitalized_and_verb_suffix(self):
        ts = tag_pos("John runs")
        assert ts.tokens == ("John", "runs")
        assert ts.tags == ("NOUN", "VERB")

    def test_unknown_lowercase_tags_x(self):
        ts = tag_pos("the blorf sleeps")
        assert ts.tags == ("DET", "X", "VERB")

    def test_clitics_are_split_and_tagged(self):
        ts = tag_pos("John's wife isn't here.")
        assert ts.tokens == ("John", "'s", "wife", "is", "n't", "here", ".")
        assert ts.tags[1] == "PRT"
        assert ts.tags[4] == "PRT"

    def test_numbers(self):
        ts = tag_pos("3.5 million people")
        assert ts.tags == ("NUM", "NUM", "NOUN")

    def test_join_reproduces_working_form(self):
        ts = tag_pos("the cat sleeps .")
        assert ts.text == "the cat sleeps ."


class FixedProvider:
    provider_id = "fixed"

    def __init__(self, table):
        self.table = table

    def candidates(self, tokens, mask_index, n):
        return list(self.table.get(tokens[mask_index], []))


class TestGenerateReplacements:
    def test_fixture_lookup(self):
        provider = FixedProvider({"John": ["Tom", "Mary", "Anna"]})
        pset = generate_replacements(JOHN, 0, 3, provider)
        assert pset.replacements == ("Tom", "Mary", "Anna")
        assert len(pset.variants) == 3
        for variant, rep in zip(pset.variants, pset.replacements):
            assert variant[0] == rep
            assert variant[1:] == JOHN.tokens[1:]

    def test_self_replacement_filtered(self):
        provider = FixedProvider({"John": ["John"]})
        pset = generate_replacements(JOHN, 0, 3, provider)
        assert len(pset) == 0

    def test_case_folded_self_replacement_filtered(self):
        provider = FixedProvider({"John": ["john", "JOHN", "Tom"]})
        pset = generate_replacements(JOHN, 0, 3, provider)
        assert pset.replacements == ("Tom",)

    def test_truncates_to_n_in_provider_order(self):
        provider = FixedProvider({"John": [f"cand{i}" for i in range(50)]})
        pset = generate_replacements(JOHN, 0, 30, provider)
        assert len(pset) == 30
        assert pset.replacements == tuple(f"cand{i}" for i in range(30))

    def test_multiword_and_whitespace_candidates_rejected(self):
        provider = FixedProvider({"John": ["two words", "  ", "", "Tom"]})
        pset = generate_replacements(JOHN, 0, 5, provider)
        assert pset.replacements == ("Tom",)

    def test_duplicates_collapsed(self):
        provider = FixedProvider({"John": ["Tom", "Tom", "Anna"]})
        pset = generate_replacements(JOHN, 0, 5, provider)
        assert pset.replacements == ("Tom", "Anna")

    def test_position_out_of_range(self):
        provider = FixedProvider({})
        with pytest.raises(InvalidInputError):
            generate_replacements(JOHN, 99, 3, provider)

    def test_deterministic_given_deterministic_provider(self):
        provider = FixedProvider({"John": ["Tom", "Mary", "Anna"]})
        first = generate_replacements(JOHN, 0, 3, provider)
        second = generate_replacements(JOHN, 0, 3, provider)
        assert first == second

    @given(
        st.integers(min_value=0, max_value=6),
        st.lists(
            st.text(
                alphabet=st.characters(whitelist_categories=("Ll", "Lu")),
                min_size=1,
                max_size=5,
            ),
            max_size=8,
        ),
    )
    def test_variants_differ_in_exactly_one_position(self, position, candidates):
        provider = FixedProvider({JOHN.tokens[position]: candidates})
        pset = generate_replacements(JOHN, position, 5, provider)
        for variant in pset.variants:
            diff = [i for i, (a, b) in enumerate(zip(variant, JOHN.tokens)) if a != b]
            assert diff == [position]


class TestStaticLexiconProvider:
    def test_loads_tab_separated_fixture(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("John\tTom\tMary\nwife\thusband\n", encoding="utf-8")
        provider = StaticLexiconProvider(str(path))
        assert provider.candidates(["John"], 0, 5) == ["Tom", "Mary"]
        assert provider.candidates(["wife"], 0, 5) == ["husband"]
        assert provider.candidates(["unknown"], 0, 5) == []

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("lonelytoken\n", encoding="utf-8")
        with pytest.raises(DataError):
            StaticLexiconProvider(str(path))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError):
            StaticLexiconProvider(str(tmp_path / "absent.tsv"))


class TestRemoteProviderRetry:
    def test_transport_failures_retry_then_raise(self):
        import requests

        from perturbqe.perturbation import RemoteMaskedLMProvider

        class FailingSession:
            def __init__(self):
                self.calls = 0

            def post(self, *args, **kwargs):
                self.calls += 1
                raise requests.ConnectionError("refused")

        session = FailingSession()
        provider = RemoteMaskedLMProvider(
            "http://localhost:1", max_attempts=3, session=session, sleep=lambda s: None
        )
        with pytest.raises(ProviderError) as exc_info:
            provider.candidates(["a"], 0, 5)
        assert session.calls == 3
        assert exc_info.value.retryable


class TestPerturbationSet:
    def test_variant_replacement_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            PerturbationSet(source_index=0, replacements=("a",), variants=())
