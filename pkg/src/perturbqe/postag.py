"""Deterministic English part-of-speech tagging for target selection.

This is a lexicon + suffix-rule tagger over the coarse 12-tag set
(NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, CONJ, PRT, PUNCT, X). It is
good enough to pick content words to perturb; it is not a general tagger,
and it is English-only — non-English source text should be run in the
all-words / all-tokens modes or come with an external tag file.

Unknown lowercase words tag X (content-eligible only in the all-words and
all-tokens modes); unknown capitalized words tag NOUN (proper-noun
heuristic).
"""

from __future__ import annotations

import re

NOUN = "NOUN"
VERB = "VERB"
ADJ = "ADJ"
ADV = "ADV"
PRON = "PRON"
DET = "DET"
ADP = "ADP"
NUM = "NUM"
CONJ = "CONJ"
PRT = "PRT"
PUNCT = "PUNCT"
X = "X"

COARSE_TAGS = frozenset(
    {NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, CONJ, PRT, PUNCT, X}
)

#: tags that make a token a "content word" for perturbation targeting
CONTENT_TAGS = frozenset({NOUN, VERB, ADJ, ADV, PRON})

_NUM_RE = re.compile(r"^[+-]?\d[\d,.]*%?$")

_CLITICS = {"'s": PRT, "n't": PRT, "'ll": PRT, "'ve": PRT, "'re": PRT, "'d": PRT, "'m": PRT}

_PRONOUNS = """
i you he she it we they me him her us them mine yours hers ours theirs
myself yourself himself herself itself ourselves themselves who whom
someone anyone everyone nobody something anything everything nothing
""".split()

_DETERMINERS = """
the a an this that these those my your his its our their each every either
neither some any no all both another such
""".split()

_ADPOSITIONS = """
in on at by for with from of into onto over under about above below across
behind beyond near through during against between among around within
without toward towards upon along despite per off up down out inside
outside until till since
""".split()

_CONJUNCTIONS = """
and or but nor so yet because although though while if when whenever unless
whereas once than whether after before as
""".split()

_VERBS = """
be am is are was were been being have has had having do does did done doing
will would shall should can could may might must go goes went gone make
made take took taken come came see saw seen get got know knew known think
thought say said tell told give gave given find found want use used work
call called try tried ask asked need needed feel felt become became leave
left put mean meant keep kept let begin began seem seemed help helped talk
turn turned start started show showed hear heard play played run ran move
moved like liked live lived believe hold held bring brought happen write
wrote written sit sat stand stood lose lost pay paid meet met include
continue set learn learned change changed lead led understand understood
watch follow followed stop stopped create speak spoke read allow allowed
add added spend spent grow grew open opened walk walked win won offer
offered remember love loved consider appear appeared buy bought wait waited
serve served die died send sent expect build built stay stayed fall fell
cut reach reached kill remain remained sleep slept eat ate drink drank
translate translated perturb perturbed predict predicted replace replaced
mask masked align aligned evaluate rent reserve gave wander travel sang
sing rains rain snow snows
""".split()

_NOUNS = """
time year people way day man thing woman life child children world school
state family student group country problem hand part place case week
company system program question work government number night point home
water room mother area money story fact month lot right study book eye job
word business issue side kind head house service friend father power hour
game line end member law car city community name president team minute idea
body information parent face level office door health person art war
history party result reason research girl guy moment air teacher force
education cat dog wife husband journalist source sentence translation
quality model language news doctor nurse housekeeper chief tip coach bus
trainer station ticket town village road trip luggage driver passenger
professor degree gender error token output input madam sir mister
""".split()

_ADJECTIVES = """
good new first last long great little own other old big high different
small large next early young important few public bad same able free sure
better best true whole real general specific certain strong possible late
hard major available likely short single medical current wrong private past
foreign fine common poor natural significant similar hot dead central
happy serious ready simple left physical federal entire recent helpful
ambiguous correct female male
""".split()

_ADVERBS = """
not also very often however too usually really early never always sometimes
together likely simply generally instead actually again rather almost
especially ever quickly probably already below directly therefore else
thus easily eventually exactly certainly normally currently extremely
finally constantly here there now then well only just still even yesterday
today tomorrow soon maybe perhaps
""".split()

_NUMBERS = """
zero one two three four five six seven eight nine ten eleven twelve
thirteen twenty thirty forty fifty hundred thousand million billion
""".split()

LEXICON: dict[str, str] = {}
for _words, _tag in (
    (_PRONOUNS, PRON),
    (_DETERMINERS, DET),
    (_ADPOSITIONS, ADP),
    (_CONJUNCTIONS, CONJ),
    (_NUMBERS, NUM),
    (_ADVERBS, ADV),
    (_ADJECTIVES, ADJ),
    (_NOUNS, NOUN),
    (_VERBS, VERB),
):
    for _w in _words:
        LEXICON.setdefault(_w, _tag)
LEXICON["to"] = PRT

_VERB_STEMS = frozenset(w for w, t in LEXICON.items() if t == VERB)
_NOUN_STEMS = frozenset(w for w, t in LEXICON.items() if t == NOUN)

_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "hood", "ism")
_ADJ_SUFFIXES = ("ous", "ful", "less", "ive", "able", "ible", "ish", "ical", "ary")


def _inflected(low: str, stems: frozenset[str]) -> bool:
    if low.endswith("ies") and low[:-3] + "y" in stems:
        return True
    if low.endswith("es") and (low[:-2] in stems or low[:-1] in stems):
        return True
    if low.endswith("s") and low[:-1] in stems:
        return True
    return False


def _verb_participle(low: str) -> bool:
    for suffix in ("ing", "ed"):
        if not low.endswith(suffix) or len(low) <= len(suffix) + 1:
            continue
        stem = low[: -len(suffix)]
        if stem in _VERB_STEMS or stem + "e" in _VERB_STEMS:
            return True
        if len(stem) >= 2 and stem[-1] == stem[-2] and stem[:-1] in _VERB_STEMS:
            return True
    return False


def tag_token(token: str) -> str:
    """Tag a single token with one of the coarse tags."""
    low = token.lower()
    if low in _CLITICS:
        return _CLITICS[low]
    if not any(ch.isalnum() for ch in token):
        return PUNCT
    if _NUM_RE.match(token):
        return NUM
    if low in LEXICON:
        return LEXICON[low]
    if _inflected(low, _VERB_STEMS) or _verb_participle(low):
        return VERB
    if _inflected(low, _NOUN_STEMS):
        return NOUN
    if low.endswith("ly"):
        return ADV
    if low.endswith(_NOUN_SUFFIXES):
        return NOUN
    if low.endswith(_ADJ_SUFFIXES):
        return ADJ
    if low.endswith(("ize", "ise", "ify")):
        return VERB
    if token[:1].isupper() and token[:1].isalpha():
        return NOUN
    return X


def tag_tokens(tokens: list[str]) -> list[str]:
    return [tag_token(tok) for tok in tokens]
