"""Token normalization and tokenization helpers.

One comparison policy is used everywhere tokens are compared (consistency
classification, alignment, self-replacement filtering): Unicode NFC
normalization, case-sensitive by default. Case folding is opt-in via
``fold_case`` and is always applied for the self-replacement check, where
"john" is not a perturbation of "John".

The empty-alignment sentinel is ``None``: it is distinct from every real
token and from the empty string, and all empty-aligned positions compare
equal to each other.
"""

from __future__ import annotations

import re
import unicodedata

# CJK ranges that trigger character-level segmentation for target languages
# written without spaces.
_CJK_RANGES = (
    (0x3040, 0x30FF),    # Hiragana, Katakana
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified ideographs
    (0xF900, 0xFAFF),    # CJK compatibility ideographs
    (0xFF65, 0xFF9F),    # halfwidth Katakana
)

_CLITIC_SPLIT_RE = re.compile(r"(?<=\w)(n't|'s|'re|'ll|'ve|'d|'m)\b")
_TOKEN_RE = re.compile(r"n't|'(?:s|re|ll|ve|d|m)|\w+(?:[.'\-]\w+)*|[^\w\s]", re.UNICODE)


def normalize_token(token: str, fold_case: bool = False) -> str:
    """Apply the package-wide comparison normalization to one token."""
    out = unicodedata.normalize("NFC", token)
    return out.casefold() if fold_case else out


def is_cjk_char(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def segment_cjk(chunk: str) -> list[str]:
    """Split a chunk into single CJK characters, keeping non-CJK runs intact."""
    out: list[str] = []
    run = ""
    for ch in chunk:
        if is_cjk_char(ch):
            if run:
                out.append(run)
                run = ""
            out.append(ch)
        else:
            run += ch
    if run:
        out.append(run)
    return out


def tokenize_target(text: str) -> list[str]:
    """Tokenize MT output.

    Whitespace-separated text is treated as pre-tokenized. A line with no
    whitespace that contains CJK characters falls back to character
    segmentation, so word-level alignment stays defined for Chinese and
    Japanese output that arrives unsegmented.
    """
    text = unicodedata.normalize("NFC", text.strip())
    if not text:
        return []
    chunks = text.split()
    if len(chunks) == 1 and any(is_cjk_char(ch) for ch in chunks[0]):
        return segment_cjk(chunks[0])
    return chunks


def tokenize_text(text: str) -> list[str]:
    """Whitespace-and-punctuation tokenization for raw source text.

    Splits off edge punctuation and common English clitics ('s, n't, 'll, ...)
    so that "John's wife." becomes ["John", "'s", "wife", "."]. Hyphenated
    words and number/abbreviation internals ("Ph.D.", "3.5") stay together as
    far as one token plus trailing punctuation.
    """
    text = unicodedata.normalize("NFC", text)
    tokens: list[str] = []
    for chunk in text.split():
        chunk = _CLITIC_SPLIT_RE.sub(r" \1", chunk)
        for piece in chunk.split():
            tokens.extend(_TOKEN_RE.findall(piece))
    return tokens
