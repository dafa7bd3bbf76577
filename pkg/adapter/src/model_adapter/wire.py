"""Wire protocol models and canonical JSON rendering.

Field names are part of the protocol and must not change. Responses are
rendered with a fixed, compact JSON encoding so identical requests yield
byte-identical responses.
"""

from __future__ import annotations

import json
from typing import Optional

from pydantic import BaseModel, Field


class UnmaskRequest(BaseModel):
    tokens: list[str]
    mask_index: int
    n: int = Field(ge=1)


class Candidate(BaseModel):
    token: str
    score: float


class UnmaskResponse(BaseModel):
    candidates: list[Candidate]


class TranslateRequest(BaseModel):
    texts: list[str]


class TranslateResult(BaseModel):
    translation: str
    tokens: list[str]
    logprobs: Optional[list[float]] = None


class TranslateResponse(BaseModel):
    results: list[TranslateResult]


def canonical_json(payload: dict) -> bytes:
    """Compact, UTF-8, insertion-ordered; omitted optionals never appear."""
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def render_unmask(response: UnmaskResponse) -> bytes:
    return canonical_json(
        {
            "candidates": [
                {"token": c.token, "score": c.score} for c in response.candidates
            ]
        }
    )


def render_translate(response: TranslateResponse) -> bytes:
    results = []
    for r in response.results:
        item: dict = {"translation": r.translation, "tokens": r.tokens}
        if r.logprobs is not None:
            item["logprobs"] = r.logprobs
        results.append(item)
    return canonical_json({"results": results})
