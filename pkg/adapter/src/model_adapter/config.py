"""Environment-driven configuration.

MODEL_ADAPTER_MODE            fixture | model           (default: fixture)
MODEL_ADAPTER_LEXICON         unmask fixture file (token TAB cand1 TAB ...)
MODEL_ADAPTER_TRANSLATIONS    translate fixture file (JSONL)
MODEL_ADAPTER_MLM             fill-mask model name (model mode)
MODEL_ADAPTER_MT              translation model name (model mode)
MODEL_ADAPTER_MT_KIND         seq2seq | causal          (default: seq2seq)
MODEL_ADAPTER_PROMPT_TEMPLATE prompt with <English_input> (causal LLMs)
MODEL_ADAPTER_DEVICE          cpu | cuda                (default: cpu)
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

PLACEHOLDER = "<English_input>"


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "fixture"
    lexicon_path: Optional[str] = None
    translations_path: Optional[str] = None
    mlm_name: Optional[str] = None
    mt_name: Optional[str] = None
    mt_kind: str = "seq2seq"
    prompt_template: Optional[str] = None
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.mode not in ("fixture", "model"):
            raise ValueError(f"unknown adapter mode {self.mode!r}")
        if self.mt_kind not in ("seq2seq", "causal"):
            raise ValueError(f"unknown MT kind {self.mt_kind!r}")
        if self.prompt_template is not None and PLACEHOLDER not in self.prompt_template:
            raise ValueError(f"prompt template must contain {PLACEHOLDER!r}")

    @classmethod
    def from_env(cls) -> "AdapterConfig":
        return cls(
            mode=os.environ.get("MODEL_ADAPTER_MODE", "fixture"),
            lexicon_path=os.environ.get("MODEL_ADAPTER_LEXICON"),
            translations_path=os.environ.get("MODEL_ADAPTER_TRANSLATIONS"),
            mlm_name=os.environ.get("MODEL_ADAPTER_MLM"),
            mt_name=os.environ.get("MODEL_ADAPTER_MT"),
            mt_kind=os.environ.get("MODEL_ADAPTER_MT_KIND", "seq2seq"),
            prompt_template=os.environ.get("MODEL_ADAPTER_PROMPT_TEMPLATE"),
            device=os.environ.get("MODEL_ADAPTER_DEVICE", "cpu"),
        )
