"""Real-model mode: transformers-backed unmasking and translation.

Loading is lazy and failures surface as ModelUnavailable (the app maps
that to HTTP 503), so the service stays usable in fixture mode on hosts
without the ML stack or the weights.

The adapter owns model idiosyncrasies: mask-symbol insertion, subword
merging, prompt-echo stripping for causal LLMs. Decoding is always
deterministic (greedy / fixed beam, no sampling). Word-level log
probabilities, when derivable from the generation scores, are sums of the
member-subword log probabilities converted to log base 2.
"""

from __future__ import annotations

import math
from typing import Optional

from .config import PLACEHOLDER, AdapterConfig
from .wire import Candidate, TranslateResult


class ModelUnavailable(RuntimeError):
    pass


class RealUnmasker:
    def __init__(self, config: AdapterConfig) -> None:
        if not config.mlm_name:
            raise ModelUnavailable("MODEL_ADAPTER_MLM is not configured")
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise ModelUnavailable(f"transformers not installed: {exc}") from exc
        try:
            self._pipe = pipeline(
                "fill-mask",
                model=config.mlm_name,
                device=-1 if config.device == "cpu" else 0,
            )
        except Exception as exc:  # model missing, download failure, ...
            raise ModelUnavailable(f"cannot load {config.mlm_name!r}: {exc}") from exc

    def candidates(self, tokens: list[str], mask_index: int, n: int) -> list[Candidate]:
        mask_token = self._pipe.tokenizer.mask_token
        masked = list(tokens)
        masked[mask_index] = mask_token
        # ask for headroom: multi-token/whitespace candidates get dropped
        raw = self._pipe(" ".join(masked), top_k=max(n * 2, n + 5))
        out: list[Candidate] = []
        for item in raw:
            token = str(item["token_str"]).strip()
            if not token or any(ch.isspace() for ch in token):
                continue
            out.append(Candidate(token=token, score=float(item["score"])))
            if len(out) == n:
                break
        return out


class RealTranslator:
    def __init__(self, config: AdapterConfig) -> None:
        if not config.mt_name:
            raise ModelUnavailable("MODEL_ADAPTER_MT is not configured")
        self._kind = config.mt_kind
        self._template = config.prompt_template
        try:
            import torch
            from transformers import (
                AutoModelForCausalLM,
                AutoModelForSeq2SeqLM,
                AutoTokenizer,
            )
        except ImportError as exc:
            raise ModelUnavailable(f"transformers not installed: {exc}") from exc
        try:
            self._torch = torch
            self._tokenizer = AutoTokenizer.from_pretrained(config.mt_name)
            loader = (
                AutoModelForSeq2SeqLM if self._kind == "seq2seq" else AutoModelForCausalLM
            )
            self._model = loader.from_pretrained(config.mt_name)
            self._model.to(config.device)
            self._model.eval()
        except Exception as exc:
            raise ModelUnavailable(f"cannot load {config.mt_name!r}: {exc}") from exc

    def _prompted(self, text: str) -> str:
        if self._template:
            return self._template.replace(PLACEHOLDER, text)
        return text

    def translate(self, text: str) -> TranslateResult:
        torch = self._torch
        prompt = self._prompted(text)
        inputs = self._tokenizer(prompt, return_tensors="pt").to(self._model.device)
        with torch.no_grad():
            generated = self._model.generate(
                **inputs,
                do_sample=False,
                num_beams=1,
                max_new_tokens=512,
                return_dict_in_generate=True,
                output_scores=True,
            )
        sequence = generated.sequences[0]
        if self._kind == "causal":
            new_tokens = sequence[inputs["input_ids"].shape[1] :]
        else:
            new_tokens = sequence[1:]  # skip the decoder start token
        text_out = self._tokenizer.decode(new_tokens, skip_special_tokens=True).strip()
        tokens = text_out.split()
        logprobs = self._word_logprobs(generated, new_tokens, tokens)
        return TranslateResult(translation=text_out, tokens=tokens, logprobs=logprobs)

    def _word_logprobs(self, generated, new_tokens, words) -> Optional[list[float]]:
        """Sum subword log probabilities into per-word values (log base 2).

        Word boundaries are recovered by decoding incrementally longer
        subword prefixes; if the pieces cannot be aligned to the whitespace
        words exactly, logprobs are omitted rather than misreported.
        """
        scores = getattr(generated, "scores", None)
        if not scores or not words:
            return None
        try:
            transition = self._model.compute_transition_scores(
                generated.sequences, scores, normalize_logits=True
            )[0].tolist()
        except Exception:
            return None
        ids = new_tokens.tolist()
        if len(transition) < len(ids):
            return None
        transition = transition[-len(ids):]
        specials = set(self._tokenizer.all_special_ids)
        ln2 = math.log(2.0)
        per_word: list[float] = []
        acc = 0.0
        word_idx = 0
        for pos, (token_id, logprob_e) in enumerate(zip(ids, transition)):
            if token_id in specials:
                continue
            acc += logprob_e
            prefix = self._tokenizer.decode(
                ids[: pos + 1], skip_special_tokens=True
            ).strip()
            if word_idx < len(words) and prefix == " ".join(words[: word_idx + 1]):
                per_word.append(acc / ln2)
                acc = 0.0
                word_idx += 1
        if word_idx != len(words):
            return None
        return per_word
