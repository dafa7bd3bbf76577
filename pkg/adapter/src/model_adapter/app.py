"""FastAPI application exposing /unmask, /translate and /health.

Malformed requests answer HTTP 400 (including body-schema violations);
an unavailable model answers HTTP 503. Responses use a fixed compact JSON
encoding so identical requests produce byte-identical bytes on the wire.
"""

from __future__ import annotations

import logging
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .config import AdapterConfig
from .fixtures import FixtureError, FixtureTranslator, FixtureUnmasker
from .wire import (
    TranslateRequest,
    TranslateResponse,
    TranslateResult,
    UnmaskRequest,
    UnmaskResponse,
    render_translate,
    render_unmask,
)

logger = logging.getLogger("model_adapter")


class RequestError(ValueError):
    """Maps to HTTP 400."""


def _load_unmasker(config: AdapterConfig):
    if config.mode == "fixture":
        if not config.lexicon_path:
            return None
        return FixtureUnmasker(config.lexicon_path)
    from .models import ModelUnavailable, RealUnmasker

    try:
        return RealUnmasker(config)
    except ModelUnavailable as exc:
        logger.warning("unmask model unavailable: %s", exc)
        return None


def _load_translator(config: AdapterConfig):
    if config.mode == "fixture":
        if not config.translations_path:
            return None
        return FixtureTranslator(config.translations_path)
    from .models import ModelUnavailable, RealTranslator

    try:
        return RealTranslator(config)
    except ModelUnavailable as exc:
        logger.warning("translate model unavailable: %s", exc)
        return None


def create_app(config: Optional[AdapterConfig] = None) -> FastAPI:
    config = config or AdapterConfig.from_env()
    app = FastAPI(title="qe-model-adapter", docs_url=None, redoc_url=None)
    app.state.config = config
    app.state.unmasker = None
    app.state.translator = None
    app.state.loaded = False

    def ensure_loaded() -> None:
        # lazy so fixture files/models configured after import still work
        if not app.state.loaded:
            app.state.unmasker = _load_unmasker(config)
            app.state.translator = _load_translator(config)
            app.state.loaded = True

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.exception_handler(RequestError)
    async def on_request_error(request: Request, exc: RequestError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(FixtureError)
    async def on_fixture_error(request: Request, exc: FixtureError):
        return JSONResponse(status_code=503, content={"error": str(exc)})

    @app.get("/health")
    async def health():
        ensure_loaded()
        return JSONResponse(
            {
                "status": "ok",
                "mode": config.mode,
                "unmask_ready": app.state.unmasker is not None,
                "translate_ready": app.state.translator is not None,
            }
        )

    @app.post("/unmask")
    async def unmask(request: UnmaskRequest) -> Response:
        ensure_loaded()
        if not 0 <= request.mask_index < len(request.tokens):
            raise RequestError(
                f"mask_index {request.mask_index} out of range for "
                f"{len(request.tokens)} tokens"
            )
        if app.state.unmasker is None:
            return JSONResponse(
                status_code=503, content={"error": "unmask model not loaded"}
            )
        candidates = app.state.unmasker.candidates(
            request.tokens, request.mask_index, request.n
        )
        body = render_unmask(UnmaskResponse(candidates=candidates))
        return Response(content=body, media_type="application/json")

    @app.post("/translate")
    async def translate(request: TranslateRequest) -> Response:
        ensure_loaded()
        if not request.texts:
            raise RequestError("texts must be non-empty")
        if app.state.translator is None:
            return JSONResponse(
                status_code=503, content={"error": "translate model not loaded"}
            )
        results: list[TranslateResult] = []
        for text in request.texts:
            result = app.state.translator.translate(text)
            if result is None:
                raise RequestError(f"no fixture translation for {text!r}")
            results.append(result)
        body = render_translate(TranslateResponse(results=results))
        return Response(content=body, media_type="application/json")

    return app
