"""HTTP inference service: manipulation, interpolation, and heatmaps over a
single loaded checkpoint. Requests are stateless; the model is shared
read-only, so concurrent identical requests return identical bytes.

Images travel as base64-encoded PNG inside JSON bodies.
"""

import base64
import io
import logging
import time

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from PIL import Image
from pydantic import BaseModel

from .data import denormalize_image, normalize_image
from .errors import InvalidDescription, NumericalFailure, ShapeError, WordbrushError
from .evaluate import attention_heatmaps
from .inference import Manipulator

logger = logging.getLogger(__name__)

DEFAULT_MAX_PAYLOAD = 8 * 1024 * 1024

MIN_STEPS, MAX_STEPS = 2, 16


class ManipulateBody(BaseModel):
    image: str                     # base64 PNG (or any PIL-decodable format)
    description: str
    heatmaps: bool = False


class InterpolateBody(BaseModel):
    image: str
    from_description: str
    to_description: str
    steps: int = 5


def _decode_image(b64: str, resolution: int | None, max_bytes: int) -> torch.Tensor:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception:
        raise HTTPException(status_code=400, detail="image is not valid base64")
    if len(raw) > max_bytes:
        raise HTTPException(status_code=413, detail=f"image exceeds {max_bytes} bytes")
    try:
        pil = Image.open(io.BytesIO(raw)).convert("RGB")
    except Exception:
        raise HTTPException(status_code=400, detail="image bytes are not a decodable bitmap")
    if resolution is not None and pil.size != (resolution, resolution):
        short = min(pil.size)
        scale = resolution / short
        pil = pil.resize((max(resolution, round(pil.width * scale)),
                          max(resolution, round(pil.height * scale))), Image.BILINEAR)
        left = (pil.width - resolution) // 2
        top = (pil.height - resolution) // 2
        pil = pil.crop((left, top, left + resolution, top + resolution))
    return normalize_image(np.asarray(pil))


def _encode_image(image: torch.Tensor) -> str:
    buf = io.BytesIO()
    Image.fromarray(denormalize_image(image)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _encode_gray(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(manipulator: Manipulator | None = None,
               max_payload_bytes: int = DEFAULT_MAX_PAYLOAD) -> FastAPI:
    app = FastAPI(title="wordbrush", docs_url=None, redoc_url=None)
    app.state.manipulator = manipulator
    app.state.max_payload_bytes = max_payload_bytes

    def model() -> Manipulator:
        m = app.state.manipulator
        if m is None:
            raise HTTPException(status_code=503, detail="no checkpoint loaded")
        return m

    def guard(description: str):
        if not description or not description.strip():
            raise HTTPException(status_code=400, detail="description is empty")

    @app.exception_handler(WordbrushError)
    async def _domain_error(request: Request, exc: WordbrushError):
        from fastapi.responses import JSONResponse

        status = 500 if isinstance(exc, NumericalFailure) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "checkpoint_loaded": app.state.manipulator is not None}

    @app.get("/model-info")
    def model_info():
        m = model()
        return {
            "checkpoint_id": m.checkpoint_id,
            "mode": m.mode,
            "resolution": m.resolution,
            "vocab_hash": m.vocab.content_hash(),
            "vocab_size": len(m.vocab),
            "max_length": m.max_length,
        }

    @app.post("/manipulate")
    def manipulate(body: ManipulateBody):
        m = model()
        guard(body.description)
        started = time.perf_counter()
        image = _decode_image(body.image, m.resolution, app.state.max_payload_bytes)
        output = m.manipulate(image, body.description)
        response = {
            "image": _encode_image(output),
            "checkpoint_id": m.checkpoint_id,
        }
        if body.heatmaps:
            hm = attention_heatmaps(m, image, body.description)
            response["heatmaps"] = [
                {"word": w, "image": _encode_gray(hm.maps[j].numpy())}
                for j, w in enumerate(hm.words)
            ]
        response["timing_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
        return response

    @app.post("/interpolate")
    def interpolate(body: InterpolateBody):
        m = model()
        guard(body.from_description)
        guard(body.to_description)
        if not MIN_STEPS <= body.steps <= MAX_STEPS:
            raise HTTPException(
                status_code=400,
                detail=f"steps must be in [{MIN_STEPS}, {MAX_STEPS}]",
            )
        started = time.perf_counter()
        image = _decode_image(body.image, m.resolution, app.state.max_payload_bytes)
        frames = m.interpolate(image, body.from_description, body.to_description, body.steps)
        return {
            "frames": [_encode_image(f) for f in frames],
            "checkpoint_id": m.checkpoint_id,
            "timing_ms": round((time.perf_counter() - started) * 1000.0, 3),
        }

    return app


def serve(manipulator: Manipulator, host: str = "127.0.0.1", port: int = 8765,
          max_payload_bytes: int = DEFAULT_MAX_PAYLOAD):
    import uvicorn

    app = create_app(manipulator, max_payload_bytes)
    logger.info("serving checkpoint %s on %s:%d", manipulator.checkpoint_id, host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
