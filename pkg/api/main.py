import io
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import Response
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.errors import CheckpointError, ConfigurationError
from network.freqdino import FreqDino
from services.checkpoint_service import CheckpointService
from services.image_io import mask_to_png, read_image
from services.inference_service import InferenceService


class ServiceSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="FREQSEG_")

    checkpoint: Optional[Path] = Field(None, description="Checkpoint served by the API")


settings = ServiceSettings()
checkpoint_service = CheckpointService()
_inference: Optional[InferenceService] = None

app = FastAPI(
    title="FreqSeg Inference API",
    description="Frequency-guided boundary-aware segmentation of grayscale images",
    version="1.0.0"
)


class InferResponse(BaseModel):
    height: int
    width: int
    foreground_fraction: float
    boundary_fraction: Optional[float] = None
    prototype: Optional[List[List[float]]] = Field(None, description="Boundary prototype tokens")


def use_model(model: Optional[FreqDino]) -> None:
    """Serve an in-memory model instead of the configured checkpoint"""
    global _inference
    _inference = InferenceService(model) if model is not None else None


def get_inference() -> InferenceService:
    global _inference
    if _inference is None:
        if settings.checkpoint is None or not settings.checkpoint.is_file():
            raise HTTPException(status_code=404, detail="No checkpoint loaded")
        try:
            model, _, _ = checkpoint_service.restore(settings.checkpoint)
        except CheckpointError as e:
            raise HTTPException(status_code=422, detail=str(e))
        _inference = InferenceService(model)
    return _inference


async def _run(upload: UploadFile):
    service = get_inference()
    try:
        image = read_image(io.BytesIO(await upload.read()))
    except OSError:
        raise HTTPException(status_code=400, detail="Unreadable image upload")
    try:
        return service.predict_array(image), image.shape
    except ConfigurationError as e:
        raise HTTPException(status_code=422, detail=str(e))


@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "service": "FreqSeg Inference",
        "version": "1.0.0",
        "status": "operational"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "model_loaded": _inference is not None,
        "timestamp": datetime.now(timezone.utc).isoformat()
    }


@app.get("/config")
async def get_config():
    """Configuration and model constants of the served model"""
    model = get_inference().model
    return {
        "config": model.config.model_dump(),
        "config_hash": model.config.config_hash(),
        "constants": model.config.constants(),
        "parameters": model.parameter_summary()
    }


@app.post("/infer", response_model=InferResponse)
async def infer(image: UploadFile = File(...)):
    """Segment an uploaded grayscale image"""
    result, (height, width) = await _run(image)
    return InferResponse(
        height=height,
        width=width,
        foreground_fraction=result.foreground_fraction,
        boundary_fraction=result.boundary_fraction,
        prototype=result.prototype.tolist() if result.prototype is not None else None
    )


@app.post("/infer/mask")
async def infer_mask(image: UploadFile = File(...)):
    """Binary mask of an uploaded image as PNG"""
    result, _ = await _run(image)
    return Response(content=mask_to_png(result.mask), media_type="image/png")


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
