"""HTTP service layer: FastAPI app plus the pydantic request/response models."""

from .app import app

__all__ = ["app"]
