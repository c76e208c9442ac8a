"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class SessionCreateRequest(BaseModel):
    config_text: str = Field(default="", description="flat key = value config")
    kernel_files: list[str] = Field(description="LKRN paths, one per defocus")
    target_file: str = Field(description="binary PGM target raster path")
    overrides: dict[str, str] = Field(default_factory=dict)


class SessionInfo(BaseModel):
    session_id: str
    width: int
    height: int
    pixel_size: float
    conditions: int
    process_variation: bool


class EvalRequest(BaseModel):
    psi_b64: str = Field(description="base64 of little-endian f64 row-major psi")


class EvalResponse(BaseModel):
    loss: float
    grad_b64: str = Field(description="base64 of little-endian f64 row-major gradient")


class LastErrorResponse(BaseModel):
    detail: str
