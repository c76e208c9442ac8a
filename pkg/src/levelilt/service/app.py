"""FastAPI service exposing evaluation sessions over HTTP.

A session preloads kernels, target and config once; clients then make
repeated loss-and-gradient calls against it, e.g. an external training loop
that injects the gradient into its backward pass. Binary buffers travel as
base64-encoded little-endian float64.
"""

from __future__ import annotations

import base64
import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException

from ..config import ConfigError
from ..errors import FieldFormatError, NoInterfaceError
from ..session import Session
from .models import (
    EvalRequest,
    EvalResponse,
    HealthResponse,
    LastErrorResponse,
    SessionCreateRequest,
    SessionInfo,
)


class _SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._last_error: dict[str, str] = {}

    def add(self, session: Session) -> str:
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = session
            self._last_error[sid] = ""
        return sid

    def get(self, sid: str) -> Session:
        with self._lock:
            if sid not in self._sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {sid}")
            return self._sessions[sid]

    def drop(self, sid: str) -> None:
        with self._lock:
            self._sessions.pop(sid, None)
            self._last_error.pop(sid, None)

    def set_error(self, sid: str, message: str) -> None:
        with self._lock:
            if sid in self._last_error:
                self._last_error[sid] = message

    def last_error(self, sid: str) -> str:
        with self._lock:
            if sid not in self._last_error:
                raise HTTPException(status_code=404, detail=f"unknown session {sid}")
            return self._last_error[sid]


def create_app() -> FastAPI:
    app = FastAPI(
        title="levelilt",
        description="Level-set inverse-lithography loss-and-gradient service",
    )
    store = _SessionStore()
    app.state.sessions = store

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: SessionCreateRequest) -> SessionInfo:
        try:
            session = Session.create(
                req.config_text, req.kernel_files, req.target_file, req.overrides
            )
        except (ConfigError, FieldFormatError, ValueError, OSError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        sid = store.add(session)
        return _info(sid, session)

    @app.get("/sessions/{sid}", response_model=SessionInfo)
    def session_info(sid: str) -> SessionInfo:
        return _info(sid, store.get(sid))

    @app.delete("/sessions/{sid}")
    def destroy_session(sid: str) -> dict:
        store.get(sid)
        store.drop(sid)
        return {"deleted": sid}

    @app.post("/sessions/{sid}/eval", response_model=EvalResponse)
    def eval_session(sid: str, req: EvalRequest) -> EvalResponse:
        session = store.get(sid)
        try:
            try:
                buf = base64.b64decode(req.psi_b64, validate=True)
            except Exception as e:
                raise ValueError(f"psi_b64 is not valid base64: {e}") from None
            psi = np.frombuffer(buf, dtype="<f8")
            loss, grad = session.eval_loss_and_grad(psi)
        except (ValueError, NoInterfaceError) as e:
            store.set_error(sid, str(e))
            raise HTTPException(status_code=422, detail=str(e)) from None
        store.set_error(sid, "")
        grad_b64 = base64.b64encode(np.ascontiguousarray(grad, dtype="<f8").tobytes())
        return EvalResponse(loss=loss, grad_b64=grad_b64.decode("ascii"))

    @app.get("/sessions/{sid}/error", response_model=LastErrorResponse)
    def last_error(sid: str) -> LastErrorResponse:
        return LastErrorResponse(detail=store.last_error(sid))

    def _info(sid: str, session: Session) -> SessionInfo:
        return SessionInfo(
            session_id=sid,
            width=session.z_target.width,
            height=session.z_target.height,
            pixel_size=session.z_target.pixel_size,
            conditions=len(session.cfg.ilt.conditions),
            process_variation=session.cfg.pv,
        )

    return app


app = create_app()
