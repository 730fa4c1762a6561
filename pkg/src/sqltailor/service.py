"""HTTP JSON API over the serving engine."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .pipeline import DuplicateFeedbackError, Engine, UnknownQuestionError
from .providers import ProviderUnavailable


class AskRequest(BaseModel):
    question: str


class FeedbackRequest(BaseModel):
    question_id: str
    useful: bool


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="sqltailor", version="0.1.0")
    app.state.engine = engine
    # The feedback console is served from its own origin.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/ask")
    def ask(request: AskRequest):
        if not request.question.strip():
            raise HTTPException(status_code=422, detail="question must be non-empty")
        try:
            record = engine.answer(request.question)
        except ProviderUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return {
            "question_id": record.question_id,
            "sql": record.sql,
            "sql_found": record.sql_found,
            "pipeline_used": record.pipeline_used,
            "documents": record.documents,
            "prompt_tokens": record.prompt_tokens,
        }

    @app.post("/feedback")
    def feedback(request: FeedbackRequest):
        try:
            engine.record_feedback(request.question_id, request.useful)
        except UnknownQuestionError:
            raise HTTPException(status_code=404, detail="unknown question_id")
        except DuplicateFeedbackError:
            raise HTTPException(status_code=409, detail="feedback already recorded")
        return {"ok": True}

    @app.post("/rebuild")
    def rebuild():
        try:
            manifest = engine.rebuild()
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"rebuild failed: {exc}")
        return {"manifest": manifest}

    @app.get("/stats")
    def stats():
        return engine.stats()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app
