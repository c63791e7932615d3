"""FastAPI service exposing the session API and computational endpoints."""

from .app import create_app

__all__ = ["create_app"]
