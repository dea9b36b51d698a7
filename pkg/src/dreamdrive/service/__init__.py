"""HTTP/WebSocket service wrapping the pipeline: batch endpoints for
collection, training, evaluation, and driving, plus live driver sessions."""

from dreamdrive.service.app import ServiceSettings, create_app

__all__ = ["create_app", "ServiceSettings"]
