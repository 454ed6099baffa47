import structlog
from structlog.stdlib import BoundLogger


def slog() -> BoundLogger:
    return structlog.get_logger()
