"""relayfield: outage of a relay link in a Poisson field of interferers."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import HTTPException

from relayfield import __version__
from relayfield.api.router import api_router
from relayfield.config import settings
from relayfield.content import render_response
from relayfield.errors import (
    BracketExhaustedError,
    DomainError,
    NumericalRangeError,
    QuadratureAccuracyError,
    RelayFieldError,
)

logging.basicConfig(level=settings.log_level.upper())
logger = logging.getLogger("relayfield")

app = FastAPI(
    title="relayfield",
    description="Outage probabilities for relaying in a Poisson field of interferers",
    version=__version__,
)

app.include_router(api_router)


@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    return render_response(
        request,
        {"error": exc.detail},
        status_code=exc.status_code,
    )


@app.exception_handler(RelayFieldError)
async def relayfield_error_handler(request: Request, exc: RelayFieldError):
    if isinstance(exc, DomainError | BracketExhaustedError):
        status_code = 422
    else:
        status_code = 500
    if isinstance(exc, QuadratureAccuracyError | NumericalRangeError):
        logger.error("%s on %s: %s", type(exc).__name__, request.url.path, exc)
    return render_response(
        request,
        {"error": type(exc).__name__, "detail": str(exc)},
        status_code=status_code,
    )


@app.get("/health")
async def health():
    return {"status": "ok", "version": __version__}


def main():
    import uvicorn

    uvicorn.run(
        "relayfield.main:app",
        host=settings.host,
        port=settings.port,
    )


if __name__ == "__main__":
    main()
