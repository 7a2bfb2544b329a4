"""Mount all API routes."""

from fastapi import APIRouter

from relayfield.api.outage import router as outage_router

api_router = APIRouter()
api_router.include_router(outage_router, tags=["outage"])
