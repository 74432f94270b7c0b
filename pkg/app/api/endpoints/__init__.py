"""
API endpoints router configuration.

This module configures the main API router by including all endpoint-specific routers.
"""

from fastapi import APIRouter
from .experiments import router as experiments_router

router = APIRouter()
router.include_router(experiments_router, tags=["experiments"])
