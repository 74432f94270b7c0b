"""
API for minimax-regret auction experiments.

This module initializes the FastAPI application, sets up middleware and mounts
the read-only experiment endpoints, which run the same commands as the command line.
"""

import os

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .api.endpoints import router as api_router
from .core.config import get_settings
from .core.logging import logger

settings = get_settings()

app = FastAPI(
    title=settings.PROJECT_NAME,
    version=settings.VERSION,
    description="Optimal random reserves for second-price auctions under minimax regret",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["GET"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix=settings.API_V1_STR)


@app.get("/health")
async def health_check():
    """
    Health check endpoint.

    Returns:
        dict: Health status and version of the application.
    """
    try:
        return {"status": "healthy", "version": settings.VERSION}
    except Exception as e:
        logger.error(f"Error during health check: {str(e)}")
        raise


if __name__ == "__main__":
    import uvicorn
    port = int(os.getenv("PORT", 8080))
    uvicorn.run(app, host="0.0.0.0", port=port)
