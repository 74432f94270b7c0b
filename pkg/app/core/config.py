"""
Application configuration settings.

This module defines the numerical and runtime settings using Pydantic's BaseSettings.
Values load from the environment (prefix REGRETLENS_) and from a .env file, and are
accessed through the cached get_settings().
"""

from pydantic_settings import BaseSettings
from functools import lru_cache
import os
from dotenv import load_dotenv, find_dotenv
from .logging import logger


def load_env():
    """
    Load environment variables from .env files.

    This function attempts to load environment variables from a .env file in the project root directory.
    If not found, it tries to find a .env file in parent directories.
    """
    env_path = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), ".env")
    if os.path.exists(env_path):
        load_dotenv(env_path)
    else:
        env_file = find_dotenv(usecwd=True)
        if env_file:
            load_dotenv(env_file)


load_env()


class Settings(BaseSettings):
    """
    Application settings class.

    Attributes:
        APP_NAME (str): The name of the application.
        API_V1_STR (str): The API version prefix.
        PROJECT_NAME (str): The project name.
        VERSION (str): The application version.
        ROOT_TOL (float): Default tolerance of the bracketed root finder.
        QUAD_ABS_TOL (float): Default absolute tolerance of adaptive quadrature.
        QUAD_MAX_PANELS (int): Panel budget of one adaptive quadrature call.
        SERIES_SWITCH_W (float): Largest w=(v-r)/v evaluated by the short series.
        CLOSED_FORM_MAX_GROWTH (float): Largest w^-(n-1) for which the closed form is trusted.
        MC_DRAWS (int): Default Monte Carlo sample count.
        MC_CHUNK (int): Draws per simulation chunk; fixes the random streams.
        MC_WORKERS (int): Threads used for simulation and probe batches.
        DEFAULT_SEED (int): Master seed of stochastic commands.
        GRID_SIZE (int): Cells of the grid best response.
        FIGURE_POINTS (int): Points per curve of the figure2 command.
        REJECTION_BUDGET (int): Attempts per accepted rejection sample.
        DSIC_TOL (float): Utility tolerance of the DSIC check.
        CRN_DRAWS (int): Reserve draws of common-random-number DSIC checks.
        SADDLE_TOL (float): Nature-side tolerance of saddle verification.
        SELLER_TOL (float): Seller-side tolerance of saddle verification.
        EPSILON_TWO_POINT (float): Offset below the reserve of the two-point worst case.
        SADDLE_IID_PROBES (int): Random iid marginals probed by verify_saddle.
        SADDLE_MIXTURE_PROBES (int): Random mixtures probed by verify_saddle.
        SADDLE_AFFILIATED_PROBES (int): Random affiliated discrete joints probed by verify_saddle.
        SADDLE_RESERVE_GRID (int): Deterministic reserves probed on the seller side.
        SADDLE_RANDOM_RESERVES (int): Random reserve CDFs probed on the seller side.
    """
    APP_NAME: str = "regret-lens"
    API_V1_STR: str = "/api/v1"
    PROJECT_NAME: str = "RegretLens"
    VERSION: str = "1.0.0"

    ROOT_TOL: float = 1e-12
    QUAD_ABS_TOL: float = 1e-10
    QUAD_MAX_PANELS: int = 200_000
    SERIES_SWITCH_W: float = 0.5
    CLOSED_FORM_MAX_GROWTH: float = 1e4

    MC_DRAWS: int = 1_000_000
    MC_CHUNK: int = 65_536
    MC_WORKERS: int = 4
    DEFAULT_SEED: int = 0

    GRID_SIZE: int = 512
    FIGURE_POINTS: int = 512
    REJECTION_BUDGET: int = 100_000
    DSIC_TOL: float = 1e-12
    CRN_DRAWS: int = 100_000

    SADDLE_TOL: float = 1e-3
    SELLER_TOL: float = 1e-6
    EPSILON_TWO_POINT: float = 1e-4
    SADDLE_IID_PROBES: int = 500
    SADDLE_MIXTURE_PROBES: int = 100
    SADDLE_AFFILIATED_PROBES: int = 200
    SADDLE_RESERVE_GRID: int = 50
    SADDLE_RANDOM_RESERVES: int = 50

    class Config:
        case_sensitive = True
        env_prefix = "REGRETLENS_"
        env_file_encoding = "utf-8"
        extra = "ignore"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)

        for name in ("ROOT_TOL", "QUAD_ABS_TOL", "DSIC_TOL", "SADDLE_TOL", "SELLER_TOL", "EPSILON_TWO_POINT"):
            if getattr(self, name) <= 0:
                logger.error(f"{name} must be positive, got {getattr(self, name)}")
                raise ValueError(f"{name} must be positive")
        for name in ("QUAD_MAX_PANELS", "MC_DRAWS", "MC_CHUNK", "MC_WORKERS", "REJECTION_BUDGET", "CRN_DRAWS"):
            if getattr(self, name) < 1:
                logger.error(f"{name} must be at least 1, got {getattr(self, name)}")
                raise ValueError(f"{name} must be at least 1")
        if self.GRID_SIZE < 64:
            logger.error(f"GRID_SIZE must be at least 64, got {self.GRID_SIZE}")
            raise ValueError("GRID_SIZE must be at least 64")
        if not 0 < self.SERIES_SWITCH_W < 1:
            logger.error(f"SERIES_SWITCH_W must lie in (0, 1), got {self.SERIES_SWITCH_W}")
            raise ValueError("SERIES_SWITCH_W must lie in (0, 1)")


@lru_cache()
def get_settings() -> Settings:
    """
    Get the application settings.

    This function returns a cached instance of the Settings class,
    ensuring that settings are only loaded once.

    Returns:
        Settings: The application settings.
    """
    return Settings()


settings = get_settings()
