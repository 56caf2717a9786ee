"""Diagnostics endpoints for local development."""
import logging
from typing import Any, Dict

from fastapi import APIRouter

from config import settings
from models.perf_models import HARDWARE_PRESETS
from utils.datasets import BENCHMARK_DATASETS

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/diagnostics", tags=["diagnostics"])


@router.get("/config")
async def get_config() -> Dict[str, Any]:
    """
    Get the resolved simulator settings.

    Returns:
        Settings after environment and .env overrides
    """
    return settings.dict()


@router.get("/presets")
async def get_presets() -> Dict[str, Any]:
    """Hardware presets and benchmark dataset dimensions."""
    return {
        "hardware": {name: hw.dict() for name, hw in HARDWARE_PRESETS.items()},
        "datasets": {name: d._asdict() for name, d in BENCHMARK_DATASETS.items()},
    }
