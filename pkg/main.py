"""FastAPI application entry point for the MANOJAVAM simulator service."""
import logging
import os

from fastapi import FastAPI, Request
from fastapi.middleware.gzip import GZipMiddleware
from fastapi.responses import JSONResponse

from config import APP_NAME, APP_VERSION, settings
from routes import diagnostics, simulate
from utils.errors import NumericalFailure

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

app = FastAPI(
    title=APP_NAME,
    description="Cycle-approximate simulator of a tiled systolic PCA accelerator",
    version=APP_VERSION,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json",
    default_response_class=JSONResponse,
)

# Product and projection payloads can be large
app.add_middleware(GZipMiddleware, minimum_size=1000)

app.include_router(simulate.router)
app.include_router(diagnostics.router)


@app.get("/")
async def root():
    """Root endpoint with API information."""
    return {
        "name": APP_NAME,
        "version": APP_VERSION,
        "status": "running"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint for monitoring."""
    return {"status": "healthy"}


@app.on_event("startup")
async def startup_event():
    logger.info(f"Starting {APP_NAME} {APP_VERSION}")
    logger.info(f"Engine defaults: T={settings.tile_size}, S={settings.parallelism}, threads={settings.sim_threads}")
    logger.info(f"Caches: LHS {settings.lhs_cache_rows} rows, RHS {settings.rhs_cache_rows} rows, penalty {settings.dram_penalty}x")


@app.on_event("shutdown")
async def shutdown_event():
    logger.info(f"Shutting down {APP_NAME}")


@app.exception_handler(NumericalFailure)
async def numerical_failure_handler(request: Request, exc: NumericalFailure):
    logger.warning(f"Numerical failure on {request.url.path}: {exc}")
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    logger.warning(f"Rejected request on {request.url.path}: {exc}")
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """Global exception handler."""
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"detail": "Internal server error"}
    )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=int(os.getenv("PORT", "8000")))
