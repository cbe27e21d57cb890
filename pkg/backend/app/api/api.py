from fastapi import APIRouter
from app.api.endpoints import analysis, experiments

api_router = APIRouter()

api_router.include_router(analysis.router, prefix="/analyze", tags=["analysis"])
api_router.include_router(experiments.router, prefix="/experiments", tags=["experiments"])
