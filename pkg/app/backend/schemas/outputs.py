"""Every JSON document the CLI emits, keyed by the name ``permtest schema`` uses."""

from typing import Any

from pydantic import BaseModel

from app.backend.schemas.base import ErrorResponse
from app.backend.schemas.cpt import CptResult
from app.backend.schemas.group import GroupFile
from app.backend.schemas.optimizer import PlanDocument
from app.backend.schemas.palmrt import PalmrtResult
from app.backend.schemas.simulation import LeverageHistogram, SimulationCell, SimulationReport

OUTPUT_MODELS: dict[str, type[BaseModel]] = {
    "palmrt-result": PalmrtResult,
    "cpt-result": CptResult,
    "plan": PlanDocument,
    "group-file": GroupFile,
    "simulation-report": SimulationReport,
    # one row of the simulate-type1 / simulate-type2 CSV
    "simulation-cell": SimulationCell,
    "leverage-histogram": LeverageHistogram,
    "error": ErrorResponse,
}


def output_schema(name: str) -> dict[str, Any]:
    """JSON Schema of the document ``name`` as it is serialized."""
    return OUTPUT_MODELS[name].model_json_schema(mode="serialization")
