"""
graphnls Web API
FastAPI surface over the analysis, stability and ground-state calls
"""

import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field, model_validator

from graphnls.core.analysis import analyze_graph, check_rows, constant_summary
from graphnls.core.discretize import build_mesh
from graphnls.core.ground_state import find_ground_state
from graphnls.core.nls_energy import NlsParams
from graphnls.core.stability import classify_stability
from graphnls.data.catalog import CATALOG, named_graph
from graphnls.data.graph_loader import GraphLoader
from graphnls.data.metric_graph import MetricGraph
from graphnls.errors import GraphError, GraphNlsError, NumericalError, RefusalError
from graphnls.models.report_workbook import generate_report_workbook
from graphnls.models.tables import clean

app = FastAPI(
    title="graphnls",
    description="NLS ground states and stability of the constant state on compact metric graphs",
    version="0.1.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

OUTPUT_DIR = Path(os.environ.get("GRAPHNLS_OUTPUT_DIR", "output"))

# Meshes above this size are refused to keep requests interactive
MAX_NODES = 20_000


def safe_stem(name: str) -> str:
    """Graph name reduced to a plain file stem inside OUTPUT_DIR"""
    stem = re.sub(r"[^A-Za-z0-9_.-]", "_", Path(name).name).strip(".")
    return stem or "graph"


class EdgePayload(BaseModel):
    id: Optional[int] = None
    a: str
    b: str
    length: float


class GraphPayload(BaseModel):
    name: str = "graph"
    edges: List[EdgePayload]


class GraphRequest(BaseModel):
    graph: Optional[GraphPayload] = None
    catalog: Optional[str] = None
    p: float = Field(6.0, gt=2, le=6)
    h: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_source(self) -> "GraphRequest":
        if (self.graph is None) == (self.catalog is None):
            raise ValueError("give exactly one of 'graph' or 'catalog'")
        return self


class MassRequest(GraphRequest):
    mass: float = Field(..., gt=0)


class GroundStateRequest(MassRequest):
    starts: int = Field(4, ge=0, le=32)
    seed: int = 0


def _status_for(exc: GraphNlsError) -> int:
    if isinstance(exc, RefusalError):
        return 409
    if isinstance(exc, NumericalError):
        return 500
    return 422


def _graph_from(request: GraphRequest) -> MetricGraph:
    if request.catalog is not None:
        return named_graph(request.catalog)
    payload = request.graph.model_dump()
    payload["edges"] = [{k: v for k, v in e.items() if v is not None} for e in payload["edges"]]
    return GraphLoader().parse_payload(payload)


def _mesh_for(g: MetricGraph, h: Optional[float]):
    mesh = build_mesh(g, h)
    if mesh.n_nodes > MAX_NODES:
        raise GraphError(f"mesh with {mesh.n_nodes} nodes exceeds the limit of {MAX_NODES}",
                         "Use a larger h.")
    return mesh


def _call(fn, *args, **kwargs) -> Dict[str, Any]:
    try:
        return clean(fn(*args, **kwargs))
    except GraphNlsError as exc:
        raise HTTPException(status_code=_status_for(exc),
                            detail={"error": str(exc), "remediation": exc.remediation})


@app.get("/api/catalog")
def get_catalog():
    """Built-in graphs with their structured payloads"""
    return {"graphs": [named_graph(name).to_payload() | {"key": name} for name in sorted(CATALOG)]}


@app.post("/api/analyze")
def analyze(request: GraphRequest):
    def work():
        g = _graph_from(request)
        return analyze_graph(g, request.p, mesh=_mesh_for(g, request.h))
    return _call(work)


@app.post("/api/stability")
def stability(request: MassRequest):
    def work():
        g = _graph_from(request)
        report = classify_stability(g, NlsParams(request.p, request.mass), mesh=_mesh_for(g, request.h))
        return report.to_dict() | {"constant": constant_summary(g, request.p, request.mass)}
    return _call(work)


@app.post("/api/groundstate")
def groundstate(request: GroundStateRequest):
    def work():
        g = _graph_from(request)
        result = find_ground_state(g, NlsParams(request.p, request.mass), request.starts, request.seed,
                                   mesh=_mesh_for(g, request.h), workers=1)
        body = result.to_dict()
        body["state"] = [{"node": n, "edge": e, "s": s, "re": re, "im": im}
                         for n, e, s, re, im in result.best.u.rows()]
        return body
    return _call(work)


@app.post("/api/report")
def report(request: GraphRequest):
    """Analysis report as a downloadable workbook"""
    def work():
        g = _graph_from(request)
        body = analyze_graph(g, request.p, mesh=_mesh_for(g, request.h))
        filename = f"{safe_stem(g.name)}_{int(os.urandom(4).hex(), 16)}.xlsx"
        generate_report_workbook(body, OUTPUT_DIR / filename, checks=check_rows(body["checks"]))
        return {"filename": filename, "download_url": f"/api/download/{filename}"}
    return _call(work)


@app.get("/api/download/{filename}")
def download_file(filename: str):
    file_path = OUTPUT_DIR / Path(filename).name
    if not file_path.exists():
        raise HTTPException(status_code=404, detail="File not found")
    return FileResponse(
        path=str(file_path),
        filename=file_path.name,
        media_type="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"
    )
