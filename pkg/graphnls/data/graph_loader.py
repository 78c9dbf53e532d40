"""
Graph Description Loader
Reads metric graphs from the line-oriented text format or its JSON twin

Text grammar (one record per line, '#' starts a comment):

    name <graph name>                          optional, at most once
    edge <id> <vertex_a> <vertex_b> <length>   one per edge

Vertex labels are arbitrary tokens; edge ids are integers. The JSON form
carries the same schema:

    {"name": "dumbbell", "edges": [{"id": 0, "a": "u", "b": "u", "length": 1.0}, ...]}
"""

import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from graphnls.data.catalog import named_graph
from graphnls.data.metric_graph import MetricGraph
from graphnls.errors import GraphError, GraphParseError

logger = logging.getLogger(__name__)


class GraphLoader:
    """Parse graph descriptions into MetricGraph objects"""

    def parse_text(self, text: str, default_name: str = "graph") -> MetricGraph:
        name = default_name
        named = False
        edges: List[Tuple[str, str, float]] = []
        ids: List[int] = []

        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            keyword = tokens[0].lower()

            if keyword == "name":
                if named:
                    raise GraphParseError(line_no, raw, "duplicate name header")
                if len(tokens) < 2:
                    raise GraphParseError(line_no, raw, "name header needs a value")
                name = " ".join(tokens[1:])
                named = True
            elif keyword == "edge":
                if len(tokens) != 5:
                    raise GraphParseError(line_no, raw, f"expected 5 fields, found {len(tokens)}")
                try:
                    edge_id = int(tokens[1])
                except ValueError:
                    raise GraphParseError(line_no, raw, f"edge id {tokens[1]!r} is not an integer")
                try:
                    length = float(tokens[4])
                except ValueError:
                    raise GraphParseError(line_no, raw, f"length {tokens[4]!r} is not a number")
                if not (math.isfinite(length) and length > 0):
                    raise GraphParseError(line_no, raw, "length must be positive and finite")
                if edge_id in ids:
                    raise GraphParseError(line_no, raw, f"duplicate edge id {edge_id}")
                ids.append(edge_id)
                edges.append((tokens[2], tokens[3], length))
            else:
                raise GraphParseError(line_no, raw, f"unknown record {tokens[0]!r}")

        if not edges:
            raise GraphError(f"{name}: no edge records found")
        return MetricGraph.from_edges(edges, name=name, edge_ids=ids)

    def parse_payload(self, payload: Dict[str, Any], default_name: str = "graph") -> MetricGraph:
        """Structured-object variant of the same schema"""
        if not isinstance(payload, dict):
            raise GraphError(f"graph payload must be an object, not {type(payload).__name__}")
        records = payload.get("edges")
        if not isinstance(records, list) or not records:
            raise GraphError("graph payload needs a non-empty 'edges' list")

        edges: List[Tuple[str, str, float]] = []
        ids: List[int] = []
        for pos, rec in enumerate(records):
            try:
                edge_id = int(rec.get("id", pos))
                length = float(rec["length"])
                a, b = str(rec["a"]), str(rec["b"])
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise GraphError(f"edge record {pos} is malformed: {exc}")
            if not (math.isfinite(length) and length > 0):
                raise GraphError(f"edge record {pos}: length must be positive and finite")
            if edge_id in ids:
                raise GraphError(f"edge record {pos}: duplicate edge id {edge_id}")
            ids.append(edge_id)
            edges.append((a, b, length))

        return MetricGraph.from_edges(edges, name=str(payload.get("name", default_name)), edge_ids=ids)

    def load(self, path: Union[str, Path]) -> MetricGraph:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise GraphError(f"could not read graph file {path}: {exc}")

        if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            try:
                payload = json.loads(text)
            except json.JSONDecodeError as exc:
                raise GraphParseError(exc.lineno, text.splitlines()[exc.lineno - 1] if text else "", exc.msg)
            graph = self.parse_payload(payload, default_name=path.stem)
        else:
            graph = self.parse_text(text, default_name=path.stem)

        logger.info("Loaded graph %s: %d vertices, %d edges", graph.name, len(graph.vertices), len(graph.edges))
        return graph


def load_graph(path: Union[str, Path]) -> MetricGraph:
    """Convenience function to load a graph file"""
    return GraphLoader().load(path)


def dump_graph_text(g: MetricGraph) -> str:
    lines = [f"name {g.name}"]
    for e in g.edges:
        lines.append(f"edge {e.id} {g.labels[e.a]} {g.labels[e.b]} {e.length!r}")
    return "\n".join(lines) + "\n"


CATALOG_PREFIX = "catalog:"


def resolve_graph(source: str) -> MetricGraph:
    """A graph file path, or 'catalog:<name>' for a built-in graph"""
    if source.startswith(CATALOG_PREFIX):
        return named_graph(source[len(CATALOG_PREFIX):])
    return load_graph(source)
