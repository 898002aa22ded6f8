"""Read-only HTTP/JSON API over a workspace.

Endpoints (all GET):

    /api/health
    /api/clusters
    /api/clusters/{id}/estimates?t=ISO8601&metric=cosine|emd
    /api/similarity?metric=cosine|emd&basis=time_spent|area
    /api/models

Every number in a response is a re-serialization of a persisted artifact
(similarities come from the stage CSVs, model metadata from the model
index); nothing is recomputed except interval arithmetic on those loaded
values. Responses carry CORS headers for the map console.
"""

from __future__ import annotations

import json
from datetime import date, datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from parkcast.estimate import DEFAULT_HOURS
from parkcast.geocluster import GROUP_WITH, GROUP_WITHOUT
from parkcast.workspace import Workspace, WorkspaceError

DEFAULT_ESTIMATE_DATE = date(2017, 11, 4)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _bad_request(msg: str) -> ApiError:
    return ApiError(400, msg)


def _not_found(msg: str) -> ApiError:
    return ApiError(404, msg)


def _incomplete(msg: str) -> ApiError:
    return ApiError(409, msg)


class WorkspaceView:
    """Immutable snapshot of the workspace artifacts served over HTTP."""

    def __init__(
        self,
        root,
        estimate_date: date = DEFAULT_ESTIMATE_DATE,
        hours=DEFAULT_HOURS,
        input_defaults: str = "computed",
    ):
        self.ws = Workspace(root)
        self.estimate_date = estimate_date
        self.hours = tuple(hours)
        self.input_defaults = input_defaults
        self._cache: dict[tuple, dict] = {}

    # -- payload builders ---------------------------------------------------

    def health(self) -> dict:
        artifacts = {
            "partition": self.ws.partition_path.exists(),
            "models": (self.ws.root / "models" / "index.json").exists(),
            "similarity": any((self.ws.root / "similarity").glob("*.csv"))
            if (self.ws.root / "similarity").is_dir()
            else False,
        }
        return {
            "status": "ok",
            "estimate_date": self.estimate_date.isoformat(),
            "estimate_times": [f"{h:02d}:00" for h in self.hours],
            "artifacts": artifacts,
        }

    def clusters(self) -> dict:
        try:
            partition = self.ws.load_partition()
            blocks, _ = self.ws.load_blocks_pois()
        except WorkspaceError as exc:
            raise _incomplete(str(exc))
        counts = self._category_counts()
        centroids = {b.block_id: b.centroid for b in blocks}
        features = []
        for cluster in partition.clusters_with + partition.clusters_without:
            pts = [centroids[bid] for bid in sorted(cluster.block_ids)]
            features.append(
                {
                    "type": "Feature",
                    "geometry": _hull_geometry(pts),
                    "properties": {
                        "cluster_id": cluster.cluster_id,
                        "group": cluster.group,
                        # Cluster ids restart at 0 in each group, so the API
                        # address must carry the group as well.
                        "api_id": f"{cluster.group}-{cluster.cluster_id}",
                        "block_count": len(cluster.block_ids),
                        "category_counts": counts.get((cluster.group, cluster.cluster_id)),
                    },
                }
            )
        return {"type": "FeatureCollection", "features": features}

    def _category_counts(self) -> dict:
        try:
            basis = self.ws.meta()["basis"]
            entry = self.ws.load_representations(basis)
        except WorkspaceError:
            return {}
        return {(c["group"], c["cluster_id"]): c["vector"] for c in entry["clusters"]}

    def estimates(self, cluster_ref: str, t: str | None, metric: str) -> dict:
        group, cluster_id = _parse_cluster_ref(cluster_ref)
        if metric not in ("cosine", "emd"):
            raise _bad_request(f"unknown metric {metric!r}")
        if t is None:
            t = f"{self.estimate_date.isoformat()}T{self.hours[0]:02d}:00"
        try:
            timestamp = datetime.fromisoformat(t)
        except ValueError:
            raise _bad_request(f"unparseable timestamp {t!r}")
        if group == GROUP_WITH:
            raise _bad_request(
                f"cluster {cluster_ref} is monitored; estimates target unmonitored clusters"
            )
        key = (cluster_id, timestamp.isoformat(), metric)
        if key in self._cache:
            return self._cache[key]
        try:
            partition = self.ws.load_partition()
        except WorkspaceError as exc:
            raise _incomplete(str(exc))
        if cluster_id not in {c.cluster_id for c in partition.clusters_without}:
            raise _not_found(f"unknown cluster {cluster_ref}")
        try:
            table = self.ws.estimate(cluster_id, timestamp, metric, self.input_defaults)
        except WorkspaceError as exc:
            raise _incomplete(str(exc))
        except ValueError as exc:
            # Cross-artifact id mismatches (model without similarity entry etc.)
            raise _incomplete(f"inconsistent workspace: {exc}")
        doc = {
            "target_cluster": cluster_id,
            "timestamp": timestamp.isoformat(),
            "metric": metric,
            "rows": [
                {
                    "source_id": interval.source_cluster,
                    "similarity": round(interval.similarity, 4),
                    "lo": round(interval.lo * 100),
                    "hi": round(interval.hi * 100),
                    "eii": None
                    if eii is None
                    else {"lo": round(eii[0] * 100), "hi": round(eii[1] * 100)},
                }
                for interval, eii in table.rows
            ],
        }
        self._cache[key] = doc
        return doc

    def similarity(self, metric: str | None, basis: str | None) -> dict:
        if metric not in ("cosine", "emd") or basis not in ("time_spent", "area"):
            raise _not_found(f"no similarity matrix for metric={metric!r} basis={basis!r}")
        try:
            matrix = self.ws.load_similarity(metric, basis)
        except WorkspaceError as exc:
            raise _not_found(str(exc))
        return {
            "metric": metric,
            "basis": basis,
            "source_ids": matrix.source_ids,
            "target_ids": matrix.target_ids,
            "values": [[float(v) for v in row] for row in matrix.values],
        }

    def models(self) -> dict:
        path = self.ws.root / "models" / "index.json"
        if not path.exists():
            raise _incomplete("no models trained")
        return json.loads(path.read_text(encoding="utf-8"))

    def precompute(self) -> int:
        """Warm the cache for the configured time grid; returns entry count."""
        try:
            partition = self.ws.load_partition()
        except WorkspaceError:
            return 0
        n = 0
        for cluster in partition.clusters_without:
            for h in self.hours:
                t = f"{self.estimate_date.isoformat()}T{h:02d}:00"
                for metric in ("cosine", "emd"):
                    try:
                        self.estimates(str(cluster.cluster_id), t, metric)
                        n += 1
                    except ApiError:
                        pass
        return n

    # -- routing --------------------------------------------------------------

    def dispatch(self, path: str, query: dict[str, list[str]]) -> dict:
        def q(name: str) -> str | None:
            vals = query.get(name)
            return vals[0] if vals else None

        parts = [p for p in path.split("/") if p]
        if parts == ["api", "health"]:
            return self.health()
        if parts == ["api", "clusters"]:
            return self.clusters()
        if len(parts) == 4 and parts[:2] == ["api", "clusters"] and parts[3] == "estimates":
            return self.estimates(parts[2], q("t"), q("metric") or "cosine")
        if parts == ["api", "similarity"]:
            return self.similarity(q("metric"), q("basis"))
        if parts == ["api", "models"]:
            return self.models()
        raise _not_found(f"no such endpoint {path!r}")


def _parse_cluster_ref(ref: str) -> tuple[str, int]:
    """Resolve a cluster address: bare ints mean unmonitored clusters.

    Cluster ids restart at 0 per group, so '<group>-<id>' (the api_id of the
    cluster features) disambiguates; plain '<id>' is the estimate-target
    shorthand for 'without_data-<id>'.
    """
    group = GROUP_WITHOUT
    token = ref
    for prefix in (GROUP_WITH, GROUP_WITHOUT):
        if ref.startswith(prefix + "-"):
            group = prefix
            token = ref[len(prefix) + 1 :]
            break
    try:
        return group, int(token)
    except ValueError:
        raise _not_found(f"unknown cluster {ref!r}")


def _hull_geometry(points: list[tuple[float, float]]) -> dict:
    """Convex hull of (lat, lon) points as GeoJSON, MultiPoint if degenerate."""
    lonlat = [[round(lon, 6), round(lat, 6)] for lat, lon in points]
    hull = _convex_hull(lonlat)
    if len(hull) < 3:
        return {"type": "MultiPoint", "coordinates": lonlat}
    return {"type": "Polygon", "coordinates": [hull + [hull[0]]]}


def _convex_hull(pts: list[list[float]]) -> list[list[float]]:
    """Monotone-chain hull, counter-clockwise, collinear points dropped."""
    uniq = sorted({(x, y) for x, y in pts})
    if len(uniq) <= 2:
        return [list(p) for p in uniq]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return [list(p) for p in hull]


class _Handler(BaseHTTPRequestHandler):
    view: WorkspaceView  # set by make_server

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        try:
            doc = self.view.dispatch(url.path, parse_qs(url.query))
            self._send(200, doc)
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": f"internal error: {exc}"})

    def do_OPTIONS(self) -> None:  # noqa: N802
        self.send_response(204)
        self._cors()
        self.end_headers()

    def _send(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, OPTIONS")

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass


def make_server(view: WorkspaceView, port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"view": view})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(
    root,
    port: int = 8080,
    estimate_date: date = DEFAULT_ESTIMATE_DATE,
    input_defaults: str = "computed",
) -> None:
    view = WorkspaceView(root, estimate_date=estimate_date, input_defaults=input_defaults)
    warmed = view.precompute()
    server = make_server(view, port)
    host, bound_port = server.server_address
    print(f"serving workspace {root} on http://{host}:{bound_port} ({warmed} estimates precomputed)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
