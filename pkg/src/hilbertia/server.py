"""HTTP serve mode: the library behind a small JSON API.

Endpoints live under /api.  The store maps rep ids to representations and
never mutates a stored object; deformations always mint a fresh id, so
concurrent requests on one seed produce independent children.  Every
response carries a monotone revision counter so a client can drop answers
that arrive out of order.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .domains import conic_fit_residual, orbit_hull
from .dynamics import entropy_estimate, length_spectrum
from .errors import HilbertiaError, InsufficientData
from .holonomy import (
    bulge_deform,
    evaluate,
    fuchsian_pants,
    fuchsian_punctured_torus,
    marked_length,
    resolve_curve,
    twist_deform,
)
from .metric import DEFAULT_SEED
from .projective import classify
from .svg import domain_path


class ExplorerState:
    """Rep store plus revision counter, shared across handler threads."""

    def __init__(self, seed=DEFAULT_SEED, maxlen=8, depth=8):
        self._lock = threading.Lock()
        self._reps = {}
        self._next_id = 1
        self._revision = 0
        self.seed = int(seed)
        self.maxlen = int(maxlen)
        self.depth = int(depth)

    def bump(self):
        with self._lock:
            self._revision += 1
            return self._revision

    def add(self, rep):
        with self._lock:
            rep_id = "rep-%d" % self._next_id
            self._next_id += 1
            self._reps[rep_id] = rep
        return rep_id

    def get(self, rep_id):
        with self._lock:
            return self._reps.get(rep_id)


def hull_view(hull):
    """Hull payload: vertices, ready-to-use SVG path, conic-fit residual."""
    return {
        "depth": hull.depth,
        "vertices": [[float(x), float(y)] for x, y in hull.vertices],
        "svg_path": domain_path(hull),
        "conic_residual": float(conic_fit_residual(hull.vertices)),
    }


def rep_view(state, rep_id, rep):
    """Everything the explorer renders for one representation.

    The client displays numbers, it does not compute them, so the view
    already contains marked lengths, the entropy readout, the hull path and
    the axis chords of the marked curves.
    """
    lengths = {}
    axes = {}
    marking = {}
    for name in sorted(rep.marking):
        marking[name] = rep.marking[name].letters
        g = evaluate(rep, resolve_curve(rep, name))
        sd = classify(g, det=g.det_sign)
        if sd.kind != "positive-hyperbolic":
            # deformed past the range where this curve still has an axis;
            # the client renders a gap instead of a number
            lengths[name] = None
            continue
        lengths[name] = float(marked_length(rep, name))
        mn = sd.fixed_points[2].to_affine()
        mx = sd.fixed_points[0].to_affine()
        axes[name] = {
            "p_minus": [float(mn[0]), float(mn[1])],
            "p_plus": [float(mx[0]), float(mx[1])],
        }
    try:
        entropy = entropy_estimate(length_spectrum(rep, state.maxlen)).to_json()
    except InsufficientData:
        entropy = None
    return {
        "rep_id": rep_id,
        "seed": state.seed,
        "topology": rep.topology,
        "marking": marking,
        "lengths": lengths,
        "axes": axes,
        "entropy": entropy,
        "hull": hull_view(orbit_hull(rep, depth=state.depth)),
    }


def _deform_chain(rep, curve, twist, bulge):
    out = rep
    if twist != 0.0:
        out = twist_deform(out, curve, twist)
    if bulge != 0.0:
        out = bulge_deform(out, curve, bulge)
    if out is rep:
        out = twist_deform(rep, curve, 0.0)
    return out


def _number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        if getattr(self.server, "verbose", False):
            BaseHTTPRequestHandler.log_message(self, fmt, *args)

    def _send(self, code, payload):
        payload["revision"] = self.server.state.bump()
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _fail(self, code, error, detail):
        self._send(code, {"error": error, "detail": detail})

    def _read_body(self):
        try:
            n = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            return None
        try:
            obj = json.loads(self.rfile.read(n).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return None
        return obj if isinstance(obj, dict) else None

    def do_GET(self):
        parsed = urlparse(self.path)
        parts = [p for p in parsed.path.split("/") if p]
        if parts == ["api", "health"]:
            self._send(200, {"ok": True})
            return
        if len(parts) == 3 and parts[0] == "api" and parts[1] == "hull":
            state = self.server.state
            rep = state.get(parts[2])
            if rep is None:
                self._fail(404, "UnknownRep", parts[2])
                return
            raw = parse_qs(parsed.query).get("depth", [str(state.depth)])[0]
            try:
                depth = int(raw)
            except ValueError:
                self._fail(400, "BadRequest", "depth must be an integer")
                return
            try:
                hull = orbit_hull(rep, depth=depth)
            except (HilbertiaError, ValueError) as e:
                self._fail(422, type(e).__name__, str(e))
                return
            payload = hull_view(hull)
            payload["rep_id"] = parts[2]
            self._send(200, payload)
            return
        self._fail(404, "NotFound", parsed.path)

    def do_POST(self):
        parts = [p for p in urlparse(self.path).path.split("/") if p]
        state = self.server.state
        body = self._read_body()
        if body is None:
            self._fail(400, "BadRequest", "body must be a JSON object")
            return
        if parts == ["api", "rep"]:
            kind = body.get("kind", "pants")
            if kind not in ("pants", "torus"):
                self._fail(400, "BadRequest", "kind must be pants or torus")
                return
            lengths = body.get("lengths", [2.0, 2.0, 2.0] if kind == "pants" else [2.0, 2.5])
            want = 3 if kind == "pants" else 2
            if (
                not isinstance(lengths, list)
                or len(lengths) != want
                or not all(_number(v) for v in lengths)
            ):
                self._fail(400, "BadRequest", "lengths must be %d numbers" % want)
                return
            try:
                make = fuchsian_pants if kind == "pants" else fuchsian_punctured_torus
                rep = make(*(float(v) for v in lengths))
            except (HilbertiaError, ValueError) as e:
                self._fail(422, type(e).__name__, str(e))
                return
            self._send(200, rep_view(state, state.add(rep), rep))
            return
        if parts == ["api", "deform"]:
            rep_id = body.get("rep_id")
            curve = body.get("curve")
            twist = body.get("twist", 0.0)
            bulge = body.get("bulge", 0.0)
            if not isinstance(rep_id, str) or not isinstance(curve, str):
                self._fail(400, "BadRequest", "rep_id and curve must be strings")
                return
            if not _number(twist) or not _number(bulge):
                self._fail(400, "BadRequest", "twist and bulge must be numbers")
                return
            rep = state.get(rep_id)
            if rep is None:
                self._fail(404, "UnknownRep", rep_id)
                return
            try:
                child = _deform_chain(rep, curve, float(twist), float(bulge))
            except (HilbertiaError, ValueError, KeyError) as e:
                self._fail(422, type(e).__name__, str(e))
                return
            self._send(200, rep_view(state, state.add(child), child))
            return
        self._fail(404, "NotFound", "/" + "/".join(parts))


class ExplorerServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, state, verbose=False):
        self.state = state
        self.verbose = verbose
        ThreadingHTTPServer.__init__(self, address, _Handler)


def make_server(host="127.0.0.1", port=0, seed=DEFAULT_SEED, maxlen=8, depth=8, verbose=False):
    """Bound but not yet running server; port 0 picks a free port."""
    state = ExplorerState(seed=seed, maxlen=maxlen, depth=depth)
    return ExplorerServer((host, port), state, verbose=verbose)


def serve(host="127.0.0.1", port=8034, seed=DEFAULT_SEED, maxlen=8, depth=8):
    """Run the API until interrupted."""
    srv = make_server(host=host, port=port, seed=seed, maxlen=maxlen, depth=depth, verbose=True)
    print("serving on http://%s:%d/api (seed 0x%X)" % (host, srv.server_address[1], seed))
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return 0
