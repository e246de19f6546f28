"""Command-line entry point.

One executable, one subcommand per capability.  Artifacts are JSON (objects),
CSV (spectra and reports), SVG (pictures) or raw grid bytes, all written
either to --out or to stdout.  Every artifact header records the seed, and a
fixed seed makes every byte of output reproducible.

Exit codes: 0 on success, 2 on usage errors, 3 on numerical failures (the
module error name is printed to stderr).
"""

import argparse
import base64
import json
import sys

import numpy as np

from .affine import (
    DEFAULT_SWEEP_CAP,
    GridSolution,
    compare_hilbert_affine,
    solve_monge_ampere,
)
from .domains import (
    ConvexDomain,
    Ellipse,
    Polygon,
    conic_fit_residual,
    domain_from_json,
    orbit_hull,
    square,
)
from .dynamics import (
    ConjClass,
    busemann_cocycle,
    critical_exponent,
    current_from_class,
    entropy_estimate,
    intersection_number,
    length_spectrum,
    patterson_sullivan,
)
from .errors import HilbertiaError, NotConverged, NotHyperbolic
from .holonomy import (
    HolonomyRep,
    Word,
    bulge_deform,
    evaluate,
    fuchsian_pants,
    fuchsian_punctured_torus,
    marked_length,
    resolve_curve,
    twist_deform,
)
from .metric import DEFAULT_SEED, busemann_volume, distance, finsler_norm, unit_ball_volume
from .projective import ProjPoint, act, classify, translation_length
from .svg import render_svg

_ORIGIN = np.zeros(2)


class _Usage(Exception):
    """Bad flag values discovered after argparse (missing files and the like)."""


# ---------------------------------------------------------------------------
# session store


class Session:
    """Named store of representations, domains and grid solutions.

    Names are unique.  Every stored object survives a round trip through its
    JSON form bit-identically, so a dumped session can be reloaded and dumped
    again to the same bytes.
    """

    def __init__(self, seed=DEFAULT_SEED, out_dir=None):
        self.seed = int(seed)
        self.out_dir = out_dir
        self._objects = {}

    def __len__(self):
        return len(self._objects)

    def names(self):
        return sorted(self._objects)

    def store(self, name, obj):
        if name in self._objects:
            raise ValueError("name %r already stored" % name)
        if isinstance(obj, HolonomyRep):
            kind = "rep"
        elif isinstance(obj, GridSolution):
            kind = "grid"
        elif isinstance(obj, ConvexDomain):
            kind = "domain"
        else:
            raise ValueError("cannot store %r" % type(obj).__name__)
        self._objects[name] = (kind, obj)
        return name

    def get(self, name):
        if name not in self._objects:
            raise KeyError(name)
        return self._objects[name][1]

    def to_json(self):
        objects = {}
        for name in self.names():
            kind, obj = self._objects[name]
            if kind == "rep":
                value = obj.to_json()
            elif kind == "domain":
                value = obj.to_json()
            else:
                value = {
                    "domain": obj.domain.to_json(),
                    "data": base64.b64encode(obj.to_bytes()).decode("ascii"),
                }
            objects[name] = {"kind": kind, "value": value}
        return {"seed": self.seed, "objects": objects}

    @classmethod
    def from_json(cls, payload):
        out = cls(seed=payload.get("seed", DEFAULT_SEED))
        for name, entry in payload["objects"].items():
            kind, value = entry["kind"], entry["value"]
            if kind == "rep":
                out.store(name, HolonomyRep.from_json(value))
            elif kind == "domain":
                out.store(name, domain_from_json(value))
            elif kind == "grid":
                dom = domain_from_json(value["domain"])
                out.store(name, GridSolution.from_bytes(dom, base64.b64decode(value["data"])))
            else:
                raise ValueError("unknown kind %r" % kind)
        return out


# ---------------------------------------------------------------------------
# shared plumbing


def _point(text):
    try:
        x, y = (float(t) for t in text.split(","))
    except Exception:
        raise argparse.ArgumentTypeError("expected X,Y (got %r)" % text)
    return np.array([x, y])


def _floats(text):
    try:
        return tuple(float(t) for t in text.split(","))
    except Exception:
        raise argparse.ArgumentTypeError("expected comma-separated numbers (got %r)" % text)


def _names(text):
    out = tuple(t.strip() for t in text.split(",") if t.strip())
    if not out:
        raise argparse.ArgumentTypeError("expected comma-separated names")
    return out


def _load_json(path, flag):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise _Usage("%s: cannot read %r (%s)" % (flag, path, e.strerror or e))
    except json.JSONDecodeError as e:
        raise _Usage("%s: %r is not valid JSON (%s)" % (flag, path, e))


def _load_rep(path, flag="--rep"):
    return HolonomyRep.from_json(_load_json(path, flag))


def _resolve_domain(spec, depth=8):
    """disk | square | polygon:FILE | hull:REPFILE."""
    if spec == "disk":
        return Ellipse.unit_disk()
    if spec == "square":
        return square()
    if spec.startswith("polygon:"):
        return domain_from_json(_load_json(spec[len("polygon:"):], "--domain"))
    if spec.startswith("hull:"):
        rep = _load_rep(spec[len("hull:"):], "--domain")
        return orbit_hull(rep, depth=depth)
    raise _Usage("--domain: expected disk, square, polygon:FILE or hull:REP (got %r)" % spec)


def _emit(text, out):
    """Write the artifact to --out, or print it when no path was given."""
    if out is None:
        sys.stdout.write(text)
        return False
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return True


def _emit_json(payload, out):
    return _emit(json.dumps(payload, indent=1, sort_keys=True) + "\n", out)


def _seed_line(seed):
    return "# seed 0x%X\n" % int(seed)


def _axis_chord(rep, name):
    g = evaluate(rep, resolve_curve(rep, name))
    sd = classify(g, det=g.det_sign)
    if sd.kind != "positive-hyperbolic":
        raise NotHyperbolic("curve %r has no axis" % name)
    return sd.fixed_points[2].to_affine(), sd.fixed_points[0].to_affine()


# ---------------------------------------------------------------------------
# subcommands


def _cmd_domain(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    payload = dom.to_json()
    payload["seed"] = args.seed
    if _emit_json(payload, args.out):
        if isinstance(dom, Polygon):
            print("polygon with %d vertices -> %s" % (len(dom.vertices), args.out))
        else:
            print("ellipse -> %s" % args.out)
    return 0


def _cmd_dist(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    d = distance(dom, args.src, args.dst)
    line = "%.6f\n" % d
    if args.out is None:
        sys.stdout.write(line)
    else:
        _emit(_seed_line(args.seed) + line, args.out)
    return 0


def _cmd_norm(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    n = finsler_norm(dom, args.at, args.dir)
    line = "%.6f\n" % n
    if args.out is None:
        sys.stdout.write(line)
    else:
        _emit(_seed_line(args.seed) + line, args.out)
    return 0


def _cmd_volume(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    if (args.at is None) == (args.region is None):
        raise _Usage("--at or --region: give exactly one")
    if args.at is not None:
        payload = {
            "seed": args.seed,
            "kind": "unit-ball",
            "at": [float(args.at[0]), float(args.at[1])],
            "value": unit_ball_volume(dom, args.at, directions=args.directions),
        }
    else:
        region = domain_from_json(_load_json(args.region, "--region"))
        est = busemann_volume(
            dom, region, samples=args.samples, seed=args.seed, directions=args.directions
        )
        payload = {"seed": args.seed, "kind": "busemann"}
        payload.update(est.to_json())
    if _emit_json(payload, args.out):
        print("%.6f" % payload.get("value", 0.0))
    return 0


def _cmd_holonomy(args):
    if args.kind == "pants":
        if len(args.lengths) != 3:
            raise _Usage("--lengths: pants needs three cuff lengths")
        rep = fuchsian_pants(*args.lengths)
    else:
        if len(args.lengths) != 2:
            raise _Usage("--lengths: torus needs two curve lengths")
        rep = fuchsian_punctured_torus(*args.lengths)
    payload = rep.to_json()
    payload["seed"] = args.seed
    if _emit_json(payload, args.out):
        marks = " ".join(
            "%s=%.6f" % (k, marked_length(rep, k)) for k in sorted(rep.marking)
        )
        print("%s: %s" % (args.kind, marks))
    return 0


def _cmd_deform(args):
    rep = _load_rep(args.rep)
    out = rep
    if args.twist != 0.0:
        out = twist_deform(out, args.curve, args.twist)
    if args.bulge != 0.0:
        out = bulge_deform(out, args.curve, args.bulge)
    if out is rep:
        # log the identity move rather than silently copying
        out = twist_deform(rep, args.curve, 0.0)
    payload = out.to_json()
    payload["seed"] = args.seed
    if _emit_json(payload, args.out):
        marks = " ".join(
            "%s=%.6f" % (k, marked_length(out, k)) for k in sorted(out.marking)
        )
        print("deformed: %s" % marks)
    return 0


def _cmd_hull(args):
    rep = _load_rep(args.rep)
    hull = orbit_hull(rep, depth=args.depth)
    payload = hull.to_json()
    payload["seed"] = args.seed
    payload["conic_residual"] = conic_fit_residual(hull.vertices)
    if _emit_json(payload, args.out):
        print(
            "%d vertices, conic residual %.3e"
            % (len(hull.vertices), payload["conic_residual"])
        )
    return 0


def _cmd_spectrum(args):
    rep = _load_rep(args.rep)
    spec = length_spectrum(rep, args.maxlen, exact=args.exact)
    text = _seed_line(args.seed) + spec.to_csv()
    if _emit(text, args.out):
        print("%d classes" % len(spec.entries))
    return 0


def _cmd_entropy(args):
    rep = _load_rep(args.rep)
    est = entropy_estimate(length_spectrum(rep, args.maxlen))
    payload = est.to_json()
    payload["seed"] = args.seed
    payload["maxlen"] = args.maxlen
    if _emit_json(payload, args.out):
        print("%.6f" % est.estimate)
    return 0


def _random_word(rng, length):
    letters = "aAbB"
    prev = None
    out = []
    for _ in range(length):
        while True:
            c = letters[int(rng.integers(4))]
            if prev is None or c != prev.swapcase():
                break
        out.append(c)
        prev = c
    return Word("".join(out))


def _cmd_cocycle_check(args):
    rep = _load_rep(args.rep)
    dom = _resolve_domain(args.domain, depth=args.depth)
    if not isinstance(dom, Ellipse):
        raise _Usage("--domain: cocycle-check samples ellipse boundaries only")
    rng = np.random.default_rng(args.seed)
    ring = dom.boundary_points(4096)
    chain_max = 0.0
    done = 0
    attempts = 0
    while done < args.trials:
        attempts += 1
        if attempts > 60 * args.trials:
            raise NotConverged("could not collect %d convergent triples" % args.trials)
        u = _random_word(rng, int(rng.integers(1, 4)))
        v = _random_word(rng, int(rng.integers(1, 4)))
        xi = ring[int(rng.integers(len(ring)))]
        try:
            v_xi = act(evaluate(rep, v), ProjPoint.affine(*xi)).to_affine()
            lhs = busemann_cocycle(dom, rep, u.concat(v), xi, _ORIGIN)
            rhs = busemann_cocycle(dom, rep, u, v_xi, _ORIGIN) + busemann_cocycle(
                dom, rep, v, xi, _ORIGIN
            )
        except NotConverged:
            continue
        chain_max = max(chain_max, abs(lhs - rhs))
        done += 1
    period_max = 0.0
    periods = 0
    for _ in range(args.trials):
        w = _random_word(rng, int(rng.integers(1, 5)))
        g = evaluate(rep, w)
        sd = classify(g, det=g.det_sign)
        if sd.kind != "positive-hyperbolic":
            continue
        try:
            per = busemann_cocycle(dom, rep, w, sd.fixed_points[0].to_affine(), _ORIGIN)
        except NotConverged:
            continue
        period_max = max(period_max, abs(per - translation_length(g, det=g.det_sign)))
        periods += 1
    payload = {
        "seed": args.seed,
        "trials": args.trials,
        "chain_max_error": chain_max,
        "period_max_error": period_max,
        "periods_checked": periods,
    }
    _emit_json(payload, args.out)
    if chain_max > args.tol or period_max > max(1e-3, args.tol):
        print(
            "NotConverged: cocycle residual %.3e / period residual %.3e"
            % (chain_max, period_max),
            file=sys.stderr,
        )
        return 3
    return 0


def _cmd_ps(args):
    rep = _load_rep(args.rep)
    dom = _resolve_domain(args.domain, depth=args.depth)
    exponent = args.exponent
    if exponent is None:
        exponent = critical_exponent(rep, dom, _ORIGIN, args.maxlen)
    mu = patterson_sullivan(rep, dom, exponent, _ORIGIN, args.maxlen)
    payload = {
        "seed": args.seed,
        "exponent": float(exponent),
        "total": mu.total,
        "atoms": [
            {"xi": [float(p[0]), float(p[1])], "w": w} for p, w in mu.atoms
        ],
    }
    if _emit_json(payload, args.out):
        print("%d atoms at exponent %.4f" % (len(mu.atoms), exponent))
    return 0


def _cmd_current(args):
    rep = _load_rep(args.rep)
    dom = _resolve_domain(args.domain, depth=args.depth)
    cls = ConjClass.from_word(resolve_curve(rep, args.curve))
    cur = current_from_class(rep, dom, cls, args.maxlen)
    payload = cur.to_json()
    payload["seed"] = args.seed
    payload["curve"] = args.curve
    if _emit_json(payload, args.out):
        print("%d atoms" % len(cur))
    return 0


def _cmd_intersect(args):
    rep = _load_rep(args.rep)
    dom = _resolve_domain(args.domain, depth=args.depth)
    if len(args.curves) != 2:
        raise _Usage("--curves: need exactly two names")
    currents = [
        current_from_class(rep, dom, ConjClass.from_word(resolve_curve(rep, c)), args.maxlen)
        for c in args.curves
    ]
    value = intersection_number(currents[0], currents[1], scale=args.scale)
    line = "%.6f\n" % value
    if args.out is None:
        sys.stdout.write(line)
    else:
        _emit(_seed_line(args.seed) + line, args.out)
    return 0


def _cmd_ma_solve(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    sol = solve_monge_ampere(
        dom, args.resolution, tol=args.tol, max_sweeps=args.max_sweeps
    )
    if args.out is not None:
        with open(args.out, "wb") as fh:
            fh.write(sol.to_bytes())
    print(
        "seed 0x%X resolution %d sweeps %d residual %.3e"
        % (args.seed, sol.resolution, sol.sweeps, sol.residual)
    )
    return 0


def _cmd_ma_compare(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    sol = solve_monge_ampere(
        dom, args.resolution, tol=args.tol, max_sweeps=args.max_sweeps
    )
    report = compare_hilbert_affine(dom, sol, samples=args.samples, seed=args.seed)
    if args.out is not None and args.out.endswith(".json"):
        payload = report.to_json()
        payload["seed"] = args.seed
        wrote = _emit_json(payload, args.out)
    else:
        wrote = _emit(_seed_line(args.seed) + report.to_csv(), args.out)
    if wrote:
        print(
            "norm ratio [%.4f, %.4f]" % (report.norm_ratio_min, report.norm_ratio_max)
        )
    return 0


def _cmd_serve(args):
    from .server import serve

    serve(
        host=args.host,
        port=args.port,
        seed=args.seed,
        maxlen=args.maxlen,
        depth=args.depth,
    )
    return 0


def _cmd_export_svg(args):
    dom = _resolve_domain(args.domain, depth=args.depth)
    chords = []
    if args.rep is not None:
        rep = _load_rep(args.rep)
        names = args.curves if args.curves else tuple(sorted(rep.marking))
        chords = [_axis_chord(rep, name) for name in names]
    text = render_svg(dom, chords, seed=args.seed)
    if _emit(text, args.out):
        print("%s (%d chords)" % (args.out, len(chords)))
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, domain=None):
    p.add_argument("--seed", type=lambda t: int(t, 0), default=DEFAULT_SEED)
    p.add_argument("--out", default=None)
    p.add_argument("--depth", type=int, default=8)
    if domain is not None:
        p.add_argument("--domain", default=domain)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hilbertia",
        description="Hilbert geometry workbench: distances, spectra, measures, "
        "affine spheres, and an HTTP serve mode.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("domain", help="build a domain and write its JSON form")
    _add_common(p, domain="disk")
    p.set_defaults(func=_cmd_domain)

    p = sub.add_parser("dist", help="Hilbert distance between two interior points")
    _add_common(p, domain="disk")
    p.add_argument("--from", dest="src", type=_point, required=True)
    p.add_argument("--to", dest="dst", type=_point, required=True)
    p.set_defaults(func=_cmd_dist)

    p = sub.add_parser("norm", help="Finsler norm of a tangent vector")
    _add_common(p, domain="disk")
    p.add_argument("--at", type=_point, required=True)
    p.add_argument("--dir", type=_point, required=True)
    p.set_defaults(func=_cmd_norm)

    p = sub.add_parser("volume", help="unit-ball or Busemann volume")
    _add_common(p, domain="disk")
    p.add_argument("--at", type=_point, default=None)
    p.add_argument("--region", default=None, help="polygon JSON file")
    p.add_argument("--samples", type=int, default=65536)
    p.add_argument("--directions", type=int, default=512)
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser("holonomy", help="build a Fuchsian seed representation")
    p.add_argument("kind", choices=("pants", "torus"))
    p.add_argument("--lengths", type=_floats, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_holonomy)

    p = sub.add_parser("deform", help="twist or bulge along a marked curve")
    p.add_argument("--rep", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--twist", type=float, default=0.0)
    p.add_argument("--bulge", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_deform)

    p = sub.add_parser("hull", help="orbit hull polygon of a representation")
    p.add_argument("--rep", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_hull)

    p = sub.add_parser("spectrum", help="marked length spectrum as CSV")
    p.add_argument("--rep", required=True)
    p.add_argument("--maxlen", type=int, default=8)
    p.add_argument("--exact", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("entropy", help="growth-rate estimate of the spectrum")
    p.add_argument("--rep", required=True)
    p.add_argument("--maxlen", type=int, default=12)
    _add_common(p)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("cocycle-check", help="verify the cocycle and period identities")
    p.add_argument("--rep", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=2e-4)
    _add_common(p, domain="disk")
    p.set_defaults(func=_cmd_cocycle_check)

    p = sub.add_parser("ps", help="boundary orbit measure at a decay exponent")
    p.add_argument("--rep", required=True)
    p.add_argument("--maxlen", type=int, default=8)
    p.add_argument("--exponent", type=float, default=None)
    _add_common(p, domain="disk")
    p.set_defaults(func=_cmd_ps)

    p = sub.add_parser("current", help="geodesic current of a conjugacy class")
    p.add_argument("--rep", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--maxlen", type=int, default=5)
    _add_common(p, domain="disk")
    p.set_defaults(func=_cmd_current)

    p = sub.add_parser("intersect", help="intersection number of two classes")
    p.add_argument("--rep", required=True)
    p.add_argument("--curves", type=_names, required=True)
    p.add_argument("--maxlen", type=int, default=5)
    p.add_argument("--scale", choices=("geometric", "mass"), default="geometric")
    _add_common(p, domain="disk")
    p.set_defaults(func=_cmd_intersect)

    p = sub.add_parser("ma-solve", help="solve the affine-sphere boundary problem")
    _add_common(p, domain="disk")
    p.add_argument("--resolution", type=int, default=65)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-sweeps", type=int, default=DEFAULT_SWEEP_CAP)
    p.set_defaults(func=_cmd_ma_solve)

    p = sub.add_parser("ma-compare", help="affine metric against the Hilbert metric")
    _add_common(p, domain="disk")
    p.add_argument("--resolution", type=int, default=65)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-sweeps", type=int, default=DEFAULT_SWEEP_CAP)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=_cmd_ma_compare)

    p = sub.add_parser("serve", help="HTTP service for the explorer UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8034)
    p.add_argument("--maxlen", type=int, default=8)
    _add_common(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export-svg", help="draw a domain, optionally with curve axes")
    _add_common(p, domain="disk")
    p.add_argument("--rep", default=None)
    p.add_argument("--curves", type=_names, default=None)
    p.set_defaults(func=_cmd_export_svg)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Usage as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except HilbertiaError as e:
        print("%s: %s" % (type(e).__name__, e), file=sys.stderr)
        return 3
    except (ValueError, KeyError) as e:
        print("%s: %s" % (type(e).__name__, e), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
