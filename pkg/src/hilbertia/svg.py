"""SVG pictures of domains with optional chords overlaid.

Output is deterministic: coordinates are printed with a fixed format, so
the same domain always yields the same bytes.
"""

import numpy as np

from .domains import Ellipse, Polygon
from .errors import NonConvexDomain
from .metric import DEFAULT_SEED

_FMT = "%.6f"


def _fmt(x):
    # avoid the separate "-0.000000" rendering of a negative zero
    s = _FMT % float(x)
    return "0.000000" if s == "-0.000000" else s


def _pair(p):
    # SVG y grows downward; flip here so the picture sits the usual way up
    return "%s,%s" % (_fmt(p[0]), _fmt(-p[1]))


def domain_path(domain, samples=256):
    """SVG path data for the domain outline (closed, y flipped for display).

    Polygons use their vertices verbatim; ellipses are sampled at `samples`
    boundary points, which at the default is far below display resolution.
    """
    if isinstance(domain, Polygon):
        pts = domain.vertices
    elif isinstance(domain, Ellipse):
        pts = domain.boundary_points(samples)
    else:
        raise NonConvexDomain("no outline for %r" % type(domain).__name__)
    parts = ["M " + _pair(pts[0])]
    for p in pts[1:]:
        parts.append("L " + _pair(p))
    parts.append("Z")
    return " ".join(parts)


def render_svg(domain, chords=(), size=512, seed=DEFAULT_SEED, samples=256):
    """Standalone SVG document: domain outline plus straight chords.

    chords is an iterable of (p, q) endpoint pairs in domain coordinates.
    The viewBox is the domain bounding box padded by 5%, so the caller never
    rescales anything.
    """
    xmin, ymin, xmax, ymax = domain.bbox()
    pad = 0.05 * max(xmax - xmin, ymax - ymin)
    # y flip: the box [ymin, ymax] lands on [-ymax, -ymin]
    vx, vy = xmin - pad, -ymax - pad
    vw, vh = (xmax - xmin) + 2 * pad, (ymax - ymin) + 2 * pad
    stroke = 0.004 * max(vw, vh)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<!-- seed 0x%X -->" % int(seed),
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="%s %s %s %s">' % (size, size, _fmt(vx), _fmt(vy), _fmt(vw), _fmt(vh)),
        '<path d="%s" fill="none" stroke="#23425f" stroke-width="%s"/>'
        % (domain_path(domain, samples=samples), _fmt(stroke)),
    ]
    for p, q in chords:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        lines.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#a03c28" '
            'stroke-width="%s"/>'
            % (_fmt(p[0]), _fmt(-p[1]), _fmt(q[0]), _fmt(-q[1]), _fmt(stroke))
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
