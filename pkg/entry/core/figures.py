"""
Moment-polytope figures with embedding overlays, written as SVG plus CSV
"""
import csv
import io
import math
import os
from typing import Dict, List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib.patches import Polygon, Rectangle as RectPatch  # noqa: E402

from entry.models import RunConfig  # noqa: E402
from entry.utils.file_utils import atomic_write_bytes, atomic_write_text  # noqa: E402
from hofer.disk_family import FamilyVariant, build_disk_rect_family, max_radius  # noqa: E402
from hofer.embeddings import (  # noqa: E402
    i_minus_arrays,
    i_plus_arrays,
    j_minus,
    sample_ball,
)
from hofer.errors import DomainViolation, Unsupported  # noqa: E402
from hofer.geometry import HALF_PI, ManifoldKind, ManifoldModel, polytope, real_to_complex  # noqa: E402
from hofer.hamiltonians import actions_of_arrays  # noqa: E402

SCATTER_POINTS = 4000
RECTANGLE_STEPS = 5

matplotlib.rcParams.update({
    "svg.hashsalt": "hofer",
    "svg.fonttype": "none",
    "font.size": 9,
})

POINT_OVERLAYS = ("i_minus", "i_plus", "j_minus")
RECT_OVERLAYS = {
    "rect_minus": FamilyVariant.MINUS_CP2,
    "rect_plus": FamilyVariant.PLUS_CP2,
    "rect_minus_blowup": FamilyVariant.MINUS_BLOWUP,
    "rect_plus_blowup": FamilyVariant.PLUS_BLOWUP,
}
OVERLAYS = POINT_OVERLAYS + tuple(RECT_OVERLAYS)


def _vertex_label(value: float) -> str:
    """Multiples of π/2 are labelled as such"""
    if abs(value) < 1e-15:
        return "0"
    ratio = value / HALF_PI
    if abs(ratio - 1) < 1e-12:
        return "π/2"
    return f"{ratio:.4g}·π/2"


def overlay_points(m: ManifoldModel, overlay: str, s: Optional[float], n: int, seed: int,
                   epsilon: float = 0.05) -> np.ndarray:
    """Moment-map image (P, Q) of a ball of radius s under i^±, or of B⁴(s − ε) under j_s^−"""
    rng = np.random.default_rng(seed)
    if overlay in ("i_minus", "i_plus"):
        if m.kind is not ManifoldKind.CP2:
            raise Unsupported(f"{overlay} overlays are drawn on CP2")
        s = 1 / math.sqrt(2) if s is None else s
        if not 0 < s < 1:
            raise DomainViolation(f"Ball radius for {overlay} must lie in (0, 1), got {s}")
        z = real_to_complex(sample_ball(rng, n, 4, s))
        homogeneous = i_minus_arrays(z) if overlay == "i_minus" else i_plus_arrays(z)
    elif overlay == "j_minus":
        if m.kind is not ManifoldKind.BLOWUP:
            raise Unsupported("j_minus overlays are drawn on the blow-up")
        s_max = math.sqrt(1 - m.lam ** 2)
        s = s_max if s is None else s
        if not epsilon < s <= s_max:
            raise DomainViolation(f"Ball radius for j_minus must lie in ({epsilon:g}, {s_max:.6g}], got {s}")
        j = j_minus(s, epsilon, m.lam)
        homogeneous = j.homogeneous(sample_ball(rng, n, 4, j.radius))
    else:
        raise Unsupported(f"Unknown point overlay {overlay!r}")
    return actions_of_arrays(m, homogeneous, None)[:, :2]


def overlay_rectangles(m: ManifoldModel, overlay: str, epsilon: float) -> List[Dict[str, float]]:
    """Target rectangles rect_of(r + ε) of a disk family for a few radii up to the outer one"""
    variant = RECT_OVERLAYS[overlay]
    if variant.on_blowup != (m.kind is ManifoldKind.BLOWUP):
        raise Unsupported(f"{overlay} does not live on {m.label}")
    lam = m.lam if variant.on_blowup else None
    family = build_disk_rect_family(variant, max_radius(variant, epsilon, lam), epsilon, lam)
    rows = []
    for r in np.linspace(family.r_max / RECTANGLE_STEPS, family.r_max, RECTANGLE_STEPS):
        rect = family.rect_of(float(r) + epsilon)
        rows.append({"r": float(r), **rect.to_dict(), "area": rect.area})
    return rows


def _figure(m: ManifoldModel, px_per_unit: float) -> Tuple[plt.Figure, plt.Axes]:
    verts = polytope(m).array
    width = float(verts[:, 0].max()) * px_per_unit / 100 + 1.0
    height = float(verts[:, 1].max()) * px_per_unit / 100 + 1.0
    fig, ax = plt.subplots(figsize=(width, height), dpi=100)
    ax.set_aspect("equal")
    ax.set_xlabel("P")
    ax.set_ylabel("Q")
    return fig, ax


def draw_polytope(ax: plt.Axes, m: ManifoldModel) -> None:
    poly = polytope(m)
    ax.add_patch(Polygon(poly.array, closed=True, fill=False, edgecolor="black", linewidth=1.2))
    for x, y in poly.vertices:
        ax.annotate(f"({_vertex_label(x)}, {_vertex_label(y)})", (x, y), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    lo, hi = poly.array.min(axis=0), poly.array.max(axis=0)
    pad = 0.08 * float((hi - lo).max())
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)


def _write_csv(path: str, rows: List[Dict[str, float]]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return atomic_write_text(path, buf.getvalue())


def _save_svg(fig: plt.Figure, path: str) -> str:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return atomic_write_bytes(path, buf.getvalue())


def render_polytope(cfg: RunConfig) -> List[str]:
    """
    Draw the moment polytope of the configured manifold, and the named overlay.

    Returns:
        Paths of the files written
    """
    m = cfg.manifold_model()
    if m.kind not in (ManifoldKind.CP2, ManifoldKind.BLOWUP):
        raise Unsupported(f"Polytope figures are drawn for CP2 and the blow-up, not {m.label}")
    if cfg.overlay is not None and cfg.overlay not in OVERLAYS:
        raise Unsupported(f"Unknown overlay {cfg.overlay!r}", {"hint": f"choose one of {', '.join(OVERLAYS)}"})

    stem = "polytope_cp2" if m.kind is ManifoldKind.CP2 else f"polytope_blowup_{m.lam:g}"
    files = [_write_csv(os.path.join(cfg.out, f"{stem}.csv"), polytope(m).to_rows())]

    fig, ax = _figure(m, cfg.px_per_unit)
    draw_polytope(ax, m)
    if cfg.overlay in POINT_OVERLAYS:
        pts = overlay_points(m, cfg.overlay, cfg.s, min(cfg.samples, SCATTER_POINTS), cfg.seed, cfg.epsilon)
        ax.scatter(pts[:, 0], pts[:, 1], s=1.5, alpha=0.4, color="tab:blue", rasterized=False)
        stem = f"{stem}_{cfg.overlay}"
        files.append(_write_csv(os.path.join(cfg.out, f"{stem}_points.csv"),
                                [{"P": float(p), "Q": float(q)} for p, q in pts]))
    elif cfg.overlay in RECT_OVERLAYS:
        rows = overlay_rectangles(m, cfg.overlay, cfg.epsilon)
        # rectangles live in the (s, t) slab; drawn in a separate panel on the same scale
        fig.clf()
        ax_poly, ax_rect = fig.subplots(1, 2)
        draw_polytope(ax_poly, m)
        ax_poly.set_aspect("equal")
        for row in rows:
            ax_rect.add_patch(RectPatch((row["x_min"], row["y_min"]), row["x_max"] - row["x_min"],
                                        row["y_max"] - row["y_min"], fill=False, linewidth=0.8))
        ax_rect.set_xlim(min(r["x_min"] for r in rows) - 0.05, max(r["x_max"] for r in rows) + 0.05)
        ax_rect.set_ylim(-0.05, 1.05)
        ax_rect.set_aspect("equal")
        ax_rect.set_xlabel("s")
        ax_rect.set_ylabel("t")
        stem = f"{stem}_{cfg.overlay}"
        files.append(_write_csv(os.path.join(cfg.out, f"{stem}_rectangles.csv"), rows))
    files.append(_save_svg(fig, os.path.join(cfg.out, f"{stem}.svg")))
    logger.info(f"✅ Wrote {len(files)} figure files for {m.label}")
    return files
