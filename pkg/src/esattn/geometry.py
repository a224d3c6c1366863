"""Object transformation pipeline: mask translation, depth-buffered
orthographic mesh rendering, uniform scaling, and scene placement.

Rendering conventions (fixed for reproducibility):

* Euler angles are applied in Z-Y-X order (yaw, then pitch, then roll)
  about the mesh's vertex centroid; positive z points away from the viewer,
  so the depth test keeps the smaller z.
* The mesh is orthographically projected onto a working canvas three times
  the target resolution, pre-scaled so the rotation-invariant bounding
  sphere spans two thirds of that canvas - no rotation can clip.
* Rasterization has no anti-aliasing and uses a top-left fill rule, so mask
  support and written pixels agree exactly.
* The cropped render is rescaled by 0.7 * target / max(bbox) (bilinear for
  colour, coverage-preserving nearest for the mask) and centred on a white
  square canvas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DegenerateRenderError, DomainError, MeshParseError, ShapeError

SAFETY_FACTOR = 0.7
CANVAS_MULTIPLIER = 3
FIT_FRACTION = 2.0 / 3.0  # bounding-sphere diameter as a fraction of the working canvas

WHITE = np.array([255, 255, 255], dtype=np.uint8)
GRAY = np.array([128, 128, 128], dtype=np.uint8)


@dataclass(frozen=True)
class Mesh:
    """Triangle soup with per-vertex positions and optional colours.

    Colours are floats in [0, 1]; ``None`` renders white.  Degenerate
    triangles are legal and simply contribute no pixels.
    """

    vertices: np.ndarray
    faces: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
            raise ShapeError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
            raise ShapeError("mesh must have at least one triangular face")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise DomainError("face indices out of vertex range")
        c = self.colors
        if c is not None:
            c = np.asarray(c, dtype=np.float64)
            if c.shape != v.shape:
                raise ShapeError("colors must match vertices in shape")
            if c.min() < 0.0 or c.max() > 1.0:
                raise DomainError("colors must lie in [0, 1]")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "colors", c)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.vertices - self.centroid(), axis=1).max())


def parse_mesh(text: str) -> Mesh:
    """Parse the supported mesh text format.

    Accepted lines: ``v x y z`` or ``v x y z r g b`` and ``f i j k`` with
    1-based vertex indices; blank lines are ignored.  Anything else raises
    :class:`MeshParseError` naming the offending line.
    """
    vertices, colors, faces = [], [], []
    any_color = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) not in (4, 7):
                raise MeshParseError(f"line {lineno}: vertex needs 3 or 6 numbers: {raw!r}")
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError:
                raise MeshParseError(f"line {lineno}: malformed vertex number: {raw!r}") from None
            vertices.append(nums[:3])
            if len(nums) == 6:
                colors.append(nums[3:])
                any_color = True
            else:
                colors.append([1.0, 1.0, 1.0])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise MeshParseError(f"line {lineno}: face needs exactly 3 indices: {raw!r}")
            try:
                idx = [int(p) for p in parts[1:]]
            except ValueError:
                raise MeshParseError(f"line {lineno}: malformed face index: {raw!r}") from None
            if any(i < 1 for i in idx):
                raise MeshParseError(f"line {lineno}: face indices are 1-based: {raw!r}")
            faces.append([i - 1 for i in idx])
        else:
            raise MeshParseError(f"line {lineno}: unsupported directive: {raw!r}")
    if not vertices:
        raise MeshParseError("no vertices found")
    if not faces:
        raise MeshParseError("no faces found")
    if max(max(f) for f in faces) >= len(vertices):
        bad = next(n for n, f in enumerate(faces) if max(f) >= len(vertices))
        raise MeshParseError(f"face {bad + 1} references a missing vertex")
    return Mesh(
        vertices=np.array(vertices),
        faces=np.array(faces),
        colors=np.array(colors) if any_color else None,
    )


def load_mesh(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_mesh(handle.read())


def _normalize_angle(a: float) -> float:
    r = float(a) % 360.0
    return r - 360.0 if r > 180.0 else r


@dataclass(frozen=True)
class Rotation:
    """Euler angles in degrees, normalised to (-180, 180] on construction
    and applied in Z-Y-X order about the mesh centroid."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, _normalize_angle(value))

    def matrix(self) -> np.ndarray:
        cz, sz = np.cos(np.radians(self.yaw)), np.sin(np.radians(self.yaw))
        cy, sy = np.cos(np.radians(self.pitch)), np.sin(np.radians(self.pitch))
        cx, sx = np.cos(np.radians(self.roll)), np.sin(np.radians(self.roll))
        rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
        return rx @ ry @ rz


@dataclass
class Raster:
    """RGB pixel buffer plus a binary object-support mask."""

    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        m = np.asarray(self.mask, dtype=bool)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeError(f"pixels must have shape (h, w, 3), got {p.shape}")
        if m.shape != p.shape[:2]:
            raise ShapeError("mask shape must match pixel shape")
        self.pixels = p
        self.mask = m

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, color=WHITE) -> "Raster":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = color
        return cls(pixels=px, mask=np.zeros((height, width), dtype=bool))

    def copy(self) -> "Raster":
        return Raster(pixels=self.pixels.copy(), mask=self.mask.copy())

    def bbox(self) -> tuple[int, int, int, int] | None:
        """Inclusive (x0, y0, x1, y1) of the mask support, or None if empty."""
        return _bbox_of(self.mask)


def _bbox_of(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def _shift(arr: np.ndarray, dx: int, dy: int, fill) -> np.ndarray:
    """Integer shift with silent clipping; vacated cells take ``fill``."""
    out = np.empty_like(arr)
    out[...] = fill
    h, w = arr.shape[:2]
    sx0, sx1 = max(0, -dx), min(w, w - dx)
    sy0, sy1 = max(0, -dy), min(h, h - dy)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 + dy:sy1 + dy, sx0 + dx:sx1 + dx] = arr[sy0:sy1, sx0:sx1]
    return out


def translate_mask(raster: Raster, offset: tuple[int, int]) -> Raster:
    """Shift the object (pixels and mask) by whole pixels, clipping at the
    frame; shape and texture of surviving pixels are unchanged."""
    dx, dy = int(offset[0]), int(offset[1])
    return Raster(
        pixels=_shift(raster.pixels, dx, dy, WHITE),
        mask=_shift(raster.mask, dx, dy, False),
    )


def rasterize_mesh(mesh: Mesh, rotation: Rotation, size: int,
                   fill_diameter: float | None = None):
    """Depth-buffered orthographic rasterization onto a ``size`` square.

    Returns ``(color, coverage, depth)`` where color is float RGB in [0, 1]
    over a white background, coverage marks exactly the written pixels and
    depth holds the winning z per pixel.  The mesh is centred and scaled so
    its bounding sphere spans ``fill_diameter`` pixels (default: the fit
    fraction of the canvas).
    """
    if size < 1:
        raise DomainError("canvas size must be positive")
    radius = mesh.bounding_radius()
    if radius <= 0.0:
        raise DegenerateRenderError("mesh has zero spatial extent")
    fill = FIT_FRACTION * size if fill_diameter is None else float(fill_diameter)
    scale = fill / (2.0 * radius)

    rel = mesh.vertices - mesh.centroid()
    rot = rel @ rotation.matrix().T
    px = size / 2.0 + scale * rot[:, 0]
    py = size / 2.0 - scale * rot[:, 1]
    pz = rot[:, 2]

    colors = mesh.colors if mesh.colors is not None else np.ones_like(mesh.vertices)
    color = np.ones((size, size, 3))
    depth = np.full((size, size), np.inf)
    coverage = np.zeros((size, size), dtype=bool)

    for face in mesh.faces:
        i0, i1, i2 = (int(v) for v in face)
        v0 = np.array([px[i0], py[i0]])
        v1 = np.array([px[i1], py[i1]])
        v2 = np.array([px[i2], py[i2]])
        area2 = float((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0]))
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            i1, i2 = i2, i1
            v1, v2 = v2, v1
            area2 = -area2
        z = np.array([pz[i0], pz[i1], pz[i2]])
        c = np.stack([colors[i0], colors[i1], colors[i2]])

        xs = (v0[0], v1[0], v2[0])
        ys = (v0[1], v1[1], v2[1])
        x_lo = max(int(np.floor(min(xs))), 0)
        x_hi = min(int(np.ceil(max(xs))) + 1, size)
        y_lo = max(int(np.floor(min(ys))), 0)
        y_hi = min(int(np.ceil(max(ys))) + 1, size)
        if x_lo >= x_hi or y_lo >= y_hi:
            continue

        cx, cy = np.meshgrid(np.arange(x_lo, x_hi) + 0.5, np.arange(y_lo, y_hi) + 0.5)

        def edge(a, b):
            val = (b[0] - a[0]) * (cy - a[1]) - (b[1] - a[1]) * (cx - a[0])
            d = b - a
            top_left = d[1] < 0.0 or (d[1] == 0.0 and d[0] > 0.0)
            return val, top_left

        e01, tl01 = edge(v0, v1)
        e12, tl12 = edge(v1, v2)
        e20, tl20 = edge(v2, v0)
        inside = (
            ((e01 > 0) | ((e01 == 0) & tl01))
            & ((e12 > 0) | ((e12 == 0) & tl12))
            & ((e20 > 0) | ((e20 == 0) & tl20))
        )
        if not inside.any():
            continue

        w0 = e12 / area2
        w1 = e20 / area2
        w2 = e01 / area2
        zi = w0 * z[0] + w1 * z[1] + w2 * z[2]
        block = (slice(y_lo, y_hi), slice(x_lo, x_hi))
        win = inside & (zi < depth[block])
        if not win.any():
            continue
        depth[block][win] = zi[win]
        shade = (w0[..., None] * c[0] + w1[..., None] * c[1] + w2[..., None] * c[2])
        color[block][win] = shade[win]
        coverage[block] |= win

    return color, coverage, depth


def _resize_mask(mask: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Nearest-neighbour mask resize.

    Upscales sample backward (hole-free); downscales splat each set pixel to
    its nearest output cell, which preserves extremal support that point
    sampling can drop.
    """
    h, w = mask.shape
    if new_w == w and new_h == h:
        return mask.copy()
    if new_w >= w and new_h >= h:
        cols = np.minimum(((np.arange(new_w) + 0.5) * w / new_w).astype(int), w - 1)
        rows = np.minimum(((np.arange(new_h) + 0.5) * h / new_h).astype(int), h - 1)
        return mask[np.ix_(rows, cols)]
    out = np.zeros((new_h, new_w), dtype=bool)
    ys, xs = np.nonzero(mask)
    if xs.size:
        ox = np.clip(np.rint((xs + 0.5) * new_w / w - 0.5).astype(int), 0, new_w - 1)
        oy = np.clip(np.rint((ys + 0.5) * new_h / h - 0.5).astype(int), 0, new_h - 1)
        out[oy, ox] = True
    return out


def _resize_image(pixels: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    img = Image.fromarray(pixels).resize((new_w, new_h), Image.BILINEAR)
    return np.asarray(img)


def render_rotated(mesh: Mesh, rotation: Rotation, target_resolution: int) -> Raster:
    """Full rotation render: rasterize on the enlarged working canvas, crop
    to the object bounding box, rescale by the safety factor and centre on a
    white ``target_resolution`` square.  Raises
    :class:`DegenerateRenderError` if nothing was rasterized."""
    t = int(target_resolution)
    if t < 8:
        raise DomainError("target resolution must be at least 8")
    big = CANVAS_MULTIPLIER * t
    color, coverage, _ = rasterize_mesh(mesh, rotation, big, fill_diameter=FIT_FRACTION * big)
    box = _bbox_of(coverage)
    if box is None:
        raise DegenerateRenderError("mesh projected to zero pixels")
    x0, y0, x1, y1 = box
    crop_color = color[y0:y1 + 1, x0:x1 + 1]
    crop_cover = coverage[y0:y1 + 1, x0:x1 + 1]
    bw, bh = x1 - x0 + 1, y1 - y0 + 1
    s = SAFETY_FACTOR * t / max(bw, bh)
    new_w = max(1, int(round(bw * s)))
    new_h = max(1, int(round(bh * s)))

    pixels8 = np.clip(np.rint(crop_color * 255.0), 0, 255).astype(np.uint8)
    obj_img = _resize_image(pixels8, new_w, new_h)
    obj_mask = _resize_mask(crop_cover, new_w, new_h)

    out = Raster.blank(t, t)
    ox = (t - new_w + 1) // 2
    oy = (t - new_h + 1) // 2
    out.pixels[oy:oy + new_h, ox:ox + new_w] = obj_img
    out.mask[oy:oy + new_h, ox:ox + new_w] = obj_mask
    return out


def scale_object(raster: Raster, s: float) -> Raster:
    """Uniformly scale the object about its bounding-box centre.

    The canvas size is unchanged and overflow is clipped; pixels outside the
    scaled object revert to the white background.
    """
    if not (s > 0.0):
        raise DomainError(f"scale must be positive, got {s}")
    if s == 1.0:
        return raster.copy()
    box = raster.bbox()
    if box is None:
        return raster.copy()
    x0, y0, x1, y1 = box
    bw, bh = x1 - x0 + 1, y1 - y0 + 1
    new_w = max(1, int(round(bw * s)))
    new_h = max(1, int(round(bh * s)))
    sub_img = _resize_image(raster.pixels[y0:y1 + 1, x0:x1 + 1], new_w, new_h)
    sub_mask = _resize_mask(raster.mask[y0:y1 + 1, x0:x1 + 1], new_w, new_h)

    out = Raster.blank(raster.width, raster.height)
    cx = x0 + bw / 2.0
    cy = y0 + bh / 2.0
    ox = int(round(cx - new_w / 2.0))
    oy = int(round(cy - new_h / 2.0))
    dst_x0, dst_x1 = max(0, ox), min(raster.width, ox + new_w)
    dst_y0, dst_y1 = max(0, oy), min(raster.height, oy + new_h)
    if dst_x0 < dst_x1 and dst_y0 < dst_y1:
        src = (slice(dst_y0 - oy, dst_y1 - oy), slice(dst_x0 - ox, dst_x1 - ox))
        region_mask = sub_mask[src]
        out.pixels[dst_y0:dst_y1, dst_x0:dst_x1][region_mask] = sub_img[src][region_mask]
        out.mask[dst_y0:dst_y1, dst_x0:dst_x1] = region_mask
    return out


def place_at(raster: Raster, scene: Raster, target_center: tuple[float, float]) -> Raster:
    """Composite the object over the scene with its bounding-box centre
    moved to ``target_center``; the result's mask is the union of the scene
    mask and the placed object mask."""
    cx, cy = float(target_center[0]), float(target_center[1])
    if not (0 <= cx < scene.width and 0 <= cy < scene.height):
        raise DomainError(f"target_center {target_center} outside scene bounds")
    out = scene.copy()
    box = raster.bbox()
    if box is None:
        return out
    x0, y0, x1, y1 = box
    dx = int(round(cx - (x0 + (x1 - x0 + 1) / 2.0)))
    dy = int(round(cy - (y0 + (y1 - y0 + 1) / 2.0)))

    obj_h, obj_w = raster.mask.shape
    src_x0, src_x1 = max(0, -dx), min(obj_w, scene.width - dx)
    src_y0, src_y1 = max(0, -dy), min(obj_h, scene.height - dy)
    if src_x0 >= src_x1 or src_y0 >= src_y1:
        return out
    sub_mask = raster.mask[src_y0:src_y1, src_x0:src_x1]
    sub_pix = raster.pixels[src_y0:src_y1, src_x0:src_x1]
    dst = (slice(src_y0 + dy, src_y1 + dy), slice(src_x0 + dx, src_x1 + dx))
    out.pixels[dst][sub_mask] = sub_pix[sub_mask]
    out.mask[dst] |= sub_mask
    return out


TRANSFORM_KINDS = ("translate", "rotate", "scale", "composite")


@dataclass(frozen=True)
class TransformSpec:
    """One requested transformation: kind plus its parameters.

    ``offset`` is in pixels, angles in degrees; ``target_center`` positions
    the transformed object in scene coordinates.  The composite kind applies
    rotate, then scale, then translate.
    """

    kind: str
    offset: tuple[int, int] = (0, 0)
    rotation: Rotation = Rotation()
    scale: float = 1.0
    target_resolution: int = 128
    target_center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise DomainError(f"kind must be one of {TRANSFORM_KINDS}, got {self.kind!r}")
        if not (self.scale > 0.0):
            raise DomainError("scale must be positive")
        if self.target_resolution < 8:
            raise DomainError("target_resolution must be at least 8")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "offset": list(self.offset),
            "rotation": {"yaw": self.rotation.yaw, "pitch": self.rotation.pitch,
                         "roll": self.rotation.roll},
            "scale": self.scale,
            "target_resolution": self.target_resolution,
            "target_center": list(self.target_center) if self.target_center else None,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TransformSpec":
        rot = d.get("rotation", {})
        center = d.get("target_center")
        return cls(
            kind=d["kind"],
            offset=tuple(d.get("offset", (0, 0))),
            rotation=Rotation(yaw=rot.get("yaw", 0.0), pitch=rot.get("pitch", 0.0),
                              roll=rot.get("roll", 0.0)),
            scale=float(d.get("scale", 1.0)),
            target_resolution=int(d.get("target_resolution", 128)),
            target_center=tuple(center) if center is not None else None,
        )


def _extract_on_white(raster: Raster) -> Raster:
    out = Raster.blank(raster.width, raster.height)
    out.pixels[raster.mask] = raster.pixels[raster.mask]
    out.mask = raster.mask.copy()
    return out


def _mask_raster(mask: np.ndarray) -> Raster:
    pixels = np.zeros((*mask.shape, 3), dtype=np.uint8)
    pixels[mask] = 255
    return Raster(pixels=pixels, mask=mask.copy())


def apply_transform(obj, spec: TransformSpec, scene: Raster) -> tuple[Raster, Raster]:
    """Produce the two guidance inputs for one transformation: the
    appearance reference (transformed object on white) and the target mask
    placed in scene coordinates.

    ``obj`` is a :class:`Mesh` for rotate/composite and a :class:`Raster`
    (object image plus mask, in scene coordinates) for translate/scale.
    """
    if spec.kind == "translate":
        if not isinstance(obj, Raster):
            raise DomainError("translate expects a raster input")
        if (obj.width, obj.height) != (scene.width, scene.height):
            raise ShapeError("translate expects the object raster in scene coordinates")
        moved = translate_mask(obj, spec.offset)
        return _extract_on_white(obj), _mask_raster(moved.mask)

    if spec.kind == "scale":
        if not isinstance(obj, Raster):
            raise DomainError("scale expects a raster input")
        scaled = scale_object(obj, spec.scale)
        return scaled, _placed_mask(scaled, spec, scene)

    if spec.kind == "rotate":
        if not isinstance(obj, Mesh):
            raise DomainError("rotate expects a mesh input")
        ref = render_rotated(obj, spec.rotation, spec.target_resolution)
        return ref, _placed_mask(ref, spec, scene)

    # composite: rotate -> scale -> translate
    if not isinstance(obj, Mesh):
        raise DomainError("composite expects a mesh input")
    ref = render_rotated(obj, spec.rotation, spec.target_resolution)
    if spec.scale != 1.0:
        ref = scale_object(ref, spec.scale)
    return ref, _placed_mask(ref, spec, scene)


def _placed_mask(ref: Raster, spec: TransformSpec, scene: Raster) -> Raster:
    if spec.target_center is None:
        center = (scene.width / 2.0, scene.height / 2.0)
    else:
        center = (spec.target_center[0] + spec.offset[0],
                  spec.target_center[1] + spec.offset[1])
    blank = Raster.blank(scene.width, scene.height)
    placed = place_at(ref, blank, center)
    return _mask_raster(placed.mask)
