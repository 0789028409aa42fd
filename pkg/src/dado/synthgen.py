"""Deterministic synthetic scenes: depth planes + attention blobs + GT boxes.

Scenes place rectangle/ellipse objects at distinct depth planes over a flat
far background. Depth is the plane value inside each silhouette; attention
is a per-object Gaussian bump (sigma = half the box size, support clipped
to the silhouette so the background stays attention-silent), assigned
round-robin across six heads. Optional zero-mean Gaussian noise with one
amplitude knob is added to the depth map and every head.

Randomness comes from a counter-based splitmix64 generator specified below
bit-for-bit, so identical seeds produce identical files on any platform.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .map_store import Box, GroundTruth, GTObject, serialize_voc_xml, write_pfm
from .validation import ContractError

HEAD_COUNT = 6
MIN_PLANE_SEPARATION = 2.0 / 64.0  # keeps histogram peaks apart at default binning

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class PortableRng:
    """Counter-based splitmix64 stream.

    Output i is mix64(seed + (i+1) * 0x9E3779B97F4A7C15) over uint64 with
    wraparound, where mix64 is the splitmix64 finalizer (xor-shift 30,
    multiply 0xBF58476D1CE4E5B9, xor-shift 27, multiply 0x94D049BB133111EB,
    xor-shift 31). Uniforms take the top 53 bits / 2^53; normals use
    Box-Muller on uniform pairs: r = sqrt(-2 ln(1 - u1)), angle 2*pi*u2.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._count = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        return _mix64(self._seed + idx * np.uint64(_GOLDEN))

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normals(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u1 = self.uniforms(m)
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        out = np.concatenate([r * np.cos(2.0 * math.pi * u2),
                              r * np.sin(2.0 * math.pi * u2)])
        return out[:n]

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return float(lo + (hi - lo) * self.uniforms(1)[0])


def subseed(seed: int, index: int) -> int:
    """Derived stream seed: mix64(seed + (index+1) * golden gamma)."""
    z = (seed + (index + 1) * _GOLDEN) & 0xFFFFFFFFFFFFFFFF
    return int(_mix64(np.array([z], dtype=np.uint64))[0])


@dataclass
class SceneObject:
    shape: str  # "rect" | "ellipse"
    box: Box
    depth_plane: float  # nearness in [0, 1]
    attention_gain: float = 1.0
    depth_plane_far: float | None = None  # set for deep objects: lower half sits here


@dataclass
class SceneSpec:
    seed: int
    width: int
    height: int
    objects: list[SceneObject] = field(default_factory=list)
    background_depth: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        planes = [self.background_depth]
        for o in self.objects:
            if not (0 <= o.box.xmin and o.box.xmax <= self.width
                    and 0 <= o.box.ymin and o.box.ymax <= self.height):
                raise ContractError(f"object box {o.box} outside {self.width}x{self.height}")
            planes.append(o.depth_plane)
            if o.depth_plane_far is not None:
                planes.append(o.depth_plane_far)
        for i, a in enumerate(planes):
            for b in planes[i + 1:]:
                if a != b and abs(a - b) < MIN_PLANE_SEPARATION:
                    raise ContractError(
                        f"depth planes {a} and {b} closer than {MIN_PLANE_SEPARATION}"
                    )
        for i, a in enumerate(self.objects):
            for b in self.objects[i + 1:]:
                if a.depth_plane == b.depth_plane and _boxes_overlap(a.box, b.box):
                    warnings.warn(
                        "overlapping objects on one depth plane are unlikely to separate",
                        stacklevel=2,
                    )


def _boxes_overlap(a: Box, b: Box) -> bool:
    return min(a.xmax, b.xmax) > max(a.xmin, b.xmin) and min(a.ymax, b.ymax) > max(a.ymin, b.ymin)


def _silhouette(obj: SceneObject, width: int, height: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    px = xs + 0.5
    py = ys + 0.5
    b = obj.box
    if obj.shape == "rect":
        return (px > b.xmin) & (px < b.xmax) & (py > b.ymin) & (py < b.ymax)
    if obj.shape == "ellipse":
        cx, cy = (b.xmin + b.xmax) / 2.0, (b.ymin + b.ymax) / 2.0
        ax, ay = (b.xmax - b.xmin) / 2.0, (b.ymax - b.ymin) / 2.0
        return ((px - cx) / ax) ** 2 + ((py - cy) / ay) ** 2 <= 1.0
    raise ContractError(f"unknown shape {obj.shape!r}")


def generate_scene(spec: SceneSpec) -> tuple[np.ndarray, list[np.ndarray], GroundTruth]:
    """Render depth, attention heads, and ground truth for one scene.

    Objects are painted in list order (later objects overwrite earlier ones
    where they overlap, i.e. nearer objects should come later). Ground
    truth keeps the full planted boxes, occluded parts included.
    """
    w, h = spec.width, spec.height
    depth = np.full((h, w), spec.background_depth, dtype=np.float64)
    heads = [np.zeros((h, w), dtype=np.float64) for _ in range(HEAD_COUNT)]
    owner = np.full((h, w), -1, dtype=np.int32)
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5
    py = ys + 0.5

    for j, obj in enumerate(spec.objects):
        sil = _silhouette(obj, w, h)
        b = obj.box
        if obj.depth_plane_far is not None:
            ymid = b.ymin + (b.ymax - b.ymin) // 2
            depth[sil & (ys < ymid)] = obj.depth_plane
            depth[sil & (ys >= ymid)] = obj.depth_plane_far
        else:
            depth[sil] = obj.depth_plane
        owner[sil] = j

    # later (nearer) objects overwrite depth, so clip each blob to the pixels
    # the object actually owns; occluded parts stay attention-silent
    for j, obj in enumerate(spec.objects):
        b = obj.box
        cx, cy = (b.xmin + b.xmax) / 2.0, (b.ymin + b.ymax) / 2.0
        sx, sy = (b.xmax - b.xmin) / 2.0, (b.ymax - b.ymin) / 2.0
        blob = obj.attention_gain * np.exp(
            -((px - cx) ** 2) / (2.0 * sx * sx) - ((py - cy) ** 2) / (2.0 * sy * sy)
        )
        head = heads[j % HEAD_COUNT]
        np.maximum(head, np.where(owner == j, blob, 0.0), out=head)

    rng = PortableRng(spec.seed)
    if spec.noise_sigma > 0:
        depth = depth + spec.noise_sigma * rng.normals(w * h).reshape(h, w)
        for k in range(HEAD_COUNT):
            noisy = heads[k] + spec.noise_sigma * rng.normals(w * h).reshape(h, w)
            heads[k] = np.clip(noisy, 0.0, 1.0)

    gt = GroundTruth(
        stem="",
        objects=[GTObject(box=o.box, label=o.shape) for o in spec.objects],
        image_width=w,
        image_height=h,
    )
    return (
        depth.astype(np.float32),
        [hd.astype(np.float32) for hd in heads],
        gt,
    )


# ---------------------------------------------------------------------------
# Suite construction
# ---------------------------------------------------------------------------

_PLANE_MENU = (0.55, 0.70, 0.85, 1.00)
_CELLS = ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5))  # 2x2 grid, fractional origin


def _even(v: float) -> int:
    return int(round(v / 2.0)) * 2


def _occlusion_objects(index: int, rng: PortableRng, width: int,
                       height: int) -> list[SceneObject]:
    """A near object strictly inside a far object's box, plus 1-2 extras.

    The inner object gets half the far object's dimensions so its depth
    plane carries enough histogram mass to form its own peak, and one extra
    object sits at nearness 1.0 so normalization keeps the inner plane at
    an interior histogram bin.
    """
    far_w = _even(rng.uniform(0.38, 0.42) * width)
    far_h = _even(rng.uniform(0.74, 0.80) * height)
    fx = (width // 2 - far_w) // 2
    fy = (height - far_h) // 2
    far_box = Box(fx, fy, fx + far_w, fy + far_h)
    icx, icy = (far_box.xmin + far_box.xmax) // 2, (far_box.ymin + far_box.ymax) // 2
    inner_box = Box(icx - far_w // 4, icy - far_h // 4, icx + far_w // 4, icy + far_h // 4)
    objects = [
        SceneObject("rect", far_box, 0.40, rng.uniform(0.85, 1.0)),
        SceneObject("rect", inner_box, 0.70, rng.uniform(0.85, 1.0)),
    ]
    extra_planes = (1.0, 0.85)
    n_extra = 1 + (2 + index % 3 >= 4)
    cell_w, cell_h = width // 2, height // 2
    for j in range(n_extra):
        bw = _even(rng.uniform(0.42, 0.55) * cell_w)
        bh = _even(rng.uniform(0.42, 0.55) * cell_h)
        xmin = width // 2 + (cell_w - bw) // 2
        ymin = j * cell_h + (cell_h - bh) // 2
        objects.append(
            SceneObject(
                shape="ellipse" if j % 2 else "rect",
                box=Box(xmin, ymin, xmin + bw, ymin + bh),
                depth_plane=extra_planes[j],
                attention_gain=rng.uniform(0.85, 1.0),
            )
        )
    return objects


def _isolated_scene(index: int, seed: int, width: int, height: int,
                    noise_sigma: float) -> SceneSpec:
    """2-4 isolated objects on distinct planes; every 5th scene plants an
    occlusion pair (a near object strictly inside a far object's box)."""
    rng = PortableRng(subseed(seed, index))
    if index % 5 == 4:
        objects = _occlusion_objects(index, rng, width, height)
    else:
        n_objects = 2 + index % 3
        cell_w, cell_h = width // 2, height // 2
        objects = []
        order = [(index + j) % 4 for j in range(4)]
        for j in range(n_objects):
            ox, oy = _CELLS[order[j]]
            x0, y0 = int(ox * width), int(oy * height)
            bw = _even(rng.uniform(0.42, 0.62) * cell_w)
            bh = _even(rng.uniform(0.42, 0.62) * cell_h)
            xmin = x0 + (cell_w - bw) // 2
            ymin = y0 + (cell_h - bh) // 2
            objects.append(
                SceneObject(
                    shape="rect" if (index + j) % 2 == 0 else "ellipse",
                    box=Box(xmin, ymin, xmin + bw, ymin + bh),
                    depth_plane=_PLANE_MENU[(index + j) % 4],
                    attention_gain=rng.uniform(0.85, 1.0),
                )
            )
    return SceneSpec(seed=subseed(seed, index * 2 + 1), width=width, height=height,
                     objects=objects, background_depth=0.0, noise_sigma=noise_sigma)


def _deep_scene(index: int, seed: int, width: int, height: int,
                noise_sigma: float) -> SceneSpec:
    """One object spanning two depth planes plus one ordinary near object."""
    rng = PortableRng(subseed(seed, index))
    bw = int(round(rng.uniform(0.36, 0.42) * width / 2) * 2)
    bh = int(round(rng.uniform(0.40, 0.46) * height / 2) * 2)
    xmin = int(rng.uniform(0.04, 0.08) * width)
    ymin = (height - bh) // 2
    deep = SceneObject(
        shape="rect",
        box=Box(xmin, ymin, xmin + bw, ymin + bh),
        depth_plane=0.60,
        depth_plane_far=0.72,
        attention_gain=rng.uniform(0.9, 1.0),
    )
    nw = int(round(rng.uniform(0.18, 0.24) * width / 2) * 2)
    nh = int(round(rng.uniform(0.26, 0.34) * height / 2) * 2)
    nxmin = int(0.70 * width)
    nymin = int(rng.uniform(0.2, 0.4) * height)
    near = SceneObject(
        shape="rect",
        box=Box(nxmin, nymin, nxmin + nw, nymin + nh),
        depth_plane=1.0,
        attention_gain=rng.uniform(0.9, 1.0),
    )
    return SceneSpec(seed=subseed(seed, index * 2 + 1), width=width, height=height,
                     objects=[deep, near], background_depth=0.0,
                     noise_sigma=noise_sigma)


def generate_suite(
    n_scenes: int,
    seed: int,
    out_dir,
    width: int = 128,
    height: int = 96,
    noise_sigma: float = 0.0,
    style: str = "isolated",
) -> dict:
    """Write a full dataset (PFM heads + depth, VOC XML) under out_dir.

    style "isolated" plants separated objects on distinct planes (with
    occasional occlusion pairs); "deep" plants objects that straddle two
    depth planes, exercising the layer-overlap machinery. Deterministic in
    (n_scenes, seed, width, height, noise_sigma, style).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    build = _isolated_scene if style == "isolated" else _deep_scene
    if style not in ("isolated", "deep"):
        raise ContractError(f"unknown suite style {style!r}")
    stems = []
    for i in range(n_scenes):
        spec = build(i, seed, width, height, noise_sigma)
        depth, heads, gt = generate_scene(spec)
        stem = f"scene_{i:04d}"
        gt.stem = stem
        write_pfm(depth, out / f"{stem}.depth.pfm")
        for k, head in enumerate(heads):
            write_pfm(head, out / f"{stem}.att.h{k}.pfm")
        (out / f"{stem}.ann.xml").write_bytes(serialize_voc_xml(gt))
        stems.append(stem)
    return {"stems": stems, "scenes": n_scenes, "seed": seed, "style": style,
            "files": n_scenes * (HEAD_COUNT + 2)}
