import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from handgun_pose.exceptions import DegenerateSkeletonError, HalfSelectionError, NormalizationError
from handgun_pose.geometry import Keypoint2D, Skeleton
from handgun_pose.pose_render import (BODY25_LIMBS, NormalizedSkeleton, PoseHalfRenderer, load_bitmap,
                                      normalize_skeleton, render_canvas, save_bitmap, select_half,
                                      split_canvas)
from handgun_pose.regions import HandRegion
from handgun_pose.geometry import BBox

from conftest import make_skeleton, standing_person


def _ns(points):
    coords = np.zeros((25, 2))
    conf = np.zeros(25)
    for i, (x, y) in points.items():
        coords[i] = (x, y)
        conf[i] = 1.0
    return NormalizedSkeleton(coords, conf)


def scanline_oracle(ns, px_per_unit=80.0, thickness=4.0, radius=4.0):
    """Row-by-row reference rasterizer with scalar arithmetic.

    Returns the raster and a mask of pixels whose centre lies within 1e-9 of
    a shape boundary, where either answer is acceptable.
    """
    out = np.zeros((512, 512), np.uint8)
    edge = np.zeros((512, 512), bool)
    pts = {i: (256 + px_per_unit * ns.coords[i, 0], 256 + px_per_unit * ns.coords[i, 1])
           for i in range(25) if ns.confidence[i] > 0}
    for cx, cy in pts.values():
        for y in range(512):
            h2 = radius * radius - (y - cy) ** 2
            if h2 < 0:
                continue
            half = math.sqrt(h2)
            for x in range(max(0, math.ceil(cx - half) - 1), min(511, math.floor(cx + half) + 1) + 1):
                d = math.hypot(x - cx, y - cy)
                if d <= radius:
                    out[y, x] = 1
                edge[y, x] |= abs(d - radius) < 1e-9
    r = thickness / 2
    for a, b in BODY25_LIMBS:
        if a not in pts or b not in pts:
            continue
        (ax, ay), (bx, by) = pts[a], pts[b]
        for y in range(max(0, math.floor(min(ay, by) - r)), min(511, math.ceil(max(ay, by) + r)) + 1):
            for x in range(max(0, math.floor(min(ax, bx) - r)), min(511, math.ceil(max(ax, bx) + r)) + 1):
                dx, dy = bx - ax, by - ay
                t = 0.0 if dx == dy == 0 else max(0.0, min(1.0, ((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)))
                d = math.hypot(x - ax - t * dx, y - ay - t * dy)
                if d <= r:
                    out[y, x] = 1
                edge[y, x] |= abs(d - r) < 1e-9
    return out, edge


def assert_matches_oracle(canvas, ns):
    ref, edge = scanline_oracle(ns)
    diff = canvas != ref
    assert not (diff & ~edge).any(), f"{int((diff & ~edge).sum())} pixels differ away from boundaries"


def test_keypoint_at_neck_maps_to_origin():
    ns = normalize_skeleton(make_skeleton({1: (100, 100), 8: (100, 180), 0: (100, 100)}))
    assert tuple(ns.coords[0]) == (0.0, 0.0)


def test_normalize_example():
    ns = normalize_skeleton(make_skeleton({1: (100, 100), 8: (100, 180), 2: (140, 100)}))
    assert tuple(ns.coords[2]) == (0.5, 0.0)
    assert ns.confidence[2] == 0.9
    assert not ns.defined(5) and tuple(ns.coords[5]) == (0.0, 0.0)


def test_normalize_translation():
    a = normalize_skeleton(standing_person())
    b = normalize_skeleton(standing_person(50, 50))
    np.testing.assert_array_equal(a.coords, b.coords)


def test_normalize_errors():
    with pytest.raises(NormalizationError):
        normalize_skeleton(make_skeleton({1: (0, 0)}))
    with pytest.raises(DegenerateSkeletonError):
        normalize_skeleton(make_skeleton({1: (5, 5), 8: (5, 5)}))


def test_neck_only_canvas_is_one_disc():
    c = render_canvas(_ns({1: (0, 0)}))
    ys, xs = np.nonzero(c)
    assert (xs.mean(), ys.mean()) == (256.0, 256.0)
    assert ((xs - 256) ** 2 + (ys - 256) ** 2 <= 16).all()
    assert c.sum() == sum(1 for x in range(-4, 5) for y in range(-4, 5) if x * x + y * y <= 16)


def test_empty_canvas():
    c = render_canvas(_ns({}))
    assert c.shape == (512, 512) and c.sum() == 0


def test_neck_hip_against_scanline_oracle():
    ns = normalize_skeleton(make_skeleton({1: (100, 100), 8: (130, 170)}))
    c = render_canvas(ns, px_per_unit=80)
    assert_matches_oracle(c, ns)
    disc = render_canvas(_ns({1: (0, 0)})).sum()
    assert c.sum() > 2 * disc
    hip = (round(256 + 80 * ns.coords[8, 0]), round(256 + 80 * ns.coords[8, 1]))
    assert c[hip[1], hip[0]] == 1 and c[256, 256] == 1


def test_full_skeleton_against_oracle_and_clipping():
    ns = normalize_skeleton(standing_person())
    assert_matches_oracle(render_canvas(ns), ns)
    far = _ns({1: (0, 0), 8: (0, 5), 4: (-4, 0)})  # MidHip and wrist off-canvas
    assert_matches_oracle(render_canvas(far), far)


def test_render_is_binary_and_deterministic():
    ns = normalize_skeleton(standing_person())
    a, b = render_canvas(ns), render_canvas(ns)
    assert a.dtype == np.uint8 and set(np.unique(a)) <= {0, 1}
    assert a.tobytes() == b.tobytes()


def test_split_examples():
    zero = np.zeros((512, 512), np.uint8)
    left, right = split_canvas(zero)
    assert left.pixels.shape == right.pixels.shape == (512, 256)
    assert left.pixels.sum() == right.pixels.sum() == 0
    c = zero.copy(); c[10, 255] = 1
    left, right = split_canvas(c)
    assert left.pixels[10, 255] == 1 and right.pixels.sum() == 0
    c = zero.copy(); c[10, 256] = 1
    left, right = split_canvas(c)
    assert right.pixels[10, 0] == 1 and left.pixels.sum() == 0


def test_split_is_a_partition():
    c = render_canvas(normalize_skeleton(standing_person()))
    left, right = split_canvas(c)
    np.testing.assert_array_equal(np.hstack([left.pixels, right.pixels]), c)


def _region(wrist_index):
    return HandRegion(BBox(0, 0, 1, 1), 0, "right", Keypoint2D(0, 0, 1), wrist_index)


@pytest.mark.parametrize("kx, side", [(-1.0, "left"), (1.0, "right"), (0.0, "right")])
def test_select_half(kx, side):
    ns = _ns({1: (0, 0), 8: (0, 1), 4: (kx, 0.5)})
    half = select_half(_region(4), ns, render_canvas(ns))
    assert half.side == side


def test_select_half_undefined_wrist():
    ns = _ns({1: (0, 0), 8: (0, 1)})
    with pytest.raises(HalfSelectionError):
        select_half(_region(7), ns, render_canvas(ns))


def test_bitmap_round_trip(tmp_path):
    c = render_canvas(normalize_skeleton(standing_person()))
    save_bitmap(c, tmp_path / "p.png")
    np.testing.assert_array_equal(load_bitmap(tmp_path / "p.png"), c)
    from PIL import Image
    assert Image.open(tmp_path / "p.png").mode == "1"


def test_renderer_fallback():
    bad = make_skeleton({3: (0, 0), 4: (10, 10)})
    region = _region(4)
    assert PoseHalfRenderer().transform([(bad, region)]) == [None]
    (half,) = PoseHalfRenderer(fallback=True).transform([(bad, region)])
    assert half.shape == (512, 256) and half.sum() == 0


coord = st.floats(-2000, 2000, allow_nan=False)


@settings(max_examples=50)
@given(st.lists(st.tuples(coord, coord), min_size=25, max_size=25),
       coord, coord, st.floats(0.05, 20), coord, coord)
def test_normalize_invariances(points, dx, dy, scale, px, py):
    kps = [Keypoint2D(x, y, 1.0) for x, y in points]
    sk = Skeleton(tuple(kps))
    try:
        base = normalize_skeleton(sk)
    except DegenerateSkeletonError:
        return
    if math.hypot(points[8][0] - points[1][0], points[8][1] - points[1][1]) < 1e-3:
        return
    moved = normalize_skeleton(Skeleton(tuple(Keypoint2D(x + dx, y + dy, 1.0) for x, y in points)))
    zoomed = normalize_skeleton(Skeleton(tuple(Keypoint2D(px + scale * (x - px), py + scale * (y - py), 1.0)
                                               for x, y in points)))
    np.testing.assert_allclose(moved.coords, base.coords, atol=1e-9, rtol=0)
    np.testing.assert_allclose(zoomed.coords, base.coords, atol=1e-9, rtol=0)
    assert abs(math.hypot(*base.coords[8]) - 1.0) <= 1e-9
