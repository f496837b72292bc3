import pytest
from hypothesis import given, strategies as st

from handgun_pose.exceptions import InvalidGeometryError
from handgun_pose.geometry import BBox, Keypoint2D, Skeleton, area, intersect, iomin, iou


@pytest.mark.parametrize("box, expected", [
    ((0, 0, 10, 10), 100),
    ((0, 0, 1, 1), 1),
    ((2, 3, 7, 11), 40),
])
def test_area(box, expected):
    assert area(BBox(*box)) == expected


@pytest.mark.parametrize("box", [(0, 0, 0, 10), (5, 5, 4, 6), (0, 3, 1, 3)])
def test_degenerate_box_rejected(box):
    with pytest.raises(InvalidGeometryError):
        BBox(*box)


def test_intersect_examples():
    a = BBox(0, 0, 10, 10)
    assert intersect(a, BBox(0, 0, 10, 10)) == a
    assert intersect(a, BBox(20, 20, 30, 30)) is None
    assert intersect(a, BBox(5, 5, 15, 15)) == BBox(5, 5, 10, 10)
    # edge contact has no interior overlap
    assert intersect(a, BBox(10, 0, 20, 10)) is None


def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BBox(5, 0, 15, 10)) == pytest.approx(50 / 150)


def test_iomin_examples():
    a = BBox(0, 0, 10, 10)
    assert iomin(a, a) == 1.0
    assert iomin(BBox(2, 2, 4, 4), a) == 1.0
    assert iomin(a, BBox(5, 0, 15, 10)) == 0.5


def test_keypoint_and_skeleton_validation():
    with pytest.raises(ValueError):
        Keypoint2D(0, 0, 1.5)
    with pytest.raises(ValueError):
        Skeleton((Keypoint2D.undefined(),) * 24)
    sk = Skeleton.from_array([[i, 2 * i, 0.5] for i in range(25)], person_id=3)
    assert sk[1] == Keypoint2D(1, 2, 0.5) and sk.person_id == 3
    assert Skeleton.from_array(sk.to_array(), 3) == sk


coord = st.floats(-1e4, 1e4, allow_nan=False)
extent = st.floats(1e-3, 1e4, allow_nan=False)


@st.composite
def boxes(draw):
    x, y = draw(coord), draw(coord)
    return BBox(x, y, x + draw(extent), y + draw(extent))


@given(boxes(), boxes())
def test_overlap_properties(a, b):
    assert iou(a, b) == iou(b, a)
    assert iomin(a, b) == iomin(b, a)
    assert 0.0 <= iou(a, b) <= iomin(a, b) <= 1.0
    inter = intersect(a, b)
    assert inter == intersect(b, a)
    if inter is not None:
        assert area(inter) <= min(area(a), area(b))


@given(boxes(), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1), st.floats(0.01, 1))
def test_nested_box_has_iomin_one(outer, fx, fy, fw, fh):
    w, h = outer.width * fw * (1 - fx), outer.height * fh * (1 - fy)
    x0, y0 = outer.x_min + fx * outer.width, outer.y_min + fy * outer.height
    try:
        inner = BBox(x0, y0, min(x0 + w, outer.x_max), min(y0 + h, outer.y_max))
    except InvalidGeometryError:
        return
    assert outer.contains(inner)
    assert iomin(inner, outer) == 1.0
