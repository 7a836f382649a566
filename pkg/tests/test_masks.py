import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from masksplitter import (
    LabelMap,
    MaskSplitterError,
    ScoreMapPair,
    UnknownInstanceError,
    as_binary_mask,
    binarize_scores,
    connected_components,
    extract_instance,
    mask_union,
)

binary_masks = arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(0, 1))

DIAGONAL = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0]])


def test_binarize_strict_dominance():
    mask = binarize_scores(ScoreMapPair(np.ones((4, 4)), np.zeros((4, 4))))
    assert mask.dtype == np.uint8
    assert mask.all()


def test_binarize_ties_go_to_background():
    assert not binarize_scores(ScoreMapPair(np.ones((4, 4)), np.ones((4, 4)))).any()


def test_binarize_by_hand():
    scores = ScoreMapPair(np.array([[2, 0], [0, 2]]), np.ones((2, 2)))
    np.testing.assert_array_equal(binarize_scores(scores), [[1, 0], [0, 1]])


@settings(max_examples=50, deadline=None)
@given(
    obj=arrays(np.float64, (3, 4), elements=st.integers(-20, 20).map(lambda v: v / 4)),
    bg=arrays(np.float64, (3, 4), elements=st.integers(-20, 20).map(lambda v: v / 4)),
    shift=arrays(np.float64, (3, 4), elements=st.integers(-8, 8).map(float)),
)
def test_binarize_invariant_to_common_shift(obj, bg, shift):
    # quarter-integer scores and integer shifts keep the addition exact
    base = binarize_scores(ScoreMapPair(obj, bg))
    shifted = binarize_scores(ScoreMapPair(obj + shift, bg + shift))
    np.testing.assert_array_equal(base, shifted)


def test_score_pair_rejects_non_finite_and_mismatch():
    with pytest.raises(MaskSplitterError):
        ScoreMapPair(np.array([[np.nan]]), np.zeros((1, 1)))
    with pytest.raises(MaskSplitterError):
        ScoreMapPair(np.zeros((2, 2)), np.zeros((2, 3)))


def test_components_empty_and_full():
    assert connected_components(np.zeros((3, 3))).count == 0
    full = connected_components(np.ones((2, 2)))
    assert full.count == 1


def test_components_diagonal_depends_on_connectivity():
    assert connected_components(DIAGONAL, 4).count == 2
    assert connected_components(DIAGONAL, 8).count == 1


def test_default_connectivity_is_eight():
    assert connected_components(DIAGONAL).count == 1


def test_extract_instance():
    single = connected_components(np.ones((2, 2)))
    np.testing.assert_array_equal(extract_instance(single, 1), np.ones((2, 2)))
    with pytest.raises(UnknownInstanceError):
        extract_instance(single, 0)
    two = connected_components(DIAGONAL, 4)
    second = extract_instance(two, 2)
    assert second.sum() == 1 and second[1, 1] == 1
    with pytest.raises(UnknownInstanceError):
        extract_instance(two, 3)


def test_mask_union():
    assert not mask_union(LabelMap.empty(3, 3)).any()
    labels = np.array([[1, 1, 0, 2], [1, 0, 0, 2], [0, 0, 0, 0]])
    assert mask_union(LabelMap(labels, 2)).sum() == 5
    single = connected_components(np.ones((2, 3)))
    np.testing.assert_array_equal(mask_union(single), extract_instance(single, 1))


def test_label_map_validates_ids():
    with pytest.raises(MaskSplitterError):
        LabelMap(np.array([[0, 2]]), 1)
    with pytest.raises(MaskSplitterError):
        LabelMap(np.array([[0, 1]]), 2)
    with pytest.raises(MaskSplitterError):
        LabelMap(np.array([[-1, 1]]), 1)


def test_label_map_relabel_uses_raster_order():
    lm = LabelMap.from_array(np.array([[0, 7, 7], [3, 0, 9]]), relabel=True)
    np.testing.assert_array_equal(lm.labels, [[0, 1, 1], [2, 0, 3]])
    assert lm.count == 3


def test_arrays_are_read_only():
    lm = connected_components(np.ones((2, 2)))
    with pytest.raises(ValueError):
        lm.labels[0, 0] = 5
    mask = as_binary_mask([[0, 1]])
    with pytest.raises(ValueError):
        mask[0, 0] = 1


def test_as_binary_mask_rejects_other_values():
    with pytest.raises(MaskSplitterError):
        as_binary_mask([[0, 2]])
    with pytest.raises(MaskSplitterError):
        as_binary_mask([0, 1])


@pytest.mark.parametrize("connectivity", [4, 8])
@settings(max_examples=100, deadline=None)
@given(mask=binary_masks)
def test_round_trip_partition(connectivity, mask):
    first = connected_components(mask, connectivity)
    again = connected_components(mask_union(first), connectivity)
    assert again == first


@settings(max_examples=100, deadline=None)
@given(mask=binary_masks)
def test_instance_areas_sum_to_union(mask):
    lm = connected_components(mask)
    total = sum(int(extract_instance(lm, i).sum()) for i in range(1, lm.count + 1))
    assert total == int(mask_union(lm).sum()) == int(mask.sum())


@pytest.mark.parametrize("connectivity", [4, 8])
@settings(max_examples=100, deadline=None)
@given(
    patch=arrays(np.uint8, (4, 4), elements=st.integers(0, 1)),
    dy=st.integers(0, 4),
    dx=st.integers(0, 4),
)
def test_count_invariant_under_translation(connectivity, patch, dy, dx):
    frame = np.zeros((8, 8), dtype=np.uint8)
    frame[:4, :4] = patch
    moved = np.zeros((8, 8), dtype=np.uint8)
    moved[dy:dy + 4, dx:dx + 4] = patch
    assert connected_components(frame, connectivity).count == connected_components(moved, connectivity).count
