import os
from pathlib import Path

import numpy as np
import pytest

import coordseg as cs

FIXTURES = Path(os.environ.get("COORDSEG_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))


def test_normalize_round_trip():
    dims = cs.ImageDims(300, 200)
    n = cs.normalize_box(cs.PixelBox(30, 60, 90, 100), dims)
    assert n.corners() == pytest.approx([0.1, 0.3, 0.3, 0.5], abs=1e-12)
    assert cs.denormalize_box(n, dims).corners() == pytest.approx([30, 60, 90, 100], abs=1e-9)


def test_metrics_and_box_spaces():
    a, b = cs.PixelBox(0, 0, 2, 2), cs.PixelBox(1, 1, 3, 3)
    m = cs.metrics(a, b)
    assert m.iou == pytest.approx(1 / 7, abs=1e-12)
    assert m.giou == pytest.approx(-5 / 63, abs=1e-12)
    assert m.ciou == pytest.approx(2 / 63, abs=1e-12)
    assert cs.iou(cs.NormBox(0, 0, 0.5, 0.5), cs.NormBox(0, 0, 0.5, 0.5)) == 1.0
    with pytest.raises(TypeError):
        cs.iou(a, cs.NormBox(0, 0, 1, 1))


def test_errors_carry_codes():
    with pytest.raises(cs.CoordsegError) as info:
        cs.NormBox(0.5, 0.2, 0.5, 0.8)
    assert info.value.code == "Degenerate"
    with pytest.raises(cs.CoordsegError) as info:
        cs.parse_coordinate_text("I cannot find the object.")
    assert info.value.code == "NoQuadrupleFound"
    assert isinstance(info.value, ValueError)


def test_parse_coordinate_text():
    box, span = cs.parse_coordinate_text("[0.334,0.120,0.550,0.988]")
    assert box == cs.NormBox(0.334, 0.120, 0.550, 0.988)
    assert span == (0, 25)
    box, _ = cs.parse_coordinate_text("(30, 60, 90, 100)", cs.ImageDims(300, 200))
    assert box.corners() == pytest.approx([0.1, 0.3, 0.3, 0.5])
    box, _ = cs.parse_coordinate_text("[-0.1, 0, 1, 1]", mode="clamp")
    assert box == cs.NormBox(0, 0, 1, 1)


def test_grid_overlay_on_gray():
    img = np.full((90, 90, 3), 200, dtype=np.uint8)
    out = cs.apply_grid_overlay(img, cs.GridConfig(cells=9, opacity=0.3))
    assert out.shape == img.shape
    assert set(np.unique(out)) == {140, 200}
    assert (out[10, :, :] == 140).all()
    assert (out[5, 5] == 200).all()
    assert (img == 200).all()
    golden = (FIXTURES / "grid/gray200_90x90_grid9_o30.png").read_bytes()
    assert cs.encode_png(out) == golden


def test_mask_codecs():
    rng = np.random.default_rng(0)
    mask = rng.random((17, 23)) < 0.3
    for fmt in ("rle", "png"):
        assert (cs.decode_mask(cs.encode_mask(mask, fmt), fmt) == mask).all()
    with pytest.raises(cs.CoordsegError) as info:
        cs.decode_mask(b"XSRLE1", "rle")
    assert info.value.offset == 0
    m = cs.box_to_mask(cs.PixelBox(2, 3, 5, 7), cs.ImageDims(10, 10))
    assert m.shape == (10, 10) and m.sum() == 12
    assert cs.mask_iou(m, m) == 1.0


def test_datasets():
    coco = cs.load_coco(FIXTURES / "coco/instances.json", FIXTURES / "coco/images")
    assert len(coco) == 3
    assert coco[0].gt_box == cs.PixelBox(30, 60, 90, 100)
    voc = cs.load_voc(FIXTURES / "voc", "val")
    assert [s.sample_id for s in voc.samples] == ["000005:0", "000007:0", "000007:1"]
    assert voc.warnings.clipped == 1
    assert voc[1].gt_mask.sum() == 16 * 24
    a = cs.sample_subset(coco, 2, 5)
    b = cs.sample_subset(coco, 2, 5)
    assert [s.sample_id for s in a.samples] == [s.sample_id for s in b.samples]


def test_mock_eval():
    data = cs.load_coco(FIXTURES / "pipeline20/instances.json", FIXTURES / "pipeline20/images")
    report = cs.run_mock_eval(data, "perfect", parallelism=4)
    assert (report.mean_iou, report.mean_giou, report.mean_ciou) == (1.0, 1.0, 1.0)
    assert report.n_failures == 0

    gt = cs.ground_truth_of(data)
    half = {s.sample_id: gt[s.sample_id] for s in data.samples[:10]}
    report = cs.run_mock_eval(data, "perfect", ground_truth=half)
    assert report.mean_iou == 0.5 and report.n_failures == 10

    jitter = cs.run_mock_eval(data, "jitter:0.05", seed=3, grid=cs.GridConfig())
    assert 0.0 < jitter.mean_iou < 1.0
    assert cs.EvalReport.from_json(jitter.emit("json")) == jitter
    assert "Method" in jitter.emit("table")
