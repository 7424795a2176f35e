import numpy as np
import pytest

from maskedit import DenoiserConfig, SessionConfig
from maskedit.bench import (
    LayoutConstraints,
    LayoutError,
    Suite,
    bilinear_resize,
    crop_layers,
    evaluate_suite,
    generate_scenarios,
    layout_sample,
    run_suite,
)
from maskedit.bench.captions import layer_caption, mask_center, relation_word
from maskedit.bench.evaluate import ScenarioResult
from maskedit.errors import MaskEditError
from maskedit.masks import Mask, occlusion_ratio, rasterize_rect
from maskedit.rng import stream
from maskedit.session import RgbImage

SMALL = LayoutConstraints(canvas_width=64, canvas_height=64, margin=4)


def small_session_config() -> SessionConfig:
    return SessionConfig(
        latent_height=16,
        latent_width=16,
        decode_scale=4,
        backend="procedural",
        denoiser=DenoiserConfig(num_steps=8),
    )


# -- layout ---------------------------------------------------------------------


def test_layout_single_mask_inside_margins():
    masks = layout_sample(1, SMALL, stream("layout", 0))
    assert len(masks) == 1
    assert not masks[0].bits[:4, :].any()
    assert not masks[0].bits[-4:, :].any()
    assert not masks[0].bits[:, :4].any()
    assert not masks[0].bits[:, -4:].any()


def test_layout_degenerate_size_range_fixes_dims():
    constraints = LayoutConstraints(
        canvas_width=64, canvas_height=64, margin=4,
        min_size_frac=0.25, max_size_frac=0.25, ellipse_prob=0.0,
    )
    masks = layout_sample(3, constraints, stream("layout", 1))
    for m in masks:
        assert m.count() == 16 * 16


def test_layout_occlusion_matches_mask_algebra_oracle():
    masks = layout_sample(4, SMALL, stream("layout", 2))
    counts = np.zeros((64, 64), dtype=int)
    for m in masks:
        counts += m.bits
    want = (counts >= 2).sum() / (counts >= 1).sum()
    assert occlusion_ratio(masks) == pytest.approx(want)


def test_layout_infeasible_margin_raises():
    bad = LayoutConstraints(canvas_width=16, canvas_height=16, margin=8)
    with pytest.raises(LayoutError):
        layout_sample(1, bad, stream("layout", 3))


# -- captions -------------------------------------------------------------------


def test_single_object_caption_form():
    assert layer_caption("a lion", "a savanna") == "An image of a lion in a savanna"


def test_relation_left_of():
    left = mask_center(rasterize_rect(2, 10, 8, 16, 64, 64))
    right = mask_center(rasterize_rect(40, 10, 46, 16, 64, 64))
    assert relation_word(left, right, overlaps=False) == "to the left of"
    assert relation_word(right, left, overlaps=False) == "to the right of"


def test_relation_vertical_and_overlap():
    top = mask_center(rasterize_rect(10, 2, 16, 8, 64, 64))
    bottom = mask_center(rasterize_rect(10, 40, 16, 46, 64, 64))
    assert relation_word(top, bottom, overlaps=False) == "above"
    assert relation_word(bottom, top, overlaps=False) == "below"
    assert relation_word(top, bottom, overlaps=True) == "in front of"


def test_captions_deterministic():
    a = generate_scenarios(3, 2, SMALL)
    b = generate_scenarios(3, 2, SMALL)
    for sa, sb in zip(a.scenarios, b.scenarios):
        assert sa.layer_captions == sb.layer_captions
        assert sa.global_caption == sb.global_caption


# -- scenario generation ------------------------------------------------------------


def test_same_seed_identical_suite():
    a = generate_scenarios(7, 5, SMALL)
    b = generate_scenarios(7, 5, SMALL)
    assert a.to_dict() == b.to_dict()


def test_different_seed_differs():
    a = generate_scenarios(7, 5, SMALL)
    b = generate_scenarios(8, 5, SMALL)
    assert a.to_dict() != b.to_dict()


def test_scenarios_respect_margins_and_layer_counts():
    suite = generate_scenarios(11, 30, SMALL)
    for s in suite.scenarios:
        assert 3 <= s.n_layers <= 6
        for m in s.masks:
            assert not m.bits[:4, :].any() and not m.bits[-4:, :].any()
            assert not m.bits[:, :4].any() and not m.bits[:, -4:].any()
        assert len(s.layer_captions) == s.edit_steps
        assert s.occlusion() >= 0.0


def test_suite_save_load_round_trip(tmp_path):
    suite = generate_scenarios(5, 4, SMALL)
    path = suite.save(tmp_path / "suite.json")
    loaded = Suite.load(path)
    assert loaded.to_dict() == suite.to_dict()


def test_step_distribution_tracks_configuration():
    suite = generate_scenarios(1, 400, SMALL)
    hist = suite.step_histogram()
    total = sum(hist.values())
    for steps, share in ((2, 0.19), (3, 0.18), (4, 0.26), (5, 0.37)):
        assert abs(hist.get(steps, 0) / total - share) < 0.06


# -- crops ---------------------------------------------------------------------


def checkerboard_image(h=64, w=64) -> RgbImage:
    grid = ((np.indices((h, w)).sum(axis=0) % 2) * 255).astype(np.uint8)
    return RgbImage(np.stack([grid] * 3, axis=-1))


def test_crop_full_canvas_resizes_whole_image():
    img = checkerboard_image()
    crops, notices = crop_layers(img, [Mask.all_ones(64, 64)], size=224)
    assert notices == []
    assert crops[0][1].width == 224 and crops[0][1].height == 224


def test_crop_identity_when_bbox_is_crop_size():
    rng = stream("crops", 0)
    pixels = rng.integers(0, 256, (300, 300, 3)).astype(np.uint8)
    img = RgbImage(pixels)
    mask = rasterize_rect(10, 20, 10 + 223, 20 + 223, 300, 300)
    crops, _ = crop_layers(img, [mask], size=224)
    assert np.array_equal(crops[0][1].pixels, pixels[20 : 20 + 224, 10 : 10 + 224])


def test_crop_skips_empty_mask_with_notice():
    img = checkerboard_image()
    crops, notices = crop_layers(img, [Mask.all_zeros(64, 64)], size=224)
    assert crops == []
    assert "empty mask" in notices[0]


def bilinear_oracle(pixels, out_h, out_w):
    """Direct per-pixel recompute of the fixed resize convention."""
    in_h, in_w = pixels.shape[:2]
    out = np.zeros((out_h, out_w, pixels.shape[2]), dtype=np.uint8)
    for oy in range(out_h):
        for ox in range(out_w):
            sy = min(max((oy + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
            sx = min(max((ox + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = sy - y0, sx - x0
            for c in range(pixels.shape[2]):
                top = pixels[y0, x0, c] * (1 - fx) + pixels[y0, x1, c] * fx
                bottom = pixels[y1, x0, c] * (1 - fx) + pixels[y1, x1, c] * fx
                out[oy, ox, c] = int(np.floor(top * (1 - fy) + bottom * fy + 0.5))
    return out


def test_bilinear_halving_gradient_matches_oracle_within_one_lsb():
    ys, xs = np.indices((16, 16))
    gradient = ((ys * 16 + xs) % 256).astype(np.uint8)
    pixels = np.stack([gradient, gradient.T, 255 - gradient], axis=-1)
    got = bilinear_resize(pixels, 8, 8)
    want = bilinear_oracle(pixels, 8, 8)
    assert np.abs(got.astype(int) - want.astype(int)).max() <= 1


# -- evaluation ------------------------------------------------------------------


def suite_and_results(n=3):
    config = small_session_config()
    constraints = LayoutConstraints(
        canvas_width=config.image_width, canvas_height=config.image_height, margin=4
    )
    suite = generate_scenarios(21, n, constraints)
    results = run_suite(suite, config)
    return suite, results


def test_self_scored_suite_is_ceiling():
    suite, results = suite_and_results()
    report = evaluate_suite(results, suite)
    averages = report.suite_averages()
    assert averages["bleu2"] == pytest.approx(1.0)
    assert averages["bleu4"] == pytest.approx(1.0)
    assert averages["meteor_exact"] > 0.99
    assert report.structural["crop_size"] == [224, 224]


def test_empty_scorer_set_structural_only():
    suite, results = suite_and_results(2)
    report = evaluate_suite(results, suite, text_scorers={})
    assert report.suite_averages() == {}
    assert report.structural["scenario_count"] == 2
    assert report.structural["occlusion_mean"] == pytest.approx(suite.occlusion_mean())


def test_missing_render_marks_scenario_failed():
    suite, results = suite_and_results(3)
    report = evaluate_suite(results[:-1], suite)
    assert report.structural["failed"] == [suite.scenarios[-1].scenario_id]
    assert report.images[-1].failed


def test_image_score_is_mean_of_layer_fixtures():
    suite, results = suite_and_results(3)
    fixed = {
        "exact": lambda cand, ref: 1.0 if cand == ref else 0.0,
        "half": lambda cand, ref: 0.5,
    }
    report = evaluate_suite(results, suite, text_scorers=fixed)
    for img in report.images:
        avg = img.averages()
        assert avg["exact"] == pytest.approx(1.0)
        assert avg["half"] == pytest.approx(0.5)
    assert report.suite_averages()["half"] == pytest.approx(0.5)


def test_external_scorer_slot_receives_png_bytes():
    suite, results = suite_and_results(2)
    seen = []

    def fake_visual(png: bytes, caption: str) -> float:
        seen.append((png[:8], caption))
        return 0.25

    report = evaluate_suite(
        results, suite, text_scorers={}, external_scorers={"visual": fake_visual}
    )
    assert seen and seen[0][0] == b"\x89PNG\r\n\x1a\n"
    assert report.suite_averages()["visual"] == pytest.approx(0.25)


def test_out_of_range_scorer_rejected():
    suite, results = suite_and_results(1)
    with pytest.raises(MaskEditError):
        evaluate_suite(results, suite, text_scorers={"bad": lambda c, r: 1.5})


def test_occlusion_reported_matches_per_scenario_oracle():
    suite, _ = suite_and_results(3)
    per_scenario = [occlusion_ratio(list(s.masks)) for s in suite.scenarios]
    assert suite.occlusion_mean() == pytest.approx(np.mean(per_scenario))
