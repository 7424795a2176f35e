import math

import numpy as np
import pytest

from maskedit import DenoiserConfig, EditSession, SessionConfig
from maskedit.denoiser import label_identity_value, procedural_pattern
from maskedit.errors import (
    DegenerateMaskError,
    DimensionMismatchError,
    LayerLookupError,
)
from maskedit.masks import Mask, rasterize_rect
from maskedit.session import decode_latent


def make_procedural(steps=20, hw=16, seed=11):
    return SessionConfig(
        latent_height=hw,
        latent_width=hw,
        decode_scale=4,
        backend="procedural",
        seed=seed,
        denoiser=DenoiserConfig(num_steps=steps),
    )


# -- create ----------------------------------------------------------------------


def test_create_session_single_background_layer(tiny_toy_config):
    session = EditSession.create("a quiet harbor", config=tiny_toy_config)
    assert len(session.memory) == 1
    assert session.memory.record(0).mask.is_full()
    assert session.stats[0].denoiser_calls == tiny_toy_config.denoiser.num_steps


def test_create_same_inputs_identical_trajectory(tiny_toy_config):
    a = EditSession.create("a quiet harbor", config=tiny_toy_config)
    b = EditSession.create("a quiet harbor", config=tiny_toy_config)
    for t in range(tiny_toy_config.denoiser.num_steps + 1):
        assert a.memory.latent_at(0, t).tobytes() == b.memory.latent_at(0, t).tobytes()


# -- add_edit -------------------------------------------------------------------


def test_add_edit_outside_mask_pixels_unchanged():
    config = make_procedural()
    session = EditSession.create("a desk", config=config)
    before = session.render()
    mask = rasterize_rect(4, 4, 11, 11, 16, 16)
    after = session.add_edit("a mug", mask)
    scale = config.decode_scale
    pixel_mask = np.repeat(np.repeat(mask.bits, scale, axis=0), scale, axis=1)
    assert np.array_equal(before.pixels[~pixel_mask], after.pixels[~pixel_mask])
    assert not np.array_equal(before.pixels[pixel_mask], after.pixels[pixel_mask])


def test_add_edit_overlap_takes_ownership():
    config = make_procedural()
    session = EditSession.create("a desk", config=config)
    m1 = rasterize_rect(2, 2, 9, 9, 16, 16)
    m2 = rasterize_rect(6, 6, 13, 13, 16, 16)
    session.add_edit("a cupcake", m1)
    session.add_edit("a dish", m2)
    final = session.memory.latent_at(2, 0)
    # overlapped cells belong to the later layer
    assert (final[3][m2.bits] == np.float32(label_identity_value("a dish"))).all()
    only_first = m1.subtract(m2)
    assert (final[3][only_first.bits] == np.float32(label_identity_value("a cupcake"))).all()


def test_add_order_decides_occlusion():
    config = make_procedural()
    m1 = rasterize_rect(2, 2, 9, 9, 16, 16)
    m2 = rasterize_rect(6, 6, 13, 13, 16, 16)
    overlap = m1.intersect(m2)

    ab = EditSession.create("a desk", config=config)
    ab.add_edit("a cupcake", m1)
    ab.add_edit("a dish", m2)
    ba = EditSession.create("a desk", config=config)
    ba.add_edit("a dish", m2)
    ba.add_edit("a cupcake", m1)

    za = ab.memory.latent_at(2, 0)
    zb = ba.memory.latent_at(2, 0)
    assert (za[3][overlap.bits] == np.float32(label_identity_value("a dish"))).all()
    assert (zb[3][overlap.bits] == np.float32(label_identity_value("a cupcake"))).all()


def test_add_edit_rejects_bad_masks(tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    with pytest.raises(DegenerateMaskError):
        session.add_edit("a boat", Mask.all_zeros(8, 8))
    with pytest.raises(DimensionMismatchError):
        session.add_edit("a boat", Mask.all_ones(16, 16))


# -- delete_edit -----------------------------------------------------------------


def test_delete_resume_step_math():
    assert math.ceil(0.4 * 20) == 8
    config = make_procedural(steps=20)
    session = EditSession.create("a desk", config=config)
    session.add_edit("a cupcake", rasterize_rect(2, 2, 9, 9, 16, 16))
    session.add_edit("a dish", rasterize_rect(6, 6, 13, 13, 16, 16))
    session.delete_edit(1)
    report = session.stats[-1]
    assert report.mode == "delete"
    assert report.denoiser_calls == 8  # tau steps, 60% fewer than a 20-step edit


def test_delete_middle_layer_rerenders_by_remaining_owner():
    config = make_procedural(steps=20)
    session = EditSession.create("a desk", config=config)
    m1 = rasterize_rect(2, 2, 9, 9, 16, 16)
    m2 = rasterize_rect(6, 6, 13, 13, 16, 16)
    session.add_edit("a cupcake", m1)
    before = session.add_edit("a dish", m2)
    session.delete_edit(1)
    after = session.render()
    final = session.memory.latent_at(1, 0)

    # foreground layer's region is pixel-exact unchanged
    scale = config.decode_scale
    pix_m2 = np.repeat(np.repeat(m2.bits, scale, axis=0), scale, axis=1)
    assert np.array_equal(before.pixels[pix_m2], after.pixels[pix_m2])

    # the target's exclusive region re-renders as background pattern
    revealed = m1.subtract(m2)
    desk = procedural_pattern("a desk", 0, 20, 4, 16, 16)
    assert np.array_equal(final[:, revealed.bits], desk[:, revealed.bits])

    # no cell anywhere still carries the deleted label's identity value
    assert not (final[3] == np.float32(label_identity_value("a cupcake"))).any()


def test_delete_topmost_restores_prior_state():
    config = make_procedural()
    session = EditSession.create("a desk", config=config)
    before = session.render()
    session.add_edit("a lamp", rasterize_rect(1, 1, 6, 6, 16, 16))
    restored = session.delete_edit(1)
    assert restored == before
    assert session.stats[-1].denoiser_calls == 0
    assert len(session.memory) == 1


def test_delete_errors(tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    session.add_edit("a boat", rasterize_rect(0, 0, 3, 3, 8, 8))
    with pytest.raises(LayerLookupError):
        session.delete_edit(0)
    with pytest.raises(LayerLookupError):
        session.delete_edit(5)


def test_delete_phase_switch_blends_then_plain():
    """First tau - ceil(tau/2) resumed steps blend against the below-layer
    trajectory outside the kept mask; later steps run plain."""
    config = SessionConfig(
        latent_height=8, latent_width=8, decode_scale=4, backend="toy-dit",
        seed=11, denoiser=DenoiserConfig(num_blocks=2, d_model=32, num_steps=20),
    )
    session = EditSession.create("a desk", config=config)
    m1 = rasterize_rect(1, 1, 4, 4, 8, 8)
    m2 = rasterize_rect(3, 3, 6, 6, 8, 8)
    session.add_edit("a cupcake", m1)
    session.add_edit("a dish", m2)
    below = session.memory.record(0)
    session.delete_edit(1)
    new_top = session.memory.record(1)
    outside = ~m2.bits
    # tau=8, switch after step 4: levels 19..8 carry the entry blend and
    # levels 7..4 stay pinned to the below trajectory
    for t in range(19, 3, -1):
        assert np.array_equal(
            new_top.trajectory[t][:, outside], below.trajectory[t][:, outside]
        )
    # after the switch the latent denoises freely under the reduced partition,
    # which no longer matches the below layer's single-region history
    assert not np.array_equal(
        new_top.trajectory[3][:, outside], below.trajectory[3][:, outside]
    )


# -- render and decode -------------------------------------------------------------


def test_render_is_pure_read(tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    a = session.render()
    b = session.render()
    assert a == b
    assert a.to_png_bytes() == b.to_png_bytes()


def test_render_after_add_matches_returned_image(tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    img = session.add_edit("a buoy", rasterize_rect(2, 2, 5, 5, 8, 8))
    assert session.render() == img


def test_decode_endpoints_and_midpoint():
    lat = np.zeros((3, 2, 2), dtype=np.float32)
    lat[0, 0, 0] = -1.0
    lat[1, 0, 0] = 1.0
    lat[2, 0, 0] = 0.0
    img = decode_latent(lat, scale=1)
    assert img.pixels[0, 0, 0] == 0
    assert img.pixels[0, 0, 1] == 255
    assert img.pixels[0, 0, 2] == 128  # round half up
    assert img.pixels[1, 1, 0] == 128  # zero latent decodes mid-gray


def test_decode_clamps_out_of_range():
    lat = np.array([[[5.0]], [[-5.0]], [[0.25]]], dtype=np.float32)
    img = decode_latent(lat, scale=1)
    assert img.pixels[0, 0, 0] == 255
    assert img.pixels[0, 0, 1] == 0
    assert img.pixels[0, 0, 2] == 159  # floor(0.625*255 + 0.5)


def test_decode_upscale_blocks_constant():
    lat = np.zeros((3, 2, 2), dtype=np.float32)
    lat[:, 0, 0] = 0.5
    img = decode_latent(lat, scale=8)
    assert img.width == 16 and img.height == 16
    block = img.pixels[:8, :8]
    assert (block == block[0, 0]).all()


def test_decode_needs_three_channels():
    with pytest.raises(DimensionMismatchError):
        decode_latent(np.zeros((2, 4, 4), dtype=np.float32))


# -- persistence and replay ---------------------------------------------------------


def test_save_load_round_trip(tmp_path, tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    session.add_edit("a boat", rasterize_rect(1, 1, 4, 4, 8, 8))
    session.save(tmp_path / "s")
    loaded = EditSession.load(tmp_path / "s")
    assert loaded.layer_labels() == session.layer_labels()
    for i in range(2):
        for t in range(tiny_toy_config.denoiser.num_steps + 1):
            assert np.array_equal(
                loaded.memory.latent_at(i, t), session.memory.latent_at(i, t)
            )
    assert loaded.render() == session.render()


def test_replay_reproduces_final_image(tmp_path, tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    session.add_edit("a boat", rasterize_rect(1, 1, 4, 4, 8, 8))
    session.add_edit("a gull", rasterize_rect(5, 5, 7, 7, 8, 8))
    session.delete_edit(1)
    session.save(tmp_path / "s")
    replayed = EditSession.replay(tmp_path / "s")
    assert replayed.render().to_png_bytes() == session.render().to_png_bytes()
    for t in range(tiny_toy_config.denoiser.num_steps + 1):
        assert np.array_equal(
            replayed.memory.latent_at(1, t), session.memory.latent_at(1, t)
        )


def test_memory_length_invariant(tiny_toy_config):
    session = EditSession.create("a harbor", config=tiny_toy_config)
    adds = deletes = 0
    session.add_edit("one", rasterize_rect(0, 0, 2, 2, 8, 8)); adds += 1
    session.add_edit("two", rasterize_rect(3, 3, 5, 5, 8, 8)); adds += 1
    session.delete_edit(1); deletes += 1
    session.add_edit("three", rasterize_rect(2, 2, 6, 6, 8, 8)); adds += 1
    assert len(session.memory) == adds + 1 - deletes
