"""End-to-end smoke checks for the Python module."""

import numpy as np
import pytest

import coldmri


def test_schedule_endpoints_and_located_starts():
    lin = coldmri.Schedule("lin", 100, 0.01)
    log = coldmri.Schedule("log", 100, 0.01)
    assert lin.rate(0) == 1.0 and lin.rate(100) == 0.01
    assert log.rate(0) == 1.0 and log.rate(100) == 0.01
    assert lin.locate(1 / 8) == 89
    assert log.locate(1 / 8) == 46
    assert lin.locate(1 / 16) == 95
    assert log.locate(1 / 16) == 61


def test_phantom_fft_roundtrip_and_step_zero_degradation():
    x = coldmri.make_phantom(32, 32, 5)
    assert x.shape == (32, 32) and x.dtype == np.complex128
    back = coldmri.ifft2_centered(coldmri.fft2_centered(x))
    assert np.linalg.norm(back - x) <= 1e-12 * np.linalg.norm(x)

    family = coldmri.build_family(coldmri.Schedule("log", 20, 0.1), 32, 1 / 32, 1)
    assert np.linalg.norm(coldmri.degrade(x, family, 0) - x) <= 1e-12 * np.linalg.norm(x)


def test_oracle_reconstruction_is_exact_and_metrics_agree():
    truth = coldmri.make_phantom(32, 32, 9)
    family = coldmri.build_family(coldmri.Schedule("log", 20, 0.1), 32, 1 / 32, 1)
    mask = coldmri.gen_aligned_task_mask(family, 4.0, 3)
    y = coldmri.measure(truth, mask)

    out = coldmri.reconstruct(y, family, mask, oracle=truth)
    assert out["start_mask_covered"]
    # The start step snaps to an exactly matching family mask when one
    # exists, and otherwise comes from the schedule lookup.
    snap = next(
        (t for t in range(family.total_steps + 1) if mask.same_selection(family.mask(t))),
        None,
    )
    expected = snap if snap is not None else family.schedule.locate(mask.num_selected / mask.width)
    assert out["start_step"] == expected
    err = np.linalg.norm(out["recon"] - truth) / np.linalg.norm(truth)
    assert err <= 1e-10
    assert coldmri.psnr(out["recon"], truth) == 99.0
    assert coldmri.ssim(truth, truth) == pytest.approx(1.0, abs=1e-12)

    zf = coldmri.zero_fill(y, mask)
    plain = coldmri.reconstruct(y, family, mask)  # zero-fill restorer
    assert coldmri.psnr(zf, truth) < 99.0
    assert np.isfinite(coldmri.psnr(plain["recon"], truth))


def test_mask_properties_and_errors():
    family = coldmri.build_family(coldmri.Schedule("lin", 10, 0.2), 16, 2 / 16, 7)
    m5 = family.mask(5)
    assert m5.width == 16
    assert m5.selected().sum() == m5.num_selected
    assert family.mask(10).num_selected <= m5.num_selected
    with pytest.raises(coldmri.Error):
        family.mask(11)
    with pytest.raises(coldmri.Error):
        coldmri.Schedule("nearest", 10, 0.2)
    with pytest.raises(coldmri.Error):
        coldmri.psnr(np.zeros((4, 4), dtype=complex), np.zeros((4, 4), dtype=complex))


def test_tiny_training_and_checkpoint_io(tmp_path):
    family = coldmri.build_family(coldmri.Schedule("log", 10, 0.2), 16, 1 / 16, 1)
    images = [coldmri.make_phantom(16, 16, s) for s in range(3)]
    ckpt, log = coldmri.train(
        images, family, channels=4, depth=2, batch_size=2, grad_steps=4, seed=21
    )
    assert ckpt.total_steps == 10 and len(log) == 4
    path = tmp_path / "model.ckpt"
    coldmri.save_checkpoint(path, ckpt)
    reloaded = coldmri.load_checkpoint(path)
    assert np.array_equal(reloaded.params, ckpt.params)

    truth = coldmri.make_phantom(16, 16, 50)
    mask = coldmri.gen_aligned_task_mask(family, 2.0, 11)
    out = coldmri.reconstruct(coldmri.measure(truth, mask), family, mask, checkpoint=reloaded)
    assert np.isfinite(out["recon"]).all()


def test_image_file_roundtrip(tmp_path):
    x = coldmri.make_phantom(8, 12, 2)
    path = tmp_path / "slice.cim"
    coldmri.save_image(path, x)
    y = coldmri.load_image(path)
    # Stored as float32 pairs.
    assert np.allclose(y, x, atol=1e-6, rtol=1e-6)
    assert y.shape == x.shape
