import numpy as np
import pytest

import fragq


def test_sample_shapes_and_determinism():
    clip, mos = fragq.synthesize_clip(seed=3, index=0, frames=8, height=96, width=128)
    assert clip.shape == (8, 96, 128, 3) and clip.dtype == np.uint8
    assert 1.0 <= mos <= 5.0
    a = fragq.sample(clip, grids=2, patch=32, frames=8, seed=5)
    b = fragq.sample(clip, grids=2, patch=32, frames=8, seed=5)
    assert a.shape == (8, 64, 64, 3)
    assert np.array_equal(a, b)


def test_metrics_agree_with_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    y = x + rng.normal(size=50)
    assert fragq.plcc(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    rank = lambda v: np.argsort(np.argsort(v)).astype(float)
    assert fragq.srcc(x, y) == pytest.approx(np.corrcoef(rank(x), rank(y))[0, 1], abs=1e-12)
    assert fragq.krcc(x, x) == pytest.approx(1.0)


def test_model_scores_and_roundtrips(tmp_path):
    clip, _ = fragq.synthesize_clip(seed=1, index=2, frames=8, height=96, width=96)
    frag = fragq.sample(clip, grids=2, patch=32, frames=8)
    model = fragq.Model("tiny", seed=7)
    s = model.score(frag)
    assert np.isfinite(s)
    path = str(tmp_path / "m.ckpt")
    model.save(path)
    assert fragq.Model.load(path).score(frag) == s


def test_errors_surface_as_fragq_error():
    with pytest.raises(fragq.FragqError):
        fragq.Model("nonexistent")
    assert fragq.flops_g("standard") > fragq.flops_g("mobile", frames=16)
