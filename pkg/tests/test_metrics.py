import math

import numpy as np
import pytest

from robustdepth.depthmap import DepthMap
from robustdepth.metrics import (
    MetricReport,
    aggregate_reports,
    compute_metrics,
    compute_metrics_pooled,
)


def brute_force_metrics(pred: DepthMap, gt: DepthMap) -> dict:
    """Independent per-pixel reference: pure Python loops, no shared helpers."""
    ps, gs = [], []
    for i in range(gt.values.shape[0]):
        for j in range(gt.values.shape[1]):
            if gt.valid[i, j] and pred.valid[i, j] \
                    and gt.values[i, j] > 0 and pred.values[i, j] > 0:
                ps.append(float(pred.values[i, j]))
                gs.append(float(gt.values[i, j]))
    n = len(ps)
    assert n > 0
    rel = sq_rel = sq = mae = inv_sq = e_sum = e2_sum = 0.0
    d1 = d2 = d3 = 0
    for p, g in zip(ps, gs):
        rel += abs(p - g) / g
        sq_rel += (p - g) ** 2 / g
        sq += (p - g) ** 2
        mae += abs(p - g)
        inv_sq += (1000.0 / p - 1000.0 / g) ** 2
        e = math.log(p) - math.log(g)
        e_sum += e
        e2_sum += e * e
        ratio = max(p / g, g / p)
        d1 += ratio < 1.25
        d2 += ratio < 1.25 ** 2
        d3 += ratio < 1.25 ** 3
    return {
        "rel": rel / n,
        "sq_rel": sq_rel / n,
        "rmse": math.sqrt(sq / n),
        "mae": mae / n,
        "irmse": math.sqrt(inv_sq / n),
        "silog": 100.0 * math.sqrt(e2_sum / n - (e_sum / n) ** 2),
        "delta1": d1 / n,
        "delta2": d2 / n,
        "delta3": d3 / n,
        "n_valid": n,
    }


def _random_pair(rng, h=32, w=32):
    gt_vals = rng.uniform(0.4, 50.0, (h, w))
    pred_vals = gt_vals * rng.uniform(0.5, 2.0, (h, w))
    gt_valid = rng.random((h, w)) > 0.2
    pred_valid = rng.random((h, w)) > 0.1
    gt_vals[~gt_valid] = 0.0
    pred_vals[~pred_valid] = 0.0
    return (DepthMap(values=pred_vals, valid=pred_valid),
            DepthMap(values=gt_vals, valid=gt_valid))


def test_exact_prediction_is_all_zero():
    rng = np.random.default_rng(41)
    vals = rng.uniform(1, 10, (8, 8)).astype(np.float32)
    d = DepthMap(values=vals, valid=np.ones((8, 8), bool))
    r = compute_metrics(d, d)
    assert r.rel == r.sq_rel == r.rmse == r.mae == r.irmse == 0.0
    assert r.silog == 0.0
    assert r.delta1 == r.delta2 == r.delta3 == 1.0


def test_single_pixel_hand_values():
    gt = DepthMap(values=np.array([[1.0]], np.float32), valid=np.ones((1, 1), bool))
    pred = DepthMap(values=np.array([[2.0]], np.float32), valid=np.ones((1, 1), bool))
    r = compute_metrics(pred, gt)
    assert r.rel == pytest.approx(1.0)
    assert r.sq_rel == pytest.approx(1.0)
    assert r.rmse == pytest.approx(1.0)
    assert r.mae == pytest.approx(1.0)
    assert r.irmse == pytest.approx(500.0)       # |1000/2 - 1000/1|
    assert r.silog == pytest.approx(0.0, abs=1e-9)
    assert r.delta1 == 0.0                       # ratio 2 >= 1.25
    assert r.delta2 == 0.0                       # 2 >= 1.5625
    assert r.delta3 == 0.0                       # 2 >= 1.953125
    assert r.n_valid == 1


def test_matches_brute_force_loop():
    rng = np.random.default_rng(42)
    for _ in range(10):
        pred, gt = _random_pair(rng)
        got = compute_metrics(pred, gt).as_dict()
        want = brute_force_metrics(pred, gt)
        for key, value in want.items():
            if key == "n_valid":
                assert got[key] == value
            else:
                assert got[key] == pytest.approx(value, rel=1e-9, abs=1e-12), key


def test_silog_scale_invariance():
    rng = np.random.default_rng(43)
    pred, gt = _random_pair(rng)
    base = compute_metrics(pred, gt).silog
    for c in (0.5, 2.0, 10.0):
        scaled = DepthMap(values=(pred.values * c) * pred.valid,
                          valid=pred.valid)
        assert compute_metrics(scaled, gt).silog == pytest.approx(base, abs=1e-9)


def test_constant_multiple_of_gt_has_zero_silog():
    rng = np.random.default_rng(44)
    vals = rng.uniform(1, 10, (8, 8)).astype(np.float32)
    gt = DepthMap(values=vals, valid=np.ones((8, 8), bool))
    pred = DepthMap(values=vals * 3.0, valid=np.ones((8, 8), bool))
    assert compute_metrics(pred, gt).silog == pytest.approx(0.0, abs=1e-5)


def test_rmse_at_least_mae_and_delta_ordering():
    rng = np.random.default_rng(45)
    for _ in range(20):
        pred, gt = _random_pair(rng, 16, 16)
        r = compute_metrics(pred, gt)
        assert r.rmse >= r.mae - 1e-12
        assert r.delta1 <= r.delta2 <= r.delta3


def test_delta_symmetric_under_swap():
    rng = np.random.default_rng(46)
    pred, gt = _random_pair(rng, 16, 16)
    a = compute_metrics(pred, gt)
    b = compute_metrics(gt, pred)
    assert a.delta1 == b.delta1 and a.delta2 == b.delta2 and a.delta3 == b.delta3


def test_delta_boundary_is_strict():
    gt = DepthMap(values=np.array([[1.0]], np.float32), valid=np.ones((1, 1), bool))
    pred = DepthMap(values=np.array([[1.25]], np.float32), valid=np.ones((1, 1), bool))
    assert compute_metrics(pred, gt).delta1 == 0.0


def test_masking_soundness():
    rng = np.random.default_rng(47)
    pred, gt = _random_pair(rng, 16, 16)
    base = compute_metrics(pred, gt)
    outside = ~(gt.valid & pred.valid)
    assert outside.any()
    tampered_vals = pred.values.copy()
    tampered_vals[outside] = 123.0
    tampered = DepthMap(values=np.where(pred.valid, tampered_vals, 0.0),
                        valid=pred.valid)
    again = compute_metrics(tampered, gt)
    # only pixels inside the joint mask may move the metrics; pixels valid in
    # pred but invalid in gt were tampered yet must not matter
    assert again.as_dict() == base.as_dict()


def test_errors_on_empty_mask_and_shape_mismatch():
    a = DepthMap(values=np.zeros((4, 4), np.float32), valid=np.zeros((4, 4), bool))
    with pytest.raises(ValueError, match="no valid"):
        compute_metrics(a, a)
    b = DepthMap(values=np.ones((4, 5), np.float32), valid=np.ones((4, 5), bool))
    c = DepthMap(values=np.ones((4, 4), np.float32), valid=np.ones((4, 4), bool))
    with pytest.raises(ValueError, match="shape"):
        compute_metrics(b, c)


def test_aggregate_reports():
    r1 = MetricReport(rel=0.1, sq_rel=0.0, rmse=1.0, mae=0.5, irmse=0.0, silog=0.0,
                      delta1=1.0, delta2=1.0, delta3=1.0, n_valid=10)
    r2 = MetricReport(rel=0.3, sq_rel=0.2, rmse=3.0, mae=1.5, irmse=2.0, silog=4.0,
                      delta1=0.5, delta2=0.6, delta3=0.7, n_valid=30)
    agg = aggregate_reports([r1, r2])
    assert agg.rel == pytest.approx(0.2)
    assert agg.rmse == pytest.approx(2.0)
    assert agg.n_valid == 40
    assert aggregate_reports([r1]) == r1
    same = aggregate_reports([r2, r2])
    assert same.rel == pytest.approx(r2.rel)
    with pytest.raises(ValueError):
        aggregate_reports([])


def test_pooled_mode_differs_from_per_image_in_general():
    rng = np.random.default_rng(48)
    pairs = [_random_pair(rng, 8, 8), _random_pair(rng, 8, 8)]
    pooled = compute_metrics_pooled(pairs)
    per_image = aggregate_reports([compute_metrics(p, g) for p, g in pairs])
    assert pooled.n_valid == per_image.n_valid
    # same data, different aggregation convention
    assert pooled.rmse != pytest.approx(per_image.rmse, rel=1e-12)
