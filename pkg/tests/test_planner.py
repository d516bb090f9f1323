import json
import math

import numpy as np
import pytest

from csimarkov import planner
from csimarkov.fading import DomainError

SMALL = dict(codebook_size=16, samples=200_000, codebook_iterations=2000)


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    spec = planner.DesignSpec(**SMALL)
    return spec, out, planner.plan(spec, out_dir=out)


def test_invert_gain_design_example():
    # [PAPER] sqrt(lambda) = 0.9994, K = 330 -> D_max ~ {992, 688, 431}
    got = [planner.invert_gain_approx(0.9994, 330, g)[0] for g in (0.5, 0.6, 0.7)]
    for g, p in zip(got, (992, 688, 431)):
        assert abs(g - p) <= 2


def test_invert_gain_boundaries():
    s, K = 0.999, 50
    from csimarkov.throughput import q_interval
    q = q_interval(s, K)
    # [TRIVIAL] target equal to q_K alone leaves no room for fixed delay
    assert planner.invert_gain_approx(s, K, q) == (0, False)
    assert planner.invert_gain_approx(s, K, min(1.0, q * 1.01)) == (0, False)
    assert planner.invert_gain_approx(1.0, K, 0.5) == (None, True)
    # [DERIVED] result is the largest feasible D
    D, _ = planner.invert_gain_approx(s, K, 0.4)
    assert s ** D * q >= 0.4 > s ** (D + 1) * q


def test_full_gain_target_forces_unit_interval():
    # [TRIVIAL] 100% normalized gain only at zero delay and K = 1
    assert planner.invert_gain_approx(0.999, 1, 1.0) == (0, False)
    assert planner.max_interval_for_target(0.999, 1.0) == 1
    k = planner.max_interval_for_target(0.999, 0.8)
    from csimarkov.throughput import q_interval
    assert q_interval(0.999, k) >= 0.8 > q_interval(0.999, k + 1)


def test_invert_gain_rejects_bad_target():
    with pytest.raises(DomainError):
        planner.invert_gain_approx(0.9, 10, 0.0)
    with pytest.raises(DomainError):
        planner.invert_gain_approx(0.9, 10, 1.5)


@pytest.mark.parametrize("bad", [dict(gain_targets=(0.5, 1.2)), dict(outage_delta=0.0), dict(codebook_size=100),
                                 dict(max_speed_mps=0.0), dict(num_subchannels=20), dict(epsilon=1.0)])
def test_design_spec_validation(bad):
    with pytest.raises(DomainError):
        planner.DesignSpec(**bad)


def test_design_spec_unknown_keys():
    with pytest.raises(DomainError):
        planner.DesignSpec.from_dict({"bogus": 1})


def test_design_defaults_match_example():
    spec = planner.DesignSpec()
    assert spec.sample_interval_s == 1e-6 and spec.bits == 7
    assert spec.doppler().doppler_hz == pytest.approx(104.2, abs=0.1)


def test_plan_report_invariants(small_report):
    spec, _, rep = small_report
    d = rep.to_dict()
    assert d["schema_version"] == planner.SCHEMA_VERSION
    D = [t.D_max for t in rep.targets]
    assert all(a > b for a, b in zip(D, D[1:]))
    for t in rep.targets:
        assert t.total_mbps == pytest.approx(spec.num_subchannels * t.per_subchannel_mbps)
        assert t.gain_bpshz == pytest.approx(t.target * rep.throughput["delta_R0"])
    assert rep.R_f == pytest.approx(spec.bits / (rep.K * spec.sample_interval_s))
    assert d["sum_feedback_rate_kbps"] == pytest.approx(8 * rep.R_f / 1e3)
    assert rep.feedback.outage_prob_at_K <= spec.outage_delta
    assert 0 < rep.sqrt_lambda < 1
    assert not rep.quasi_static


def test_plan_persists_intermediates(small_report):
    _, out, _ = small_report
    for name in ("codebook.txt", "states.npy", "analysis.npz", "model.json", "scheme.json",
                 "feedback.json", "manifest.json"):
        assert (out / name).exists()


def test_plan_rerun_from_cache_is_identical(small_report):
    spec, out, rep = small_report
    again = planner.plan(spec, out_dir=out)
    assert planner.dump_json(again.to_dict()) == planner.dump_json(rep.to_dict())
    fresh = planner.plan(spec)
    assert planner.dump_json(fresh.to_dict()) == planner.dump_json(rep.to_dict())


def test_plan_workers_do_not_change_report(small_report):
    spec, _, rep = small_report
    other = planner.plan(planner.DesignSpec(**SMALL, workers=3))
    assert planner.dump_json(other.to_dict()) == planner.dump_json(rep.to_dict())


def test_cache_ignored_when_config_changes(small_report, tmp_path):
    spec, out, rep = small_report
    changed = planner.DesignSpec(**{**SMALL, "seed": 1})
    assert changed.cache_key() != spec.cache_key()
    other = planner.plan(changed, out_dir=tmp_path)
    assert other.to_dict()["R_s_bps"] != rep.to_dict()["R_s_bps"]


def test_slow_mobility_is_quasi_static():
    # [TRIVIAL] almost no motion -> almost no state changes, K pinned at the cap
    rep = planner.plan(planner.DesignSpec(codebook_size=16, samples=20_000, codebook_iterations=100,
                                          max_speed_mps=1e-6))
    assert rep.quasi_static
    assert rep.feedback.capped
    assert rep.throughput is None
    assert all(t.D_max is None for t in rep.targets)


def test_dump_json_maps_nan_to_null():
    text = planner.dump_json({"b": float("nan"), "a": np.float64(1.5), "c": np.arange(2)})
    assert json.loads(text) == {"a": 1.5, "b": None, "c": [0, 1]}
    assert text.index('"a"') < text.index('"b"')


def test_figure_datasets_small_grid():
    fs = planner.FigureSpec(samples=40_000, codebook_iterations=100, fig2_size=8, fig2_max_lag=10,
                            fig3_fdt=(1e-2,), fig3_sizes=(8,), fig4_fdt=(1e-2,), fig4_size=8,
                            fig4_ratios=(2.0,), fig5_fdt=1e-2, fig5_size=8, fig5_delays=(0, 5),
                            fig6_fdt=(1e-2,), fig6_size=8, fig6_K=(1, 4), fig6_delays=(0, 3),
                            fig7_fdt=(1e-2,), fig7_sizes=(8,), fig7_ratios=(3.0,))
    data = planner.figure_datasets(fs)
    assert len(data["fig2"]) == 11 and data["fig2"][0]["empirical"] == pytest.approx(1.0)
    # [TRIVIAL] single-point grids give single-row tables
    assert len(data["fig3"]) == 1 and len(data["fig4"]) == 1 and len(data["fig7"]) == 1
    row = data["fig3"][0]
    assert row["Rs_T"] == pytest.approx(row["empirical_Rs_T"], rel=0.01)
    assert len(data["fig6"]) == 4
    k1 = [r for r in data["fig6"] if r["K"] == 1 and r["D"] == 0][0]
    assert k1["normalized_gain"] == pytest.approx(1.0) and k1["approximation"] == pytest.approx(1.0)
    f5 = data["fig5"]
    assert f5[0]["C_ideal"] >= f5[0]["R_quantized"] >= f5[1]["R_delayed"] - 0.05
    with pytest.raises(DomainError):
        planner.figure_datasets(fs, ["fig9"])


def test_subseed_independent_and_stable():
    assert planner.subseed(0, 1) == planner.subseed(0, 1)
    assert len({planner.subseed(0, t) for t in (1, 2, 3)}) == 3
    assert 0 <= planner.subseed(2 ** 63, 1) < 2 ** 63
