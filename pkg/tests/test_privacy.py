import numpy as np
import pytest

from src.data.network import build_zone_views
from src.models.admm import AdmmConfig
from src.models.privacy import (
    DYNAMIC_STREAM,
    STATIC_STREAM,
    Algorithm,
    DynamicNoisePlan,
    PrivacyParams,
    SensitivityMode,
    SensitivityReport,
    StaticNoisePlan,
    empirical_dp_check,
    global_sensitivity_bound,
    local_bound_over_run,
    local_sensitivity,
    make_dynamic_plan,
    make_dynamic_scale,
    make_plan,
    make_static_plan,
    max_by_zone,
    run_algorithm,
    sample_laplace,
    zone_query,
    zone_rng,
)
from src.utils.errors import ConfigError

SHORT_RUN = AdmmConfig(rho=100.0, max_iters=4, tol=1e-12)


def _zone(bundle, zone_id):
    return next(z for z in bundle[2] if z.zone_id == zone_id)


def test_local_sensitivity_of_pinned_zone(case2):
    zone = _zone(case2, "B")
    params = PrivacyParams(alpha_frac=0.1)
    report = local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, params, iteration=3)
    # theta_2 = -d_2 / 10 and d_2 moves by 0.05
    assert report.value == pytest.approx(0.005, abs=1e-8)
    assert report.argmax_bus == 2
    assert report.sign == 1
    assert report.iteration == 3


def test_zero_alpha_gives_zero_sensitivity(case3):
    zone = _zone(case3, "A")
    report = local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, PrivacyParams(alpha_frac=0.0))
    assert report.value == 0.0
    assert report.argmax_bus is None


def test_absolute_alpha(case2):
    zone = _zone(case2, "B")
    params = PrivacyParams(alpha_frac=0.2, absolute_alpha=True)
    report = local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, params)
    assert report.value == pytest.approx(0.02, abs=1e-8)


def test_downward_change_is_clamped_at_zero(case2):
    zone = _zone(case2, "B")
    # an absolute change of 1.0 p.u. cannot take the 0.5 p.u. load below zero
    params = PrivacyParams(alpha_frac=1.0, absolute_alpha=True)
    report = local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, params)
    assert report.value == pytest.approx(0.1, abs=1e-7)
    assert report.sign == 1


def test_global_bound_is_largest_load(case3):
    report = global_sensitivity_bound(case3[0], _zone(case3, "B"))
    assert report.value == pytest.approx(0.9)
    assert report.argmax_bus == 3
    assert report.mode is SensitivityMode.GLOBAL_BOUND
    raised = global_sensitivity_bound(case3[0], _zone(case3, "B"), ceiling={2: 3.5})
    assert raised.value == pytest.approx(3.5)


def test_laplace_sampling():
    assert np.array_equal(sample_laplace(0.0, 3, zone_rng(1, 0, 0, 0)), np.zeros(3))
    with pytest.raises(ConfigError):
        sample_laplace(-1.0, 3, zone_rng(1, 0, 0, 0))
    draws = sample_laplace(2.0, 200_000, zone_rng(1, 0, 0, 0))
    assert np.mean(np.abs(draws)) == pytest.approx(2.0, rel=0.02)
    assert np.var(draws) == pytest.approx(2 * 2.0 ** 2, rel=0.03)


def test_streams_are_independent_and_repeatable():
    a = sample_laplace(1.0, 5, zone_rng(42, STATIC_STREAM, 0, 0))
    b = sample_laplace(1.0, 5, zone_rng(42, STATIC_STREAM, 0, 0))
    c = sample_laplace(1.0, 5, zone_rng(42, DYNAMIC_STREAM, 0, 0))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_static_plan_reuses_one_vector(case3):
    case, _, zones = case3
    params = PrivacyParams(sensitivity_mode="global", epsilon=2.0, seed=9)
    plan = make_static_plan(case, zones, params)
    assert isinstance(plan, StaticNoisePlan)
    assert plan.scales["A"] == pytest.approx(0.45)
    zone = zones[0]
    first = plan.noise(zone, 1, None, None, 100.0)
    assert np.array_equal(first, plan.noise(zone, 50, None, None, 100.0))
    assert np.array_equal(first, make_static_plan(case, zones, params).vectors["A"])


def test_static_plan_needs_a_fixed_bound(case3):
    case, _, zones = case3
    with pytest.raises(ConfigError, match="static plan"):
        make_static_plan(case, zones, PrivacyParams(sensitivity_mode="local"))
    with pytest.raises(ConfigError, match="local-max"):
        make_static_plan(case, zones, PrivacyParams(sensitivity_mode="local-max"))
    with pytest.raises(ConfigError, match="no local bound"):
        make_static_plan(case, zones, PrivacyParams(sensitivity_mode="local-max"), local_bounds={"A": 0.1})


def test_dynamic_scale_and_composition():
    params = PrivacyParams(epsilon=0.5, attack_budget=5)
    assert make_dynamic_scale(0.01, params) == pytest.approx(0.02)
    composed = PrivacyParams(epsilon=0.5, attack_budget=5, scale_composition=True)
    assert make_dynamic_scale(0.01, composed) == pytest.approx(0.1)


def test_dynamic_plan_records_sensitivity(case3):
    case, _, zones = case3
    params = PrivacyParams(alpha_frac=0.05, seed=3)
    plan = make_dynamic_plan(case, zones, params)
    assert isinstance(plan, DynamicNoisePlan)
    assert plan.fixed_bounds is None
    run, _ = run_algorithm(Algorithm.DP_ADMM, case, zones, SHORT_RUN, params)
    run2, plan2 = run_algorithm(Algorithm.DP_ADMM, case, zones, SHORT_RUN, params)
    assert len(plan2.reports) == run2.iterations * len(zones)
    assert all(r.value >= 0 for r in plan2.reports)
    assert [s for _, _, s in plan2.scales] == pytest.approx([r.value / params.epsilon for r in plan2.reports])
    assert run.residuals == pytest.approx(run2.residuals, abs=0)


def test_seed_changes_the_run(case3):
    case, _, zones = case3
    a, _ = run_algorithm("dp-admm", case, zones, SHORT_RUN, PrivacyParams(alpha_frac=0.05, seed=1))
    b, _ = run_algorithm("dp-admm", case, zones, SHORT_RUN, PrivacyParams(alpha_frac=0.05, seed=2))
    assert not np.allclose(a.residuals, b.residuals)


def test_plain_admm_has_no_plan(case3):
    case, _, zones = case3
    assert make_plan("admm", case, zones, PrivacyParams(), SHORT_RUN) is None


def test_local_max_bound_covers_every_report(case3):
    case, partition, zones = case3
    params = PrivacyParams(alpha_frac=0.05, sensitivity_mode="local-max")
    bounds = local_bound_over_run(case, partition, SHORT_RUN, params, zones=zones)
    assert set(bounds) == {"A", "B"}
    assert all(v > 0 for v in bounds.values())
    plan = make_plan("sp-admm", case, zones, params, SHORT_RUN)
    assert plan.scales == pytest.approx({z: v / params.epsilon for z, v in bounds.items()})


def test_max_by_zone():
    reports = [SensitivityReport("A", 0.1), SensitivityReport("A", 0.3), SensitivityReport("B", 0.2)]
    assert max_by_zone(reports) == {"A": 0.3, "B": 0.2}


@pytest.mark.parametrize(
    "kwargs",
    [{"epsilon": 0.0}, {"alpha_frac": 1.5}, {"alpha_frac": -0.1}, {"attack_budget": 0}, {"seed": -1}],
)
def test_params_validation(kwargs):
    with pytest.raises(ConfigError):
        PrivacyParams(**kwargs)


def test_absolute_alpha_may_exceed_one():
    assert PrivacyParams(alpha_frac=2.0, absolute_alpha=True).alpha_for(0.3) == 2.0
    assert PrivacyParams(alpha_frac=0.1).alpha_for(0.3) == pytest.approx(0.03)


@pytest.mark.slow
def test_empirical_privacy_holds_at_calibrated_scale(case2):
    query = zone_query(_zone(case2, "B"), np.zeros(2), np.zeros(2), 100.0)
    result = empirical_dp_check(query, [0.5], [0.55], scale=0.005, trials=100_000)
    assert not result.degenerate
    assert result.bins_compared > 0
    assert result.max_log_ratio <= 1.3


@pytest.mark.slow
def test_empirical_privacy_fails_at_half_scale(case2):
    query = zone_query(_zone(case2, "B"), np.zeros(2), np.zeros(2), 100.0)
    result = empirical_dp_check(query, [0.5], [0.55], scale=0.0025, trials=100_000)
    assert result.max_log_ratio > 1.3


@pytest.mark.slow
def test_identical_inputs_give_matching_histograms(case2):
    query = zone_query(_zone(case2, "B"), np.zeros(2), np.zeros(2), 100.0)
    result = empirical_dp_check(query, [0.5], [0.5], scale=0.005, trials=1_000_000)
    assert result.max_log_ratio <= 0.1


def test_noiseless_release_is_degenerate(case2):
    query = zone_query(_zone(case2, "B"), np.zeros(2), np.zeros(2), 100.0)
    result = empirical_dp_check(query, [0.5], [0.55], scale=0.0, trials=100)
    assert result.degenerate
    assert result.max_log_ratio == np.inf


def test_bins_hit_on_one_side_only_break_privacy(case2):
    query = zone_query(_zone(case2, "B"), np.zeros(2), np.zeros(2), 100.0)
    # the angle moves by 0.005, fifty times the noise scale
    result = empirical_dp_check(query, [0.5], [0.55], scale=0.0001, trials=10_000)
    assert not result.degenerate
    assert result.bins_compared > 0
    assert result.max_log_ratio == np.inf


def test_infeasible_change_is_clamped_to_the_load_range(case3):
    case, partition, _ = case3
    zones = build_zone_views(case.with_loads([0.0, 0.6, 0.0]), partition)
    zone = next(z for z in zones if z.zone_id == "B")
    # bus 3 serves at most 2.5 p.u.: 1.5 from its unit and 1.0 over line 2-3
    params = PrivacyParams(alpha_frac=2.7, absolute_alpha=True)
    report = local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, params)
    assert report.value == pytest.approx(0.125, abs=1e-6)
    assert report.argmax_bus == 3
    assert report.sign == 1


@pytest.mark.parametrize("zone_id", ["A", "B"])
def test_local_sensitivity_matches_a_load_grid(case3, zone_id):
    zone = _zone(case3, zone_id)
    consensus, dual = np.zeros(len(zone.boundary)), np.zeros(len(zone.boundary))
    params = PrivacyParams(alpha_frac=0.1)
    report = local_sensitivity(zone, consensus, dual, 100.0, params)
    query = zone_query(zone, consensus, dual, 100.0)
    loads = np.asarray(zone.local_loads, dtype=float)
    reference = query(loads)
    worst = 0.0
    for pos, load in enumerate(loads):
        step = params.alpha_for(load)
        for value in np.arange(max(0.0, load - step), load + step + 5e-4, 1e-3):
            moved = loads.copy()
            moved[pos] = min(value, load + step)
            worst = max(worst, float(np.abs(query(moved) - reference).sum()))
    assert report.value == pytest.approx(worst, abs=1e-6)


def test_local_sensitivity_grows_with_alpha(case3):
    for zone in case3[2]:
        values = [
            local_sensitivity(zone, np.zeros(2), np.zeros(2), 100.0, PrivacyParams(alpha_frac=a)).value
            for a in (0.01, 0.05, 0.1, 0.2)
        ]
        assert values == sorted(values)
        assert values[-1] > 0


def test_static_vectors_differ_between_zones(case3):
    case, _, zones = case3
    plan = make_static_plan(case, zones, PrivacyParams(sensitivity_mode="global", seed=9))
    assert not np.allclose(plan.vectors["A"], plan.vectors["B"])
