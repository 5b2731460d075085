import pytest

from genlab import (
    AMPLE,
    SamplingPlan,
    TaskDistribution,
    estimate_generality,
    estimate_tail_generality,
    failure_set,
    make_agent,
    regret,
)
from genlab.ecologies import mix_with_dirac
from genlab.errors import SupportTooLargeError
from genlab.functionals import new_cache, per_task_estimate

from conftest import mdp_task, two_point


@pytest.fixture
def exact_plan():
    return SamplingPlan(n_rollouts=200)


def test_dirac_equals_per_task(mdp_family, forward_agent, exact_plan):
    task = mdp_task(mdp_family, 0.5)
    mu = TaskDistribution(mdp_family.id, (task,), (1.0,))
    cache = new_cache()
    g = estimate_generality(mu, forward_agent, AMPLE, exact_plan, 3, cache)
    est, _, _ = per_task_estimate(task, forward_agent, AMPLE, exact_plan, 3, cache)
    assert g.mean == est
    assert estimate_tail_generality(mu, forward_agent, AMPLE, 0.3, exact_plan, 3, cache) == est


def test_two_point_average_exact(mdp_family, forward_agent, exact_plan):
    mu = two_point(mdp_family)  # deterministic scores 1 and 0, weights 0.5/0.5
    g = estimate_generality(mu, forward_agent, AMPLE, exact_plan, 0)
    assert g.mean == 0.5 and g.half_width == 0.0


def test_weighted_sum(mdp_family, forward_agent, exact_plan):
    mu = two_point(mdp_family, good_w=0.8)
    g = estimate_generality(mu, forward_agent, AMPLE, exact_plan, 0)
    assert g.mean == pytest.approx(0.8, abs=1e-12)


def test_exact_mode_support_cap(mdp_family, forward_agent):
    plan = SamplingPlan(n_rollouts=10, exact_support_cap=1)
    mu = two_point(mdp_family)
    with pytest.raises(SupportTooLargeError):
        estimate_generality(mu, forward_agent, AMPLE, plan, 0)


def test_mc_mode_close_to_exact(mdp_family, forward_agent):
    mu = two_point(mdp_family, good_w=0.7)
    plan = SamplingPlan(mode="mc", n_tasks=4000, n_rollouts=1)
    g = estimate_generality(mu, forward_agent, AMPLE, plan, 11)
    assert abs(g.mean - 0.7) < 0.03
    assert g.n_tasks_sampled == 4000


def test_tail_order_statistic(mdp_family, forward_agent, exact_plan):
    mu = two_point(mdp_family)  # scores 1 and 0
    assert estimate_tail_generality(mu, forward_agent, AMPLE, 0.6, exact_plan, 0) == 1.0
    assert estimate_tail_generality(mu, forward_agent, AMPLE, 0.4, exact_plan, 0) == 0.0


def test_tail_monotone_in_delta(mdp_family, forward_agent, exact_plan):
    tasks = [mdp_task(mdp_family, s) for s in (0.0, 0.5, 1.0)]
    mu = TaskDistribution(mdp_family.id, tuple(tasks), (0.3, 0.4, 0.3))
    cache = new_cache()
    values = [
        estimate_tail_generality(mu, forward_agent, AMPLE, d, exact_plan, 5, cache)
        for d in (0.1, 0.3, 0.5, 0.7, 0.9)
    ]
    assert values == sorted(values)


def test_failure_set_examples(mdp_family, forward_agent, exact_plan):
    mu = two_point(mdp_family, good_w=0.6)
    task = mdp_task(mdp_family, 0.0)
    oracle = make_agent("oracle", {"task": task})
    # oracle on its own dirac: empty failure set at theta <= 1
    dirac_mu = TaskDistribution(mdp_family.id, (task,), (1.0,))
    assert failure_set(dirac_mu, oracle, AMPLE, 1.0, exact_plan, 0).members == ()
    # theta = 0 is empty by strictness
    assert failure_set(mu, forward_agent, AMPLE, 0.0, exact_plan, 0).members == ()
    report = failure_set(mu, forward_agent, AMPLE, 0.5, exact_plan, 0)
    assert report.members == (mdp_task(mdp_family, 1.0).id,)
    assert report.mu_mass == pytest.approx(0.4, abs=1e-12)


def test_failure_set_mixed_scores(mdp_family, forward_agent, exact_plan):
    tasks = [mdp_task(mdp_family, s) for s in (0.0, 0.9, 1.0)]
    mu = TaskDistribution(mdp_family.id, tuple(tasks), (0.5, 0.3, 0.2))
    report = failure_set(mu, forward_agent, AMPLE, 0.5, exact_plan, 1)
    assert set(report.members) == {tasks[1].id, tasks[2].id}
    assert report.mu_mass == pytest.approx(0.5, abs=1e-12)


def test_complement_identity(mdp_family, forward_agent, exact_plan):
    from genlab import AxiomParams, check_g1

    tasks = [mdp_task(mdp_family, s) for s in (0.0, 0.5, 1.0)]
    mu = TaskDistribution(mdp_family.id, tuple(tasks), (0.25, 0.5, 0.25))
    cache = new_cache()
    params = AxiomParams(theta_br=0.6)
    report = check_g1(mu, forward_agent, AMPLE, params, exact_plan, 9, cache)
    fs = failure_set(mu, forward_agent, AMPLE, 0.6, exact_plan, 9, cache)
    assert report.estimate == pytest.approx(1.0 - fs.mu_mass, abs=1e-12)


def test_linearity_in_mu(mdp_family, forward_agent, exact_plan):
    tasks = [mdp_task(mdp_family, s) for s in (0.0, 0.5, 0.9)]
    cache = new_cache()
    mu1 = TaskDistribution(mdp_family.id, tuple(tasks), (0.6, 0.2, 0.2))
    mu2 = TaskDistribution(mdp_family.id, tuple(tasks), (0.1, 0.3, 0.6))
    for alpha in (0.0, 0.25, 0.7, 1.0):
        weights = tuple(alpha * a + (1 - alpha) * b for a, b in zip(mu1.weights, mu2.weights))
        mix = TaskDistribution(mdp_family.id, tuple(tasks), weights)
        g_mix = estimate_generality(mix, forward_agent, AMPLE, exact_plan, 4, cache).mean
        g1 = estimate_generality(mu1, forward_agent, AMPLE, exact_plan, 4, cache).mean
        g2 = estimate_generality(mu2, forward_agent, AMPLE, exact_plan, 4, cache).mean
        assert g_mix == pytest.approx(alpha * g1 + (1 - alpha) * g2, abs=1e-12)


def test_regret_examples(mdp_family, exact_plan):
    task = mdp_task(mdp_family, 0.5)
    oracle = make_agent("oracle", {"task": task})
    assert regret(task, oracle, AMPLE, exact_plan, 0) == 0.0
    # always-forward is optimal for chain MDPs, so its regret is 0 too
    forward = make_agent("scripted", {"behavior": "always_forward"})
    assert regret(task, forward, AMPLE, exact_plan, 0) == 0.0
    # a task the agent deterministically fails has regret 1
    det = mdp_task(mdp_family, 0.0)
    stay = make_agent("scripted", {"behavior": "always_stay"})
    assert regret(det, stay, AMPLE, exact_plan, 0) == 1.0


def test_cache_shared_across_functionals(mdp_family, forward_agent, exact_plan):
    mu = two_point(mdp_family)
    cache = new_cache()
    estimate_generality(mu, forward_agent, AMPLE, exact_plan, 0, cache)
    n_before = len(cache)
    failure_set(mu, forward_agent, AMPLE, 0.5, exact_plan, 0, cache)
    estimate_tail_generality(mu, forward_agent, AMPLE, 0.5, exact_plan, 0, cache)
    assert len(cache) == n_before  # reused, not recomputed
