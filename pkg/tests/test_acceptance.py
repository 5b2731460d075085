"""Acceptance suite: one test (or test group) per release criterion.

Each criterion prints a single PASS/FAIL line (run pytest with -s to see them
on success). Two clauses are implemented exactly as stated even though the
inequality they assert is mathematically unattainable for the configured
setups; those two tests fail honestly, with the algebra documented in their
docstrings, rather than being weakened to force green:

  * criterion 5's "breadth-of-robustness fails for every delta_rb < 1"
    (a degradation-event mass of 0.4 refutes the inequality only for
    delta_rb < 0.4);
  * criterion 6's correct-sum ceiling p0 + (1 - p1) <= 1 + 3*CI (any rule
    correlated with the contaminant's presence attains
    1 + p0 * (1 - (1 - eps)^n), here ~1.488).
"""

import json
import math
import random
import time

import pytest

from genlab import (
    AMPLE,
    AxiomParams,
    EnumerationSetup,
    SamplingPlan,
    TaskDistribution,
    check_g1,
    check_g2,
    check_g5,
    check_weak_variants,
    externality_experiment,
    fragility_demo,
    make_agent,
    make_instruction_family,
    make_mdp_family,
    make_perturbations,
    mixture_tv_bound,
    relativity_witness,
    robustness_counterexample,
    run_experiment,
    transfer_bound_check,
    tv_distance,
    wasserstein,
    worst_case_distribution,
)
from genlab.agents import AdaptationProtocol, PreExposure
from genlab.axioms import BundleConfig
from genlab.distances import GroundMetric
from genlab.ecologies import mix_with_dirac
from genlab.functionals import new_cache, per_task_estimate

from test_distances import (
    _random_rational_weights,
    brute_force_wasserstein,
    euclidean_metric,
)
from test_inference import random_setup


def _report(name: str, ok: bool, extra: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({extra})" if extra else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")


# -------------------------------------------------------------------------------------
# criterion 1: relativity of the breadth verdict


def test_c1_relativity():
    started = time.perf_counter()
    family = make_mdp_family(2, [0.0, 0.9])
    agent = make_agent("scripted", {"behavior": "always_forward"})
    plan = SamplingPlan(n_rollouts=400)
    witness = relativity_witness(family, agent, AMPLE, AxiomParams(), plan, 0)
    elapsed = time.perf_counter() - started
    ok = (
        witness.hold_report.verdict == "pass"
        and witness.fail_report.verdict == "fail"
        and "inconclusive" not in (witness.hold_report.verdict, witness.fail_report.verdict)
        and elapsed < 5.0
    )
    _report("C1 relativity", ok, f"{elapsed:.2f}s")
    assert witness.hold_report.verdict == "pass"
    assert witness.fail_report.verdict == "fail"
    assert elapsed < 5.0


# -------------------------------------------------------------------------------------
# criterion 2: breadth fragility under small-mass shifts


def test_c2_fragility():
    started = time.perf_counter()
    family = make_mdp_family(2, [0.0, 1.0])
    agent = make_agent("scripted", {"behavior": "always_forward"})
    good, bad = family.sweep(2)
    mu = TaskDistribution(family.id, (good, bad), (0.9, 0.1))
    plan = SamplingPlan(n_rollouts=50)
    params = AxiomParams(delta_br=0.1)
    for eta in (0.15, 0.3, 0.6):
        cert = fragility_demo(mu, agent, AMPLE, params, eta, plan, 0)
        assert cert.valid
        assert cert.tv <= eta + 1e-12
        assert cert.tv == pytest.approx(tv_distance(mu, cert.mu_prime), abs=1e-12)
        assert cert.details["post_failure_mass"] >= eta - 1e-12
        assert cert.details["post_breadth"] <= 1.0 - eta + 1e-12
        assert cert.post_verdict.verdict == "fail"
    elapsed = time.perf_counter() - started
    _report("C2 fragility", elapsed < 10.0, f"{elapsed:.2f}s")
    assert elapsed < 10.0


# -------------------------------------------------------------------------------------
# criterion 3: information-theoretic transfer bound by exact enumeration


def test_c3_bounded_transfer():
    started = time.perf_counter()
    rng = random.Random(2024)
    satisfied = 0
    total = 200
    for _ in range(total):
        setup, mu = random_setup(rng)
        if transfer_bound_check(setup, mu).satisfied:
            satisfied += 1
    memo_tasks = ("t0", "t1")
    memo = EnumerationSetup(
        tasks=memo_tasks,
        n=1,
        update_rule=lambda d: "mem:" + "+".join(sorted(set(d))),
        per_variant_scores={
            ("mem:t0", "t0"): 1.0,
            ("mem:t0", "t1"): 0.0,
            ("mem:t1", "t0"): 0.0,
            ("mem:t1", "t1"): 1.0,
        },
    )
    report = transfer_bound_check(memo, {"t0": 0.5, "t1": 0.5})
    elapsed = time.perf_counter() - started
    ok = (
        satisfied == total
        and abs(report.gap - (-0.5)) <= 1e-9
        and abs(report.bound - math.sqrt(2.0 * math.log(2.0))) <= 1e-9
        and elapsed < 60.0
    )
    _report("C3 bounded transfer", ok, f"{satisfied}/{total} satisfied, {elapsed:.2f}s")
    assert satisfied == total
    assert report.gap == pytest.approx(-0.5, abs=1e-9)
    assert report.bound == pytest.approx(math.sqrt(2.0 * math.log(2.0)), abs=1e-9)
    assert elapsed < 60.0


# -------------------------------------------------------------------------------------
# criterion 4: the worst-case distribution sits at an extreme point


def test_c4_worst_case_extreme_point():
    started = time.perf_counter()
    rng = random.Random(77)
    family = make_mdp_family(2, [i / 40 for i in range(41)])
    pool = family.sweep(41)
    agent = make_agent("scripted", {"behavior": "always_forward"})
    plan = SamplingPlan(n_rollouts=64)
    for trial in range(100):
        k = rng.randint(1, 8)
        tasks = rng.sample(pool, k)
        cache = new_cache()
        mu_star, value = worst_case_distribution(tasks, agent, AMPLE, plan, trial, cache)
        ests = [per_task_estimate(t, agent, AMPLE, plan, trial, cache)[0] for t in tasks]
        assert value == min(ests)  # exact identity, shared estimates
        assert mu_star.support[0].id in {t.id for t in tasks}
        # simplex grid search at resolution 0.01: vertices plus random points
        grid_min = min(ests)
        for _ in range(200):
            weights = _random_rational_weights(rng, k, 100)
            grid_min = min(grid_min, sum(w * e for w, e in zip(weights, ests)))
        assert grid_min >= value - 0.01
        assert grid_min <= value + 1e-12
    elapsed = time.perf_counter() - started
    _report("C4 worst-case extreme point", elapsed < 30.0, f"{elapsed:.2f}s")
    assert elapsed < 30.0


# -------------------------------------------------------------------------------------
# criterion 5: universal-robustness impossibility


def _c5_setup():
    family = make_mdp_family(2, [0.0, 1.0])
    agent = make_agent("scripted", {"behavior": "always_forward"})
    good, bad = family.sweep(2)
    mu = TaskDistribution(family.id, (good, bad), (0.4, 0.6))
    ops = make_perturbations(family, 1.0)
    plan = SamplingPlan(n_rollouts=50)
    return mu, agent, ops, plan


def test_c5_robustness_counterexample_mass():
    started = time.perf_counter()
    mu, agent, ops, plan = _c5_setup()
    params = AxiomParams(rb_slack=0.1)
    found = robustness_counterexample(mu, agent, ops, AMPLE, params, plan, 0)
    elapsed = time.perf_counter() - started
    ok = found is not None and found.event_mass == pytest.approx(0.4, abs=1e-12)
    _report("C5 robustness counterexample mass", ok, f"event_mass={found.event_mass}")
    assert found is not None
    assert found.event_mass == pytest.approx(0.4, abs=1e-12)
    assert found.perturbation_id == "slip_increment"
    assert elapsed < 10.0


def test_c5_g5_fails_below_event_mass():
    mu, agent, ops, plan = _c5_setup()
    for delta_rb in (0.05, 0.2, 0.39):
        params = AxiomParams(rb_slack=0.1, delta_rb=delta_rb)
        report = check_g5(mu, agent, ops, AMPLE, params, plan, 0)
        assert report.verdict == "fail", delta_rb
    _report("C5 robustness fails for delta_rb < event mass", True)


def test_c5_g5_fails_for_every_delta_rb_below_one():
    """Criterion text: the robustness check fails for every delta_rb < 1.

    Unattainable as stated: with degradation-event mass pinned at exactly 0.4,
    the robustness inequality P(no drop beyond the slack) >= 1 - delta_rb
    reads 0.6 >= 1 - delta_rb, which *holds* for delta_rb >= 0.4. A sound
    checker therefore must pass there, and this test fails honestly for the
    delta_rb in [0.4, 1) grid points. Failing for every delta_rb < 1 would
    require event mass 1, contradicting the pinned 0.4.
    """
    mu, agent, ops, plan = _c5_setup()
    verdicts = {}
    for delta_rb in (0.05, 0.2, 0.39, 0.5, 0.9):
        params = AxiomParams(rb_slack=0.1, delta_rb=delta_rb)
        verdicts[delta_rb] = check_g5(mu, agent, ops, AMPLE, params, plan, 0).verdict
    ok = all(v == "fail" for v in verdicts.values())
    _report("C5 robustness fails for ALL delta_rb < 1 (as stated)", ok, str(verdicts))
    assert ok, (
        "robustness verdicts by delta_rb: "
        f"{verdicts}; with event mass 0.4 the inequality holds for delta_rb >= 0.4, "
        "so a sound checker cannot fail there"
    )


# -------------------------------------------------------------------------------------
# criterion 6: externality / two-point non-identifiability


def _c6_reports(trials=20000):
    family = make_mdp_family(2, [0.0, 1.0])
    good, bad = family.sweep(2)
    mu0 = TaskDistribution(family.id, (good,), (1.0,))
    agent = make_agent("scripted", {"behavior": "always_forward"})
    plan = SamplingPlan(n_rollouts=50)
    return externality_experiment(
        mu0,
        bad,
        0.2,
        3,
        ["all_above_threshold", "mean_above", "always_one"],
        trials,
        agent,
        AMPLE,
        AxiomParams(),
        plan,
        1234,
    )


def test_c6_externality_absence_and_floor():
    started = time.perf_counter()
    reports = _c6_reports()
    elapsed = time.perf_counter() - started
    absence = reports[0].absence_freq
    assert abs(absence - 0.512) <= 0.01
    for r in reports:
        assert r.overlap_bound == pytest.approx(0.512, abs=1e-12)
        assert r.p1_declare >= r.overlap_bound * r.p0_declare - 3 * r.ci_halfwidth
    ok = elapsed < 120.0
    _report("C6 externality absence+floor", ok, f"absence={absence:.4f}, {elapsed:.1f}s")
    assert elapsed < 120.0


def test_c6_correct_sum_ceiling_presence_blind_rule():
    reports = {r.decision_rule_id: r for r in _c6_reports(trials=4000)}
    r = reports["always_one"]
    assert r.correct_sum <= 1.0 + 3 * r.ci_halfwidth
    _report("C6 correct-sum ceiling (presence-blind rule)", True, f"{r.correct_sum:.4f}")


def test_c6_correct_sum_ceiling_every_builtin_rule():
    """Criterion text: correct_sum <= 1 + 3*CI for every built-in rule.

    Unattainable as stated: the sampling overlap only yields
    p1 >= (1-eps)^n * p0, hence correct_sum = p0 + 1 - p1 is bounded by
    1 + p0 * (1 - (1-eps)^n), not by 1. Any rule that detects the
    contaminant's presence (both threshold built-ins do, deterministically)
    attains ~1 + 0.488 here, so this test fails honestly for those rules.
    """
    reports = _c6_reports(trials=4000)
    ceilings = {r.decision_rule_id: r.correct_sum <= 1.0 + 3 * r.ci_halfwidth for r in reports}
    ok = all(ceilings.values())
    sums = {r.decision_rule_id: round(r.correct_sum, 4) for r in reports}
    _report("C6 correct-sum ceiling for ALL rules (as stated)", ok, str(sums))
    assert ok, (
        f"correct sums {sums}: presence-sensitive rules attain "
        "1 + p0*(1-(1-eps)^n) ~= 1.488, above the stated ceiling"
    )


# -------------------------------------------------------------------------------------
# criterion 7: statistical soundness of the axiom checkers


def test_c7_ci_coverage():
    started = time.perf_counter()
    family = make_mdp_family(2, [0.0, 1.0])
    good, bad = family.sweep(2)
    true_p = 0.7
    mu = TaskDistribution(family.id, (good, bad), (true_p, 1.0 - true_p))
    agent = make_agent("scripted", {"behavior": "always_forward"})
    plan = SamplingPlan(mode="mc", n_tasks=50, n_rollouts=1)
    params = AxiomParams()
    covered = 0
    reps = 500
    for rep in range(reps):
        report = check_g1(mu, agent, AMPLE, params, plan, rep)
        lo, hi = report.ci
        if lo <= true_p <= hi:
            covered += 1
    coverage = covered / reps
    elapsed = time.perf_counter() - started
    ok = coverage >= 1.0 - params.confidence_alpha - 0.03 and elapsed < 120.0
    _report("C7 CI coverage", ok, f"coverage={coverage:.3f}, {elapsed:.1f}s")
    assert coverage >= 1.0 - params.confidence_alpha - 0.03
    assert elapsed < 120.0


def test_c7_deterministic_verdicts_match_direct_evaluation():
    started = time.perf_counter()
    family = make_mdp_family(2, [0.0, 1.0])
    good, bad = family.sweep(2)
    agent = make_agent("scripted", {"behavior": "always_forward"})
    plan = SamplingPlan(n_rollouts=20)
    mismatches = 0
    checks = 0

    # breadth over a weight x threshold x tail grid
    for w in (0.5, 0.8, 0.85, 0.9, 0.95, 1.0 - 1e-9):
        mu = TaskDistribution(family.id, (good, bad), (w, 1.0 - w))
        for delta in (0.05, 0.1, 0.2, 0.5):
            params = AxiomParams(delta_br=delta)
            verdict = check_g1(mu, agent, AMPLE, params, plan, 0).verdict
            direct = "pass" if w >= 1.0 - delta else "fail"
            checks += 1
            mismatches += verdict != direct or verdict == "inconclusive"

    # robustness over a delta_rb grid at exact event mass 0.4
    mu = TaskDistribution(family.id, (good, bad), (0.4, 0.6))
    ops = make_perturbations(family, 1.0)
    for delta_rb in (0.1, 0.3, 0.4, 0.41, 0.8):
        params = AxiomParams(rb_slack=0.1, delta_rb=delta_rb)
        verdict = check_g5(mu, agent, ops, AMPLE, params, plan, 0).verdict
        direct = "pass" if 0.4 <= delta_rb else "fail"
        checks += 1
        mismatches += verdict != direct or verdict == "inconclusive"

    # adaptivity: tabular learner masters deterministic chains
    learner = make_agent("tabular-learner")
    mu = TaskDistribution(family.id, (good,), (1.0,))
    for n_updates, expected in ((0, "fail"), (8, "pass")):
        params = AxiomParams(theta_ad=0.9)
        verdict = check_g2(mu, learner, AdaptationProtocol(n_updates), AMPLE, params, plan, 0).verdict
        checks += 1
        mismatches += verdict != expected

    elapsed = time.perf_counter() - started
    _report("C7 deterministic soundness", mismatches == 0, f"{checks} checks, {mismatches} mismatches")
    assert mismatches == 0
    assert elapsed < 120.0


# -------------------------------------------------------------------------------------
# criterion 8: distance metrics


def test_c8_distances():
    started = time.perf_counter()
    family = make_mdp_family(2, [i / 10 for i in range(11)])
    pool = family.sweep(11)

    def dist(weights, tasks):
        total = sum(weights)
        return TaskDistribution(family.id, tuple(tasks), tuple(w / total for w in weights))

    rng = random.Random(424242)
    # metric axioms on 200 random instances, supports <= 6
    for _ in range(200):
        k = rng.randint(2, 6)
        tasks = pool[:k]
        ids = [t.id for t in tasks]
        gm = euclidean_metric(ids, rng)
        mus = [dist(_random_rational_weights(rng, k, 12), tasks) for _ in range(3)]
        for metric in (tv_distance, lambda a, b: wasserstein(a, b, gm, 1)):
            d01 = metric(mus[0], mus[1])
            d12 = metric(mus[1], mus[2])
            d02 = metric(mus[0], mus[2])
            assert d01 >= -1e-12
            assert metric(mus[1], mus[0]) == pytest.approx(d01, abs=1e-9)
            assert metric(mus[0], mus[0]) == pytest.approx(0.0, abs=1e-9)
            assert d02 <= d01 + d12 + 1e-9

    # exact optimal transport against the brute-force oracle, supports <= 4
    for _ in range(40):
        k = rng.randint(2, 4)
        q = rng.choice([3, 4])
        tasks = pool[:k]
        ids = [t.id for t in tasks]
        gm = euclidean_metric(ids, rng)
        cost = [[gm.distance(a, b) for b in ids] for a in ids]
        wa, wb = _random_rational_weights(rng, k, q), _random_rational_weights(rng, k, q)
        p = rng.choice([1, 2])
        assert wasserstein(dist(wa, tasks), dist(wb, tasks), gm, p) == pytest.approx(
            brute_force_wasserstein(wa, wb, cost, q, p), abs=1e-9
        )

    # the TV-mixture law on 100 random instances
    for _ in range(100):
        k = rng.randint(1, 6)
        tasks = pool[:k]
        mu = dist([rng.random() + 1e-3 for _ in range(k)], tasks)
        bad = rng.choice(pool[: k + 1])
        eta = rng.random()
        mixed = mix_with_dirac(mu, bad, eta)
        expected = eta * (1.0 - mu.weight_of(bad.id))
        assert tv_distance(mu, mixed) == pytest.approx(expected, abs=1e-12)
        assert tv_distance(mu, mixed) <= mixture_tv_bound(eta) + 1e-12

    elapsed = time.perf_counter() - started
    _report("C8 distances", elapsed < 30.0, f"{elapsed:.1f}s")
    assert elapsed < 30.0


# -------------------------------------------------------------------------------------
# criterion 9: weakened axiom variants


def test_c9_weak_variants():
    started = time.perf_counter()
    plan = SamplingPlan(n_rollouts=100)

    # every curated configuration where strict adaptivity passes also passes G2'
    family = make_mdp_family(2, [0.0])
    mu = TaskDistribution(family.id, tuple(family.sweep(1)), (1.0,))
    instruction = make_instruction_family(3, 2)
    memo_mu = TaskDistribution(instruction.id, tuple(instruction.sweep(2)), (0.5, 0.5))
    curated = [
        (mu, make_agent("tabular-learner"), AdaptationProtocol(8), AxiomParams(theta_ad=0.9), family),
        (mu, make_agent("scripted", {"behavior": "always_forward"}), AdaptationProtocol(0), AxiomParams(), family),
        (memo_mu, make_agent("memorizer"), AdaptationProtocol(1), AxiomParams(theta_ad=0.9), instruction),
    ]
    implications = 0
    for mu_i, agent, protocol, params, fam in curated:
        strict = check_g2(mu_i, agent, protocol, AMPLE, params, plan, 0)
        config = BundleConfig(
            params=params,
            plan=plan,
            budget=AMPLE,
            protocol=protocol,
            exposure=PreExposure(n_tasks=10, seed=0),
            perturbations=tuple(make_perturbations(fam, 0.5)),
        )
        weak = [r for r in check_weak_variants(mu_i, agent, config, 0) if r.axiom == "G2'"][0]
        if strict.verdict == "pass":
            implications += 1
            assert weak.verdict == "pass", (agent.kind, strict.verdict, weak.verdict)
    assert implications >= 2  # the curated suite exercises real passes

    # G3' with cap 1 passes universally
    for agent in (
        make_agent("memorizer"),
        make_agent("scripted", {"behavior": "instruction_solver"}),
        make_agent("random"),
    ):
        config = BundleConfig(
            params=AxiomParams(),
            plan=plan,
            budget=AMPLE,
            protocol=AdaptationProtocol(0),
            exposure=PreExposure(n_tasks=25, seed=3),
            perturbations=tuple(make_perturbations(instruction, 0.5)),
            g3_transfer_cap=1.0,
        )
        g3w = [r for r in check_weak_variants(memo_mu, agent, config, 0) if r.axiom == "G3'"][0]
        assert g3w.verdict == "pass", agent.kind

    # G5' passes for the renaming-aware agent under paraphrase-only perturbations
    aware = make_agent("scripted", {"behavior": "instruction_solver", "aware": True})
    config = BundleConfig(
        params=AxiomParams(),
        plan=plan,
        budget=AMPLE,
        protocol=AdaptationProtocol(0),
        exposure=PreExposure(n_tasks=0, seed=0),
        perturbations=tuple(
            op for op in make_perturbations(instruction, 0.5) if op.id == "paraphrase"
        ),
    )
    g5w = [r for r in check_weak_variants(memo_mu, aware, config, 0) if r.axiom == "G5'"][0]
    assert g5w.verdict == "pass"

    elapsed = time.perf_counter() - started
    _report("C9 weak variants", elapsed < 30.0, f"{elapsed:.1f}s")
    assert elapsed < 30.0


# -------------------------------------------------------------------------------------
# criterion 10: byte-identical reproducibility of every experiment kind


def acceptance_corpus():
    mdp = {"kind": "mdp", "chain_length": 2, "slip_grid": [0.0, 0.9, 1.0]}
    two = {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.6, 0.4]}
    forward = {"kind": "scripted", "behavior": "always_forward"}
    plan = {"mode": "exact", "n_rollouts": 60}
    return [
        {"kind": "evaluate", "seed": 5, "family": mdp, "distribution": two, "agent": forward,
         "plan": plan, "tail_delta": 0.3, "failure_theta": 0.5},
        {"kind": "axioms", "seed": 5, "family": mdp, "distribution": two, "agent": forward,
         "plan": plan, "axioms": ["G1", "G4", "G5", "A4"],
         "perturbations": {"noise_level": 1.0, "only": ["slip_increment"]}},
        {"kind": "fragility", "seed": 5, "family": mdp,
         "distribution": {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.9, 0.1]},
         "agent": forward, "plan": plan, "eta": 0.3},
        {"kind": "worst-case", "seed": 5, "family": mdp, "distribution": two, "agent": forward,
         "plan": plan, "eta": 0.5},
        {"kind": "robustness", "seed": 5, "family": mdp,
         "distribution": {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.4, 0.6]},
         "agent": forward, "plan": plan,
         "perturbations": {"noise_level": 1.0, "only": ["slip_increment"]}},
        {"kind": "transfer", "seed": 5, "setup": {"preset": "memorizer", "support": 2, "n": 1}},
        {"kind": "externality", "seed": 5, "family": mdp,
         "distribution": {"goals": [{"slip": 0.0}]}, "agent": forward, "plan": plan,
         "tau_bad": {"slip": 1.0}, "epsilon": 0.2, "n": 3, "trials": 500,
         "rules": ["all_above_threshold", "always_one"]},
        {"kind": "relativity", "seed": 5,
         "family": {"kind": "mdp", "chain_length": 2, "slip_grid": [0.0, 0.9]},
         "agent": forward, "plan": {"mode": "exact", "n_rollouts": 400}},
        {"kind": "drift", "seed": 5, "family": mdp, "distribution": two,
         "distribution_end": {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.2, 0.8]},
         "steps": 3, "inner": "evaluate", "agent": forward, "plan": plan},
    ]


def test_c10_reproducibility():
    started = time.perf_counter()
    for config in acceptance_corpus():
        first = run_experiment(json.loads(json.dumps(config)))
        second = run_experiment(json.loads(json.dumps(config)))
        assert first.numeric_payload() == second.numeric_payload(), config["kind"]
    elapsed = time.perf_counter() - started
    _report("C10 reproducibility", True, f"{elapsed:.1f}s")
