"""Constructive reproductions of the non-invariance results: small-mass
shifts, breadth fragility certificates, prescribed-failure shifts, worst-case
distributions, TV-constrained adversaries, robustness counterexamples, and
relativity witnesses.

Constructions use point estimates to pick witnesses and then re-verify the
final inequality with the axiom checkers' confidence intervals; every
certificate's TV field is recomputed independently with `tv_distance` and
must agree with the mixture arithmetic to 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .axioms import AxiomParams, AxiomReport, FAIL, check_g1
from .core import AgentHandle, Budget
from .distances import tv_distance
from .ecologies import TaskDistribution, TaskFamily, PerturbationOp, dirac, mix_with_dirac, renormalized
from .errors import (
    ConstantPerformanceError,
    EmptyCliffError,
    EmptyFailureSetError,
    EmptySupportError,
    GenlabError,
)
from .functionals import EvalCache, SamplingPlan, failure_set, new_cache, per_task_estimate
from .axioms import degradation_rows


@dataclass(frozen=True)
class ShiftCertificate:
    """A constructed contaminated distribution with its exact TV distance."""

    mu_prime: TaskDistribution
    tv: float
    eta: float
    target_axiom: str
    witness_task: str
    pre_verdict: AxiomReport | None = None
    post_verdict: AxiomReport | None = None
    valid: bool | None = None
    details: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RelativityWitness:
    """A distribution pair under which the same axiom params pass and fail."""

    mu_hold: TaskDistribution
    mu_fail: TaskDistribution
    axiom_params: AxiomParams
    hold_report: AxiomReport
    fail_report: AxiomReport


@dataclass(frozen=True)
class RobustnessCounterexample:
    perturbation_id: str
    event_mass: float
    witnesses: tuple[str, ...]


def _pick_bad(
    rows: list[tuple[str, float]],
) -> str:
    """Minimum-estimate task id, ties broken lexicographically."""
    return min(rows, key=lambda r: (r[1], r[0]))[0]


def small_mass_shift(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    theta: float,
    eta: float,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
    family: TaskFamily | None = None,
    search_cap: int = 256,
) -> ShiftCertificate | None:
    """Build mu' = (1-eta)*mu + eta*dirac(bad task) for some failing task.

    The failure set of mu's support is searched first; when it is clean and a
    family is supplied, a bounded sweep of the family (up to `search_cap`
    candidates) is scanned. Returns None when no failing task is found.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0,1)")
    cache = cache if cache is not None else new_cache()
    report = failure_set(mu, agent, budget, theta, plan, seed, cache)
    bad_task = None
    if report.members:
        ests = [
            (tid, per_task_estimate(mu.task_by_id(tid), agent, budget, plan, seed, cache)[0])
            for tid in report.members
        ]
        bad_task = mu.task_by_id(_pick_bad(ests))
    elif family is not None:
        candidates = family.sweep(search_cap)
        ests = []
        for task in candidates:
            est, _, _ = per_task_estimate(task, agent, budget, plan, seed, cache)
            if est < theta:
                ests.append((task.id, est))
        if ests:
            bad_id = _pick_bad(ests)
            bad_task = next(t for t in candidates if t.id == bad_id)
    if bad_task is None:
        return None
    mu_prime = mix_with_dirac(mu, bad_task, eta)
    return ShiftCertificate(
        mu_prime=mu_prime,
        tv=tv_distance(mu, mu_prime),
        eta=eta,
        target_axiom="G1",
        witness_task=bad_task.id,
        details={"theta": theta, "support_failure_mass": report.mu_mass},
    )


def fragility_demo(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    eta: float,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
    family: TaskFamily | None = None,
) -> ShiftCertificate:
    """Breadth fragility: a TV-eta mixture under which the breadth check fails.

    Requires eta in (delta_br, 1) and a nonempty failure set at theta_br; the
    certificate is valid iff the post-shift breadth verdict is fail,
    regardless of the pre-shift verdict.
    """
    if not params.delta_br < eta < 1.0:
        raise ValueError(f"eta must lie in (delta_br, 1) = ({params.delta_br}, 1)")
    cache = cache if cache is not None else new_cache()
    cert = small_mass_shift(
        mu, agent, budget, params.theta_br, eta, plan, seed, cache, family=family
    )
    if cert is None:
        raise EmptyFailureSetError(
            "failure set at theta_br is empty on the searched slice; the fragility "
            "construction assumes at least one failing task exists"
        )
    pre = check_g1(mu, agent, budget, params, plan, seed, cache)
    post = check_g1(cert.mu_prime, agent, budget, params, plan, seed, cache)
    post_failure = failure_set(cert.mu_prime, agent, budget, params.theta_br, plan, seed, cache)
    details = dict(cert.details)
    details.update(
        {
            "post_failure_mass": post_failure.mu_mass,
            "post_breadth": 1.0 - post_failure.mu_mass,
            "bound_1_minus_eta": 1.0 - eta,
            "bound_1_minus_delta_br": 1.0 - params.delta_br,
        }
    )
    return ShiftCertificate(
        mu_prime=cert.mu_prime,
        tv=cert.tv,
        eta=eta,
        target_axiom="G1",
        witness_task=cert.witness_task,
        pre_verdict=pre,
        post_verdict=post,
        valid=post.verdict == FAIL,
        details=details,
    )


def prescribed_failure_shift(
    mu: TaskDistribution,
    cliff: Sequence[Any],
    epsilon: float,
) -> TaskDistribution:
    """mu' = (1 - eps/2) * mu + (eps/2) * uniform(cliff).

    Moves at most eps/2 in total variation while raising the cliff mass to at
    least mu(cliff) * (1 - eps/2) + eps/2. Cliff entries may be Task objects
    or task ids resolved against mu's support.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")
    tasks = []
    for entry in cliff:
        if isinstance(entry, str):
            tasks.append(mu.task_by_id(entry))
        else:
            tasks.append(entry)
    if not tasks:
        raise EmptyCliffError("cliff set must be nonempty")
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError("cliff tasks must be distinct by id")
    half = epsilon / 2.0
    nu_weight = half / len(tasks)
    support = list(mu.support)
    weights = [(1.0 - half) * w for w in mu.weights]
    index = {t.id: i for i, t in enumerate(support)}
    for task in tasks:
        if task.id in index:
            weights[index[task.id]] += nu_weight
        else:
            index[task.id] = len(support)
            support.append(task)
            weights.append(nu_weight)
    return TaskDistribution(mu.family_id, tuple(support), renormalized(weights))


def worst_case_distribution(
    support: Sequence,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
    family_id: str = "adhoc",
) -> tuple[TaskDistribution, float]:
    """The Dirac at the minimum-estimate task; the infimum over the simplex.

    The expected-performance functional is linear in the weights, so its
    infimum over all distributions on a finite support sits at an extreme
    point. Ties break lexicographically by task id.
    """
    if not support:
        raise EmptySupportError("worst-case search needs a nonempty support")
    cache = cache if cache is not None else new_cache()
    ests = [
        (task, per_task_estimate(task, agent, budget, plan, seed, cache)[0]) for task in support
    ]
    worst_task, value = min(ests, key=lambda r: (r[1], r[0].id))
    return dirac(family_id, worst_task), value


def tv_constrained_adversary(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    eta: float,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> TaskDistribution:
    """Minimize expected performance subject to a TV-eta ball around mu.

    Exact greedy optimum on finite supports: move up to eta total mass from
    the best-performing atoms onto the single worst atom.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0,1]")
    cache = cache if cache is not None else new_cache()
    ests = {
        task.id: per_task_estimate(task, agent, budget, plan, seed, cache)[0]
        for task in mu.support
    }
    ids = [t.id for t in mu.support]
    worst = min(ids, key=lambda i: (ests[i], i))
    weights = {i: w for i, w in zip(ids, mu.weights)}
    movable = sorted((i for i in ids if i != worst), key=lambda i: (-ests[i], i))
    remaining = eta
    for i in movable:
        if remaining <= 0:
            break
        moved = min(remaining, weights[i])
        weights[i] -= moved
        weights[worst] += moved
        remaining -= moved
    return TaskDistribution(
        mu.family_id, mu.support, renormalized([weights[i] for i in ids])
    )


def robustness_counterexample(
    mu: TaskDistribution,
    agent: AgentHandle,
    perturbations: Sequence[PerturbationOp],
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> RobustnessCounterexample | None:
    """First perturbation with confidently positive degradation-event mass.

    The event is a per-task drop exceeding rb_slack; detection requires the
    lower confidence bound of the event mass to be positive at the plan's
    power. Returns None when no perturbation is detected.
    """
    for op in perturbations:
        if not op.closed:
            raise GenlabError(f"perturbation {op.id!r} is not closed in the family")
    cache = cache if cache is not None else new_cache()
    for op in perturbations:
        row = degradation_rows(mu, agent, op, budget, params, plan, seed, cache)
        if row["lower"] > 0.0:
            return RobustnessCounterexample(
                perturbation_id=op.id,
                event_mass=row["event_mass"],
                witnesses=row["witnesses"],
            )
    return None


def relativity_witness(
    family: TaskFamily,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
    search_cap: int = 64,
) -> RelativityWitness:
    """A Dirac pair straddling theta_br: breadth passes on one, fails on the other.

    Requires the agent's performance to be non-constant across the searched
    family slice (confidently above theta_br somewhere, confidently below it
    somewhere else); otherwise a ConstantPerformanceError explains which side
    is missing.
    """
    cache = cache if cache is not None else new_cache()
    candidates = family.sweep(search_cap)
    good, bad = None, None
    good_est, bad_est = -1.0, 2.0
    for task in candidates:
        est, hw, _ = per_task_estimate(task, agent, budget, plan, seed, cache)
        if est - hw > params.theta_br and est > good_est:
            good, good_est = task, est
        if est + hw < params.theta_br and est < bad_est:
            bad, bad_est = task, est
    if good is None or bad is None:
        missing = "above" if good is None else "below"
        raise ConstantPerformanceError(
            f"no task confidently {missing} theta_br={params.theta_br} in the searched "
            f"slice of {family.id}; the construction needs non-constant performance "
            "straddling the threshold"
        )
    mu_hold = dirac(family.id, good)
    mu_fail = dirac(family.id, bad)
    hold_report = check_g1(mu_hold, agent, budget, params, plan, seed, cache)
    fail_report = check_g1(mu_fail, agent, budget, params, plan, seed, cache)
    return RelativityWitness(
        mu_hold=mu_hold,
        mu_fail=mu_fail,
        axiom_params=params,
        hold_report=hold_report,
        fail_report=fail_report,
    )
