"""Distributional performance functionals over finite-support task measures.

Per-task performance estimates are cached per (task, agent-snapshot, budget,
rollouts, seed) key and shared across every functional within an experiment,
so derived quantities (failure mass, tail quantiles, breadth probabilities)
are exactly consistent with each other.

Deterministic task/agent pairs are detected and evaluated with a single
rollout and a zero confidence radius; that is what lets axiom verdicts on
curated deterministic configurations coincide exactly with direct evaluation
of the underlying inequality.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from .core import (
    AMPLE,
    AgentHandle,
    Budget,
    Task,
    evaluate_performance,
    hoeffding_halfwidth,
    run_episode,
    task_deterministic,
)
from .ecologies import TaskDistribution
from .errors import EmptySupportError, SupportTooLargeError
from .seeding import derive_seed, make_rng

_parallelism = max(1, int(os.environ.get("GENLAB_PARALLELISM", "1")))


def set_parallelism(n: int) -> None:
    """Worker count for per-task evaluation; results are order-independent."""
    global _parallelism
    _parallelism = max(1, int(n))


def get_parallelism() -> int:
    return _parallelism


@dataclass(frozen=True)
class SamplingPlan:
    """How functionals turn a distribution into numbers.

    exact mode enumerates the whole support with its weights (hard-capped);
    mc mode samples `n_tasks` tasks i.i.d. In both, each task is estimated
    from `n_rollouts` seeded episodes unless the (task, agent) pair is
    deterministic, in which case one rollout suffices and the radius is 0.
    """

    mode: str = "exact"
    n_tasks: int | None = None
    n_rollouts: int = 100
    alpha: float = 0.05
    exact_support_cap: int = 64

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "mc"):
            raise ValueError("plan mode must be 'exact' or 'mc'")
        if self.mode == "mc" and (self.n_tasks is None or self.n_tasks < 1):
            raise ValueError("mc mode requires n_tasks >= 1")
        if self.n_rollouts < 1:
            raise ValueError("n_rollouts must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")


EvalCache = dict


def new_cache() -> EvalCache:
    return {}


@dataclass(frozen=True)
class GeneralityEstimate:
    mean: float
    half_width: float
    n_tasks_sampled: int
    per_task: Mapping[str, tuple[float, int]]  # task id -> (estimate, rollouts)


@dataclass(frozen=True)
class FailureSetReport:
    theta: float
    members: tuple[str, ...]
    mu_mass: float


def per_task_estimate(
    task: Task,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> tuple[float, float, int]:
    """(estimate, half_width, rollouts) for one task, cached."""
    deterministic = agent.deterministic and task_deterministic(task)
    n = 1 if deterministic else plan.n_rollouts
    key = ("pi", task.id, agent.id, budget.as_tuple(), n, plan.alpha, seed)
    if cache is not None and key in cache:
        return cache[key]
    est, hw = evaluate_performance(
        task, agent, budget, n, derive_seed(seed, "task", task.id), plan.alpha
    )
    if deterministic:
        hw = 0.0
    result = (est, hw, n)
    if cache is not None:
        cache[key] = result
    return result


def per_task_event_freq(
    task: Task,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    event: str,
    threshold: float,
    cache: EvalCache | None = None,
) -> tuple[float, float, int]:
    """Per-episode event frequency for one task.

    event 'success' counts episodes with score >= threshold; event 'violation'
    counts episodes whose constraint indicator fired. Same caching and
    determinism shortcut as `per_task_estimate`.
    """
    deterministic = agent.deterministic and task_deterministic(task)
    n = 1 if deterministic else plan.n_rollouts
    key = ("ev", event, threshold, task.id, agent.id, budget.as_tuple(), n, plan.alpha, seed)
    if cache is not None and key in cache:
        return cache[key]
    base = derive_seed(seed, "task", task.id)
    hits = 0
    for i in range(n):
        outcome = run_episode(task, agent, budget, derive_seed(base, "rollout", i))
        if event == "success":
            hits += 1 if outcome.score >= threshold else 0
        elif event == "violation":
            hits += 1 if outcome.violated else 0
        elif event == "success_clean":
            hits += 1 if (outcome.score >= threshold and not outcome.violated) else 0
        else:
            raise ValueError(f"unknown event kind: {event}")
    freq = hits / n
    hw = 0.0 if deterministic else hoeffding_halfwidth(n, plan.alpha)
    result = (freq, hw, n)
    if cache is not None:
        cache[key] = result
    return result


def _estimate_many(
    tasks: list[Task],
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None,
) -> list[tuple[float, float, int]]:
    if _parallelism > 1 and len(tasks) > 1 and not agent.external:
        with concurrent.futures.ThreadPoolExecutor(max_workers=_parallelism) as pool:
            return list(
                pool.map(lambda t: per_task_estimate(t, agent, budget, plan, seed, cache), tasks)
            )
    return [per_task_estimate(t, agent, budget, plan, seed, cache) for t in tasks]


def _mc_sample(mu: TaskDistribution, plan: SamplingPlan, seed: int) -> list[Task]:
    rng = make_rng(seed, "task-sample")
    return [mu.sample(rng) for _ in range(plan.n_tasks or 0)]


def estimate_generality(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> GeneralityEstimate:
    """Expected performance over tasks drawn from mu.

    Exact mode returns the weight-exact sum of per-task estimates (noise only
    from rollouts); mc mode returns a sample mean with a Hoeffding radius for
    the task sampling added to the mean per-task rollout radius.
    """
    if not mu.support:
        raise EmptySupportError("empty support")
    if plan.mode == "exact":
        if len(mu.support) > plan.exact_support_cap:
            raise SupportTooLargeError(
                f"support {len(mu.support)} exceeds exact cap {plan.exact_support_cap}; use mc mode"
            )
        stats = _estimate_many(list(mu.support), agent, budget, plan, seed, cache)
        mean = sum(w * s[0] for w, s in zip(mu.weights, stats))
        hw = sum(w * s[1] for w, s in zip(mu.weights, stats))
        per_task = {t.id: (s[0], s[2]) for t, s in zip(mu.support, stats)}
        return GeneralityEstimate(mean, hw, len(mu.support), per_task)
    sampled = _mc_sample(mu, plan, seed)
    stats = _estimate_many(sampled, agent, budget, plan, seed, cache)
    n = len(sampled)
    mean = sum(s[0] for s in stats) / n
    hw = hoeffding_halfwidth(n, plan.alpha) + sum(s[1] for s in stats) / n
    per_task = {t.id: (s[0], s[2]) for t, s in zip(sampled, stats)}
    return GeneralityEstimate(mean, hw, n, per_task)


def _support_items(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None,
) -> list[tuple[Task, float, float, float]]:
    """(task, weight, estimate, half_width) rows, exact or MC-uniform."""
    if plan.mode == "exact":
        if len(mu.support) > plan.exact_support_cap:
            raise SupportTooLargeError(
                f"support {len(mu.support)} exceeds exact cap {plan.exact_support_cap}; use mc mode"
            )
        tasks = list(mu.support)
        weights = list(mu.weights)
    else:
        tasks = _mc_sample(mu, plan, seed)
        weights = [1.0 / len(tasks)] * len(tasks)
    stats = _estimate_many(tasks, agent, budget, plan, seed, cache)
    return [(t, w, s[0], s[1]) for t, w, s in zip(tasks, weights, stats)]


def estimate_tail_generality(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    delta: float,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> float:
    """sup{theta : P(performance >= theta) >= 1 - delta} on the finite support.

    Computed as the largest per-task estimate whose at-or-above weight mass
    reaches 1 - delta; ties resolve toward the larger threshold (the sup
    convention).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0,1)")
    rows = _support_items(mu, agent, budget, plan, seed, cache)
    by_est = sorted(rows, key=lambda r: -r[2])
    need = 1.0 - delta
    acc = 0.0
    result = by_est[-1][2]
    for _, w, est, _ in by_est:
        acc += w
        if acc >= need - 1e-12:
            result = est
            break
    return result


def failure_set(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    theta: float,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> FailureSetReport:
    """Tasks whose point estimate falls strictly below theta, with their mass."""
    rows = _support_items(mu, agent, budget, plan, seed, cache)
    members = tuple(sorted(t.id for t, _, est, _ in rows if est < theta))
    mass = sum(w for _, w, est, _ in rows if est < theta)
    return FailureSetReport(theta=theta, members=members, mu_mass=mass)


def regret(
    task: Task,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> float:
    """Oracle performance under an ample budget minus the agent's, in [0,1]."""
    from .agents import make_agent

    oracle = make_agent("oracle", {"task": task})
    best, _, _ = per_task_estimate(task, oracle, AMPLE, plan, seed, cache)
    got, _, _ = per_task_estimate(task, agent, budget, plan, seed, cache)
    return min(1.0, max(0.0, best - got))
