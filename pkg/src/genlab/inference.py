"""Exact-enumeration verification of the information-theoretic transfer
bounds and the two-point externality experiment.

The enumeration side works over abstract setups: a handful of task atoms, a
deterministic update rule mapping pre-exposure multisets to agent variants,
and a score table per (variant, task). Everything is small enough
(support <= 5, n <= 4) that the joint law of (dataset, adapted agent) is
enumerated exactly; no estimators are involved, and mutual information is in
nats so the sqrt(2 I / n) bound needs no unit conversion.

The externality side simulates finite evaluations against a benign
distribution and its small contamination, feeding decision rules exactly the
observable record (sampled tasks plus transcripts), never the distribution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .axioms import AxiomParams, FAIL, PASS, check_g1
from .core import AgentHandle, Budget, hoeffding_halfwidth
from .ecologies import Task, TaskDistribution, mix_with_dirac
from .errors import EnumerationLimitError, TwoPointSetupError
from .functionals import EvalCache, SamplingPlan, new_cache, per_task_estimate
from .seeding import derive_seed, make_rng

MAX_SUPPORT = 5
MAX_N = 4


@dataclass(frozen=True)
class EnumerationSetup:
    """Abstract pre-exposure model small enough for full joint enumeration.

    `update_rule` maps the sorted multiset of drawn task ids to an agent
    variant id; `per_variant_scores` maps (variant id, task id) to the
    variant's performance on that task.
    """

    tasks: tuple[str, ...]
    n: int
    update_rule: Callable[[tuple[str, ...]], str]
    per_variant_scores: Mapping[tuple[str, str], float]

    def __post_init__(self) -> None:
        if not 1 <= len(self.tasks) <= MAX_SUPPORT:
            raise EnumerationLimitError(f"support size must be 1..{MAX_SUPPORT}")
        if not 1 <= self.n <= MAX_N:
            raise EnumerationLimitError(f"n must be 1..{MAX_N}")
        if len(set(self.tasks)) != len(self.tasks):
            raise ValueError("task ids must be distinct")
        for key, value in self.per_variant_scores.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score out of [0,1] for {key}: {value}")

    @property
    def support_size(self) -> int:
        return len(self.tasks)

    def score(self, variant: str, task: str) -> float:
        try:
            return float(self.per_variant_scores[(variant, task)])
        except KeyError:
            raise KeyError(f"per_variant_scores missing entry for ({variant!r}, {task!r})") from None


@dataclass(frozen=True)
class TransferBoundReport:
    n: int
    mi_exact: float
    gap: float  # expected population mean minus expected empirical mean
    bound: float
    satisfied: bool
    population_mean: float = 0.0
    empirical_mean: float = 0.0


@dataclass(frozen=True)
class LemmaBoundReport:
    correlated: bool
    mi_exact: float
    gap: float
    bound: float
    satisfied: bool


@dataclass(frozen=True)
class ExternalityReport:
    epsilon: float
    n: int
    decision_rule_id: str
    p0_declare: float
    p1_declare: float
    overlap_bound: float
    correct_sum: float
    trials: int
    ci_halfwidth: float
    absence_freq: float


def _weights_for(setup: EnumerationSetup, mu: Any) -> list[float]:
    if isinstance(mu, TaskDistribution):
        table = mu.as_mapping()
    elif isinstance(mu, Mapping):
        table = dict(mu)
    else:
        raise TypeError("mu must be a TaskDistribution or a task-id -> weight mapping")
    unknown = [k for k, w in table.items() if w > 0 and k not in setup.tasks]
    if unknown:
        raise ValueError(f"mu puts mass on tasks outside the setup: {unknown}")
    weights = [float(table.get(t, 0.0)) for t in setup.tasks]
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("mu must be a probability vector over the setup tasks")
    return weights


def _datasets(setup: EnumerationSetup, weights: Sequence[float]):
    """Yields (ordered dataset tuple, probability) under mu^(n)."""
    for combo in itertools.product(range(len(setup.tasks)), repeat=setup.n):
        p = 1.0
        for i in combo:
            p *= weights[i]
        if p > 0.0:
            yield tuple(setup.tasks[i] for i in combo), p


def exact_mutual_information(setup: EnumerationSetup, mu: Any) -> float:
    """I(adapted agent; dataset) in nats by full joint enumeration.

    The joint law of (D, A_D) is induced by n i.i.d. draws from mu and the
    deterministic update rule; the general sum over the joint table reduces
    to the entropy of the variant marginal but is computed from the table.
    """
    weights = _weights_for(setup, mu)
    joint: dict[tuple[tuple[str, ...], str], float] = {}
    p_variant: dict[str, float] = {}
    for dataset, p in _datasets(setup, weights):
        variant = setup.update_rule(tuple(sorted(dataset)))
        joint[(dataset, variant)] = joint.get((dataset, variant), 0.0) + p
        p_variant[variant] = p_variant.get(variant, 0.0) + p
    p_dataset: dict[tuple[str, ...], float] = {}
    for (dataset, _), p in joint.items():
        p_dataset[dataset] = p_dataset.get(dataset, 0.0) + p
    mi = 0.0
    for (dataset, variant), p in joint.items():
        mi += p * math.log(p / (p_dataset[dataset] * p_variant[variant]))
    return max(0.0, mi)


def transfer_bound_check(setup: EnumerationSetup, mu: Any) -> TransferBoundReport:
    """Exact check of |E[population - empirical]| <= sqrt(2 I / n)."""
    weights = _weights_for(setup, mu)
    population = 0.0
    empirical = 0.0
    for dataset, p in _datasets(setup, weights):
        variant = setup.update_rule(tuple(sorted(dataset)))
        pop = sum(w * setup.score(variant, t) for w, t in zip(weights, setup.tasks))
        emp = sum(setup.score(variant, t) for t in dataset) / setup.n
        population += p * pop
        empirical += p * emp
    mi = exact_mutual_information(setup, mu)
    gap = population - empirical
    bound = math.sqrt(2.0 * mi / setup.n)
    return TransferBoundReport(
        n=setup.n,
        mi_exact=mi,
        gap=gap,
        bound=bound,
        satisfied=abs(gap) <= bound + 1e-12,
        population_mean=population,
        empirical_mean=empirical,
    )


def lemma_c2_check(setup: EnumerationSetup, mu: Any, correlated: bool = False) -> LemmaBoundReport:
    """Pinsker-style bound |coupled mean - decoupled mean| <= sqrt(2 I(target; D)).

    In the i.i.d. case the scored target task is independent of the
    pre-exposure dataset, so both the mutual information and the gap vanish
    identically; the correlated variant scores the first drawn task, making
    the target a deterministic function of the dataset.
    """
    weights = _weights_for(setup, mu)
    joint: dict[tuple[str, tuple[str, ...]], float] = {}
    for dataset, p in _datasets(setup, weights):
        if correlated:
            joint[(dataset[0], dataset)] = joint.get((dataset[0], dataset), 0.0) + p
        else:
            for w, t in zip(weights, setup.tasks):
                if w > 0:
                    joint[(t, dataset)] = joint.get((t, dataset), 0.0) + p * w
    p_target: dict[str, float] = {}
    p_dataset: dict[tuple[str, ...], float] = {}
    for (t, d), p in joint.items():
        p_target[t] = p_target.get(t, 0.0) + p
        p_dataset[d] = p_dataset.get(d, 0.0) + p
    mi = 0.0
    coupled = 0.0
    for (t, d), p in joint.items():
        mi += p * math.log(p / (p_target[t] * p_dataset[d]))
        coupled += p * setup.score(setup.update_rule(tuple(sorted(d))), t)
    mi = max(0.0, mi)
    decoupled = 0.0
    for d, p in p_dataset.items():
        variant = setup.update_rule(tuple(sorted(d)))
        decoupled += p * sum(w * setup.score(variant, t) for w, t in zip(weights, setup.tasks))
    gap = coupled - decoupled
    bound = math.sqrt(2.0 * mi)
    return LemmaBoundReport(
        correlated=correlated,
        mi_exact=mi,
        gap=gap,
        bound=bound,
        satisfied=abs(gap) <= bound + 1e-12,
    )


# ---------------------------------------------------------------------------
# externality experiment (two-point non-identifiability)

DecisionRule = Callable[[Sequence[Mapping[str, Any]], AxiomParams], int]


def _rule_all_above_threshold(z: Sequence[Mapping[str, Any]], params: AxiomParams) -> int:
    return 1 if all(entry["estimate"] >= params.theta_br for entry in z) else 0


def _rule_mean_above(z: Sequence[Mapping[str, Any]], params: AxiomParams) -> int:
    mean = sum(entry["estimate"] for entry in z) / len(z)
    return 1 if mean >= 1.0 - params.delta_br else 0


def _rule_always_one(z: Sequence[Mapping[str, Any]], params: AxiomParams) -> int:
    return 1


BUILTIN_RULES: dict[str, DecisionRule] = {
    "all_above_threshold": _rule_all_above_threshold,
    "mean_above": _rule_mean_above,
    "always_one": _rule_always_one,
}


def externality_experiment(
    mu0: TaskDistribution,
    tau_bad: Task,
    epsilon: float,
    n: int,
    rules: Sequence[str | tuple[str, DecisionRule]],
    trials: int,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> list[ExternalityReport]:
    """Simulate finite evaluations under a benign mu0 and its contamination
    mu1 = (1-eps)*mu0 + eps*dirac(tau_bad), and score decision rules on both.

    Validates the two-point setup first: tau_bad carries no mu0 weight, the
    breadth check passes under mu0 and fails under mu1 at the supplied
    params. Each trial draws n tasks i.i.d. and hands every rule the same
    observable record Z_n (task ids, per-task estimates, rollout counts).
    """
    if not params.delta_br < epsilon < 1.0:
        raise ValueError("epsilon must lie in (delta_br, 1)")
    if mu0.weight_of(tau_bad.id) != 0.0:
        raise TwoPointSetupError("mu0 must give tau_bad zero weight")
    cache = cache if cache is not None else new_cache()
    g1_benign = check_g1(mu0, agent, budget, params, plan, seed, cache)
    if g1_benign.verdict != PASS:
        raise TwoPointSetupError(
            f"breadth must pass under mu0; got {g1_benign.verdict} (estimate {g1_benign.estimate:.4f})"
        )
    mu1 = mix_with_dirac(mu0, tau_bad, epsilon)
    g1_contaminated = check_g1(mu1, agent, budget, params, plan, seed, cache)
    if g1_contaminated.verdict != FAIL:
        raise TwoPointSetupError(
            f"breadth must fail under mu1; got {g1_contaminated.verdict} "
            f"(estimate {g1_contaminated.estimate:.4f})"
        )

    transcripts: dict[str, Mapping[str, Any]] = {}
    for task in list(mu1.support):
        est, _, rolls = per_task_estimate(task, agent, budget, plan, seed, cache)
        transcripts[task.id] = {"task_id": task.id, "estimate": est, "rollouts": rolls}

    resolved: list[tuple[str, DecisionRule]] = []
    for rule in rules:
        if isinstance(rule, str):
            if rule not in BUILTIN_RULES:
                raise ValueError(f"unknown decision rule {rule!r}; built-ins: {sorted(BUILTIN_RULES)}")
            resolved.append((rule, BUILTIN_RULES[rule]))
        else:
            resolved.append(rule)

    declares = {rid: {"mu0": 0, "mu1": 0} for rid, _ in resolved}
    absent = 0
    for label, mu in (("mu0", mu0), ("mu1", mu1)):
        for trial in range(trials):
            rng = make_rng(seed, "externality", label, trial)
            sampled = [mu.sample(rng) for _ in range(n)]
            z = [transcripts[t.id] for t in sampled]
            if label == "mu1" and all(t.id != tau_bad.id for t in sampled):
                absent += 1
            for rid, fn in resolved:
                declares[rid][label] += int(fn(z, params))

    ci = hoeffding_halfwidth(trials, params.confidence_alpha)
    overlap = (1.0 - epsilon) ** n
    absence_freq = absent / trials
    reports = []
    for rid, _ in resolved:
        p0 = declares[rid]["mu0"] / trials
        p1 = declares[rid]["mu1"] / trials
        reports.append(
            ExternalityReport(
                epsilon=epsilon,
                n=n,
                decision_rule_id=rid,
                p0_declare=p0,
                p1_declare=p1,
                overlap_bound=overlap,
                correct_sum=p0 + (1.0 - p1),
                trials=trials,
                ci_halfwidth=ci,
                absence_freq=absence_freq,
            )
        )
    return reports
