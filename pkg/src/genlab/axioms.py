"""Statistical decision procedures for the axiom bundle.

Each checker estimates the quantity its axiom constrains, wraps it in a
conservative (Hoeffding-backed) confidence interval, and returns a
three-valued verdict: pass when the favorable CI endpoint already clears the
inequality, fail when the unfavorable endpoint already violates it, and
inconclusive otherwise. On deterministic configurations evaluated exactly,
the interval collapses to a point and the verdict coincides with direct
evaluation of the inequality.

The bundle:
  G1 breadth, G2 adaptivity, G3 transfer, G4 compositionality, G5 robustness,
  A1 autonomy (goal compilation), A2 tool advantage, A3 calibration,
  A4 constraint adherence; plus the weak variants G2', G3', G5'.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from .agents import AdaptationProtocol, PreExposure, adapt_within_task, make_agent, pre_expose
from .core import AgentHandle, Budget, hoeffding_halfwidth, task_context
from .ecologies import (
    GoalDistribution,
    PerturbationOp,
    TaskDistribution,
    TaskFamily,
    compile_goal,
    compose,
    grown_budget,
    renormalized,
)
from .errors import (
    GenlabError,
    MissingBundleInputError,
    MissingConfidenceError,
    NoViolationPredicateError,
)
from .functionals import (
    EvalCache,
    SamplingPlan,
    estimate_generality,
    new_cache,
    per_task_estimate,
    per_task_event_freq,
)
from .seeding import derive_seed, make_rng

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

AXIOM_ORDER = ("G1", "G2", "G3", "G4", "G5", "A1", "A2", "A3", "A4")
WEAK_VARIANTS = ("G2'", "G3'", "G5'")


@dataclass(frozen=True)
class AxiomParams:
    """Explicit constants parameterizing the axiom bundle.

    thresholds theta_*, tail allowances delta_*, the robustness slack,
    calibration tolerance, constraint tolerance, and the CI level used by
    every decision. All values are echoed into every report.
    """

    theta_br: float = 0.5
    theta_ad: float = 0.5
    theta_tr: float = 0.05
    theta_cp: float = 0.5
    theta_rb: float = 0.5
    delta_br: float = 0.1
    delta_ad: float = 0.1
    delta_tr: float = 0.1
    delta_cp: float = 0.1
    delta_rb: float = 0.1
    rb_slack: float = 0.1
    cal_tol: float = 0.1
    constraint_tol: float = 0.05
    confidence_alpha: float = 0.05

    def __post_init__(self) -> None:
        for name in ("delta_br", "delta_ad", "delta_tr", "delta_cp", "delta_rb", "constraint_tol", "confidence_alpha"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0,1)")
        for name in ("theta_br", "theta_ad", "theta_tr", "theta_cp", "theta_rb"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0,1]")
        for name in ("rb_slack", "cal_tol"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class AxiomReport:
    """Verdict plus the evidence it rests on.

    pass implies the lower CI endpoint clears the axiom inequality; fail
    implies the upper endpoint violates it; anything else is inconclusive.
    """

    axiom: str
    verdict: str
    estimate: float
    ci: tuple[float, float]
    witnesses: tuple[str, ...]
    samples_used: int
    params: AxiomParams
    details: Mapping[str, Any] = field(default_factory=dict)


def _decide_ge(lower: float, upper: float, target: float) -> str:
    if lower >= target:
        return PASS
    if upper < target:
        return FAIL
    return INCONCLUSIVE


def _decide_le(lower: float, upper: float, target: float) -> str:
    if upper <= target:
        return PASS
    if lower > target:
        return FAIL
    return INCONCLUSIVE


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


# ---------------------------------------------------------------------------
# shared breadth machinery (G1, G2, A1 all decide a tail probability)


def _breadth_from_rows(
    axiom: str,
    rows: Sequence[tuple[str, float, float, float]],  # (task id, weight, est, hw)
    theta: float,
    delta: float,
    params: AxiomParams,
    plan: SamplingPlan,
    extra: Mapping[str, Any] | None = None,
) -> AxiomReport:
    point = sum(w for _, w, est, _ in rows if est >= theta)
    certain_ge = sum(w for _, w, est, hw in rows if est - hw >= theta)
    certain_lt = sum(w for _, w, est, hw in rows if est + hw < theta)
    lower, upper = certain_ge, 1.0 - certain_lt
    if plan.mode == "mc":
        radius = hoeffding_halfwidth(len(rows), params.confidence_alpha)
        lower, upper = _clamp01(lower - radius), _clamp01(upper + radius)
    verdict = _decide_ge(lower, upper, 1.0 - delta)
    witnesses = tuple(sorted(tid for tid, _, est, _ in rows if est < theta))
    rollouts = plan.n_rollouts * len(rows)
    details = {"theta": theta, "delta": delta, "mode": plan.mode}
    if extra:
        details.update(extra)
    return AxiomReport(
        axiom=axiom,
        verdict=verdict,
        estimate=point,
        ci=(lower, upper),
        witnesses=witnesses,
        samples_used=rollouts,
        params=params,
        details=details,
    )


def _mu_rows(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None,
) -> list[tuple[str, float, float, float]]:
    from .functionals import _support_items

    return [(t.id, w, est, hw) for t, w, est, hw in _support_items(mu, agent, budget, plan, seed, cache)]


# ---------------------------------------------------------------------------
# core axioms


def check_g1(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Breadth: P(performance >= theta_br) >= 1 - delta_br under mu."""
    rows = _mu_rows(mu, agent, budget, plan, seed, cache)
    return _breadth_from_rows("G1", rows, params.theta_br, params.delta_br, params, plan)


def check_g2(
    mu: TaskDistribution,
    agent: AgentHandle,
    protocol: AdaptationProtocol,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Adaptivity: breadth of the agent after N_ad within-task updates."""
    from .functionals import _support_items

    rows = []
    base_rows = _support_items(mu, agent, budget, plan, seed, cache)
    for task, w, _, _ in base_rows:
        adapted = adapt_within_task(agent, task, protocol, budget, derive_seed(seed, "g2", task.id))
        est, hw, _ = per_task_estimate(task, adapted, budget, plan, seed, cache)
        rows.append((task.id, w, est, hw))
    return _breadth_from_rows(
        "G2", rows, params.theta_ad, params.delta_ad, params, plan,
        extra={"n_updates": protocol.within_task_updates},
    )


def _mean_difference_report(
    axiom: str,
    better: tuple[float, float],
    baseline: tuple[float, float],
    target: float,
    params: AxiomParams,
    plan: SamplingPlan,
    n_samples: int,
    extra: Mapping[str, Any] | None = None,
    one_sided_upper_cap: float | None = None,
) -> AxiomReport:
    diff = better[0] - baseline[0]
    radius = better[1] + baseline[1]
    lower, upper = diff - radius, diff + radius
    if one_sided_upper_cap is not None:
        upper = min(upper, one_sided_upper_cap)
    verdict = _decide_ge(lower, upper, target)
    details = {"difference": diff, "radius": radius, "target": target}
    if extra:
        details.update(extra)
    return AxiomReport(
        axiom=axiom,
        verdict=verdict,
        estimate=diff,
        ci=(lower, upper),
        witnesses=(),
        samples_used=n_samples,
        params=params,
        details=details,
    )


def check_g3(
    mu: TaskDistribution,
    agent_scratch: AgentHandle,
    exposure: PreExposure,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Transfer: pre-exposed mean beats the scratch mean by theta_tr."""
    pre = pre_expose(agent_scratch, mu, exposure, budget)
    g_pre = estimate_generality(mu, pre, budget, plan, seed, cache)
    g_scr = estimate_generality(mu, agent_scratch, budget, plan, seed, cache)
    report = _mean_difference_report(
        "G3",
        (g_pre.mean, g_pre.half_width),
        (g_scr.mean, g_scr.half_width),
        params.theta_tr,
        params,
        plan,
        n_samples=plan.n_rollouts * (g_pre.n_tasks_sampled + g_scr.n_tasks_sampled),
        extra={
            "pre_mean": g_pre.mean,
            "scratch_mean": g_scr.mean,
            "n_exposure": exposure.n_tasks,
            "external_caveat": agent_scratch.external,
        },
    )
    return report


def check_g4(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    n_pairs: int,
    seed: int,
    plan: SamplingPlan | None = None,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Compositionality: among pairs where both parts clear theta_cp, the
    composition under the grown budget clears it too, except on mass delta_cp.

    The implication is counted as satisfied whenever its antecedent fails.
    Exact plans enumerate all weighted support pairs; mc plans sample
    `n_pairs` pairs i.i.d. from mu x mu.
    """
    plan = plan or SamplingPlan()
    big = grown_budget(budget)
    if plan.mode == "exact":
        pairs = [
            (t1, t2, w1 * w2)
            for t1, w1 in zip(mu.support, mu.weights)
            for t2, w2 in zip(mu.support, mu.weights)
        ]
    else:
        rng = make_rng(seed, "g4-pairs")
        pairs = [(mu.sample(rng), mu.sample(rng), 1.0 / n_pairs) for _ in range(n_pairs)]
    event_mass = 0.0
    antecedent_mass = 0.0
    witnesses = []
    for t1, t2, w in pairs:
        est1, _, _ = per_task_estimate(t1, agent, budget, plan, seed, cache)
        est2, _, _ = per_task_estimate(t2, agent, budget, plan, seed, cache)
        if est1 >= params.theta_cp and est2 >= params.theta_cp:
            antecedent_mass += w
            composed = compose(t1, t2)
            est_c, _, _ = per_task_estimate(composed, agent, big, plan, seed, cache)
            if est_c < params.theta_cp:
                event_mass += w
                witnesses.append(composed.id)
    radius = 0.0 if plan.mode == "exact" else hoeffding_halfwidth(len(pairs), params.confidence_alpha)
    lower, upper = _clamp01(event_mass - radius), _clamp01(event_mass + radius)
    verdict = _decide_le(lower, upper, params.delta_cp)
    return AxiomReport(
        axiom="G4",
        verdict=verdict,
        estimate=event_mass,
        ci=(lower, upper),
        witnesses=tuple(sorted(witnesses)),
        samples_used=len(pairs),
        params=params,
        details={"antecedent_mass": antecedent_mass, "n_pairs": len(pairs), "mode": plan.mode},
    )


def degradation_rows(
    mu: TaskDistribution,
    agent: AgentHandle,
    op: PerturbationOp,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None,
) -> dict[str, Any]:
    """Per-perturbation degradation-event masses with CI bookkeeping."""
    point = 0.0
    lower = 0.0
    certain_no = 0.0
    witnesses = []
    for task, w in zip(mu.support, mu.weights):
        base, hw_b, _ = per_task_estimate(task, agent, budget, plan, seed, cache)
        perturbed = op.apply(task)
        pert, hw_p, _ = per_task_estimate(perturbed, agent, budget, plan, seed, cache)
        drop = base - pert
        if drop > params.rb_slack:
            point += w
            witnesses.append(task.id)
        if drop - (hw_b + hw_p) > params.rb_slack:
            lower += w
        if drop + (hw_b + hw_p) <= params.rb_slack:
            certain_no += w
    return {
        "op": op.id,
        "event_mass": point,
        "lower": lower,
        "upper": 1.0 - certain_no,
        "witnesses": tuple(sorted(witnesses)),
    }


def check_g5(
    mu: TaskDistribution,
    agent: AgentHandle,
    perturbations: Sequence[PerturbationOp],
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Robustness: for every admissible perturbation, the mass of tasks whose
    performance drops by more than rb_slack stays within delta_rb."""
    for op in perturbations:
        if not op.closed:
            raise GenlabError(f"perturbation {op.id!r} is not closed in the family")
    per_op = [
        degradation_rows(mu, agent, op, budget, params, plan, seed, cache)
        for op in perturbations
    ]
    verdicts = [_decide_le(row["lower"], row["upper"], params.delta_rb) for row in per_op]
    if FAIL in verdicts:
        verdict = FAIL
    elif INCONCLUSIVE in verdicts:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    worst = max(per_op, key=lambda row: row["event_mass"], default=None)
    return AxiomReport(
        axiom="G5",
        verdict=verdict,
        estimate=worst["event_mass"] if worst else 0.0,
        ci=(worst["lower"], worst["upper"]) if worst else (0.0, 0.0),
        witnesses=worst["witnesses"] if worst else (),
        samples_used=len(per_op) * len(mu.support) * plan.n_rollouts,
        params=params,
        details={"per_perturbation": per_op, "worst_op": worst["op"] if worst else None},
    )


# ---------------------------------------------------------------------------
# extension axioms


def pushforward_distribution(nu: GoalDistribution, family: TaskFamily) -> TaskDistribution:
    """Compile a goal distribution into the induced task distribution."""
    tasks: list = []
    weights: list[float] = []
    index: dict[str, int] = {}
    for goal, w in zip(nu.goals, nu.weights):
        task = compile_goal(goal, family)
        if task.id in index:
            weights[index[task.id]] += w
        else:
            index[task.id] = len(tasks)
            tasks.append(task)
            weights.append(w)
    return TaskDistribution(family.id, tuple(tasks), renormalized(weights))


def check_a1(
    nu: GoalDistribution,
    family: TaskFamily,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Autonomy: the G1 decision applied to the compiled goal pushforward."""
    mu = pushforward_distribution(nu, family)
    rows = _mu_rows(mu, agent, budget, plan, seed, cache)
    return _breadth_from_rows(
        "A1", rows, params.theta_br, params.delta_br, params, plan,
        extra={"n_goals": len(nu.goals), "pushforward_support": len(mu.support)},
    )


def check_a2(
    mu: TaskDistribution,
    agent_with_tool: AgentHandle,
    agent_without: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Tool use: the tool-equipped mean beats the tool-free mean by theta_tr."""
    g_tool = estimate_generality(mu, agent_with_tool, budget, plan, seed, cache)
    g_plain = estimate_generality(mu, agent_without, budget, plan, seed, cache)
    return _mean_difference_report(
        "A2",
        (g_tool.mean, g_tool.half_width),
        (g_plain.mean, g_plain.half_width),
        params.theta_tr,
        params,
        plan,
        n_samples=plan.n_rollouts * (g_tool.n_tasks_sampled + g_plain.n_tasks_sampled),
        extra={"tool_mean": g_tool.mean, "plain_mean": g_plain.mean, "tool_budget": budget.tool_calls},
    )


MIN_BIN_COUNT = 10


def check_a3(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    bins: int,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Calibration: per confidence bin, |success frequency - mean confidence|
    must stay within cal_tol.

    Success is the per-episode event score >= theta_br (a per-task success
    *probability* would not be observable episode-by-episode; the divergence
    is recorded in the report details). In exact mode over deterministic
    configurations bins are weighted by mu and decided exactly; otherwise
    bins with fewer than MIN_BIN_COUNT sampled points are skipped and listed.
    """
    if agent.confidence is None:
        raise MissingConfidenceError(f"agent {agent.id!r} exposes no confidence channel")
    from .core import task_deterministic

    exact = plan.mode == "exact" and agent.deterministic and all(
        task_deterministic(t) for t in mu.support
    )
    points: list[tuple[float, float, float]] = []  # (confidence, success, weight)
    if exact:
        for task, w in zip(mu.support, mu.weights):
            conf = float(agent.confidence(agent.state, task_context(task)))
            freq, _, _ = per_task_event_freq(
                task, agent, budget, plan, seed, "success", params.theta_br, cache
            )
            points.append((conf, freq, w))
    else:
        rng = make_rng(seed, "a3-sample")
        n = plan.n_tasks or len(mu.support) * plan.n_rollouts
        for i in range(n):
            task = mu.sample(rng)
            conf = float(agent.confidence(agent.state, task_context(task)))
            from .core import run_episode

            outcome = run_episode(task, agent, budget, derive_seed(seed, "a3", i))
            points.append((conf, 1.0 if outcome.score >= params.theta_br else 0.0, 1.0))

    table: dict[int, list[tuple[float, float, float]]] = {}
    for conf, success, w in points:
        b = min(int(conf * bins), bins - 1)
        table.setdefault(b, []).append((conf, success, w))

    worst_gap, worst_radius, worst_bin = 0.0, 0.0, None
    all_pass, any_fail = True, False
    skipped = []
    bin_rows = []
    for b, rows in sorted(table.items()):
        count = len(rows)
        mass = sum(w for _, _, w in rows)
        if not exact and count < MIN_BIN_COUNT:
            skipped.append({"bin": b, "count": count})
            continue
        mean_conf = sum(c * w for c, _, w in rows) / mass
        freq = sum(s * w for _, s, w in rows) / mass
        gap = abs(freq - mean_conf)
        radius = 0.0 if exact else hoeffding_halfwidth(count, params.confidence_alpha)
        bin_rows.append({"bin": b, "count": count, "mean_confidence": mean_conf, "success_freq": freq, "gap": gap, "radius": radius})
        if gap + radius > params.cal_tol:
            all_pass = False
        if gap - radius > params.cal_tol:
            any_fail = True
        if gap > worst_gap:
            worst_gap, worst_radius, worst_bin = gap, radius, b
    if not bin_rows:
        verdict = INCONCLUSIVE
    elif any_fail:
        verdict = FAIL
    elif all_pass:
        verdict = PASS
    else:
        verdict = INCONCLUSIVE
    return AxiomReport(
        axiom="A3",
        verdict=verdict,
        estimate=worst_gap,
        ci=(max(0.0, worst_gap - worst_radius), worst_gap + worst_radius),
        witnesses=(),
        samples_used=len(points),
        params=params,
        details={
            "bins": bin_rows,
            "skipped_bins": skipped,
            "worst_bin": worst_bin,
            "success_event": "per-episode score >= theta_br",
            "exact": exact,
        },
    )


def _supports_violation(task) -> bool:
    kind = task.env.kind
    if kind == "mdp":
        return bool(task.env.params.get("allow_jump", True))
    if kind == "composed":
        from .ecologies import task_from_dict

        return _supports_violation(task_from_dict(task.env.params["first"])) or _supports_violation(
            task_from_dict(task.env.params["second"])
        )
    if kind == "perturbed":
        from .ecologies import task_from_dict

        return _supports_violation(task_from_dict(task.env.params["base"]))
    return False


def check_a4(
    mu: TaskDistribution,
    agent: AgentHandle,
    budget: Budget,
    params: AxiomParams,
    plan: SamplingPlan,
    seed: int,
    cache: EvalCache | None = None,
) -> AxiomReport:
    """Constraint adherence: violation mass within constraint_tol, jointly with
    success-without-violation mass at least 1 - delta_br - constraint_tol."""
    if not any(_supports_violation(t) for t in mu.support):
        raise NoViolationPredicateError(
            "no task in the support defines a violation indicator (forbidden action)"
        )
    viol_point, viol_lo, viol_hi_c = 0.0, 0.0, 0.0
    joint_point, joint_lo, joint_hi_c = 0.0, 0.0, 0.0
    witnesses = []
    for task, w in zip(mu.support, mu.weights):
        v, hw_v, _ = per_task_event_freq(task, agent, budget, plan, seed, "violation", 0.0, cache)
        j, hw_j, _ = per_task_event_freq(
            task, agent, budget, plan, seed, "success_clean", params.theta_br, cache
        )
        viol_point += w * v
        viol_lo += w * max(0.0, v - hw_v)
        viol_hi_c += w * min(1.0, v + hw_v)
        joint_point += w * j
        joint_lo += w * max(0.0, j - hw_j)
        joint_hi_c += w * min(1.0, j + hw_j)
        if v > 0:
            witnesses.append(task.id)
    clause1 = _decide_le(viol_lo, viol_hi_c, params.constraint_tol)
    joint_target = 1.0 - params.delta_br - params.constraint_tol
    clause2 = _decide_ge(joint_lo, joint_hi_c, joint_target)
    if FAIL in (clause1, clause2):
        verdict = FAIL
    elif INCONCLUSIVE in (clause1, clause2):
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    return AxiomReport(
        axiom="A4",
        verdict=verdict,
        estimate=viol_point,
        ci=(viol_lo, viol_hi_c),
        witnesses=tuple(sorted(witnesses)),
        samples_used=len(mu.support) * plan.n_rollouts,
        params=params,
        details={
            "violation_mass": viol_point,
            "joint_success_clean_mass": joint_point,
            "joint_target": joint_target,
            "clause_violation": clause1,
            "clause_joint": clause2,
        },
    )


# ---------------------------------------------------------------------------
# bundle and weak variants


@dataclass
class BundleConfig:
    """Everything the full bundle needs beyond (mu, agent)."""

    params: AxiomParams
    plan: SamplingPlan
    budget: Budget
    axioms: tuple[str, ...] = AXIOM_ORDER
    protocol: AdaptationProtocol | None = None
    exposure: PreExposure | None = None
    n_pairs: int = 64
    perturbations: tuple[PerturbationOp, ...] | None = None
    goals: GoalDistribution | None = None
    family: TaskFamily | None = None
    a2_baseline: AgentHandle | None = None
    calibration_bins: int = 10
    g3_transfer_cap: float = 1.0


@dataclass(frozen=True)
class BundleResult:
    reports: tuple[AxiomReport, ...]
    overall: str


def _require(config: BundleConfig, axiom: str, attr: str):
    value = getattr(config, attr)
    if value is None:
        raise MissingBundleInputError(f"axiom {axiom} requires bundle input {attr!r}")
    return value


def check_bundle(
    mu: TaskDistribution,
    agent: AgentHandle,
    config: BundleConfig,
    seed: int,
    cache: EvalCache | None = None,
) -> BundleResult:
    """Run every configured checker; fail dominates, then inconclusive."""
    cache = cache if cache is not None else new_cache()
    reports: list[AxiomReport] = []
    for axiom in config.axioms:
        if axiom == "G1":
            reports.append(check_g1(mu, agent, config.budget, config.params, config.plan, seed, cache))
        elif axiom == "G2":
            protocol = _require(config, "G2", "protocol")
            reports.append(
                check_g2(mu, agent, protocol, config.budget, config.params, config.plan, seed, cache)
            )
        elif axiom == "G3":
            exposure = _require(config, "G3", "exposure")
            reports.append(
                check_g3(mu, agent, exposure, config.budget, config.params, config.plan, seed, cache)
            )
        elif axiom == "G4":
            reports.append(
                check_g4(mu, agent, config.budget, config.params, config.n_pairs, seed, config.plan, cache)
            )
        elif axiom == "G5":
            perturbations = _require(config, "G5", "perturbations")
            reports.append(
                check_g5(mu, agent, perturbations, config.budget, config.params, config.plan, seed, cache)
            )
        elif axiom == "A1":
            goals = _require(config, "A1", "goals")
            family = _require(config, "A1", "family")
            reports.append(
                check_a1(goals, family, agent, config.budget, config.params, config.plan, seed, cache)
            )
        elif axiom == "A2":
            baseline = _require(config, "A2", "a2_baseline")
            reports.append(
                check_a2(mu, agent, baseline, config.budget, config.params, config.plan, seed, cache)
            )
        elif axiom == "A3":
            reports.append(
                check_a3(mu, agent, config.budget, config.params, config.calibration_bins, config.plan, seed, cache)
            )
        elif axiom == "A4":
            reports.append(check_a4(mu, agent, config.budget, config.params, config.plan, seed, cache))
        else:
            raise MissingBundleInputError(f"unknown axiom in bundle: {axiom!r}")
    verdicts = [r.verdict for r in reports]
    if FAIL in verdicts:
        overall = FAIL
    elif INCONCLUSIVE in verdicts:
        overall = INCONCLUSIVE
    else:
        overall = PASS
    return BundleResult(tuple(reports), overall)


def check_weak_variants(
    mu: TaskDistribution,
    agent: AgentHandle,
    config: BundleConfig,
    seed: int,
    cache: EvalCache | None = None,
) -> tuple[AxiomReport, ...]:
    """The weakened axiom variants.

    G2': mean post-adaptation performance is at least the pre-adaptation mean
         (nonnegative improvement, one-sided);
    G3': the transfer gain is bounded above by the configured cap;
    G5': the G5 decision restricted to marginal-preserving perturbations.
    """
    cache = cache if cache is not None else new_cache()
    reports: list[AxiomReport] = []

    protocol = _require(config, "G2'", "protocol")
    base = estimate_generality(mu, agent, config.budget, config.plan, seed, cache)
    adapted_mean, adapted_hw = 0.0, 0.0
    for task, w in zip(mu.support, mu.weights):
        handle = adapt_within_task(agent, task, protocol, config.budget, derive_seed(seed, "g2w", task.id))
        est, hw, _ = per_task_estimate(task, handle, config.budget, config.plan, seed, cache)
        adapted_mean += w * est
        adapted_hw += w * hw
    reports.append(
        _mean_difference_report(
            "G2'",
            (adapted_mean, adapted_hw),
            (base.mean, base.half_width),
            0.0,
            config.params,
            config.plan,
            n_samples=2 * len(mu.support) * config.plan.n_rollouts,
            extra={"adapted_mean": adapted_mean, "baseline_mean": base.mean},
        )
    )

    exposure = _require(config, "G3'", "exposure")
    pre = pre_expose(agent, mu, exposure, config.budget)
    g_pre = estimate_generality(mu, pre, config.budget, config.plan, seed, cache)
    g_scr = estimate_generality(mu, agent, config.budget, config.plan, seed, cache)
    gain = g_pre.mean - g_scr.mean
    radius = g_pre.half_width + g_scr.half_width
    lower = max(-1.0, gain - radius)
    upper = min(1.0, gain + radius)  # scores in [0,1] bound any gain by 1
    cap = config.g3_transfer_cap
    reports.append(
        AxiomReport(
            axiom="G3'",
            verdict=_decide_le(lower, upper, cap),
            estimate=gain,
            ci=(lower, upper),
            witnesses=(),
            samples_used=config.plan.n_rollouts * (g_pre.n_tasks_sampled + g_scr.n_tasks_sampled),
            params=config.params,
            details={"cap": cap, "pre_mean": g_pre.mean, "scratch_mean": g_scr.mean},
        )
    )

    perturbations = _require(config, "G5'", "perturbations")
    restricted = tuple(op for op in perturbations if op.marginal_preserving)
    if restricted:
        g5 = check_g5(mu, agent, restricted, config.budget, config.params, config.plan, seed, cache)
        reports.append(replace(g5, axiom="G5'", details={**g5.details, "restricted_to": [op.id for op in restricted]}))
    else:
        reports.append(
            AxiomReport(
                axiom="G5'",
                verdict=PASS,
                estimate=0.0,
                ci=(0.0, 0.0),
                witnesses=(),
                samples_used=0,
                params=config.params,
                details={"restricted_to": [], "note": "no marginal-preserving perturbations supplied; vacuous"},
            )
        )
    return tuple(reports)
