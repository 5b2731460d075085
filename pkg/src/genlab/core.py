"""Domain types and the budgeted episodic interaction loop.

A task is an (environment, utility, horizon) triple; an agent is a mapping
from interaction histories to action distributions. `run_episode` realizes
the budget-respecting interaction and is a pure function of
(task, agent-snapshot, budget, seed): identical inputs give bit-identical
outcomes, which every statistical layer above relies on.

Budget accounting conventions:
  * comp_steps        - one unit per policy invocation
  * mem_cells         - one unit per agent-state cell written (adaptation only)
  * episodes          - one unit per episode started
  * interaction_steps - one unit per environment step (stands in for wall time)
  * tool_calls        - one unit per tool action executed

Exceeding any component truncates the episode; the score is then computed on
the truncated history and flagged, never silently continued and never raised.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from .errors import InterfaceMismatchError
from .seeding import derive_seed

ActionDistribution = Mapping[Any, float]

BUDGET_COMPONENTS = ("comp_steps", "mem_cells", "episodes", "interaction_steps", "tool_calls")


@dataclass(frozen=True)
class Budget:
    """Resource counters a run must respect, component-wise."""

    comp_steps: int = 0
    mem_cells: int = 0
    episodes: int = 0
    interaction_steps: int = 0
    tool_calls: int = 0

    def __post_init__(self) -> None:
        for name in BUDGET_COMPONENTS:
            if getattr(self, name) < 0:
                raise ValueError(f"budget component {name} must be nonnegative")

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in BUDGET_COMPONENTS)


#: Effectively unconstrained budget for oracle baselines and tests.
AMPLE = Budget(10**9, 10**9, 10**9, 10**9, 10**9)


@dataclass(frozen=True)
class Exhausted:
    """Marker value returned by `spend` when a component would go negative."""

    component: str


def spend(budget: Budget, delta: Budget) -> Budget | Exhausted:
    """Component-wise subtraction; exhaustion is a value, not an error."""
    values = {}
    for name in BUDGET_COMPONENTS:
        remaining = getattr(budget, name) - getattr(delta, name)
        if remaining < 0:
            return Exhausted(name)
        values[name] = remaining
    return Budget(**values)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Parameter record from which a concrete environment is instantiated.

    For fixed params and seed the conditional observation law is reproducible;
    `seedable` is False only for external (bridged) environments, of which the
    built-in set has none.
    """

    kind: str  # instruction | tool_arith | mdp | composed | perturbed
    params: Mapping[str, Any]
    seedable: bool = True


@dataclass(frozen=True)
class UtilitySpec:
    """Names a utility functional over complete-or-truncated histories."""

    kind: str
    params: Mapping[str, Any]


@dataclass(frozen=True)
class Task:
    """An environment paired with a utility and a finite horizon."""

    id: str
    env: EnvironmentSpec
    utility: UtilitySpec
    horizon: int

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("task horizon must be >= 1")


@dataclass(frozen=True)
class History:
    """Alternating (observation, action) steps plus the closing observation."""

    steps: tuple[tuple[Any, Any], ...]
    final_observation: Any = None

    def __len__(self) -> int:
        return len(self.steps)

    def actions(self) -> list[Any]:
        return [a for _, a in self.steps]

    def observations(self) -> list[Any]:
        obs = [o for o, _ in self.steps]
        if self.final_observation is not None:
            obs.append(self.final_observation)
        return obs


@dataclass
class AgentHandle:
    """A (possibly stateful) history-to-action-distribution policy.

    `policy(state, context, history)` must be a pure function of its
    arguments: the interaction loop owns all sampling. `state` is the opaque
    adaptation state; handles are treated as immutable snapshots by
    evaluators, and adaptation always produces a fresh handle (copy-on-adapt).
    """

    id: str
    policy: Callable[[Any, Mapping[str, Any], list[tuple[Any, Any]]], ActionDistribution]
    state: Any = None
    confidence: Callable[[Any, Mapping[str, Any]], float] | None = None
    interface: str | None = None  # None accepts any task interface
    deterministic: bool = True
    kind: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    # optional per-episode lifecycle hooks (used by the stdio bridge)
    begin_episode: Callable[[Mapping[str, Any], int], None] | None = None
    end_episode: Callable[[], None] | None = None
    # bookkeeping for adaptation/pre-exposure
    update_invocations: int = 0
    exposure_tasks: tuple[str, ...] = ()
    external: bool = False


@dataclass(frozen=True)
class EpisodeOutcome:
    """Score, violation flag, resources spent, and the realized history."""

    score: float
    violated: bool
    budget_spent: Budget
    history: History
    truncated: bool = False
    truncation_reason: str | None = None
    protocol_error: bool = False


class Environment:
    """Interactive stochastic process interface the loop drives.

    Subclasses implement `reset`/`step`; both receive the episode RNG so the
    conditional law is reproducible for a fixed seed.
    """

    done: bool = False
    violated: bool = False

    def reset(self, rng: random.Random) -> Any:  # pragma: no cover - interface
        raise NotImplementedError

    def step(self, action: Any, rng: random.Random) -> Any:  # pragma: no cover
        raise NotImplementedError


# Registries populated by the ecologies module. Keyed by EnvironmentSpec.kind.
ENV_BUILDERS: dict[str, Callable[[EnvironmentSpec], Environment]] = {}
ENV_INTERFACES: dict[str, Callable[[EnvironmentSpec], str]] = {}
ENV_DETERMINISTIC: dict[str, Callable[[EnvironmentSpec], bool]] = {}
UTILITIES: dict[str, Callable[[Mapping[str, Any], History], float]] = {}


def build_environment(spec: EnvironmentSpec) -> Environment:
    try:
        builder = ENV_BUILDERS[spec.kind]
    except KeyError:
        raise InterfaceMismatchError(f"unknown environment kind: {spec.kind}") from None
    return builder(spec)


def interface_of(task: Task) -> str:
    fn = ENV_INTERFACES.get(task.env.kind)
    if fn is None:
        raise InterfaceMismatchError(f"unknown environment kind: {task.env.kind}")
    return fn(task.env)


def task_deterministic(task: Task) -> bool:
    """True when the conditional observation law has no randomness."""
    fn = ENV_DETERMINISTIC.get(task.env.kind)
    return bool(fn(task.env)) if fn is not None else False


def evaluate_utility(task: Task, history: History) -> float:
    fn = UTILITIES[task.utility.kind]
    value = fn(task.utility.params, history)
    return min(1.0, max(0.0, float(value)))


def task_context(task: Task) -> dict[str, Any]:
    """Read-only view handed to policies and confidence channels."""
    return {
        "task_id": task.id,
        "kind": task.env.kind,
        "params": dict(task.env.params),
        "horizon": task.horizon,
        "interface": interface_of(task),
    }


def sample_action(dist: ActionDistribution, rng: random.Random) -> Any:
    """Sample from an action distribution; degenerate dists skip the RNG."""
    if not dist:
        raise ValueError("policy returned an empty action distribution")
    items = list(dist.items())
    if len(items) == 1:
        return items[0][0]
    actions = [a for a, _ in items]
    weights = [max(0.0, float(w)) for _, w in items]
    total = sum(weights)
    if total <= 0:
        raise ValueError("policy returned a zero-mass action distribution")
    u = rng.random() * total
    acc = 0.0
    for action, w in zip(actions, weights):
        acc += w
        if u <= acc:
            return action
    return actions[-1]


def _is_tool_action(action: Any) -> bool:
    return isinstance(action, tuple) and len(action) == 2 and action[0] == "tool"


def run_episode(task: Task, agent: AgentHandle, budget: Budget, seed: int) -> EpisodeOutcome:
    """Run one budgeted episode. Deterministic for fixed (task, agent, budget, seed)."""
    iface = interface_of(task)
    if agent.interface is not None and agent.interface != iface:
        raise InterfaceMismatchError(
            f"agent {agent.id!r} speaks {agent.interface!r}, task {task.id!r} needs {iface!r}"
        )

    rng = random.Random(seed & ((1 << 63) - 1))
    env = build_environment(task.env)
    context = task_context(task)
    context["budget"] = {name: getattr(budget, name) for name in BUDGET_COMPONENTS}

    spent = {name: 0 for name in BUDGET_COMPONENTS}
    truncated = False
    reason: str | None = None
    protocol_error = False

    if budget.episodes < 1:
        return EpisodeOutcome(
            score=evaluate_utility(task, History(steps=())),
            violated=False,
            budget_spent=Budget(),
            history=History(steps=()),
            truncated=True,
            truncation_reason="episodes",
        )
    spent["episodes"] = 1

    if agent.begin_episode is not None:
        agent.begin_episode(context, seed)

    obs = env.reset(rng)
    steps: list[tuple[Any, Any]] = []
    try:
        for _ in range(task.horizon):
            if spent["comp_steps"] + 1 > budget.comp_steps:
                truncated, reason = True, "comp_steps"
                break
            spent["comp_steps"] += 1
            try:
                dist = agent.policy(agent.state, context, steps + [(obs, None)])
                action = sample_action(dist, rng)
            except _BridgeProtocolSignal:
                protocol_error = True
                break
            if _is_tool_action(action):
                if spent["tool_calls"] + 1 > budget.tool_calls:
                    truncated, reason = True, "tool_calls"
                    break
                spent["tool_calls"] += 1
            if spent["interaction_steps"] + 1 > budget.interaction_steps:
                truncated, reason = True, "interaction_steps"
                break
            spent["interaction_steps"] += 1
            next_obs = env.step(action, rng)
            steps.append((obs, action))
            obs = next_obs
            if env.done:
                break
    finally:
        if agent.end_episode is not None:
            agent.end_episode()

    history = History(steps=tuple(steps), final_observation=obs)
    score = 0.0 if protocol_error else evaluate_utility(task, history)
    return EpisodeOutcome(
        score=score,
        violated=bool(env.violated),
        budget_spent=Budget(**spent),
        history=history,
        truncated=truncated,
        truncation_reason=reason,
        protocol_error=protocol_error,
    )


class _BridgeProtocolSignal(Exception):
    """Raised by bridge policies on wire-protocol violations.

    Caught inside `run_episode` and converted into a flagged zero-score
    outcome so external-agent misbehavior can never crash the harness.
    """


def hoeffding_halfwidth(n: int, alpha: float) -> float:
    """Two-sided Hoeffding radius for a mean of n values in [0, 1]."""
    if n <= 0:
        return float("inf")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0,1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def evaluate_performance(
    task: Task,
    agent: AgentHandle,
    budget: Budget,
    n_rollouts: int,
    seed: int,
    alpha: float = 0.05,
) -> tuple[float, float]:
    """Mean episode score over `n_rollouts` seeded rollouts plus a Hoeffding radius.

    Per-rollout seeds are derived from `seed` by the splittable counter
    scheme, so the estimate is independent of rollout execution order.
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    total = 0.0
    for i in range(n_rollouts):
        total += run_episode(task, agent, budget, derive_seed(seed, "rollout", i)).score
    return total / n_rollouts, hoeffding_halfwidth(n_rollouts, alpha)


def snapshot(agent: AgentHandle, new_id: str | None = None, **changes: Any) -> AgentHandle:
    """Shallow handle copy with a deep-copied state (copy-on-adapt)."""
    import copy

    fields: dict[str, Any] = {"state": copy.deepcopy(agent.state)}
    if new_id is not None:
        fields["id"] = new_id
    fields.update(changes)
    return replace(agent, **fields)
