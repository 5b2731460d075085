"""Reference agents exercising the adaptation, transfer, tool-use, and
calibration roles the axiom checkers quantify over.

These are deliberately simple, fully analyzable policies, not attempts at
general agents: a uniform-random baseline, scripted behaviors, an exact-recall
memorizer, a tabular value learner with a deterministic exploration schedule,
a task-specific oracle, a calculator-using solver, and a confidence wrapper.

All handles obey the core determinism contract: policies are pure functions
of (state, context, history), and adaptation always returns a fresh handle
(copy-on-adapt) so snapshots already handed to evaluators never change.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping

from .core import (
    ActionDistribution,
    AgentHandle,
    Budget,
    EpisodeOutcome,
    Exhausted,
    History,
    Task,
    run_episode,
    snapshot,
    spend,
)
from .ecologies import (
    INSTRUCTION_OPS,
    MDP_FORBIDDEN_ACTION,
    TaskDistribution,
    arith_eval,
    instruction_answer,
    invert_paraphrase,
    task_from_dict,
    task_type_key,
)
from .errors import BudgetInfeasibleError, GenlabError
from .seeding import derive_seed, make_rng

AGENT_KINDS = (
    "random",
    "scripted",
    "tabular-learner",
    "memorizer",
    "oracle",
    "tool-user",
    "calibrated-wrapper",
    "stdio-bridge",
)

def _render_param(value: Any) -> str:
    if isinstance(value, Task):
        return value.id
    if isinstance(value, AgentHandle):
        return value.id
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_render_param(v) for v in value) + "]"
    return str(value)


def _agent_id(kind: str, params: Mapping[str, Any]) -> str:
    """Deterministic id from kind and params; equal ids imply equal behavior."""
    body = ",".join(f"{k}={_render_param(v)}" for k, v in sorted(params.items()))
    return f"{kind}({body})" if body else kind


def current_observation(history: list[tuple[Any, Any]]) -> Any:
    return history[-1][0]


def unwrap_observation(obs: Any) -> tuple[Any, tuple[int, ...]]:
    """Strip composition wrappers; returns (core obs, stage path)."""
    path: list[int] = []
    while isinstance(obs, Mapping) and "stage" in obs and "obs" in obs:
        path.append(int(obs["stage"]))
        obs = obs["obs"]
    return obs, tuple(path)


def _answer_action(obs: Mapping[str, Any], text: str) -> Any:
    if obs.get("kind") in ("tool_arith", "tool_result", "noop"):
        return ("answer", text)
    return text


# ---------------------------------------------------------------------------
# policies


def _random_policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
    obs, _ = unwrap_observation(current_observation(history))
    if isinstance(obs, Mapping) and obs.get("kind") == "mdp":
        actions = obs["actions"]
        return {a: 1.0 / len(actions) for a in actions}
    if isinstance(obs, Mapping) and obs.get("kind") == "instruction":
        alphabet = obs["alphabet"]
        length = len(obs["arg"])
        if len(alphabet) ** length > 65536:
            raise ValueError("random agent answer space too large to enumerate")
        answers = ["".join(p) for p in itertools.product(alphabet, repeat=length)]
        return {a: 1.0 / len(answers) for a in answers}
    if isinstance(obs, Mapping) and obs.get("kind") in ("tool_arith", "tool_result"):
        return {("answer", str(v)): 0.1 for v in range(10)}
    return {"": 1.0}


def _solve_instruction_obs(obs: Mapping[str, Any], aware: bool) -> str:
    op = obs["op"]
    if op not in INSTRUCTION_OPS:
        key = obs.get("paraphrase_key")
        if aware and key is not None:
            op = invert_paraphrase(key).get(op, "")
        else:
            return ""
    if op not in INSTRUCTION_OPS:
        return ""
    return instruction_answer(op, obs["arg"], obs["alphabet"], int(obs.get("k", 0)))


def _scripted_policy_factory(params: Mapping[str, Any]) -> Callable:
    behavior = params.get("behavior", "constant_answer")

    def policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
        obs, _ = unwrap_observation(current_observation(history))
        if behavior == "constant_answer":
            return {_answer_action(obs, str(params.get("answer", ""))): 1.0}
        if behavior == "echo":
            if isinstance(obs, Mapping) and "arg" in obs:
                return {obs["arg"]: 1.0}
            return {"": 1.0}
        if behavior == "instruction_solver":
            if isinstance(obs, Mapping) and obs.get("kind") == "instruction":
                return {_solve_instruction_obs(obs, bool(params.get("aware", True))): 1.0}
            return {"": 1.0}
        if behavior == "always_forward":
            return {"forward": 1.0}
        if behavior == "always_stay":
            return {"stay": 1.0}
        if behavior == "always_jump":
            return {MDP_FORBIDDEN_ACTION: 1.0}
        if behavior == "forward_or_jump":
            slips = tuple(params.get("jump_slips", ()))
            slip = None
            if isinstance(obs, Mapping) and obs.get("kind") == "mdp":
                slip = context.get("params", {}).get("slip")
            if slip is not None and float(slip) in slips:
                return {MDP_FORBIDDEN_ACTION: 1.0}
            return {"forward": 1.0}
        raise ValueError(f"unknown scripted behavior: {behavior}")

    return policy


def _oracle_answer(task: Task, obs: Any) -> ActionDistribution:
    kind = task.env.kind
    params = task.env.params
    if kind == "instruction":
        answer = instruction_answer(
            params["op"],
            params["arg"],
            "abcdefghijklmnopqrstuvwxyz"[: int(params["alphabet_size"])],
            int(params.get("k", 0)),
        )
        return {answer: 1.0}
    if kind == "tool_arith":
        return {("answer", str(arith_eval(params["expression"]))): 1.0}
    if kind == "mdp":
        return {"forward": 1.0}
    if kind == "composed":
        stage = 0
        if isinstance(obs, Mapping) and "stage" in obs:
            stage = int(obs["stage"])
        sub = task_from_dict(params["first"] if stage == 0 else params["second"])
        inner = obs["obs"] if isinstance(obs, Mapping) and "obs" in obs else obs
        return _oracle_answer(sub, inner)
    if kind == "perturbed":
        return _oracle_answer(task_from_dict(params["base"]), obs)
    raise GenlabError(f"no oracle available for environment kind {kind!r}")


def _oracle_policy_factory(task: Task) -> Callable:
    def policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
        return _oracle_answer(task, current_observation(history))

    return policy


def _tool_user_policy_factory(params: Mapping[str, Any]) -> Callable:
    use_tool = bool(params.get("use_tool", True))
    fallback = str(params.get("fallback", ""))

    def policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
        obs, _ = unwrap_observation(current_observation(history))
        if not isinstance(obs, Mapping):
            return {("answer", fallback): 1.0}
        if obs.get("kind") == "tool_arith" and use_tool:
            return {("tool", obs["expression"]): 1.0}
        if obs.get("kind") == "tool_result":
            return {("answer", obs["value"]): 1.0}
        return {("answer", fallback): 1.0}

    return policy


def _memorizer_key(obs: Mapping[str, Any]) -> tuple:
    if obs.get("kind") == "instruction":
        return ("instruction", obs["op"], obs["arg"], obs.get("k"))
    if obs.get("kind") == "tool_arith":
        return ("tool", obs["expression"])
    return ("other", obs.get("kind"))


def _memorizer_policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
    obs, _ = unwrap_observation(current_observation(history))
    if not isinstance(obs, Mapping):
        return {"": 1.0}
    if obs.get("kind") == "mdp":
        return {"stay": 1.0}
    answer = state["memory"].get(_memorizer_key(obs))
    if answer is None:
        return {_answer_action(obs, ""): 1.0}
    return {_answer_action(obs, answer): 1.0}


def _task_observation_key(task: Task) -> tuple:
    """The key a memorizer would see on this task's first observation."""
    params = task.env.params
    if task.env.kind == "instruction":
        op = params["op"]
        key = params.get("paraphrase_key")
        if key is not None:
            from .ecologies import paraphrase_table

            op = paraphrase_table(key)[op]
        return ("instruction", op, params["arg"], params.get("k"))
    if task.env.kind == "tool_arith":
        return ("tool", params["expression"])
    return ("other", task.env.kind)


def _best_response(task: Task) -> str | None:
    params = task.env.params
    if task.env.kind == "instruction":
        alphabet = "abcdefghijklmnopqrstuvwxyz"[: int(params["alphabet_size"])]
        return instruction_answer(params["op"], params["arg"], alphabet, int(params.get("k", 0)))
    if task.env.kind == "tool_arith":
        return str(arith_eval(params["expression"]))
    return None


# ---------------------------------------------------------------------------
# tabular value learner

_Q_ALPHA = 0.5
_Q_GAMMA = 1.0


def _tabular_policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
    obs, _ = unwrap_observation(current_observation(history))
    if not (isinstance(obs, Mapping) and obs.get("kind") == "mdp"):
        return {"": 1.0}
    actions = obs["actions"]
    q = state["q"]
    s = obs["state"]
    best = max(actions, key=lambda a: (q.get((s, a), 0.0), -actions.index(a)))
    return {best: 1.0}


def _mdp_transitions(history: History) -> list[tuple[int, str, float, int | None]]:
    """(state, action, reward, next_state) tuples; reward 1 on reaching the goal."""
    obs_seq = history.observations()
    out = []
    for i, (obs, action) in enumerate(history.steps):
        core_obs, _ = unwrap_observation(obs)
        if not (isinstance(core_obs, Mapping) and core_obs.get("kind") == "mdp"):
            continue
        nxt = obs_seq[i + 1] if i + 1 < len(obs_seq) else None
        nxt_core, _ = unwrap_observation(nxt) if nxt is not None else (None, ())
        if isinstance(nxt_core, Mapping) and nxt_core.get("kind") == "mdp":
            nxt_state = int(nxt_core["state"])
            reward = 1.0 if nxt_state == int(core_obs["length"]) - 1 else 0.0
        else:
            nxt_state, reward = None, 0.0
        out.append((int(core_obs["state"]), action, reward, nxt_state))
    return out


def tabular_q_update(state: Any, outcome: EpisodeOutcome, task: Task) -> int:
    """One Q-learning pass over an episode's transitions; returns cells written."""
    q = state["q"]
    goal_reached = False
    written = 0
    for s, a, r, nxt in _mdp_transitions(outcome.history):
        if nxt is None or r >= 1.0:
            target = r
        else:
            actions = ["stay", "forward", MDP_FORBIDDEN_ACTION]
            target = r + _Q_GAMMA * max(q.get((nxt, b), 0.0) for b in actions)
        old = q.get((s, a), 0.0)
        q[(s, a)] = old + _Q_ALPHA * (target - old)
        written += 1
        goal_reached = goal_reached or r >= 1.0
    state["episodes"] = state.get("episodes", 0) + 1
    return written


def _tabular_explore_policy(episode_index: int) -> Callable:
    """Deterministic round-robin exploration: episode k plays action k mod |A|."""

    def policy(state: Any, context: Mapping[str, Any], history: list) -> ActionDistribution:
        obs, _ = unwrap_observation(current_observation(history))
        if not (isinstance(obs, Mapping) and obs.get("kind") == "mdp"):
            return {"": 1.0}
        actions = obs["actions"]
        return {actions[episode_index % len(actions)]: 1.0}

    return policy


# ---------------------------------------------------------------------------
# constructors


def _constant_confidence(value: float) -> Callable:
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValueError("confidence must lie in [0,1]")
    return lambda state, context: v


def make_agent(kind: str, params: Mapping[str, Any] | None = None) -> AgentHandle:
    """Construct a reference agent; see AGENT_KINDS for the accepted kinds."""
    params = dict(params or {})
    confidence = None
    if params.get("confidence") is not None:
        confidence = _constant_confidence(params["confidence"])

    if kind == "random":
        return AgentHandle(
            id=_agent_id("random", params),
            policy=_random_policy,
            deterministic=False,
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "scripted":
        return AgentHandle(
            id=_agent_id("scripted", params),
            policy=_scripted_policy_factory(params),
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "tabular-learner":
        return AgentHandle(
            id=_agent_id("tabular", params),
            policy=_tabular_policy,
            state={"q": {}, "episodes": 0},
            interface="chain-state/discrete-move",
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "memorizer":
        return AgentHandle(
            id=_agent_id("memorizer", params),
            policy=_memorizer_policy,
            state={"memory": {}},
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "oracle":
        task = params.get("task")
        if not isinstance(task, Task):
            raise GenlabError("oracle agent requires a 'task' parameter")
        return AgentHandle(
            id=_agent_id("oracle", params),
            policy=_oracle_policy_factory(task),
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "tool-user":
        return AgentHandle(
            id=_agent_id("tool-user", params),
            policy=_tool_user_policy_factory(params),
            interface="text-problem/text-or-tool",
            kind=kind,
            params=params,
            confidence=confidence,
        )
    if kind == "calibrated-wrapper":
        base = params.get("base")
        if not isinstance(base, AgentHandle):
            raise GenlabError("calibrated-wrapper requires a 'base' agent parameter")
        state = {"base_state": snapshot(base).state, "counts": {}}
        fixed = params.get("fixed_confidence")

        def wrapped_policy(state: Any, context: Mapping[str, Any], history: list):
            return base.policy(state["base_state"], context, history)

        def wrapped_confidence(state: Any, context: Mapping[str, Any]) -> float:
            if fixed is not None:
                return float(fixed)
            succ, total = state["counts"].get(_context_type_key(context), (0, 0))
            return 0.5 if total == 0 else succ / total

        return AgentHandle(
            id=_agent_id("calibrated", params),
            policy=wrapped_policy,
            state=state,
            confidence=wrapped_confidence,
            interface=base.interface,
            deterministic=base.deterministic,
            kind=kind,
            params=params,
        )
    if kind == "stdio-bridge":
        from .bridge import bridge_agent

        return bridge_agent(params["command"], int(params.get("timeout_steps", 1000)))
    raise GenlabError(f"unknown agent kind: {kind!r} (expected one of {AGENT_KINDS})")


def _context_type_key(context: Mapping[str, Any]) -> str:
    kind = context.get("kind")
    params = context.get("params", {})
    if kind == "instruction":
        return f"op={params.get('op')}"
    if kind == "mdp":
        return f"slip={params.get('slip')}"
    if kind == "tool_arith":
        return "arith"
    return str(kind)


# ---------------------------------------------------------------------------
# adaptation and pre-exposure


@dataclass(frozen=True)
class AdaptationProtocol:
    """Exactly `within_task_updates` update-rule applications precede scoring."""

    within_task_updates: int
    update_rule: Callable[[Any, EpisodeOutcome, Task], int] | None = None

    def __post_init__(self) -> None:
        if self.within_task_updates < 0:
            raise ValueError("within_task_updates must be nonnegative")


@dataclass(frozen=True)
class PreExposure:
    """I.i.d. pre-exposure phase of `n_tasks` draws from the declared mu."""

    n_tasks: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_tasks < 0:
            raise ValueError("n_tasks must be nonnegative")


def default_update_rule(agent: AgentHandle) -> Callable[[Any, EpisodeOutcome, Task], int]:
    if agent.kind == "tabular-learner":
        return tabular_q_update
    if agent.kind == "memorizer":

        def memorize(state: Any, outcome: EpisodeOutcome, task: Task) -> int:
            answer = _best_response(task)
            if answer is None:
                return 0
            state["memory"][_task_observation_key(task)] = answer
            return 1

        return memorize
    if agent.kind == "calibrated-wrapper":
        base_rule = default_update_rule(agent.params["base"])

        def delegate(state: Any, outcome: EpisodeOutcome, task: Task) -> int:
            return base_rule(state["base_state"], outcome, task)

        return delegate

    def identity(state: Any, outcome: EpisodeOutcome, task: Task) -> int:
        return 0

    return identity


def adapt_within_task(
    agent: AgentHandle,
    task: Task,
    protocol: AdaptationProtocol,
    budget: Budget,
    seed: int,
) -> AgentHandle:
    """Return the agent after N_ad within-task updates; the input is unchanged.

    Each update runs one exploration episode on `task` (charged against the
    episode budget) and applies the protocol's update rule to the fresh
    snapshot's state. Raises BudgetInfeasibleError naming the binding
    component when the protocol cannot fit.
    """
    n = protocol.within_task_updates
    if n > budget.episodes:
        raise BudgetInfeasibleError("episodes", f"protocol needs {n} episodes, budget grants {budget.episodes}")
    adapted = snapshot(agent, new_id=f"{agent.id}#ad{n}-{derive_seed(seed, task.id) % 10**8:08x}")
    if n == 0:
        return adapted
    rule = protocol.update_rule or default_update_rule(agent)
    remaining = budget
    mem_spent = 0
    for k in range(n):
        policy = (
            _tabular_explore_policy(k)
            if agent.kind == "tabular-learner"
            else adapted.policy
        )
        probe = replace(adapted, policy=policy)
        outcome = run_episode(task, probe, remaining, derive_seed(seed, "adapt-episode", k))
        written = rule(adapted.state, outcome, task)
        mem_spent += written
        adapted.update_invocations += 1
        left = spend(remaining, outcome.budget_spent)
        if isinstance(left, Exhausted) or mem_spent > budget.mem_cells:
            break  # budget exhausted: stop updating, never continue silently
        remaining = left
    return adapted


def pre_expose(
    agent: AgentHandle,
    mu: TaskDistribution,
    exposure: PreExposure,
    budget: Budget,
) -> AgentHandle:
    """Return A_pre after processing K_tr i.i.d. draws from mu (copy-on-adapt)."""
    if exposure.n_tasks > budget.episodes:
        raise BudgetInfeasibleError(
            "episodes", f"pre-exposure needs {exposure.n_tasks} episodes, budget grants {budget.episodes}"
        )
    rng = make_rng(exposure.seed, "pre-exposure")
    drawn = [mu.sample(rng) for _ in range(exposure.n_tasks)]
    pre = snapshot(agent, new_id=f"{agent.id}#pre{exposure.n_tasks}-{exposure.seed}")
    rule = default_update_rule(agent)
    for i, task in enumerate(drawn):
        ep_seed = derive_seed(exposure.seed, "exposure-episode", i)
        if agent.kind == "tabular-learner":
            probe = replace(pre, policy=_tabular_explore_policy(i))
            outcome = run_episode(task, probe, budget, ep_seed)
            rule(pre.state, outcome, task)
        elif agent.kind == "memorizer":
            rule(pre.state, EpisodeOutcome(0.0, False, Budget(), History(())), task)
        elif agent.kind == "calibrated-wrapper":
            # prequential: score the episode before any learning happens
            outcome = run_episode(task, pre, budget, ep_seed)
            threshold = float(pre.params.get("success_threshold", 0.5))
            key = task_type_key(task)
            succ, total = pre.state["counts"].get(key, (0, 0))
            pre.state["counts"][key] = (succ + (1 if outcome.score >= threshold else 0), total + 1)
            rule(pre.state, outcome, task)
        # stateless kinds: pre-exposure leaves behavior unchanged
        pre.update_invocations += 1
    return replace(pre, exposure_tasks=tuple(t.id for t in drawn))
