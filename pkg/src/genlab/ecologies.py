"""Built-in task families, distributions, perturbations, composition, and drift.

Three concrete ecologies are provided:

  * instruction  - single-turn string transformations (echo / reverse /
                   uppercase-map / rotate-k) scored by exact match;
  * tool_arith   - arithmetic questions with a calculator tool behind the
                   tool-call budget;
  * mdp          - chain MDPs where `forward` advances with prob 1 - slip,
                   scored by reaching the final state within the horizon.
                   The optional `jump` action teleports to the goal but trips
                   the constraint-violation indicator.

All constructors are pure; every generated task has a canonical id derived
from its parameters, so distributions can be compared atom-by-atom.
"""

from __future__ import annotations

import ast
import itertools
import random
import string
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from .core import (
    Budget,
    ENV_BUILDERS,
    ENV_DETERMINISTIC,
    ENV_INTERFACES,
    Environment,
    EnvironmentSpec,
    History,
    Task,
    UTILITIES,
    UtilitySpec,
)
from .errors import (
    CompositionUnsupportedError,
    EmptySupportError,
    FamilyMismatchError,
    InadmissibleGoalError,
)
from .seeding import derive_seed

INSTRUCTION_OPS = ("echo", "reverse", "upper", "rotate")

WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# families and distributions


@dataclass(frozen=True)
class TaskFamily:
    """A set of tasks sharing an interface, with a generator and admissibility."""

    id: str
    kind: str
    interface: tuple[str, str]  # (observation-space, action-space) descriptors
    params: Mapping[str, Any]
    members: Callable[[Mapping[str, Any]], Task]
    admissibility: Callable[[Mapping[str, Any]], bool]
    sweep: Callable[[int], list[Task]]
    has_violation_indicator: bool = False

    def interface_tag(self) -> str:
        return f"{self.interface[0]}/{self.interface[1]}"


@dataclass(frozen=True)
class TaskDistribution:
    """Finite-support probability measure over a task family."""

    family_id: str
    support: tuple[Task, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise EmptySupportError("task distribution needs at least one atom")
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL}")
        ids = [t.id for t in self.support]
        if len(set(ids)) != len(ids):
            raise ValueError("support tasks must be pairwise distinct by id")

    def as_mapping(self) -> dict[str, float]:
        return {t.id: w for t, w in zip(self.support, self.weights)}

    def weight_of(self, task_id: str) -> float:
        return self.as_mapping().get(task_id, 0.0)

    def task_by_id(self, task_id: str) -> Task:
        for t in self.support:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def sample(self, rng: random.Random) -> Task:
        u = rng.random()
        acc = 0.0
        for task, w in zip(self.support, self.weights):
            acc += w
            if u <= acc:
                return task
        return self.support[-1]


def renormalized(weights: Sequence[float]) -> tuple[float, ...]:
    total = float(sum(weights))
    if total <= 0:
        raise ValueError("weights must have positive total mass")
    return tuple(w / total for w in weights)


def dirac(family_id: str, task: Task) -> TaskDistribution:
    return TaskDistribution(family_id, (task,), (1.0,))


def uniform_distribution(family_id: str, tasks: Sequence[Task]) -> TaskDistribution:
    return TaskDistribution(family_id, tuple(tasks), renormalized([1.0] * len(tasks)))


def weighted_distribution(
    family_id: str, tasks: Sequence[Task], weights: Sequence[float]
) -> TaskDistribution:
    return TaskDistribution(family_id, tuple(tasks), renormalized(weights))


def mix_with_dirac(mu: TaskDistribution, bad: Task, eta: float) -> TaskDistribution:
    """The small-mass mixture (1 - eta) * mu + eta * dirac(bad), exact weights."""
    ids = [t.id for t in mu.support]
    tasks = list(mu.support)
    weights = [(1.0 - eta) * w for w in mu.weights]
    if bad.id in ids:
        weights[ids.index(bad.id)] += eta
    else:
        tasks.append(bad)
        weights.append(eta)
    return TaskDistribution(mu.family_id, tuple(tasks), renormalized(weights))


@dataclass(frozen=True)
class PerturbationOp:
    """An admissible task-to-task map; `closed` means the image stays in-family."""

    id: str
    apply: Callable[[Task], Task]
    closed: bool = True
    marginal_preserving: bool = False


@dataclass(frozen=True)
class DriftSequence:
    """A time-indexed sequence of task distributions over one family."""

    steps: tuple[TaskDistribution, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise EmptySupportError("drift sequence needs at least one step")
        family = self.steps[0].family_id
        if any(s.family_id != family for s in self.steps):
            raise FamilyMismatchError("all drift steps must share one family")


@dataclass(frozen=True)
class GoalDistribution:
    """Finite-support measure over goal parameter records."""

    goals: tuple[Mapping[str, Any], ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.goals:
            raise EmptySupportError("goal distribution needs at least one goal")
        if len(self.goals) != len(self.weights):
            raise ValueError("goals and weights must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL}")


# ---------------------------------------------------------------------------
# canonical ids and serialization


def _canon(value: Any) -> str:
    if isinstance(value, Mapping):
        inner = ",".join(f"{k}={_canon(value[k])}" for k in sorted(value))
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    return str(value)


def canonical_task_id(prefix: str, params: Mapping[str, Any]) -> str:
    keys = sorted(k for k in params if params[k] is not None)
    body = ",".join(f"{k}={_canon(params[k])}" for k in keys)
    return f"{prefix}({body})"


def task_to_dict(task: Task) -> dict[str, Any]:
    return {
        "id": task.id,
        "env": {"kind": task.env.kind, "params": dict(task.env.params), "seedable": task.env.seedable},
        "utility": {"kind": task.utility.kind, "params": dict(task.utility.params)},
        "horizon": task.horizon,
    }


def task_from_dict(data: Mapping[str, Any]) -> Task:
    return Task(
        id=data["id"],
        env=EnvironmentSpec(data["env"]["kind"], dict(data["env"]["params"]), data["env"].get("seedable", True)),
        utility=UtilitySpec(data["utility"]["kind"], dict(data["utility"]["params"])),
        horizon=int(data["horizon"]),
    )


# ---------------------------------------------------------------------------
# instruction family


def _alphabet(size: int) -> str:
    return string.ascii_lowercase[:size]


def paraphrase_table(key: int) -> dict[str, str]:
    """Bijective op-token renaming derived from an integer key."""
    tokens = [f"tok{i}" for i in range(len(INSTRUCTION_OPS))]
    rng = random.Random(key & ((1 << 63) - 1))
    rng.shuffle(tokens)
    return dict(zip(INSTRUCTION_OPS, tokens))


def invert_paraphrase(key: int) -> dict[str, str]:
    return {v: k for k, v in paraphrase_table(key).items()}


def instruction_answer(op: str, arg: str, alphabet: str, k: int = 0) -> str:
    """Ground-truth response for an instruction task (the hand oracle)."""
    if op == "echo":
        return arg
    if op == "reverse":
        return arg[::-1]
    if op == "upper":
        return arg.upper()
    if op == "rotate":
        n = len(alphabet)
        return "".join(alphabet[(alphabet.index(c) + k) % n] for c in arg)
    raise ValueError(f"unknown instruction op: {op}")


class InstructionEnvironment(Environment):
    def __init__(self, spec: EnvironmentSpec):
        self.params = spec.params
        self.done = False
        self.violated = False

    def reset(self, rng: random.Random) -> Any:
        p = self.params
        op = p["op"]
        key = p.get("paraphrase_key")
        shown_op = paraphrase_table(key)[op] if key is not None else op
        arg = p["arg"]
        noise = float(p.get("obs_noise", 0.0))
        alphabet = _alphabet(int(p["alphabet_size"]))
        if noise > 0.0:
            arg = _flip_chars(arg, alphabet, noise, rng)
        obs = {
            "kind": "instruction",
            "op": shown_op,
            "arg": arg,
            "alphabet": alphabet,
        }
        if key is not None:
            obs["paraphrase_key"] = key
        if p.get("k") is not None:
            obs["k"] = p["k"]
        return obs

    def step(self, action: Any, rng: random.Random) -> Any:
        self.done = True
        return {"kind": "end"}


def _flip_chars(arg: str, alphabet: str, rate: float, rng: random.Random) -> str:
    out = []
    for c in arg:
        if c in alphabet and rng.random() < rate:
            choices = [x for x in alphabet if x != c]
            out.append(rng.choice(choices))
        else:
            out.append(c)
    return "".join(out)


def _exact_match_utility(params: Mapping[str, Any], history: History) -> float:
    expected = params["answer"]
    answer = None
    for _, action in history.steps:
        if isinstance(action, tuple) and len(action) == 2 and action[0] == "answer":
            answer = action[1]
        elif isinstance(action, str):
            answer = action
    return 1.0 if answer == expected else 0.0


def _instruction_task(family_params: Mapping[str, Any], params: Mapping[str, Any]) -> Task:
    op = params["op"]
    arg = params["arg"]
    alphabet = _alphabet(int(family_params["alphabet_size"]))
    k = int(params.get("k", 1)) if op == "rotate" else None
    env_params: dict[str, Any] = {
        "op": op,
        "arg": arg,
        "alphabet_size": family_params["alphabet_size"],
    }
    if k is not None:
        env_params["k"] = k
    if params.get("paraphrase_key") is not None:
        env_params["paraphrase_key"] = int(params["paraphrase_key"])
    if params.get("obs_noise"):
        env_params["obs_noise"] = float(params["obs_noise"])
    answer = instruction_answer(op, arg, alphabet, k or 0)
    return Task(
        id=canonical_task_id("instr", env_params),
        env=EnvironmentSpec("instruction", env_params),
        utility=UtilitySpec("exact_match", {"answer": answer}),
        horizon=1,
    )


def make_instruction_family(alphabet_size: int, max_len: int) -> TaskFamily:
    """Single-turn string-instruction tasks with exact-match scoring."""
    if not 2 <= alphabet_size <= 26:
        raise ValueError("alphabet_size must be in 2..26")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    family_params = {"alphabet_size": alphabet_size, "max_len": max_len}
    alphabet = _alphabet(alphabet_size)

    def admissibility(params: Mapping[str, Any]) -> bool:
        if "base" in params and "char_flip_rate" in params:
            # observation-noise wrapper around an admissible base task
            rate = float(params["char_flip_rate"])
            base_params = params["base"].get("env", {}).get("params", {})
            return 0.0 <= rate <= 1.0 and admissibility(base_params)
        op = params.get("op")
        arg = params.get("arg")
        if op not in INSTRUCTION_OPS or not isinstance(arg, str):
            return False
        if not 1 <= len(arg) <= max_len or any(c not in alphabet for c in arg):
            return False
        if op == "rotate" and not isinstance(params.get("k", 1), int):
            return False
        noise = params.get("obs_noise", 0.0)
        if not 0.0 <= float(noise) <= 1.0:
            return False
        return True

    def members(params: Mapping[str, Any]) -> Task:
        if not admissibility(params):
            raise InadmissibleGoalError(f"inadmissible instruction goal: {dict(params)}")
        return _instruction_task(family_params, params)

    def sweep(cap: int) -> list[Task]:
        out: list[Task] = []
        for length in range(1, max_len + 1):
            for op in INSTRUCTION_OPS:
                for chars in itertools.product(alphabet, repeat=length):
                    out.append(members({"op": op, "arg": "".join(chars)}))
                    if len(out) >= cap:
                        return out
        return out

    return TaskFamily(
        id=f"instruction(a{alphabet_size},l{max_len})",
        kind="instruction",
        interface=("text-instruction", "text"),
        params=family_params,
        members=members,
        admissibility=admissibility,
        sweep=sweep,
    )


# ---------------------------------------------------------------------------
# tool-arithmetic family


def arith_eval(expr: str) -> int:
    """Safe integer arithmetic over +, -, * and parentheses."""
    node = ast.parse(expr, mode="eval")

    def ev(n: ast.AST) -> int:
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, int):
            return n.value
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return -ev(n.operand)
        if isinstance(n, ast.BinOp) and isinstance(n.op, (ast.Add, ast.Sub, ast.Mult)):
            left, right = ev(n.left), ev(n.right)
            if isinstance(n.op, ast.Add):
                return left + right
            if isinstance(n.op, ast.Sub):
                return left - right
            return left * right
        raise ValueError(f"unsupported arithmetic expression: {expr!r}")

    return ev(node)


class ToolArithEnvironment(Environment):
    def __init__(self, spec: EnvironmentSpec):
        self.params = spec.params
        self.done = False
        self.violated = False

    def reset(self, rng: random.Random) -> Any:
        return {
            "kind": "tool_arith",
            "expression": self.params["expression"],
            "tools": ["calc"],
        }

    def step(self, action: Any, rng: random.Random) -> Any:
        if isinstance(action, tuple) and len(action) == 2:
            tag, payload = action
            if tag == "tool":
                try:
                    value = str(arith_eval(str(payload)))
                except ValueError:
                    value = "error"
                return {"kind": "tool_result", "value": value}
            if tag == "answer":
                self.done = True
                return {"kind": "end"}
        return {"kind": "noop"}


def _tool_task(params: Mapping[str, Any]) -> Task:
    expr = params["expression"]
    env_params = {"expression": expr}
    return Task(
        id=canonical_task_id("tool", env_params),
        env=EnvironmentSpec("tool_arith", env_params),
        utility=UtilitySpec("exact_match", {"answer": str(arith_eval(expr))}),
        horizon=3,
    )


def make_tool_family(max_operands: int, operand_range: tuple[int, int]) -> TaskFamily:
    """Arithmetic questions; a calculator tool costs one tool call per use."""
    if max_operands < 1:
        raise ValueError("max_operands must be >= 1")
    lo, hi = int(operand_range[0]), int(operand_range[1])
    if hi < lo:
        raise ValueError("operand_range must be a nonempty interval")

    def admissibility(params: Mapping[str, Any]) -> bool:
        expr = params.get("expression")
        if not isinstance(expr, str):
            return False
        try:
            tree = ast.parse(expr, mode="eval")
        except SyntaxError:
            return False
        operands = [n for n in ast.walk(tree) if isinstance(n, ast.Constant)]
        if not 1 <= len(operands) <= max_operands:
            return False
        if any(not isinstance(n.value, int) or not lo <= n.value <= hi for n in operands):
            return False
        try:
            arith_eval(expr)
        except ValueError:
            return False
        return True

    def members(params: Mapping[str, Any]) -> Task:
        if not admissibility(params):
            raise InadmissibleGoalError(f"inadmissible tool goal: {dict(params)}")
        return _tool_task(params)

    def sweep(cap: int) -> list[Task]:
        out: list[Task] = []
        ops = ["+", "*", "-"]
        for a in range(lo, hi + 1):
            if max_operands == 1:
                out.append(members({"expression": str(a)}))
            else:
                for op in ops:
                    for b in range(lo, hi + 1):
                        out.append(members({"expression": f"{a}{op}{b}"}))
                        if len(out) >= cap:
                            return out
            if len(out) >= cap:
                return out
        return out

    return TaskFamily(
        id=f"tool(n{max_operands},{lo}..{hi})",
        kind="tool_arith",
        interface=("text-problem", "text-or-tool"),
        params={"max_operands": max_operands, "operand_range": (lo, hi)},
        members=members,
        admissibility=admissibility,
        sweep=sweep,
    )


# ---------------------------------------------------------------------------
# chain-MDP family

MDP_BASE_ACTIONS = ("stay", "forward")
MDP_FORBIDDEN_ACTION = "jump"


class ChainMdpEnvironment(Environment):
    def __init__(self, spec: EnvironmentSpec):
        self.params = spec.params
        self.length = int(spec.params["length"])
        self.slip = float(spec.params["slip"])
        self.allow_jump = bool(spec.params.get("allow_jump", True))
        self.state = 0
        self.done = False
        self.violated = False

    def _obs(self) -> dict[str, Any]:
        actions = list(MDP_BASE_ACTIONS) + ([MDP_FORBIDDEN_ACTION] if self.allow_jump else [])
        return {
            "kind": "mdp",
            "state": self.state,
            "length": self.length,
            "actions": actions,
        }

    def reset(self, rng: random.Random) -> Any:
        self.state = 0
        self.done = self.length == 1
        return self._obs()

    def step(self, action: Any, rng: random.Random) -> Any:
        if action == MDP_FORBIDDEN_ACTION and self.allow_jump:
            self.violated = True
            self.state = self.length - 1
        elif action == "forward":
            if rng.random() >= self.slip:
                self.state = min(self.state + 1, self.length - 1)
        # "stay" and unknown actions leave the state unchanged
        if self.state == self.length - 1:
            self.done = True
        return self._obs()


def _reach_end_utility(params: Mapping[str, Any], history: History) -> float:
    goal = int(params["length"]) - 1
    for obs in history.observations():
        if isinstance(obs, Mapping) and obs.get("kind") == "mdp" and obs.get("state") == goal:
            return 1.0
    return 0.0


def _mdp_task(params: Mapping[str, Any]) -> Task:
    length = int(params["length"])
    env_params = {
        "length": length,
        "slip": float(params["slip"]),
        "allow_jump": bool(params.get("allow_jump", True)),
    }
    horizon = int(params.get("horizon", length))
    return Task(
        id=canonical_task_id("mdp", {**env_params, "horizon": horizon}),
        env=EnvironmentSpec("mdp", env_params),
        utility=UtilitySpec("reach_end", {"length": length}),
        horizon=horizon,
    )


def make_mdp_family(
    chain_length: int,
    slip_grid: Sequence[float],
    include_forbidden: bool = True,
) -> TaskFamily:
    """Chain MDPs over a grid of slip probabilities, scored by goal arrival."""
    if chain_length < 2:
        raise ValueError("chain_length must be >= 2")
    if any(not 0.0 <= s <= 1.0 for s in slip_grid):
        raise ValueError("slip values must lie in [0,1]")
    grid = tuple(float(s) for s in slip_grid)

    def admissibility(params: Mapping[str, Any]) -> bool:
        try:
            length = int(params.get("length", chain_length))
            slip = float(params["slip"])
            horizon = int(params.get("horizon", length))
        except (KeyError, TypeError, ValueError):
            return False
        return length >= 2 and 0.0 <= slip <= 1.0 and horizon >= 1

    def members(params: Mapping[str, Any]) -> Task:
        merged = {"length": chain_length, "allow_jump": include_forbidden, **params}
        if not admissibility(merged):
            raise InadmissibleGoalError(f"inadmissible mdp goal: {dict(params)}")
        return _mdp_task(merged)

    def sweep(cap: int) -> list[Task]:
        return [members({"slip": s}) for s in grid[:cap]]

    return TaskFamily(
        id=f"mdp(L{chain_length},slips{len(grid)})",
        kind="mdp",
        interface=("chain-state", "discrete-move"),
        params={"chain_length": chain_length, "slip_grid": grid, "include_forbidden": include_forbidden},
        members=members,
        admissibility=admissibility,
        sweep=sweep,
        has_violation_indicator=include_forbidden,
    )


# ---------------------------------------------------------------------------
# composition


class ComposedEnvironment(Environment):
    """Runs two sub-environments in sequence.

    Observations are wrapped as {"stage": i, "obs": ...}; the first stage-1
    observation carries the closing observation of stage 0 under "closed" so
    stage utilities see their full sub-histories.
    """

    def __init__(self, spec: EnvironmentSpec):
        self.first = task_from_dict(spec.params["first"])
        self.second = task_from_dict(spec.params["second"])
        self.env_a = build_env(self.first.env)
        self.env_b = build_env(self.second.env)
        self.active = 0
        self.steps_in_stage = 0
        self.done = False
        self.violated = False

    def reset(self, rng: random.Random) -> Any:
        self.active = 0
        self.steps_in_stage = 0
        return {"stage": 0, "obs": self.env_a.reset(rng)}

    def step(self, action: Any, rng: random.Random) -> Any:
        env = self.env_a if self.active == 0 else self.env_b
        obs = env.step(action, rng)
        self.steps_in_stage += 1
        self.violated = bool(self.env_a.violated or self.env_b.violated)
        stage_horizon = (self.first if self.active == 0 else self.second).horizon
        stage_over = env.done or self.steps_in_stage >= stage_horizon
        if self.active == 0 and stage_over:
            self.active = 1
            self.steps_in_stage = 0
            return {"stage": 1, "obs": self.env_b.reset(rng), "closed": obs}
        if self.active == 1 and stage_over:
            self.done = True
        return {"stage": self.active, "obs": obs}


def _product_utility(params: Mapping[str, Any], history: History) -> float:
    first = task_from_dict(params["first"])
    second = task_from_dict(params["second"])
    steps_a: list[tuple[Any, Any]] = []
    steps_b: list[tuple[Any, Any]] = []
    final_a: Any = None
    final_b: Any = None
    for obs, action in history.steps:
        if isinstance(obs, Mapping) and obs.get("stage") == 1:
            if final_a is None and "closed" in obs:
                final_a = obs["closed"]
            steps_b.append((obs["obs"], action))
        else:
            steps_a.append((obs["obs"] if isinstance(obs, Mapping) and "obs" in obs else obs, action))
    tail = history.final_observation
    if isinstance(tail, Mapping) and tail.get("stage") == 1:
        if final_a is None and "closed" in tail:
            final_a = tail["closed"]
        final_b = tail.get("obs")
    elif isinstance(tail, Mapping) and tail.get("stage") == 0:
        final_a = tail.get("obs")
    from .core import evaluate_utility  # local import to avoid a cycle at load

    u1 = evaluate_utility(first, History(tuple(steps_a), final_a))
    u2 = evaluate_utility(second, History(tuple(steps_b), final_b))
    return u1 * u2


def compose(t1: Task, t2: Task, growth: str = "sum") -> Task:
    """Sequential composition; utility is the product of component utilities."""
    i1, i2 = _task_interface(t1), _task_interface(t2)
    if i1 != i2:
        raise CompositionUnsupportedError(f"interface mismatch: {i1!r} vs {i2!r}")
    params = {"first": task_to_dict(t1), "second": task_to_dict(t2), "growth": growth}
    return Task(
        id=f"compose[{t1.id}+{t2.id}]",
        env=EnvironmentSpec("composed", params),
        utility=UtilitySpec("product", {"first": task_to_dict(t1), "second": task_to_dict(t2)}),
        horizon=t1.horizon + t2.horizon,
    )


def grown_budget(budget: Budget, growth: str = "sum") -> Budget:
    """Budget growth for composed tasks; linear sum doubles each component."""
    if growth != "sum":
        raise ValueError(f"unknown budget growth spec: {growth!r}")
    return Budget(*(2 * v for v in budget.as_tuple()))


# ---------------------------------------------------------------------------
# perturbed wrapper (generic observation noise over a base task)


class PerturbedEnvironment(Environment):
    def __init__(self, spec: EnvironmentSpec):
        base = task_from_dict(spec.params["base"])
        self.inner = build_env(base.env)
        self.rate = float(spec.params["char_flip_rate"])
        self.alphabet = spec.params["alphabet"]

    @property
    def done(self) -> bool:  # type: ignore[override]
        return self.inner.done

    @property
    def violated(self) -> bool:  # type: ignore[override]
        return self.inner.violated

    def _corrupt(self, obs: Any, rng: random.Random) -> Any:
        if isinstance(obs, Mapping) and isinstance(obs.get("arg"), str):
            out = dict(obs)
            out["arg"] = _flip_chars(out["arg"], self.alphabet, self.rate, rng)
            return out
        return obs

    def reset(self, rng: random.Random) -> Any:
        return self._corrupt(self.inner.reset(rng), rng)

    def step(self, action: Any, rng: random.Random) -> Any:
        return self._corrupt(self.inner.step(action, rng), rng)


# ---------------------------------------------------------------------------
# perturbation operators


def make_perturbations(family: TaskFamily, noise_level: float) -> list[PerturbationOp]:
    """Family-appropriate admissible perturbations, all closed in the family.

    instruction: bijective op-token renaming (paraphrase, keyed by the task
    id) and character-flip observation noise at `noise_level`;
    mdp: slip increment by `noise_level`, clamped to [0,1].
    At noise level 0 every operator leaves task behavior unchanged.
    """
    if not 0.0 <= noise_level <= 1.0:
        raise ValueError("noise_level must be in [0,1]")
    ops: list[PerturbationOp] = []

    if family.kind == "instruction":

        def paraphrase(task: Task) -> Task:
            if noise_level == 0.0:
                return task
            params = dict(task.env.params)
            params["paraphrase_key"] = derive_seed(0, "paraphrase", task.id)
            record = {
                "op": params["op"],
                "arg": params["arg"],
                "paraphrase_key": params["paraphrase_key"],
            }
            if params.get("k") is not None:
                record["k"] = params["k"]
            return family.members(record)

        def char_flip(task: Task) -> Task:
            if noise_level == 0.0:
                return task
            alphabet = _alphabet(int(task.env.params["alphabet_size"]))
            env_params = {
                "base": task_to_dict(task),
                "char_flip_rate": noise_level,
                "alphabet": alphabet,
            }
            return Task(
                id=canonical_task_id("noisy", {"base": task.id, "rate": noise_level}),
                env=EnvironmentSpec("perturbed", env_params),
                utility=task.utility,
                horizon=task.horizon,
            )

        ops.append(PerturbationOp("paraphrase", paraphrase, closed=True, marginal_preserving=True))
        ops.append(PerturbationOp("char_flip", char_flip, closed=True))

    elif family.kind == "mdp":

        def slip_increment(task: Task) -> Task:
            params = dict(task.env.params)
            new_slip = min(1.0, float(params["slip"]) + noise_level)
            return family.members(
                {
                    "slip": new_slip,
                    "length": params["length"],
                    "horizon": task.horizon,
                    "allow_jump": params.get("allow_jump", True),
                }
            )

        ops.append(PerturbationOp("slip_increment", slip_increment, closed=True))

    elif family.kind == "tool_arith":

        def identity(task: Task) -> Task:
            return task

        ops.append(PerturbationOp("identity", identity, closed=True, marginal_preserving=True))

    return ops


# ---------------------------------------------------------------------------
# goals and drift


def compile_goal(goal: Mapping[str, Any], family: TaskFamily) -> Task:
    """Deterministic goal-to-task compilation; same goal, same task id."""
    if not family.admissibility(goal):
        raise InadmissibleGoalError(f"goal not admissible for {family.id}: {dict(goal)}")
    return family.members(goal)


def make_drift(start: TaskDistribution, end: TaskDistribution, steps: int) -> DriftSequence:
    """Linear weight interpolation from `start` to `end` over `steps` steps."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if start.family_id != end.family_id:
        raise FamilyMismatchError("drift endpoints must share a family")
    if [t.id for t in start.support] != [t.id for t in end.support]:
        raise FamilyMismatchError("drift endpoints must share the same support")
    out = []
    for i in range(steps):
        lam = i / (steps - 1)
        weights = [
            (1.0 - lam) * a + lam * b for a, b in zip(start.weights, end.weights)
        ]
        out.append(TaskDistribution(start.family_id, start.support, renormalized(weights)))
    return DriftSequence(tuple(out))


# ---------------------------------------------------------------------------
# task-type keys (used by calibration wrappers)


def task_type_key(task: Task) -> str:
    kind = task.env.kind
    if kind == "instruction":
        return f"op={task.env.params['op']}"
    if kind == "tool_arith":
        return "arith"
    if kind == "mdp":
        return f"slip={task.env.params['slip']}"
    if kind == "composed":
        return "composed"
    if kind == "perturbed":
        return "perturbed"
    return kind


# ---------------------------------------------------------------------------
# registry wiring


def build_env(spec: EnvironmentSpec) -> Environment:
    return ENV_BUILDERS[spec.kind](spec)


def _task_interface(task: Task) -> str:
    return ENV_INTERFACES[task.env.kind](task.env)


def _composed_interface(spec: EnvironmentSpec) -> str:
    first = task_from_dict(spec.params["first"])
    return ENV_INTERFACES[first.env.kind](first.env)


def _composed_deterministic(spec: EnvironmentSpec) -> bool:
    first = task_from_dict(spec.params["first"])
    second = task_from_dict(spec.params["second"])
    return ENV_DETERMINISTIC[first.env.kind](first.env) and ENV_DETERMINISTIC[second.env.kind](
        second.env
    )


def _perturbed_interface(spec: EnvironmentSpec) -> str:
    base = task_from_dict(spec.params["base"])
    return ENV_INTERFACES[base.env.kind](base.env)


def _perturbed_deterministic(spec: EnvironmentSpec) -> bool:
    if float(spec.params["char_flip_rate"]) > 0.0:
        return False
    base = task_from_dict(spec.params["base"])
    return ENV_DETERMINISTIC[base.env.kind](base.env)


ENV_BUILDERS.update(
    {
        "instruction": InstructionEnvironment,
        "tool_arith": ToolArithEnvironment,
        "mdp": ChainMdpEnvironment,
        "composed": ComposedEnvironment,
        "perturbed": PerturbedEnvironment,
    }
)
ENV_INTERFACES.update(
    {
        "instruction": lambda spec: "text-instruction/text",
        "tool_arith": lambda spec: "text-problem/text-or-tool",
        "mdp": lambda spec: "chain-state/discrete-move",
        "composed": _composed_interface,
        "perturbed": _perturbed_interface,
    }
)
ENV_DETERMINISTIC.update(
    {
        "instruction": lambda spec: float(spec.params.get("obs_noise", 0.0)) == 0.0,
        "tool_arith": lambda spec: True,
        "mdp": lambda spec: float(spec.params["slip"]) in (0.0, 1.0),
        "composed": _composed_deterministic,
        "perturbed": _perturbed_deterministic,
    }
)
UTILITIES.update(
    {
        "exact_match": _exact_match_utility,
        "reach_end": _reach_end_utility,
        "product": _product_utility,
    }
)
