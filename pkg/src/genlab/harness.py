"""CLI, configuration, seeded orchestration, and report persistence.

A single JSON config file is the canonical semantic index of a run: family,
distribution, agent, budget, axiom parameters, sampling plan, and root seed.
Every report embeds the fully resolved config plus a fingerprint, and its
numeric payload (everything except wall-clock timing) is byte-identical
across re-runs with the same config and seed.

Experiment kinds: evaluate, axioms, fragility, worst-case, robustness,
transfer, externality, relativity, drift. Exit codes: 0 completed (pass or
no verdict), 3 fail verdict, 4 inconclusive, 2 config error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from . import __version__
from .adversary import (
    RelativityWitness,
    ShiftCertificate,
    fragility_demo,
    relativity_witness,
    robustness_counterexample,
    tv_constrained_adversary,
    worst_case_distribution,
)
from .agents import AdaptationProtocol, PreExposure, make_agent
from .axioms import (
    AXIOM_ORDER,
    AxiomParams,
    AxiomReport,
    BundleConfig,
    check_bundle,
    check_weak_variants,
)
from .core import AMPLE, AgentHandle, Budget, BUDGET_COMPONENTS, Task
from .ecologies import (
    DriftSequence,
    GoalDistribution,
    TaskDistribution,
    TaskFamily,
    compile_goal,
    make_drift,
    make_instruction_family,
    make_mdp_family,
    make_perturbations,
    make_tool_family,
    task_to_dict,
    uniform_distribution,
    weighted_distribution,
)
from .errors import ConfigError, GenlabError
from .functionals import (
    SamplingPlan,
    estimate_generality,
    estimate_tail_generality,
    failure_set,
    new_cache,
    set_parallelism,
)
from .inference import EnumerationSetup, externality_experiment, lemma_c2_check, transfer_bound_check

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_FAIL_VERDICT = 3
EXIT_INCONCLUSIVE = 4

EXPERIMENT_KINDS = (
    "evaluate",
    "axioms",
    "fragility",
    "worst-case",
    "robustness",
    "transfer",
    "externality",
    "relativity",
    "drift",
)

PARALLELISM_ENV_VAR = "GENLAB_PARALLELISM"


@dataclass
class RunReport:
    """Config echo, results, fingerprint, and timing for one experiment."""

    config: Mapping[str, Any]
    results: Mapping[str, Any]
    fingerprint: Mapping[str, Any]
    timing: Mapping[str, Any]
    schema_version: int = SCHEMA_VERSION

    def as_dict(self, include_timing: bool = True) -> dict[str, Any]:
        data = {
            "schema_version": self.schema_version,
            "config": self.config,
            "fingerprint": self.fingerprint,
            "results": self.results,
        }
        if include_timing:
            data["timing"] = self.timing
        return data

    def numeric_payload(self) -> str:
        """Canonical JSON of everything except timing; the reproducibility key."""
        return json.dumps(self.as_dict(include_timing=False), sort_keys=True)


# ---------------------------------------------------------------------------
# config -> objects


def _cfg_get(config: Mapping[str, Any], path: str, required: bool = True, default: Any = None) -> Any:
    node: Any = config
    for part in path.split("."):
        if not isinstance(node, Mapping) or part not in node:
            if required:
                raise ConfigError(path, "missing required field")
            return default
        node = node[part]
    return node


def build_family(config: Mapping[str, Any]) -> TaskFamily:
    spec = _cfg_get(config, "family")
    kind = spec.get("kind")
    if kind == "instruction":
        return make_instruction_family(int(spec.get("alphabet_size", 3)), int(spec.get("max_len", 3)))
    if kind == "mdp":
        return make_mdp_family(
            int(spec.get("chain_length", 2)),
            [float(s) for s in spec.get("slip_grid", [0.0, 0.5])],
            include_forbidden=bool(spec.get("include_forbidden", True)),
        )
    if kind == "tool":
        rng = spec.get("operand_range", [0, 9])
        return make_tool_family(int(spec.get("max_operands", 2)), (int(rng[0]), int(rng[1])))
    raise ConfigError("family.kind", f"unknown family kind {kind!r} (instruction|mdp|tool)")


def build_distribution(
    config: Mapping[str, Any], family: TaskFamily, key: str = "distribution"
) -> TaskDistribution:
    spec = _cfg_get(config, key)
    if "goals" in spec:
        tasks = [compile_goal(g, family) for g in spec["goals"]]
        weights = spec.get("weights")
        if weights is None:
            return uniform_distribution(family.id, tasks)
        if len(weights) != len(tasks):
            raise ConfigError(f"{key}.weights", "length must match goals")
        return weighted_distribution(family.id, tasks, [float(w) for w in weights])
    if "sweep_cap" in spec:
        tasks = family.sweep(int(spec["sweep_cap"]))
        return uniform_distribution(family.id, tasks)
    raise ConfigError(key, "must contain either 'goals' or 'sweep_cap'")


def build_agent(config: Mapping[str, Any], family: TaskFamily, key: str = "agent") -> AgentHandle:
    spec = dict(_cfg_get(config, key))
    kind = spec.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{key}.kind", "missing agent kind")
    if kind == "oracle" and "goal" in spec:
        spec["task"] = compile_goal(spec.pop("goal"), family)
    if kind == "calibrated-wrapper" and "base" in spec and isinstance(spec["base"], Mapping):
        base_spec = dict(spec["base"])
        base_kind = base_spec.pop("kind")
        spec["base"] = make_agent(base_kind, base_spec)
    return make_agent(kind, spec)


def build_budget(config: Mapping[str, Any]) -> Budget:
    spec = _cfg_get(config, "budget", required=False, default="ample")
    if spec == "ample":
        return AMPLE
    if not isinstance(spec, Mapping):
        raise ConfigError("budget", "must be 'ample' or a component mapping")
    unknown = set(spec) - set(BUDGET_COMPONENTS)
    if unknown:
        raise ConfigError("budget", f"unknown components: {sorted(unknown)}")
    return Budget(**{k: int(v) for k, v in spec.items()})


def build_plan(config: Mapping[str, Any]) -> SamplingPlan:
    spec = _cfg_get(config, "plan", required=False, default={})
    try:
        return SamplingPlan(
            mode=spec.get("mode", "exact"),
            n_tasks=spec.get("n_tasks"),
            n_rollouts=int(spec.get("n_rollouts", 100)),
            alpha=float(spec.get("alpha", 0.05)),
            exact_support_cap=int(spec.get("exact_support_cap", 64)),
        )
    except ValueError as exc:
        raise ConfigError("plan", str(exc)) from exc


def build_axiom_params(config: Mapping[str, Any]) -> AxiomParams:
    spec = _cfg_get(config, "axiom_params", required=False, default={})
    valid = {f.name for f in dataclasses.fields(AxiomParams)}
    unknown = set(spec) - valid
    if unknown:
        raise ConfigError("axiom_params", f"unknown fields: {sorted(unknown)}")
    try:
        return AxiomParams(**{k: float(v) for k, v in spec.items()})
    except ValueError as exc:
        raise ConfigError("axiom_params", str(exc)) from exc


def build_enumeration_setup(spec: Mapping[str, Any]) -> tuple[EnumerationSetup, dict[str, float]]:
    preset = spec.get("preset")
    if preset == "memorizer":
        k = int(spec.get("support", 2))
        n = int(spec.get("n", 1))
        tasks = tuple(f"t{i}" for i in range(k))
        scores: dict[tuple[str, str], float] = {}
        for size in range(1, n + 1):
            for combo in itertools.product(tasks, repeat=size):
                variant = "mem:" + "+".join(sorted(set(combo)))
                for t in tasks:
                    scores[(variant, t)] = 1.0 if t in combo else 0.0
        setup = EnumerationSetup(
            tasks=tasks,
            n=n,
            update_rule=lambda d: "mem:" + "+".join(sorted(set(d))),
            per_variant_scores=scores,
        )
    elif preset == "constant":
        k = int(spec.get("support", 2))
        n = int(spec.get("n", 2))
        value = float(spec.get("score", 0.5))
        tasks = tuple(f"t{i}" for i in range(k))
        scores = {("fixed", t): value for t in tasks}
        setup = EnumerationSetup(
            tasks=tasks, n=n, update_rule=lambda d: "fixed", per_variant_scores=scores
        )
    else:
        raise ConfigError("setup.preset", f"unknown preset {preset!r} (memorizer|constant)")
    weights = spec.get("weights")
    if weights is None:
        mu = {t: 1.0 / len(setup.tasks) for t in setup.tasks}
    else:
        if len(weights) != len(setup.tasks):
            raise ConfigError("setup.weights", "length must match the task count")
        total = float(sum(weights))
        mu = {t: float(w) / total for t, w in zip(setup.tasks, weights)}
    return setup, mu


def validate_config(config: Mapping[str, Any]) -> None:
    kind = config.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError("kind", f"must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    if not isinstance(config.get("seed", 0), int):
        raise ConfigError("seed", "must be an integer")
    if kind != "transfer":
        _cfg_get(config, "family")
    if kind in ("evaluate", "axioms", "fragility", "worst-case", "robustness", "externality", "drift"):
        _cfg_get(config, "distribution")
    if kind == "drift":
        _cfg_get(config, "distribution_end")
    if kind == "fragility":
        _cfg_get(config, "eta")
    if kind == "externality":
        for fieldname in ("epsilon", "n", "trials", "tau_bad"):
            _cfg_get(config, fieldname)
    if kind == "transfer":
        _cfg_get(config, "setup")


# ---------------------------------------------------------------------------
# result serialization


def jsonify(obj: Any) -> Any:
    """Plain-JSON rendering of domain objects (stable key order downstream)."""
    if isinstance(obj, Task):
        return task_to_dict(obj)
    if isinstance(obj, TaskDistribution):
        return {
            "family": obj.family_id,
            "support": [task_to_dict(t) for t in obj.support],
            "weights": list(obj.weights),
        }
    if isinstance(obj, Budget):
        return {name: getattr(obj, name) for name in BUDGET_COMPONENTS}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonify(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


# ---------------------------------------------------------------------------
# experiment execution


def _resolved(config: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(config)
    out.setdefault("seed", 0)
    out.setdefault("budget", "ample")
    out.setdefault("plan", {"mode": "exact", "n_rollouts": 100, "alpha": 0.05})
    out.setdefault("axiom_params", {})
    return out


def _bundle_config(config: Mapping[str, Any], family: TaskFamily, params, plan, budget) -> BundleConfig:
    protocol = None
    if config.get("protocol") is not None:
        protocol = AdaptationProtocol(int(config["protocol"]["within_task_updates"]))
    exposure = None
    if config.get("exposure") is not None:
        exposure = PreExposure(
            int(config["exposure"]["n_tasks"]), int(config["exposure"].get("seed", 0))
        )
    perturbations = None
    if config.get("perturbations") is not None:
        noise = float(config["perturbations"].get("noise_level", 0.5))
        ops = make_perturbations(family, noise)
        only = config["perturbations"].get("only")
        if only:
            ops = [op for op in ops if op.id in only]
        perturbations = tuple(ops)
    goals = None
    if config.get("goals") is not None:
        spec = config["goals"]
        weights = spec.get("weights") or [1.0 / len(spec["goals"])] * len(spec["goals"])
        total = float(sum(weights))
        goals = GoalDistribution(tuple(spec["goals"]), tuple(w / total for w in weights))
    a2_baseline = None
    if config.get("agent_b") is not None:
        a2_baseline = build_agent(config, family, key="agent_b")
    axioms = tuple(config.get("axioms", AXIOM_ORDER))
    return BundleConfig(
        params=params,
        plan=plan,
        budget=budget,
        axioms=axioms,
        protocol=protocol,
        exposure=exposure,
        n_pairs=int(config.get("n_pairs", 64)),
        perturbations=perturbations,
        goals=goals,
        family=family,
        a2_baseline=a2_baseline,
        calibration_bins=int(config.get("bins", 10)),
    )


def _run_kind(kind: str, config: Mapping[str, Any], mu: TaskDistribution | None) -> dict[str, Any]:
    seed = int(config.get("seed", 0))
    family = build_family(config) if config.get("family") is not None else None
    budget = build_budget(config)
    plan = build_plan(config)
    params = build_axiom_params(config)
    cache = new_cache()

    if kind == "evaluate":
        agent = build_agent(config, family)
        assert mu is not None
        estimate = estimate_generality(mu, agent, budget, plan, seed, cache)
        results: dict[str, Any] = {"generality": jsonify(estimate)}
        if config.get("tail_delta") is not None:
            results["tail_generality"] = estimate_tail_generality(
                mu, agent, budget, float(config["tail_delta"]), plan, seed, cache
            )
        if config.get("failure_theta") is not None:
            results["failure_set"] = jsonify(
                failure_set(mu, agent, budget, float(config["failure_theta"]), plan, seed, cache)
            )
        return results

    if kind == "axioms":
        agent = build_agent(config, family)
        assert mu is not None
        bundle = _bundle_config(config, family, params, plan, budget)
        result = check_bundle(mu, agent, bundle, seed, cache)
        out = {
            "reports": [jsonify(r) for r in result.reports],
            "overall_verdict": result.overall,
        }
        if config.get("weak_variants"):
            out["weak_variants"] = [jsonify(r) for r in check_weak_variants(mu, agent, bundle, seed, cache)]
        return out

    if kind == "fragility":
        agent = build_agent(config, family)
        assert mu is not None
        cert = fragility_demo(
            mu, agent, budget, params, float(config["eta"]), plan, seed, cache, family=family
        )
        return {
            "certificate": jsonify(cert),
            "overall_verdict": "pass" if cert.valid else "fail",
        }

    if kind == "worst-case":
        agent = build_agent(config, family)
        assert mu is not None
        mu_star, value = worst_case_distribution(
            list(mu.support), agent, budget, plan, seed, cache, family_id=mu.family_id
        )
        results = {"mu_star": jsonify(mu_star), "value": value}
        if config.get("eta") is not None:
            adv = tv_constrained_adversary(mu, agent, budget, float(config["eta"]), plan, seed, cache)
            adv_value = estimate_generality(adv, agent, budget, plan, seed, cache).mean
            results["tv_constrained"] = {"eta": float(config["eta"]), "mu": jsonify(adv), "value": adv_value}
        return results

    if kind == "robustness":
        agent = build_agent(config, family)
        assert mu is not None
        noise = float(_cfg_get(config, "perturbations.noise_level", required=False, default=0.5))
        ops = make_perturbations(family, noise)
        only = _cfg_get(config, "perturbations.only", required=False)
        if only:
            ops = [op for op in ops if op.id in only]
        counterexample = robustness_counterexample(mu, agent, ops, budget, params, plan, seed, cache)
        from .axioms import check_g5

        g5 = check_g5(mu, agent, ops, budget, params, plan, seed, cache)
        return {
            "counterexample": jsonify(counterexample) if counterexample else None,
            "g5_report": jsonify(g5),
            "overall_verdict": g5.verdict,
        }

    if kind == "transfer":
        setup, mu_table = build_enumeration_setup(_cfg_get(config, "setup"))
        report = transfer_bound_check(setup, mu_table)
        results = {"transfer_bound": jsonify(report)}
        if config.get("lemma", True):
            results["lemma_iid"] = jsonify(lemma_c2_check(setup, mu_table, correlated=False))
            results["lemma_correlated"] = jsonify(lemma_c2_check(setup, mu_table, correlated=True))
        results["overall_verdict"] = "pass" if report.satisfied else "fail"
        return results

    if kind == "externality":
        agent = build_agent(config, family)
        assert mu is not None
        tau_bad = compile_goal(_cfg_get(config, "tau_bad"), family)
        rules = config.get("rules", ["all_above_threshold", "mean_above", "always_one"])
        reports = externality_experiment(
            mu,
            tau_bad,
            float(config["epsilon"]),
            int(config["n"]),
            rules,
            int(config["trials"]),
            agent,
            budget,
            params,
            plan,
            seed,
            cache,
        )
        return {"reports": [jsonify(r) for r in reports]}

    if kind == "relativity":
        agent = build_agent(config, family)
        witness = relativity_witness(
            family, agent, budget, params, plan, seed, cache,
            search_cap=int(config.get("search_cap", 64)),
        )
        ok = witness.hold_report.verdict == "pass" and witness.fail_report.verdict == "fail"
        return {"witness": jsonify(witness), "overall_verdict": "pass" if ok else "fail"}

    raise ConfigError("kind", f"unhandled experiment kind {kind!r}")


def run_experiment(config: Mapping[str, Any]) -> RunReport:
    """Validate, dispatch, and wrap one experiment into a report."""
    config = _resolved(config)
    validate_config(config)
    seed = int(config["seed"])
    started = time.perf_counter()
    kind = config["kind"]
    if kind == "drift":
        reports = drift_sweep(config)
        results: dict[str, Any] = {
            "steps": [r.results for r in reports],
            "n_steps": len(reports),
        }
    else:
        family = build_family(config) if config.get("family") is not None else None
        mu = (
            build_distribution(config, family)
            if config.get("distribution") is not None and family is not None
            else None
        )
        results = _run_kind(kind, config, mu)
    elapsed = time.perf_counter() - started
    return RunReport(
        config=config,
        results=results,
        fingerprint={"tool": "genlab", "version": __version__, "seed": seed},
        timing={"seconds": elapsed},
    )


def drift_sweep(config: Mapping[str, Any]) -> list[RunReport]:
    """Run the configured inner experiment once per drift step."""
    config = _resolved(config)
    family = build_family(config)
    start = build_distribution(config, family, key="distribution")
    end = build_distribution(config, family, key="distribution_end")
    steps = int(config.get("steps", 2))
    drift = make_drift(start, end, steps)
    inner = config.get("inner", "evaluate")
    if inner not in ("evaluate", "axioms"):
        raise ConfigError("inner", f"drift inner kind must be evaluate|axioms, got {inner!r}")
    out = []
    for index, mu_t in enumerate(drift.steps):
        step_config = dict(config)
        step_config["kind"] = inner
        results = _run_kind(inner, step_config, mu_t)
        results["step_index"] = index
        results["weights"] = list(mu_t.weights)
        out.append(
            RunReport(
                config=step_config,
                results=results,
                fingerprint={"tool": "genlab", "version": __version__, "seed": int(config.get("seed", 0))},
                timing={"seconds": 0.0},
            )
        )
    return out


# ---------------------------------------------------------------------------
# tabular export


def tabular_rows(kind: str, results: Mapping[str, Any]) -> list[dict[str, Any]]:
    if kind == "axioms":
        return [
            {
                "axiom": r["axiom"],
                "verdict": r["verdict"],
                "estimate": r["estimate"],
                "ci_lower": r["ci"][0],
                "ci_upper": r["ci"][1],
                "samples_used": r["samples_used"],
            }
            for r in results.get("reports", [])
        ]
    if kind == "evaluate":
        per_task = results.get("generality", {}).get("per_task", {})
        return [
            {"task": tid, "estimate": pair[0], "rollouts": pair[1]}
            for tid, pair in sorted(per_task.items())
        ]
    if kind == "externality":
        return [dict(r) for r in results.get("reports", [])]
    if kind == "drift":
        rows = []
        for step in results.get("steps", []):
            row = {"step_index": step.get("step_index")}
            if "overall_verdict" in step:
                row["overall_verdict"] = step["overall_verdict"]
            if "generality" in step:
                row["mean"] = step["generality"]["mean"]
            rows.append(row)
        return rows
    return [{"results": json.dumps(results, sort_keys=True)}]


def write_tabular(path: str, rows: list[dict[str, Any]]) -> None:
    if not rows:
        rows = [{"empty": True}]
    fieldnames = sorted({k for row in rows for k in row})
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# CLI


def _exit_code(results: Mapping[str, Any]) -> int:
    verdict = results.get("overall_verdict")
    if verdict == "fail":
        return EXIT_FAIL_VERDICT
    if verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="genlab",
        description="Distribution-indexed, resource-bounded agent evaluation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="report output path")
        p.add_argument(
            "--parallelism",
            type=int,
            default=None,
            help=f"worker count (default from ${PARALLELISM_ENV_VAR} or 1)",
        )
        p.add_argument("--format", choices=("report", "tabular"), default="report")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as handle:
            config = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config {args.config!r}: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    config["kind"] = args.command
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["out"] = args.out
    parallelism = args.parallelism
    if parallelism is None:
        parallelism = int(os.environ.get(PARALLELISM_ENV_VAR, "1"))
    set_parallelism(parallelism)

    try:
        report = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except GenlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    out_path = config.get("out") or f"genlab-{args.command}-report.json"
    if args.format == "tabular":
        out_path = out_path if out_path.endswith(".csv") else out_path.rsplit(".", 1)[0] + ".csv"
        write_tabular(out_path, tabular_rows(args.command, report.results))
    else:
        with open(out_path, "w") as handle:
            json.dump(report.as_dict(), handle, sort_keys=True, indent=2)
            handle.write("\n")

    verdict = report.results.get("overall_verdict", "completed")
    print(f"genlab {args.command}: {verdict} (report: {out_path})")
    return _exit_code(report.results)


if __name__ == "__main__":
    sys.exit(main())
