"""genlab: a laboratory for distribution-indexed, resource-bounded agent evaluation.

Evaluates episodic agents against explicit finite-support task distributions,
decides a quantitative axiom bundle (breadth, adaptivity, transfer,
compositionality, robustness, autonomy, tool use, calibration, constraint
adherence) with conservative confidence intervals, and constructively
demonstrates why none of those verdicts survive unrestricted changes of the
underlying distribution: small-mass shift certificates, worst-case
distributions, robustness counterexamples, exact information-theoretic
transfer bounds, and two-point non-identifiability experiments.
"""

__version__ = "0.1.0"

from .core import (
    AMPLE,
    AgentHandle,
    Budget,
    EnvironmentSpec,
    EpisodeOutcome,
    Exhausted,
    History,
    Task,
    UtilitySpec,
    evaluate_performance,
    run_episode,
    spend,
)
from .ecologies import (
    DriftSequence,
    GoalDistribution,
    PerturbationOp,
    TaskDistribution,
    TaskFamily,
    compile_goal,
    compose,
    make_drift,
    make_instruction_family,
    make_mdp_family,
    make_perturbations,
    make_tool_family,
)
from .agents import AdaptationProtocol, PreExposure, adapt_within_task, make_agent, pre_expose
from .functionals import (
    FailureSetReport,
    GeneralityEstimate,
    SamplingPlan,
    estimate_generality,
    estimate_tail_generality,
    failure_set,
    regret,
)
from .axioms import (
    AxiomParams,
    AxiomReport,
    BundleConfig,
    check_a1,
    check_a2,
    check_a3,
    check_a4,
    check_bundle,
    check_g1,
    check_g2,
    check_g3,
    check_g4,
    check_g5,
    check_weak_variants,
)
from .distances import GroundMetric, mixture_tv_bound, tv_distance, wasserstein
from .adversary import (
    RelativityWitness,
    RobustnessCounterexample,
    ShiftCertificate,
    fragility_demo,
    prescribed_failure_shift,
    relativity_witness,
    robustness_counterexample,
    small_mass_shift,
    tv_constrained_adversary,
    worst_case_distribution,
)
from .inference import (
    EnumerationSetup,
    ExternalityReport,
    LemmaBoundReport,
    TransferBoundReport,
    exact_mutual_information,
    externality_experiment,
    lemma_c2_check,
    transfer_bound_check,
)
from .bridge import bridge_agent, close_bridge
from .harness import RunReport, drift_sweep, main, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
