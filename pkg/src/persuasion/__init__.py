"""Signaling strategies for dynamic Bayesian persuasion in MDPs."""

from .agent import (
    AgentPolicy,
    MetaMDP,
    ValueFunction,
    am_rewards,
    build_meta_mdp,
    build_threat_meta_mdp,
    myopic_response,
    nosig_value,
    solve_mdp,
)
from .evaluation import EvalResult, exact_eval, rollout
from .instances import (
    Graph,
    RandomSpec,
    RoadNavSpec,
    gen_indset_gadget,
    gen_random,
    gen_roadnav,
    indset_strategy,
    load_instance,
    save_instance,
    three_state_example,
)
from .model import (
    ActionAdvice,
    GeneralSignaling,
    PersuasionMDP,
    ThreatStrategy,
    is_ic,
    joint_distribution,
    posterior,
    reveal_all,
    revelation_transform,
    uninformative,
)
from .solver import SolveReport, full_control, nosig, opt_sig_am, opt_sig_myop, threat_strategy

__version__ = "0.1.0"
