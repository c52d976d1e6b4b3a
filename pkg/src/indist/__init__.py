"""Partition inputs into indistinguishable subsets and test whether an expert adds signal there."""

from .collaborate import (SubsetModels, calibrate_feedback, fit_subset_models, predict_collab,
                          theorem1_check, theorem2_certificates)
from .dataset import Dataset, Schema, ScoreRuleConfig, SplitSpec, load_dataset, score_rule, split_dataset
from .errors import ConfigError, DataError, IndistError, NumericalError
from .partition import (Partition, audit_partition, boost_multicalibrated, epsilon_net_partition,
                        level_set_partition, observational_partition)
from .policy import Policy, PolicyEval, enumerate_policies, evaluate_all, evaluate_policy, pareto_frontier
from .stats import bootstrap_ci, classification_metrics, covariance, mcc, pearson
from .synth import GroundTruth, SynthConfig, generate
from .weak_learners import OracleSpec, RegressionTree, exhaustive_best_tree, fit_tree

__version__ = "0.1.0"
