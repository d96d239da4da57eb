"""List-decodable linear regression through signed expander sketches.

Rows are hashed into buckets by random left-regular signed bipartite graphs;
bucket moments are aggregated robustly, adversarial buckets are filtered
spectrally and independent seeds yield a short list of candidate regressors.
"""
from .baselines import BaselineFit, huber_fit, ols_fit, ransac_fit, ridge_fit
from .data import (Dataset, Metrics, SynthConfig, TableSchema, build_real_mixture, evaluate,
                   gen_synthetic, gen_synthetic_split, load_table, make_test_set)
from .errors import (AggregationError, ConsensusError, DegenerateStateError, EmptyBucketError,
                     IndefiniteMomentsError, ParameterError, SingularDesignError)
from .expander import (ExpanderSketch, audit_expansion, expansion_loss, light_contamination_census,
                       sample_expander, subset_diagnostics)
from .experiments import ExperimentSpec, run_ablation, run_experiment
from .numkit import pca_fit, ridge_solve, single_linkage_clusters, top_eigenpair
from .pipeline import Candidate, CandidateList, PipelineConfig, run_list, run_seed, select_best
from .robust_agg import geometric_median, mom_median, partition_blocks, robust_aggregate
from .sketch import BucketAssignment, assign_buckets, bucket_moments, bucket_residual_matrix

__version__ = "0.1.0"
