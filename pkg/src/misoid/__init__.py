"""Bayesian identification of MISO FIR systems under collinear inputs.

Impulse responses carry a stable spline Gaussian prior; posteriors are
explored with Gibbs sampling, optionally augmented with jointly updated
channel pairs chosen by input collinearity (the GSOB family of samplers).
"""

from .blocks import (BlockSchedule, compute_block_probabilities,
                     compute_correlations, select_block)
from .conditionals import (GaussianBlockPosterior, HyperState, draw_gaussian,
                           sample_lambda_common, sample_lambda_k,
                           sample_sigma2, theta_block_conditional,
                           theta_k_conditional)
from .diagnostics import (AnalyticPosterior, DiagnosticsReport,
                          analytic_posterior, build_report,
                          effective_sample_size, fit_metric, iact,
                          joint_conditional, pair_sum_error,
                          run_oracle_checks)
from .errors import DegenerateRateError, FactorizationError, SizeGuardError
from .kernel import StableSplineKernel, build_kernel, quad_form
from .regression import (Dataset, RegressorBank, build_regressors,
                         load_dataset_csv, predict, save_dataset_csv,
                         theta_block)
from .sampler import (ChainRecord, ChainState, PosteriorSummary, Problem,
                      SamplerConfig, VARIANTS, build_problem, derive_seed,
                      init_chain, load_record, run, save_record, summarize,
                      sweep)
from .simgen import (CollinearInputSpec, RandomSystemSpec, SyntheticSystem,
                     gamma_for_target_c, generate_inputs, generate_system,
                     load_truth_json, synthesize_dataset, write_truth_json)

__version__ = "0.1.0"
