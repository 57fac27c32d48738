"""Gibbs chain runner: plain and overlapping-block variants.

Four variants share one sweep structure:

    GS     common scale factor, single-channel updates only
    GSd    per-channel scale factors, single-channel updates only
    GSOB   common scale factor plus n_ob pair-block updates per iteration
    GSOBd  per-channel scale factors plus pair-block updates

Each iteration samples, in order: the scale factor(s), the noise variance
(both conditioned on the previous iteration's coefficients), the m channel
blocks sequentially against the freshest values, and finally -- for the OB
variants -- ``n_ob`` jointly updated channel pairs drawn from the
collinearity-based selection distribution.  The coefficient sample recorded
for an iteration is the state after the pair updates.

Chains are deterministic given (data, config, seed).  Replicates use seeds
derived from the master seed by a splitmix64-style mix of the replicate
index, so any number of replicates can run concurrently and reproducibly.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .blocks import (BlockSchedule, compute_block_probabilities,
                     compute_correlations, select_block)
from .conditionals import (HyperState, _chol_lower, draw_gaussian,
                           sample_lambda_common, sample_lambda_k,
                           sample_sigma2_from_sumsq, theta_block_conditional,
                           theta_k_conditional)
from .kernel import StableSplineKernel, build_kernel
from .regression import Dataset, RegressorBank, build_regressors, theta_block

VARIANTS = ("GS", "GSd", "GSOB", "GSOBd")


@dataclass
class SamplerConfig:
    """Run parameters for one chain."""

    variant: str = "GSOB"
    n_mc: int = 500
    alpha: float = 0.9
    p: int = 50
    beta: float | None = None
    n_ob: int = 1
    burn_in: int | None = None       # default: n_mc // 2
    seed: int = 0
    literal_paper_shape: bool = False
    thin: int = 1
    frozen_hyper: HyperState | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"choose from {VARIANTS}")
        if self.n_mc < 1:
            raise ValueError("need at least one iteration")
        if self.thin < 1:
            raise ValueError("thinning factor must be >= 1")
        if self.burn_in is None:
            self.burn_in = self.n_mc // 2
        if not 0 <= self.burn_in < self.n_mc:
            raise ValueError(
                f"burn-in must lie in [0, n_mc), got {self.burn_in}")
        if self.uses_blocks:
            if self.n_ob < 1:
                raise ValueError("overlapping-block variants need n_ob >= 1")
            if self.beta is None or not self.beta > 0:
                raise ValueError(
                    "overlapping-block variants need a positive selection "
                    "rate beta (no default)")

    @property
    def common_scale(self) -> bool:
        return self.variant in ("GS", "GSOB")

    @property
    def uses_blocks(self) -> bool:
        return self.variant in ("GSOB", "GSOBd")


@dataclass
class Problem:
    """Dataset plus the immutable structures every sweep reads."""

    data: Dataset
    bank: RegressorBank
    kernel: StableSplineKernel


def build_problem(data: Dataset, config: SamplerConfig,
                  dense_budget: int = 50_000_000) -> Problem:
    kernel = build_kernel(config.alpha, config.p)
    bank = build_regressors(data, config.p, dense_budget=dense_budget)
    return Problem(data=data, bank=bank, kernel=kernel)


@dataclass
class ChainState:
    theta: np.ndarray
    hyper: HyperState
    iteration: int


@dataclass
class ChainRecord:
    """Stored traces of one chain (complete or flushed after an abort)."""

    variant: str
    m: int
    p: int
    n_mc: int
    burn_in: int
    thin: int
    seed: int
    theta_samples: np.ndarray        # (n_stored, m*p)
    stored_iterations: np.ndarray    # (n_stored,), 1-based iteration index
    lambda_trace: np.ndarray         # (n_mc,) or (n_mc, m)
    sigma2_trace: np.ndarray         # (n_mc,)
    selected_blocks: np.ndarray      # (n_selected, 3): iteration, i, j
    completed: int                   # iterations actually swept


@dataclass
class PosteriorSummary:
    """Per-coefficient posterior mean, sd and central 95% band."""

    mean: np.ndarray
    sd: np.ndarray
    q025: np.ndarray
    q975: np.ndarray


def derive_seed(master: int, index: int) -> int:
    """Replicate seed: splitmix64 mix of the master seed and index."""
    mask = (1 << 64) - 1
    x = (int(master) + (index + 1) * 0x9E3779B97F4A7C15) & mask
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & mask
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & mask
    x ^= x >> 31
    return x


INIT_RIDGE_EPSILON = 1e-8


def init_chain(problem: Problem, config: SamplerConfig,
               rng: np.random.Generator) -> ChainState:
    """Starting state: unit scale factors, output-variance noise level, and
    sequential per-channel least-squares coefficients, each channel fitted
    to the residual its predecessors leave behind (with a vanishing
    prior-shaped regularization, relative weight 1e-8, for conditioning).

    The sequential fit guarantees nonzero quadratic forms for the first
    scale-factor draws, and it resolves duplicated inputs greedily: the
    first channel absorbs the shared signal, later near-copies start close
    to zero -- the regime in which the per-channel-scale samplers are known
    to pin them."""
    y = problem.data.y
    sigma2_0 = float(np.var(y))
    if not sigma2_0 > 0.0:
        raise ValueError("degenerate output: zero sample variance")
    bank, kernel = problem.bank, problem.kernel
    m, p = bank.m, kernel.p
    theta0 = np.zeros(m * p)
    trace_kinv = float(np.trace(kernel.Kinv))
    for k in range(m):
        data_term = bank.gram(k, k) / sigma2_0
        eps = INIT_RIDGE_EPSILON * float(np.trace(data_term)) / trace_kinv
        precision = data_term + eps * kernel.Kinv
        rhs = bank.partial_projection((k,), theta0) / sigma2_0
        L = _chol_lower(precision, "initialization least squares")
        theta0[k * p:(k + 1) * p] = cho_solve((L, True), rhs)

    if config.frozen_hyper is not None:
        hyper = config.frozen_hyper
        want = "common" if config.common_scale else "per-response"
        if hyper.mode != want:
            raise ValueError(
                f"frozen hyperparameters use mode {hyper.mode!r} but variant "
                f"{config.variant} needs {want!r}")
    elif config.common_scale:
        hyper = HyperState(mode="common", lam=1.0, sigma2=sigma2_0)
    else:
        hyper = HyperState(mode="per-response", lam=np.ones(m),
                           sigma2=sigma2_0)
    return ChainState(theta=theta0, hyper=hyper, iteration=0)


def sweep(state: ChainState, problem: Problem,
          schedule: BlockSchedule | None, config: SamplerConfig,
          rng: np.random.Generator) -> tuple[ChainState, list]:
    """One full Gibbs iteration; returns the new state and the pair
    selections made (empty for the non-block variants)."""
    bank, kernel = problem.bank, problem.kernel
    m, p, n = bank.m, kernel.p, problem.data.n
    theta = state.theta.copy()

    if config.frozen_hyper is not None:
        hyper = state.hyper
    else:
        if config.common_scale:
            shape = 0.5 * n * p if config.literal_paper_shape else None
            lam = sample_lambda_common(theta, kernel, rng, shape=shape)
            mode = "common"
        else:
            lam = np.array([
                sample_lambda_k(theta_block(theta, k, p), kernel, rng)
                for k in range(m)
            ])
            mode = "per-response"
        sigma2 = sample_sigma2_from_sumsq(bank.residual_sumsq(theta), n, rng)
        hyper = HyperState(mode=mode, lam=lam, sigma2=sigma2)

    for k in range(m):
        post = theta_k_conditional(k, theta, hyper, bank, kernel)
        theta[k * p:(k + 1) * p] = draw_gaussian(post, rng)

    selected: list = []
    if config.uses_blocks:
        for _ in range(config.n_ob):
            i, j = select_block(schedule, rng)
            post = theta_block_conditional(i, j, theta, hyper, bank, kernel)
            z = draw_gaussian(post, rng)
            theta[i * p:(i + 1) * p] = z[:p]
            theta[j * p:(j + 1) * p] = z[p:]
            selected.append((i, j))
    return ChainState(theta=theta, hyper=hyper,
                      iteration=state.iteration + 1), selected


def summarize(record: ChainRecord) -> PosteriorSummary:
    """Posterior summaries over the stored post-burn-in samples."""
    keep = record.stored_iterations > record.burn_in
    samples = record.theta_samples[keep]
    if samples.shape[0] == 0:
        raise ValueError("no retained samples: burn-in swallowed the chain")
    q = np.quantile(samples, [0.025, 0.975], axis=0)
    return PosteriorSummary(
        mean=samples.mean(axis=0),
        sd=samples.std(axis=0, ddof=1) if samples.shape[0] > 1
        else np.zeros(samples.shape[1]),
        q025=q[0], q975=q[1],
    )


def run(problem: Problem, config: SamplerConfig,
        rng: np.random.Generator | None = None
        ) -> tuple[ChainRecord, PosteriorSummary]:
    """Run one chain to completion.

    On a numerical abort the partial record is attached to the raised
    exception as ``exc.partial_record`` so callers can flush it to disk.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    bank = problem.bank
    m, p = bank.m, problem.kernel.p

    schedule = None
    if config.uses_blocks:
        schedule = compute_block_probabilities(
            compute_correlations(problem.data), config.beta)

    state = init_chain(problem, config, rng)
    n_stored = config.n_mc // config.thin
    theta_samples = np.empty((n_stored, m * p))
    stored_iterations = np.empty(n_stored, dtype=np.int64)
    lambda_trace = (np.empty(config.n_mc) if config.common_scale
                    else np.empty((config.n_mc, m)))
    sigma2_trace = np.empty(config.n_mc)
    block_log: list = []

    stored = 0
    completed = 0
    try:
        for t in range(1, config.n_mc + 1):
            state, selected = sweep(state, problem, schedule, config, rng)
            lambda_trace[t - 1] = state.hyper.lam
            sigma2_trace[t - 1] = state.hyper.sigma2
            block_log.extend((t, i, j) for i, j in selected)
            if t % config.thin == 0:
                theta_samples[stored] = state.theta
                stored_iterations[stored] = t
                stored += 1
            completed = t
    except Exception as exc:
        partial = ChainRecord(
            variant=config.variant, m=m, p=p, n_mc=config.n_mc,
            burn_in=config.burn_in, thin=config.thin, seed=config.seed,
            theta_samples=theta_samples[:stored],
            stored_iterations=stored_iterations[:stored],
            lambda_trace=lambda_trace[:completed],
            sigma2_trace=sigma2_trace[:completed],
            selected_blocks=_block_array(block_log),
            completed=completed,
        )
        exc.partial_record = partial
        raise

    record = ChainRecord(
        variant=config.variant, m=m, p=p, n_mc=config.n_mc,
        burn_in=config.burn_in, thin=config.thin, seed=config.seed,
        theta_samples=theta_samples[:stored],
        stored_iterations=stored_iterations[:stored],
        lambda_trace=lambda_trace, sigma2_trace=sigma2_trace,
        selected_blocks=_block_array(block_log), completed=completed,
    )
    return record, summarize(record)


def _block_array(block_log: list) -> np.ndarray:
    if not block_log:
        return np.empty((0, 3), dtype=np.int64)
    return np.asarray(block_log, dtype=np.int64)


# --------------------------------------------------------------------------
# Chain persistence
# --------------------------------------------------------------------------

def save_record(record: ChainRecord, summary: PosteriorSummary,
                outdir, aborted: bool = False) -> None:
    """Write the chain artifacts into ``outdir``.

    lambda.csv / sigma2.csv   scalar traces, one row per iteration
    theta_samples.npy         stored coefficient draws, row per iteration
    blocks.csv                pair-update log (iteration, i, j), 0-based
    summary.csv               per-coefficient posterior summaries
    record.json               layout metadata (variant, sizes, burn-in, ...)
    """
    os.makedirs(outdir, exist_ok=True)
    lt = record.lambda_trace
    with open(os.path.join(outdir, "lambda.csv"), "w") as fh:
        if lt.ndim == 1:
            fh.write("iteration,lambda\n")
            for t, val in enumerate(lt, start=1):
                fh.write(f"{t},{val:.17g}\n")
        else:
            fh.write("iteration," +
                     ",".join(f"lambda_{k}" for k in range(lt.shape[1])) + "\n")
            for t, row in enumerate(lt, start=1):
                fh.write(f"{t}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    with open(os.path.join(outdir, "sigma2.csv"), "w") as fh:
        fh.write("iteration,sigma2\n")
        for t, val in enumerate(record.sigma2_trace, start=1):
            fh.write(f"{t},{val:.17g}\n")
    np.save(os.path.join(outdir, "theta_samples.npy"), record.theta_samples)
    with open(os.path.join(outdir, "blocks.csv"), "w") as fh:
        fh.write("iteration,i,j\n")
        for t, i, j in record.selected_blocks:
            fh.write(f"{t},{i},{j}\n")
    if summary is not None:
        with open(os.path.join(outdir, "summary.csv"), "w") as fh:
            fh.write("coefficient,channel,lag,mean,sd,q025,q975\n")
            for c in range(summary.mean.size):
                fh.write(f"{c},{c // record.p},{c % record.p},"
                         f"{summary.mean[c]:.17g},{summary.sd[c]:.17g},"
                         f"{summary.q025[c]:.17g},{summary.q975[c]:.17g}\n")
    meta = {
        "variant": record.variant, "m": record.m, "p": record.p,
        "n_mc": record.n_mc, "burn_in": record.burn_in, "thin": record.thin,
        "seed": record.seed, "completed": record.completed,
        "aborted": aborted,
    }
    with open(os.path.join(outdir, "record.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_record(outdir) -> ChainRecord:
    """Reload a persisted chain (for diagnostics runs)."""
    with open(os.path.join(outdir, "record.json")) as fh:
        meta = json.load(fh)
    lam = np.loadtxt(os.path.join(outdir, "lambda.csv"), delimiter=",",
                     skiprows=1, ndmin=2)[:, 1:]
    if lam.shape[1] == 1:
        lam = lam[:, 0]
    sig = np.loadtxt(os.path.join(outdir, "sigma2.csv"), delimiter=",",
                     skiprows=1, ndmin=2)[:, 1]
    theta = np.load(os.path.join(outdir, "theta_samples.npy"))
    with open(os.path.join(outdir, "blocks.csv")) as fh:
        block_rows = fh.read().strip().splitlines()[1:]
    if block_rows:
        blocks = np.array([[int(v) for v in row.split(",")]
                           for row in block_rows], dtype=np.int64)
    else:
        blocks = np.empty((0, 3), dtype=np.int64)
    thin = meta["thin"]
    stored_iterations = np.arange(1, theta.shape[0] + 1) * thin
    return ChainRecord(
        variant=meta["variant"], m=meta["m"], p=meta["p"], n_mc=meta["n_mc"],
        burn_in=meta["burn_in"], thin=thin, seed=meta["seed"],
        theta_samples=theta, stored_iterations=stored_iterations,
        lambda_trace=lam, sigma2_trace=sig, selected_blocks=blocks,
        completed=meta["completed"],
    )


def config_as_dict(config: SamplerConfig) -> dict:
    """JSON-ready view of a config (frozen hyperparameters excluded)."""
    doc = dataclasses.asdict(config)
    doc.pop("frozen_hyper", None)
    return doc
