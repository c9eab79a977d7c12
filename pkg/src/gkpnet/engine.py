"""Monte Carlo engine: trial sampling, noise injection, sweeps, statistics.

A :class:`SimConfig` describes one experiment (code, splitter, noise grid,
trial budget); :func:`build_pipeline` pre-assembles every per-trial-constant
artifact (layout, measurement plan, shift matrix, contributor sets, decoding
graphs); :func:`run_sweep` executes the grid with trial-level parallelism and
writes a CSV plus a manifest.

Determinism contract: each trial draws from a counter-based stream keyed by
(master seed, point index, trial index), so results are bit-identical for any
worker count and scheduling order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import decoder, noise
from . import macronet as mn
from .codes import CssCode, FoliatedGraph, foliate, load_code, toric_code
from .splitters import KINDS

SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Ideal GKP peak indices are drawn uniformly from {-K_RANGE, ..., K_RANGE}.
K_RANGE = 3

_WILSON_Z = 1.959963984540054  # two-sided 95%
_WILSON_Z_ONE = 1.6448536269514722  # one-sided 95% (zero-failure upper bound)

_CSV_COLUMNS = [
    "code",
    "distance",
    "splitter",
    "rounds",
    "epsilon",
    "db",
    "trials",
    "failures",
    "p_fail",
    "ci_low",
    "ci_high",
    "seed",
    "wall_s",
]

CONVENTIONS = ("at-least-one", "per-logical")
BINNINGS = ("independent", "correlated")


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class SimConfig:
    """One simulation experiment.

    ``code`` is either the built-in family name ``"toric"`` (with
    ``distance``) or a path to a css-code v1 file.  The noise grid is
    ``epsilons`` (isotropic variances) or equivalently ``dbs`` (squeezing in
    dB, converted on access); per-quadrature scales and the lattice aspect
    ``alpha`` specialise to rectangular-GKP noise.
    """

    code: str = "toric"
    distance: int = 3
    splitter: str = "star"
    rounds: int | None = None  # None -> distance (file codes: required)
    epsilons: tuple[float, ...] = ()
    dbs: tuple[float, ...] = ()
    eps_q_scale: float = 1.0
    eps_p_scale: float = 1.0
    alpha: float = 1.0
    trials: int = 1000
    seed: int = 0
    workers: int = 1
    binning: str = "independent"
    convention: str = "at-least-one"
    csv_path: str | None = None
    manifest_path: str | None = None

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.splitter not in KINDS:
            raise ValueError(f"unknown splitter kind {self.splitter!r}")
        if self.binning not in BINNINGS:
            raise ValueError(f"unknown binning {self.binning!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.epsilons and self.dbs:
            raise ValueError("give epsilons or dbs, not both")
        if not self.epsilons and not self.dbs:
            raise ValueError("empty noise grid")
        for e in self.grid():
            if e < 0.0:
                raise ValueError("epsilon must be >= 0")
        if self.eps_q_scale < 0.0 or self.eps_p_scale < 0.0:
            raise ValueError("noise scales must be >= 0")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.code == "toric" and self.distance < 2:
            raise ValueError("toric distance must be >= 2")

    def grid(self) -> tuple[float, ...]:
        """Noise grid as isotropic epsilon values."""
        if self.epsilons:
            return tuple(float(e) for e in self.epsilons)
        return tuple(noise.db_to_epsilon(db) for db in self.dbs)

    def effective_rounds(self, code: CssCode) -> int:
        if self.rounds is not None:
            return self.rounds
        if code.distance is None:
            raise ValueError("rounds must be given for codes of unknown distance")
        return code.distance

    @staticmethod
    def from_dict(data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(SimConfig)}
        bad = sorted(set(data) - known)
        if bad:
            raise ValueError(f"unknown config fields: {', '.join(bad)}")
        cfg = SimConfig(**data)
        if isinstance(cfg.epsilons, list):
            cfg.epsilons = tuple(cfg.epsilons)
        if isinstance(cfg.dbs, list):
            cfg.dbs = tuple(cfg.dbs)
        return cfg


def load_sim_code(config: SimConfig) -> CssCode:
    if config.code == "toric":
        return toric_code(config.distance)
    path = Path(config.code)
    if not path.exists():
        raise ValueError(f"code {config.code!r}: not a family name or a file")
    return load_code(path)


# ---------------------------------------------------------------------------
# Pipeline (per-trial-constant artifacts)


@dataclass
class Pipeline:
    """Everything that is constant across trials of one experiment."""

    code: CssCode
    code_name: str
    fg: FoliatedGraph
    layout: mn.MacronodeLayout
    plan: mn.MeasurementPlan
    shift: mn.ShiftMatrix
    op_meas: sp.csr_matrix  # M x M: canonical outcomes from homodyne record
    s_samp: sp.csr_matrix  # M x 2M: measured record from input displacements
    contrib: sp.csr_matrix  # node-by-mode contributor incidence
    mode_type: np.ndarray  # 0 = dumbbell A half, 1 = B half, per mode
    graphs: tuple[decoder.DecodingGraph, decoder.DecodingGraph]
    match_ctxs: tuple[decoder.MatchContext, decoder.MatchContext]
    det_mats: tuple[sp.csr_matrix, sp.csr_matrix]
    logical_counts: tuple[int, int]

    @property
    def num_modes(self) -> int:
        return self.layout.num_modes

    @property
    def counted_complexes(self) -> tuple[int, ...]:
        """Complexes whose logical verdicts enter the failure rate.

        A complex left open at the time boundaries (no deterministic
        boundary detectors exist for ancilla-terminated layers) admits
        constant-weight undetectable logical chains hugging the boundary,
        so its logicals are not fault-tolerantly protected at distance d.
        The memory figure of merit counts the time-closed complexes; open
        complexes are still decoded and their verdicts reported per trial.
        """
        closed = tuple(c for c in (0, 1) if not self.graphs[c].has_boundary)
        return closed if closed else (0, 1)

    def mode_variances(self, eps_q: float, eps_p: float, alpha: float) -> np.ndarray:
        """Measurement-plane noise variance per measured mode.

        Each mode's pre-measurement noise covariance (referred through its
        dumbbell half's local shaping) is projected onto the homodyne angle.
        Isotropic noise gives exactly eps for every mode.
        """
        if eps_q == eps_p and alpha == 1.0:
            return np.full(self.num_modes, eps_q)
        sigma_a, sigma_b = noise.transformed_noise(eps_q, eps_p, alpha)
        angles = self.plan.angles()
        out = np.zeros(self.num_modes)
        for m in range(self.num_modes):
            sigma = sigma_b if self.mode_type[m] else sigma_a
            out[m] = noise.measured_variance(sigma, angles[m])
        return out

    def canonical_variances(self, mode_var: np.ndarray) -> np.ndarray:
        """Variance of each canonical outcome under the given mode noise."""
        sq = self.op_meas.copy()
        sq.data = sq.data**2
        return np.asarray(sq @ mode_var).ravel()

    def block_covariances(self, mode_var: np.ndarray) -> list[np.ndarray]:
        """Canonical-outcome covariance per macronode block."""
        out = []
        for u in range(self.layout.num_nodes):
            modes = self.layout.node_modes[u]
            rows = self.op_meas[modes, :].toarray()
            out.append((rows * mode_var) @ rows.T)
        return out


def build_pipeline(config: SimConfig) -> Pipeline:
    """Assemble the full macronode pipeline for one experiment."""
    config.validate()
    code = load_sim_code(config)
    code_name = "toric" if config.code == "toric" else Path(config.code).stem
    fg = foliate(code, rounds=config.effective_rounds(code))
    graph = mn.TargetGraph.from_edges(fg.num_nodes, fg.edges)
    layout = mn.macronize(
        graph, splitter_kind=config.splitter, require_bipartite=config.alpha != 1.0
    )
    plan = mn.measurement_plan(layout, "x", alpha=config.alpha)
    shift = mn.shift_matrix(layout, plan)
    defect = mn.measured_support_defect(shift)
    if defect > 1e-8:
        raise RuntimeError(f"shift matrix leaks onto unmeasured slots ({defect})")
    total = layout.num_modes
    op = shift.canonical_operator()
    op_meas = sp.csr_matrix(op[:, :total])
    s_samp = sp.csr_matrix(mn.forward_network(layout, plan)[:total, :])
    contrib = decoder.contributor_matrix(decoder.contributor_sets(layout), total)
    mode_type = np.zeros(total, dtype=np.uint8)
    for _, mode_b in layout.dumbbells:
        mode_type[mode_b] = 1
    graphs = tuple(decoder.build_decoding_graph(fg, c) for c in (0, 1))
    match_ctxs = tuple(decoder.prepare_matching(g) for g in graphs)
    det_mats = tuple(decoder.detector_matrix(fg, c) for c in (0, 1))
    logical_counts = tuple(len(fg.logical_supports[c]) for c in (0, 1))
    return Pipeline(
        code=code,
        code_name=code_name,
        fg=fg,
        layout=layout,
        plan=plan,
        shift=shift,
        op_meas=op_meas,
        s_samp=s_samp,
        contrib=contrib,
        mode_type=mode_type,
        graphs=graphs,
        match_ctxs=match_ctxs,
        det_mats=det_mats,
        logical_counts=logical_counts,
    )


# ---------------------------------------------------------------------------
# Per-point context and trial execution


@dataclass
class PointContext:
    """Noise-level-dependent precomputation for one grid point."""

    epsilon: float
    eps_q: float
    eps_p: float
    alpha: float
    mode_std: np.ndarray
    canonical_var: np.ndarray
    block_covs: list[np.ndarray] | None  # only for correlated binning
    binning: str
    binner: "decoder.CorrelatedBinner | None" = None


def make_point_context(
    pipeline: Pipeline, config: SimConfig, epsilon: float
) -> PointContext:
    eps_q = config.eps_q_scale * epsilon
    eps_p = config.eps_p_scale * epsilon
    mode_var = pipeline.mode_variances(eps_q, eps_p, config.alpha)
    block_covs = (
        pipeline.block_covariances(mode_var)
        if config.binning == "correlated"
        else None
    )
    binner = (
        decoder.CorrelatedBinner(pipeline.layout, block_covs)
        if block_covs is not None
        else None
    )
    return PointContext(
        epsilon=epsilon,
        eps_q=eps_q,
        eps_p=eps_p,
        alpha=config.alpha,
        mode_std=np.sqrt(mode_var),
        canonical_var=pipeline.canonical_variances(mode_var),
        block_covs=block_covs,
        binning=config.binning,
        binner=binner,
    )


def trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, point, trial).

    The trial index occupies the top word of the 256-bit Philox counter, so
    streams of different trials can never overlap; seed and point index form
    the 128-bit key.
    """
    bits = np.random.Philox(
        counter=np.array([0, 0, 0, trial], dtype=np.uint64),
        key=np.array([seed, point], dtype=np.uint64),
    )
    return np.random.Generator(bits)


def sample_trial(
    pipeline: Pipeline, ctx: PointContext, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One raw homodyne record and its noiseless ground truth.

    The ideal component places every input quadrature on a uniformly random
    sqrt(2 pi)-lattice point and propagates it through the physical network;
    the noise component is an independent Gaussian per measured mode.
    """
    total = pipeline.num_modes
    k = rng.integers(-K_RANGE, K_RANGE + 1, size=2 * total)
    ideal = np.asarray(pipeline.s_samp @ (SQRT_2PI * k.astype(float))).ravel()
    shot = rng.standard_normal(total) * ctx.mode_std
    return ideal + shot, ideal


@dataclass
class TrialRecord:
    verdicts: tuple[np.ndarray, np.ndarray]  # per complex: logical flips
    defect_counts: tuple[int, int]

    @property
    def any_failure(self) -> bool:
        return bool(self.verdicts[0].any() or self.verdicts[1].any())

    @property
    def num_failures(self) -> int:
        return int(self.verdicts[0].sum() + self.verdicts[1].sum())


def run_trial(
    pipeline: Pipeline, ctx: PointContext, rng: np.random.Generator
) -> TrialRecord:
    """Sample, process, bin, decode both complexes; report logical flips.

    Verdicts are relative to the trial's own noiseless reference: a logical
    failure is a corrected parity that differs from the ideal-GKP outcome of
    the same peak configuration.
    """
    raw, ideal = sample_trial(pipeline, ctx, rng)
    vals = np.asarray(pipeline.op_meas @ raw).ravel()
    vals_ideal = np.asarray(pipeline.op_meas @ ideal).ravel()
    bins_ideal = decoder.independent_bins(vals_ideal)
    if ctx.binning == "correlated":
        bins = ctx.binner(vals)
    else:
        bins = decoder.independent_bins(vals)
    bits = decoder.node_bits(bins, pipeline.contrib)
    bits_ideal = decoder.node_bits(bins_ideal, pipeline.contrib)
    err = np.bitwise_xor(bits, bits_ideal)
    flip_probs = decoder.node_flip_probs(
        vals, bins, ctx.canonical_var, pipeline.contrib
    )
    verdicts = []
    counts = []
    for c in (0, 1):
        defects = decoder.defects_from_bits(err, pipeline.det_mats[c])
        weights = decoder.mechanism_weights(flip_probs, pipeline.graphs[c])
        correction = decoder.match_defects(
            pipeline.graphs[c], defects, weights, pipeline.match_ctxs[c]
        )
        verdicts.append(decoder.logical_parities(err, correction, pipeline.fg, c))
        counts.append(int(defects.sum()))
    return TrialRecord(verdicts=(verdicts[0], verdicts[1]), defect_counts=(counts[0], counts[1]))


# ---------------------------------------------------------------------------
# Point and sweep execution


@dataclass
class PointResult:
    code: str
    distance: int
    splitter: str
    rounds: int
    epsilon: float
    db: float
    trials: int
    failures: int
    p_fail: float
    ci_low: float
    ci_high: float
    seed: int
    wall_s: float
    defect_totals: tuple[int, int] = (0, 0)  # diagnostics, not in the CSV

    def csv_row(self) -> list[str]:
        return [
            self.code,
            str(self.distance),
            self.splitter,
            str(self.rounds),
            _fmt(self.epsilon),
            _fmt(self.db),
            str(self.trials),
            str(self.failures),
            _fmt(self.p_fail),
            _fmt(self.ci_low),
            _fmt(self.ci_high),
            str(self.seed),
            f"{self.wall_s:.3f}",
        ]


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def wilson_interval(failures: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval; one-sided upper bound at zero failures."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if failures == 0:
        z = _WILSON_Z_ONE
        return 0.0, z * z / (trials + z * z)
    p = failures / trials
    z = _WILSON_Z
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    half /= denom
    return max(center - half, 0.0), min(center + half, 1.0)


_WORKER: dict = {}


def _init_worker(pipeline, ctx, seed, point_index):
    _WORKER["pipeline"] = pipeline
    _WORKER["ctx"] = ctx
    _WORKER["seed"] = seed
    _WORKER["point"] = point_index


def _run_chunk(bounds: tuple[int, int]) -> tuple[int, int, int, int]:
    """(at-least-one failures, per-logical failures, defects0, defects1)."""
    pipeline = _WORKER["pipeline"]
    ctx = _WORKER["ctx"]
    seed = _WORKER["seed"]
    point = _WORKER["point"]
    counted = pipeline.counted_complexes
    any_f = per_f = d0 = d1 = 0
    for trial in range(bounds[0], bounds[1]):
        rec = run_trial(pipeline, ctx, trial_rng(seed, point, trial))
        any_f += int(any(rec.verdicts[c].any() for c in counted))
        per_f += sum(int(rec.verdicts[c].sum()) for c in counted)
        d0 += rec.defect_counts[0]
        d1 += rec.defect_counts[1]
    return any_f, per_f, d0, d1


def _warm_matcher() -> None:
    """Compile/load the matching kernel once, pre-fork, in the parent."""
    from ._blossom import min_weight_perfect_matching

    min_weight_perfect_matching(
        np.array([0]), np.array([1]), np.array([1.0]), 2
    )


def run_point(
    pipeline: Pipeline,
    config: SimConfig,
    point_index: int,
    epsilon: float,
) -> PointResult:
    """Run all trials of one grid point, parallel over workers."""
    start = time.perf_counter()
    _warm_matcher()
    ctx = make_point_context(pipeline, config, epsilon)
    chunk = max(1, math.ceil(config.trials / (4 * config.workers)))
    bounds = [
        (lo, min(lo + chunk, config.trials))
        for lo in range(0, config.trials, chunk)
    ]
    args = (pipeline, ctx, config.seed, point_index)
    if config.workers == 1 or len(bounds) == 1:
        _init_worker(*args)
        parts = [_run_chunk(b) for b in bounds]
    else:
        mp_ctx = multiprocessing.get_context("fork")
        with mp_ctx.Pool(
            config.workers, initializer=_init_worker, initargs=args
        ) as pool:
            parts = pool.map(_run_chunk, bounds)
    any_f = sum(p[0] for p in parts)
    per_f = sum(p[1] for p in parts)
    defect_totals = (sum(p[2] for p in parts), sum(p[3] for p in parts))
    num_logicals = sum(
        pipeline.logical_counts[c] for c in pipeline.counted_complexes
    )
    if config.convention == "per-logical":
        trials = config.trials * num_logicals
        failures = per_f
    else:
        trials = config.trials
        failures = any_f
    ci_low, ci_high = wilson_interval(failures, trials)
    return PointResult(
        code=pipeline.code_name,
        distance=pipeline.code.distance or 0,
        splitter=config.splitter,
        rounds=config.effective_rounds(pipeline.code),
        epsilon=epsilon,
        db=noise.epsilon_to_db(epsilon) if epsilon > 0 else float("inf"),
        trials=trials,
        failures=failures,
        p_fail=failures / trials,
        ci_low=ci_low,
        ci_high=ci_high,
        seed=config.seed,
        wall_s=time.perf_counter() - start,
        defect_totals=defect_totals,
    )


def run_sweep(config: SimConfig) -> list[PointResult]:
    """Run the full noise grid and write CSV/manifest if paths are set."""
    config.validate()
    pipeline = build_pipeline(config)
    results = [
        run_point(pipeline, config, i, eps) for i, eps in enumerate(config.grid())
    ]
    if config.csv_path:
        write_csv(results, config.csv_path)
    if config.manifest_path:
        write_manifest(config, pipeline, config.manifest_path)
    return results


def write_csv(results: list[PointResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for r in results:
            writer.writerow(r.csv_row())


def csv_body(path: str | Path) -> str:
    """CSV content with the timing column masked, for determinism checks.

    Every result field is bit-deterministic for any worker count; ``wall_s``
    is wall-clock time, so it is stripped before byte comparison.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines) + "\n"


def write_manifest(
    config: SimConfig, pipeline: Pipeline, path: str | Path
) -> None:
    from . import __version__

    manifest = {
        "config": dataclasses.asdict(config),
        "code": {
            "name": pipeline.code_name,
            "n": pipeline.code.n,
            "k": pipeline.code.k,
            "d": pipeline.code.distance,
        },
        "foliation": {
            "rounds": pipeline.fg.rounds,
            "nodes": pipeline.fg.num_nodes,
            "modes": pipeline.num_modes,
        },
        "seed": config.seed,
        "versions": {
            "gkpnet": __version__,
            "numpy": np.__version__,
        },
        "workers": config.workers,
        "hardware_threads": os.cpu_count(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
