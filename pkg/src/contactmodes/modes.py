"""Mode discovery on the deviation distribution.

The deviations delta_i produced by joint diagonalisation are treated as a
one-dimensional sample and fitted with a Gaussian mixture (EM, seeded
k-means++ initialisation, BIC model selection).  Hard assignments split
the sample batch into modes; each mode gets its own joint
diagonalisation and average-graph reconstruction, and any mode can be
decomposed again into submodes by recursing the whole pipeline on its
members.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .errors import ConvergenceError
from .jointdiag import JdResult, joint_diagonalise, reconstruct_average
from .network import SymMatrix
from .sampling import SampleBatch
from .seeds import derive_rng, derive_seed_sequence

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class GaussComponent:
    """One mixture component: weight, mean and variance of a 1-D Gaussian."""

    weight: float
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.weight) and math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ValueError("component parameters must be finite")
        if not -_WEIGHT_TOL <= self.weight <= 1.0 + _WEIGHT_TOL:
            raise ValueError(f"component weight {self.weight} outside [0, 1]")
        if self.variance <= 0:
            raise ValueError("component variance must be positive")

    def log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -0.5 * (np.log(2.0 * math.pi * self.variance) + (x - self.mean) ** 2 / self.variance)


@dataclass(frozen=True)
class ModeModel:
    """Fitted 1-D Gaussian mixture with hard assignments.

    ``responsibilities[i, j]`` is the posterior probability that sample i
    belongs to component j; ``assignments[i]`` is the argmax of row i.
    ``bic_table`` is filled by :func:`select_modes` with the best BIC per
    candidate k.
    """

    components: tuple[GaussComponent, ...]
    assignments: np.ndarray
    responsibilities: np.ndarray
    bic: float
    log_likelihood: float
    bic_table: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        resp = np.asarray(self.responsibilities, dtype=float)
        assign = np.asarray(self.assignments, dtype=int)
        if resp.ndim != 2 or resp.shape != (len(assign), len(self.components)):
            raise ValueError("responsibility matrix shape does not match assignments/components")
        wsum = sum(c.weight for c in self.components)
        if abs(wsum - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"component weights sum to {wsum}, not 1")
        rows = resp.sum(axis=1)
        if np.abs(rows - 1.0).max(initial=0.0) > _WEIGHT_TOL:
            raise ValueError("responsibility rows must sum to 1")
        if not np.array_equal(assign, resp.argmax(axis=1)):
            raise ValueError("assignments must be the argmax responsibilities")
        resp = resp.copy()
        resp.setflags(write=False)
        assign = assign.copy()
        assign.setflags(write=False)
        object.__setattr__(self, "responsibilities", resp)
        object.__setattr__(self, "assignments", assign)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def n_samples(self) -> int:
        return len(self.assignments)

    def members(self, j: int) -> np.ndarray:
        """Indices of the samples hard-assigned to component j."""
        return np.flatnonzero(self.assignments == j)


def _variance_floor(x: np.ndarray) -> float:
    spread = float(np.var(x))
    if spread > 0.0:
        return 1e-6 * spread
    return 1e-12


def _log_joint(x, weights, means, variances):
    # (M, K) matrix of log(w_j) + log N(x_i; mu_j, var_j)
    diff2 = (x[:, None] - means[None, :]) ** 2
    return np.log(weights)[None, :] - 0.5 * (np.log(2.0 * math.pi * variances)[None, :] + diff2 / variances[None, :])


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty(k)
    centers[0] = x[rng.integers(len(x))]
    d2 = (x - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = x[rng.integers(len(x))]
            continue
        idx = rng.choice(len(x), p=d2 / total)
        centers[j] = x[idx]
        d2 = np.minimum(d2, (x - centers[j]) ** 2)
    return centers


def _closed_form_k1(x: np.ndarray, floor: float) -> tuple:
    mean = float(x.mean())
    var = max(float(np.var(x)), floor)
    resp = np.ones((len(x), 1))
    ll = float(-0.5 * (np.log(2.0 * math.pi * var) + (x - mean) ** 2 / var).sum())
    return (GaussComponent(1.0, mean, var),), np.zeros(len(x), dtype=int), resp, ll


def fit_gmm_1d(
    deltas,
    k: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> ModeModel:
    """Fit a k-component 1-D Gaussian mixture by EM.

    Initialisation is k-means++ on the raw values, seeded by ``seed``;
    the run is fully deterministic.  The log-likelihood is checked to be
    non-decreasing across iterations.  ``k=1`` uses the closed form
    (sample mean, population variance).
    """
    x = np.asarray(deltas, dtype=float).ravel()
    m = len(x)
    if not (1 <= k <= m):
        raise ValueError(f"need 1 <= k <= n_samples, got k={k}, n={m}")
    if not np.all(np.isfinite(x)):
        raise ValueError("deltas must be finite")
    distinct = np.unique(x).size
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct value(s) in the sample")

    floor = _variance_floor(x)
    if k == 1:
        components, assignments, resp, ll = _closed_form_k1(x, floor)
    else:
        rng = derive_rng(seed, "gmm-init", k)
        centers = _kmeanspp_centers(x, k, rng)
        hard = np.argmin((x[:, None] - centers[None, :]) ** 2, axis=1)
        weights = np.empty(k)
        means = np.empty(k)
        variances = np.empty(k)
        global_var = max(float(np.var(x)), floor)
        for j in range(k):
            sel = x[hard == j]
            if len(sel) == 0:
                weights[j] = 1.0 / m
                means[j] = centers[j]
                variances[j] = global_var
            else:
                weights[j] = len(sel) / m
                means[j] = sel.mean()
                variances[j] = max(float(np.var(sel)), floor)
        weights /= weights.sum()

        ll = -math.inf
        resp = None
        for _ in range(max_iter):
            lp = _log_joint(x, weights, means, variances)
            norm = logsumexp(lp, axis=1)
            new_ll = float(norm.sum())
            resp = np.exp(lp - norm[:, None])
            if new_ll < ll - 1e-9 * (1.0 + abs(ll)):
                raise ConvergenceError("EM log-likelihood decreased")
            if new_ll - ll < tol * (1.0 + abs(new_ll)):
                ll = new_ll
                break
            ll = new_ll
            nk = np.maximum(resp.sum(axis=0), 1e-300)
            weights = nk / m
            means = resp.T @ x / nk
            variances = np.maximum(((x[:, None] - means[None, :]) ** 2 * resp).sum(axis=0) / nk, floor)
        components = tuple(GaussComponent(float(w), float(mu), float(v)) for w, mu, v in zip(weights, means, variances))
        assignments = resp.argmax(axis=1)

    bic = (3 * k - 1) * math.log(m) - 2.0 * ll
    return ModeModel(
        components=components,
        assignments=assignments,
        responsibilities=resp,
        bic=float(bic),
        log_likelihood=ll,
    )


def _restart_seed(seed: int, k: int, restart: int) -> int:
    return int(derive_seed_sequence(seed, "mode-restart", k, restart).generate_state(1)[0])


def select_modes(
    deltas,
    k_max: int = 8,
    seed: int = 0,
    n_restarts: int = 10,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> ModeModel:
    """Fit mixtures for k = 1..k_max and keep the minimum-BIC model.

    Each k gets ``n_restarts`` independently seeded EM runs; ties are
    broken lexicographically on (BIC, k, restart index) so the selection
    is deterministic.  k is silently capped at the number of distinct
    values.  The returned model carries the per-k best-BIC table.
    """
    x = np.asarray(deltas, dtype=float).ravel()
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if len(x) == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("deltas must be finite")
    k_cap = min(k_max, int(np.unique(x).size), len(x))

    best = None
    best_key = None
    table = []
    for k in range(1, k_cap + 1):
        restarts = 1 if k == 1 else n_restarts
        k_best = math.inf
        for r in range(restarts):
            model = fit_gmm_1d(x, k, seed=_restart_seed(seed, k, r), max_iter=max_iter, tol=tol)
            k_best = min(k_best, model.bic)
            key = (model.bic, k, r)
            if best_key is None or key < best_key:
                best, best_key = model, key
        table.append((k, float(k_best)))
    return replace(best, bic_table=tuple(table))


@dataclass(frozen=True)
class TimeHistogram:
    """Per-mode histogram of sample start times over shared bins."""

    bin_edges: np.ndarray
    counts: np.ndarray  # shape (n_modes, n_bins)

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=int)
        if counts.ndim != 2 or counts.shape[1] != len(edges) - 1:
            raise ValueError("counts shape does not match bin edges")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def n_modes(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    def total(self) -> np.ndarray:
        """Histogram of all samples regardless of mode."""
        return self.counts.sum(axis=0)


def mode_time_histogram(model: ModeModel, batch: SampleBatch, bin_width: float) -> TimeHistogram:
    """Histogram each mode's sample start times on bins aligned to the
    trace start."""
    if model.n_samples != len(batch.samples):
        raise ValueError("model was fitted on a different number of samples than the batch holds")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    times = batch.start_times()
    t0 = batch.source.t_min
    t1 = max(batch.source.t_max, float(times.max(initial=t0)))
    n_bins = max(1, int(math.ceil((t1 - t0) / bin_width - 1e-12)))
    edges = t0 + bin_width * np.arange(n_bins + 1)
    counts = np.zeros((model.k, n_bins), dtype=int)
    for j in range(model.k):
        counts[j], _ = np.histogram(times[model.assignments == j], bins=edges)
    return TimeHistogram(bin_edges=edges, counts=counts)


@dataclass(frozen=True)
class ModeSummary:
    """One mode: its member sample indices and reconstructed average graph."""

    index: int
    members: np.ndarray
    matrix: SymMatrix
    single_sample: bool
    result: JdResult | None

    def __post_init__(self):
        members = np.asarray(self.members, dtype=int)
        members.setflags(write=False)
        object.__setattr__(self, "members", members)

    @property
    def count(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ModeReport:
    """Full mode decomposition of a batch: the fitted mixture, one
    average graph per mode, the overall average graph, and per-mode
    start-time histograms."""

    batch: SampleBatch
    model: ModeModel
    modes: tuple[ModeSummary, ...]
    overall_result: JdResult
    overall_matrix: SymMatrix
    histogram: TimeHistogram

    def __post_init__(self):
        if self.modes:
            joined = np.concatenate([m.members for m in self.modes])
        else:
            joined = np.array([], dtype=int)
        expected = np.arange(len(self.batch.samples))
        if not np.array_equal(np.sort(joined), expected):
            raise ValueError("mode member sets must partition the batch")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def deltas(self) -> np.ndarray:
        return self.overall_result.deviations


def per_mode_reconstruction(
    model: ModeModel,
    batch: SampleBatch,
    bin_width: float | None = None,
    overall: JdResult | None = None,
    tol: float = 1e-9,
    max_sweeps: int = 100,
) -> ModeReport:
    """Rebuild the average graph independently for every mode.

    Each nonempty mode's member matrices get their own joint
    diagonalisation and reconstruction; a single-sample mode keeps its
    lone matrix and is flagged.  Empty modes are dropped with a warning.
    ``overall`` may pass in a precomputed whole-batch diagonalisation to
    avoid repeating it.
    """
    if model.n_samples != len(batch.samples):
        raise ValueError("model was fitted on a different number of samples than the batch holds")
    if overall is None:
        overall = joint_diagonalise(batch, tol=tol, max_sweeps=max_sweeps)
    elif overall.n != batch.n_nodes or overall.n_samples != len(batch.samples):
        raise ValueError("precomputed overall result does not match the batch")
    overall_matrix = reconstruct_average(overall)

    stack = batch.matrices()
    summaries = []
    for j in range(model.k):
        members = model.members(j)
        if len(members) == 0:
            warnings.warn(f"mode {j} is empty and was dropped", stacklevel=2)
            continue
        if len(members) == 1:
            matrix = batch.samples[members[0]].matrix
            summaries.append(ModeSummary(index=j, members=members, matrix=matrix, single_sample=True, result=None))
            continue
        sub = joint_diagonalise(stack[members], tol=tol, max_sweeps=max_sweeps)
        summaries.append(
            ModeSummary(
                index=j,
                members=members,
                matrix=reconstruct_average(sub),
                single_sample=False,
                result=sub,
            )
        )

    if bin_width is None:
        span = batch.source.t_max - batch.source.t_min
        bin_width = span / 50.0 if span > 0 else 1.0
    histogram = mode_time_histogram(model, batch, bin_width)
    return ModeReport(
        batch=batch,
        model=model,
        modes=tuple(summaries),
        overall_result=overall,
        overall_matrix=overall_matrix,
        histogram=histogram,
    )


def decompose(
    batch: SampleBatch,
    k_max: int = 8,
    seed: int = 0,
    tol: float = 1e-9,
    max_sweeps: int = 100,
    bin_width: float | None = None,
    log_delta: bool = False,
    n_restarts: int = 10,
) -> ModeReport:
    """Whole pipeline on a batch: joint diagonalisation, mixture fit with
    BIC selection on the deviations, per-mode reconstruction.

    ``log_delta`` fits the mixture on log-transformed deviations instead
    of raw ones (assignments still partition the same samples).
    """
    overall = joint_diagonalise(batch, tol=tol, max_sweeps=max_sweeps)
    values = overall.deviations
    if log_delta:
        guard = 1e-12 * (float(values.max(initial=0.0)) + 1.0)
        values = np.log(values + guard)
    model = select_modes(values, k_max=k_max, seed=seed, n_restarts=n_restarts)
    return per_mode_reconstruction(
        model,
        batch,
        bin_width=bin_width,
        overall=overall,
        tol=tol,
        max_sweeps=max_sweeps,
    )


def submode_decompose(
    report: ModeReport,
    mode: int,
    k_max: int = 8,
    seed: int = 0,
    tol: float = 1e-9,
    max_sweeps: int = 100,
    bin_width: float | None = None,
    n_restarts: int = 10,
) -> ModeReport:
    """Recurse the pipeline on a single mode's members.

    Re-runs joint diagonalisation on just those samples, recomputes the
    deviations in the mode's own basis, and fits modes on them; the
    result is a full ModeReport for the subset.  Requires at least
    2*k_max members.
    """
    if not 0 <= mode < len(report.modes):
        raise ValueError(f"mode index {mode} out of range")
    members = report.modes[mode].members
    if len(members) < 2 * k_max:
        raise ValueError(f"mode {mode} has {len(members)} samples; need at least {2 * k_max} to decompose")
    sub = report.batch.subset(members)
    return decompose(
        sub,
        k_max=k_max,
        seed=seed,
        tol=tol,
        max_sweeps=max_sweeps,
        bin_width=bin_width,
        n_restarts=n_restarts,
    )


def kde_density(values, grid=None, n_points: int = 256, bandwidth: float | None = None):
    """Gaussian-kernel density estimate with Silverman's bandwidth.

    Returns ``(grid, density)``; mainly for plotting the smoothed
    deviation distribution.
    """
    x = np.asarray(values, dtype=float).ravel()
    if len(x) == 0:
        raise ValueError("need at least one value")
    if bandwidth is None:
        sigma = float(np.std(x))
        q75, q25 = np.percentile(x, [75.0, 25.0])
        iqr = float(q75 - q25)
        spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
        bandwidth = 0.9 * spread * len(x) ** (-0.2)
    if bandwidth <= 0:
        bandwidth = 1e-12 * (1.0 + abs(float(x.mean())))
    if grid is None:
        lo = x.min() - 3.0 * bandwidth
        hi = x.max() + 3.0 * bandwidth
        grid = np.linspace(lo, hi, n_points)
    else:
        grid = np.asarray(grid, dtype=float)
    z = (grid[:, None] - x[None, :]) / bandwidth
    density = np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * bandwidth * math.sqrt(2.0 * math.pi))
    return grid, density


@dataclass(frozen=True)
class GammaFit:
    """Moment-fitted gamma distribution with its KS goodness-of-fit."""

    shape: float
    scale: float
    statistic: float
    p_value: float


def gamma_moment_fit(values) -> tuple[float, float]:
    """Shape and scale of the gamma distribution matching sample mean and
    variance."""
    x = np.asarray(values, dtype=float).ravel()
    mean = float(x.mean())
    var = float(np.var(x))
    if mean <= 0 or var <= 0:
        raise ValueError("gamma moment fit needs positive mean and variance")
    return mean * mean / var, var / mean


def gamma_ks(values) -> GammaFit:
    """Moment-fit a gamma distribution and test it with Kolmogorov-Smirnov."""
    x = np.asarray(values, dtype=float).ravel()
    shape, scale = gamma_moment_fit(x)
    res = stats.kstest(x, lambda t: stats.gamma.cdf(t, a=shape, scale=scale))
    return GammaFit(shape=shape, scale=scale, statistic=float(res.statistic), p_value=float(res.pvalue))


def write_report(report: ModeReport, directory) -> list:
    """Export a ModeReport: JSON summary, one matrix file per mode plus
    the overall matrix, and a per-sample CSV."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = {
        "k": report.model.k,
        "bic": report.model.bic,
        "log_likelihood": report.model.log_likelihood,
        "components": [
            {"weight": c.weight, "mean": c.mean, "variance": c.variance} for c in report.model.components
        ],
        "bic_table": [[k, bic] for k, bic in (report.model.bic_table or ())],
        "bin_edges": [float(e) for e in report.histogram.bin_edges],
        "modes": [
            {
                "index": m.index,
                "count": m.count,
                "members": [int(i) for i in m.members],
                "single_sample": m.single_sample,
                "histogram": [int(c) for c in report.histogram.counts[m.index]],
            }
            for m in report.modes
        ],
    }
    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(report_path)

    overall_path = out / "overall.txt"
    np.savetxt(overall_path, report.overall_matrix.values, fmt="%.17g")
    written.append(overall_path)
    for m in report.modes:
        path = out / f"mode_{m.index}.txt"
        np.savetxt(path, m.matrix.values, fmt="%.17g")
        written.append(path)

    deltas = report.deltas()
    times = report.batch.start_times()
    csv_path = out / "samples.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("sample_index,start_time,delta,mode\n")
        for i in range(len(report.batch.samples)):
            fh.write(f"{i},{float(times[i])!r},{float(deltas[i])!r},{int(report.model.assignments[i])}\n")
    written.append(csv_path)
    return written
