"""Criteria evaluators: margin tallies over epsilon grids, projection-angle
profiles, algebraic-difference tests, and norm-ratio analysis.

Per-sample work is independent; all accumulation is over integer counts with
division performed last, so results are identical regardless of how the
sample loop is chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DegenerateVector,
    angle_between,
    as_vector,
    measure,
    normalized_angles,
    plane_basis,
    polarity,
    project,
    ParallelInputs,
    PROJECTION_TOL,
)

__all__ = [
    "EmptyInput",
    "MissingEmbedding",
    "EpsilonGrid",
    "derive_grid",
    "CriteriaConfig",
    "SampleEmbeddings",
    "ConditionTally",
    "SingleConditionTally",
    "oriented_similarity",
    "eval_c1",
    "eval_c3",
    "eval_c4",
    "AngleRecord",
    "AngleProfile",
    "eval_projection_criterion",
    "NormRatioProfile",
    "norm_ratio_profile",
]


class EmptyInput(ValueError):
    pass


class MissingEmbedding(KeyError):
    pass


DEFAULT_EPSILON_COUNT = 132


@dataclass(frozen=True)
class EpsilonGrid:
    """Evenly spaced inclusive margin values with provenance."""

    lo: float
    hi: float
    count: int
    values: np.ndarray

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("grid count must be positive")
        if self.lo > self.hi:
            raise ValueError("grid lo must not exceed hi")
        if len(self.values) != self.count:
            raise ValueError("grid values length must equal count")


def derive_grid(diffs, count: int = DEFAULT_EPSILON_COUNT) -> EpsilonGrid:
    """Grid spanning [min(diffs), max(diffs)] with `count` inclusive values."""
    arr = np.asarray(diffs, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("cannot derive an epsilon grid from no differences")
    if not np.all(np.isfinite(arr)):
        raise ValueError("differences must be finite")
    lo = float(arr.min())
    hi = float(arr.max())
    if count == 1:
        values = np.array([lo])
    else:
        values = np.linspace(lo, hi, count)
    return EpsilonGrid(lo=lo, hi=hi, count=count, values=values)


def fixed_grid(lo: float, hi: float, count: int = DEFAULT_EPSILON_COUNT) -> EpsilonGrid:
    """Externally fixed grid range (e.g. to reproduce cross-model pooling)."""
    if count == 1:
        values = np.array([float(lo)])
    else:
        values = np.linspace(lo, hi, count)
    return EpsilonGrid(lo=float(lo), hi=float(hi), count=count, values=values)


@dataclass(frozen=True)
class CriteriaConfig:
    epsilon_count: int = DEFAULT_EPSILON_COUNT
    histogram_bins: int = 50
    histogram_range: tuple[float, float] = (-0.5, 1.5)
    middle_tolerance: float = 1e-6
    theta_d: float = 0.1
    theta_u1: float = 0.1
    # Named alongside theta_u1 but never assigned a concrete role by the
    # source analysis; exposed for configurability, currently unused.
    theta_u2: float = 0.1
    norm_ratio_band: float = 0.05


@dataclass(frozen=True)
class SampleEmbeddings:
    """Embeddings of one (inputs, target) sample: E_A, E_B and the target."""

    a: np.ndarray
    b: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class ConditionTally:
    """2x2 percentage table of two-condition satisfaction over a grid."""

    tt: float
    tf: float
    ft: float
    ff: float
    n_samples: int
    n_grid_points: int
    counts: tuple[int, int, int, int]
    grid1: EpsilonGrid
    grid2: EpsilonGrid

    def cells(self) -> dict[str, float]:
        return {"tt": self.tt, "tf": self.tf, "ft": self.ft, "ff": self.ff}


@dataclass(frozen=True)
class SingleConditionTally:
    """1x2 percentage table of one-condition satisfaction over a grid."""

    t: float
    f: float
    n_samples: int
    n_grid_points: int
    counts: tuple[int, int]
    grid: EpsilonGrid

    def cells(self) -> dict[str, float]:
        return {"t": self.t, "f": self.f}


def oriented_similarity(kind: str, x, y) -> float:
    """Measure oriented so that larger always means more similar.

    This is the single place where distance measures get negated; every
    margin condition elsewhere uses plain ">= epsilon".
    """
    val = measure(kind, x, y)
    return val if polarity(kind) == "similarity" else -val


def _satisfied_counts(diffs: np.ndarray, grid: EpsilonGrid) -> np.ndarray:
    # Per sample: how many grid values eps satisfy d >= eps. Grid is sorted
    # ascending, so this is the insertion index with ties on the right
    # (boundary d == eps counts as satisfied).
    return np.searchsorted(grid.values, diffs, side="right").astype(np.int64)


def _tally_pair(d1: np.ndarray, d2: np.ndarray,
                grid1: EpsilonGrid, grid2: EpsilonGrid) -> ConditionTally:
    n = len(d1)
    m1, m2 = grid1.count, grid2.count
    s1 = _satisfied_counts(d1, grid1)
    s2 = _satisfied_counts(d2, grid2)
    tt = int(np.dot(s1, s2))
    tf = int(np.dot(s1, m2 - s2))
    ft = int(np.dot(m1 - s1, s2))
    ff = int(np.dot(m1 - s1, m2 - s2))
    total = n * m1 * m2
    return ConditionTally(
        tt=100.0 * tt / total,
        tf=100.0 * tf / total,
        ft=100.0 * ft / total,
        ff=100.0 * ff / total,
        n_samples=n,
        n_grid_points=m1 * m2,
        counts=(tt, tf, ft, ff),
        grid1=grid1,
        grid2=grid2,
    )


def _two_condition_eval(samples, kind, cfg, grids, diff_fn) -> ConditionTally:
    if not samples:
        raise EmptyInput("no samples to evaluate")
    cfg = cfg or CriteriaConfig()
    d1 = np.empty(len(samples))
    d2 = np.empty(len(samples))
    for i, s in enumerate(samples):
        d1[i], d2[i] = diff_fn(kind, s)
    if grids is None:
        grid1 = derive_grid(d1, cfg.epsilon_count)
        grid2 = derive_grid(d2, cfg.epsilon_count)
    else:
        grid1, grid2 = grids
    return _tally_pair(d1, d2, grid1, grid2)


def _c1_diffs(kind: str, s: SampleEmbeddings) -> tuple[float, float]:
    s_ab = oriented_similarity(kind, s.a, s.b)
    return (oriented_similarity(kind, s.a, s.target) - s_ab,
            oriented_similarity(kind, s.b, s.target) - s_ab)


def _c3_diffs(kind: str, s: SampleEmbeddings) -> tuple[float, float]:
    s_bd = oriented_similarity(kind, s.b, s.target)
    return (oriented_similarity(kind, s.a, s.target) - s_bd,
            oriented_similarity(kind, s.a, s.b) - s_bd)


def eval_c1(samples, kind: str, cfg: CriteriaConfig | None = None,
            grids: tuple[EpsilonGrid, EpsilonGrid] | None = None) -> ConditionTally:
    """Overlap margin tally: d1 = S(A,O) - S(A,B), d2 = S(B,O) - S(A,B).

    Independent grids are derived from {d1} and {d2} unless supplied; the
    2x2 cells are averaged over the full Cartesian product of grid values.
    """
    return _two_condition_eval(samples, kind, cfg, grids, _c1_diffs)


def eval_c3(samples, kind: str, cfg: CriteriaConfig | None = None,
            grids: tuple[EpsilonGrid, EpsilonGrid] | None = None) -> ConditionTally:
    """Difference margin tally: d1 = S(A,D) - S(B,D), d2 = S(A,B) - S(B,D)."""
    return _two_condition_eval(samples, kind, cfg, grids, _c3_diffs)


def eval_c4(samples, kind: str, cfg: CriteriaConfig | None = None,
            grid: EpsilonGrid | None = None) -> SingleConditionTally:
    """Algebraic-difference tally: d = S(A - B, D) - S(A - B, B).

    Only cosine and ned are supported, mirroring how this check is reported.
    """
    if kind not in ("cosine", "ned"):
        raise ValueError(f"eval_c4 supports cosine and ned only, got {kind!r}")
    if not samples:
        raise EmptyInput("no samples to evaluate")
    cfg = cfg or CriteriaConfig()
    d = np.empty(len(samples))
    for i, s in enumerate(samples):
        delta = as_vector(s.a) - as_vector(s.b)
        if not np.any(delta):
            raise DegenerateVector("E_A - E_B is the zero vector")
        d[i] = (oriented_similarity(kind, delta, s.target)
                - oriented_similarity(kind, delta, s.b))
    if grid is None:
        grid = derive_grid(d, cfg.epsilon_count)
    s_cnt = _satisfied_counts(d, grid)
    t = int(s_cnt.sum())
    total = len(samples) * grid.count
    f = total - t
    return SingleConditionTally(
        t=100.0 * t / total,
        f=100.0 * f / total,
        n_samples=len(samples),
        n_grid_points=grid.count,
        counts=(t, f),
        grid=grid,
    )


MIDDLE = "middle"
BEYOND_A = "beyond_a"
BEYOND_B = "beyond_b"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class AngleRecord:
    t_a: float
    t_b: float
    signed_theta: float
    classification: str
    norm_ratio: float


@dataclass
class AngleProfile:
    """Per-sample normalized angles plus a histogram over t_b."""

    records: list[AngleRecord]
    bin_edges: np.ndarray
    counts: np.ndarray
    skipped: int
    summary: dict = field(default_factory=dict)


def _classify(theta: float, gamma: float) -> str:
    if theta < 0.0:
        return BEYOND_A
    if theta > gamma:
        return BEYOND_B
    return MIDDLE


def eval_projection_criterion(samples, target_role: str = "overlap",
                              cfg: CriteriaConfig | None = None) -> AngleProfile:
    """Project each target onto the plane of its inputs and classify it.

    Samples whose input pair is (near-)collinear are skipped and counted;
    degenerate projections are recorded but excluded from the histogram.
    The summary carries the fractions relevant to the role: middle fraction
    for overlap/union, the near-A cone fraction for difference, and the
    norm-ratio buckets for union.
    """
    if target_role not in ("overlap", "difference", "union"):
        raise ValueError(f"unknown target role: {target_role!r}")
    cfg = cfg or CriteriaConfig()
    records: list[AngleRecord] = []
    skipped = 0
    for s in samples:
        a = as_vector(s.a)
        b = as_vector(s.b)
        v = as_vector(s.target)
        nb = float(np.linalg.norm(b))
        if nb == 0.0:
            skipped += 1
            continue
        ratio = float(np.linalg.norm(a)) / nb
        try:
            basis = plane_basis(a, b)
        except (ParallelInputs, DegenerateVector):
            skipped += 1
            continue
        v_proj = project(v, basis)
        vnorm = float(np.linalg.norm(v))
        if float(np.linalg.norm(v_proj)) < PROJECTION_TOL * vnorm or vnorm == 0.0:
            records.append(AngleRecord(math.nan, math.nan, math.nan,
                                       DEGENERATE, ratio))
            continue
        ang = normalized_angles(v_proj, basis, a, b)
        gamma = angle_between(a, b)
        cls = _classify(ang.signed_theta, gamma)
        records.append(AngleRecord(ang.t_a, ang.t_b, ang.signed_theta, cls, ratio))

    good = [r for r in records if r.classification != DEGENERATE]
    lo, hi = cfg.histogram_range
    t_b_vals = np.array([r.t_b for r in good]) if good else np.empty(0)
    counts, edges = np.histogram(np.clip(t_b_vals, lo, hi),
                                 bins=cfg.histogram_bins, range=(lo, hi))

    n_good = len(good)
    summary = {
        "n_samples": len(records) + skipped,
        "n_classified": n_good,
        "n_degenerate": len(records) - n_good,
        "skipped": skipped,
        "middle_fraction": _frac(good, lambda r: r.classification == MIDDLE),
        "beyond_a_fraction": _frac(good, lambda r: r.classification == BEYOND_A),
        "beyond_b_fraction": _frac(good, lambda r: r.classification == BEYOND_B),
    }
    if target_role == "difference":
        summary["near_a_fraction"] = _frac(good, lambda r: r.t_a < cfg.theta_d)
        summary["theta_d"] = cfg.theta_d
    if target_role == "union":
        band = cfg.norm_ratio_band
        a_larger = [r for r in good if r.norm_ratio > 1.0 + band]
        b_larger = [r for r in good if r.norm_ratio < 1.0 - band]
        comparable = [r for r in good
                      if 1.0 - band <= r.norm_ratio <= 1.0 + band]
        summary["norm_ratio_band"] = band
        summary["theta_u1"] = cfg.theta_u1
        summary["norm_buckets"] = {
            "a_larger": {
                "n": len(a_larger),
                "near_a_fraction": _frac(a_larger, lambda r: r.t_a < cfg.theta_u1),
            },
            "b_larger": {
                "n": len(b_larger),
                "near_b_fraction": _frac(b_larger, lambda r: r.t_b < cfg.theta_u1),
            },
            "comparable": {
                "n": len(comparable),
                "middle_fraction": _frac(comparable,
                                         lambda r: r.classification == MIDDLE),
            },
        }
    return AngleProfile(records=records, bin_edges=edges, counts=counts,
                        skipped=skipped, summary=summary)


def _frac(records, pred) -> float | None:
    if not records:
        return None
    return sum(1 for r in records if pred(r)) / len(records)


@dataclass
class NormRatioProfile:
    ratios: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    median: float
    comparable_fraction: float
    n: int


def norm_ratio_profile(samples, cfg: CriteriaConfig | None = None,
                       hist_range: tuple[float, float] = (0.0, 2.0)) -> NormRatioProfile:
    """Histogram of ||E_A|| / ||E_B|| over the sample set."""
    cfg = cfg or CriteriaConfig()
    ratios = []
    for s in samples:
        a = as_vector(s.a)
        b = as_vector(s.b)
        nb = float(np.linalg.norm(b))
        if nb == 0.0:
            raise DegenerateVector("E_B has zero norm; ratio undefined")
        ratios.append(float(np.linalg.norm(a)) / nb)
    if not ratios:
        raise EmptyInput("no samples for norm-ratio profile")
    arr = np.array(ratios)
    counts, edges = np.histogram(np.clip(arr, *hist_range),
                                 bins=cfg.histogram_bins, range=hist_range)
    band = cfg.norm_ratio_band
    comparable = float(np.mean((arr >= 1.0 - band) & (arr <= 1.0 + band)))
    return NormRatioProfile(ratios=arr, bin_edges=edges, counts=counts,
                            median=float(np.median(arr)),
                            comparable_fraction=comparable, n=len(arr))
