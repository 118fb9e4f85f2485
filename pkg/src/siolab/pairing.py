"""Bilinear pairings of truncated transforms against simple functions,
their overlap decomposition, and Cauchy-convergence studies.

For simple functions f = sum_i a_i X(Q_i), g = sum_j b_j X(P_j) the
pairing expands bilinearly:

    int T^eps(f) g dmu = sum_j sum_i b_j a_i [double integral over
                         P_j x Q_i of K(x - y), |x - y| > eps]

so everything reduces to pair sums between restricted atom sets.  A
single shape pair (P, Q) splits by overlap into the four blocks

    I1: P&Q -> P&Q   (vanishes by antisymmetry, for every eps)
    I2: P\\Q -> P&Q   I3: P&Q -> Q\\P   I4: P\\Q -> Q\\P

with x ranging over the first set and y over the second.  I3 mirrors I2
under relabeling, which is the discrete Fubini identity checked here.
Shape membership is closed, consistent with the closed balls used by
the operators; assignment of exterior atoms to complement regions uses
the first-match rule of the geometry module, so no atom is counted
twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Ball, Shape, decompose_complement
from .measure import DiscreteMeasure
from .operators import PairSumStats, pair_sum_stats

CANCELLATION_FACTOR = 2.0**-50  # cancellation bounds read N^2 * this * max|term|


@dataclass(eq=False)
class SimpleFunction:
    """Finite linear combination of shape indicators, homogeneous per
    function: all balls or all rectangles.
    """

    terms: list[tuple[float, Shape]]
    space: str = ""

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one term")
        kinds = {type(s) for _, s in self.terms}
        if len(kinds) != 1:
            raise ValueError("shapes must be homogeneous (all balls or all rectangles)")
        inferred = "balls" if kinds == {Ball} else "rectangles"
        if not self.space:
            self.space = inferred
        elif self.space != inferred:
            raise ValueError(f"space tag {self.space!r} does not match shapes")

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts))
        for coef, shape in self.terms:
            out += coef * shape.contains_many(pts)
        return out

    def evaluate(self, point) -> float:
        return float(self.evaluate_many(point)[0])


def pairing(mu: DiscreteMeasure, kernel, f: SimpleFunction, g: SimpleFunction, eps: float) -> float:
    """int T^eps(f)(x) g(x) dmu(x), expanded bilinearly over shape pairs."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    pieces = []
    for b_j, p_shape in g.terms:
        mask_p = p_shape.contains_many(mu.positions)
        for a_i, q_shape in f.terms:
            mask_q = q_shape.contains_many(mu.positions)
            stats = pair_sum_stats(
                mu.positions[mask_p], mu.weights[mask_p],
                mu.positions[mask_q], mu.weights[mask_q],
                kernel, eps,
            )
            pieces.append(b_j * a_i * stats.value)
    return math.fsum(pieces)


class IDecomposition(NamedTuple):
    i1: float
    i2: float
    i3: float
    i4: float
    max_abs_term: float
    pair_count: int

    @property
    def total(self) -> float:
        return math.fsum([self.i1, self.i2, self.i3, self.i4])


def _overlap_masks(mu: DiscreteMeasure, p_shape: Shape, q_shape: Shape):
    in_p = p_shape.contains_many(mu.positions)
    in_q = q_shape.contains_many(mu.positions)
    return in_p & in_q, in_p & ~in_q, in_q & ~in_p


def _masked_pair(mu, kernel, mask_x, mask_y, eps) -> PairSumStats:
    return pair_sum_stats(
        mu.positions[mask_x], mu.weights[mask_x],
        mu.positions[mask_y], mu.weights[mask_y],
        kernel, eps,
    )


def i_decomposition(mu: DiscreteMeasure, kernel, p_shape: Shape, q_shape: Shape, eps: float) -> IDecomposition:
    """The four overlap blocks of the double integral over P x Q."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    both, p_only, q_only = _overlap_masks(mu, p_shape, q_shape)
    s1 = _masked_pair(mu, kernel, both, both, eps)
    s2 = _masked_pair(mu, kernel, p_only, both, eps)
    s3 = _masked_pair(mu, kernel, both, q_only, eps)
    s4 = _masked_pair(mu, kernel, p_only, q_only, eps)
    return IDecomposition(
        s1.value, s2.value, s3.value, s4.value,
        max(s.max_abs_term for s in (s1, s2, s3, s4)),
        sum(s.pair_count for s in (s1, s2, s3, s4)),
    )


def fubini_check(mu: DiscreteMeasure, kernel, p_shape: Shape, q_shape: Shape, eps: float) -> float:
    """Residual |I3 + J| where J swaps the roles of the two I3 regions.

    Relabeling the pair sum and using antisymmetry gives the exact
    discrete identity I3 = -J (the eps constraint is symmetric), so the
    residual is pure floating-point cancellation noise.
    """
    both, _, q_only = _overlap_masks(mu, p_shape, q_shape)
    i3 = _masked_pair(mu, kernel, both, q_only, eps).value
    j = _masked_pair(mu, kernel, q_only, both, eps).value
    return abs(i3 + j)


@dataclass
class TraceRow:
    g_term: int
    f_term: int
    eps: float
    value: float  # coefficient-weighted contribution of this shape pair
    i1: float
    i2: float
    i3: float
    i4: float


@dataclass
class PairingTrace:
    """Pairing values along a decreasing eps schedule with the per-term
    overlap decomposition; ``cauchy_tail`` is the max pairwise spread
    over the last quarter of the schedule.

    ``cancellation_noise`` bounds the arithmetic noise of the trace
    (pair count x 2^-50 x largest |term|); a tail at or below it is
    indistinguishable from exact cancellation.
    """

    eps_schedule: list[float]
    values: list[float]
    cauchy_tail: float
    rows: list[TraceRow]
    cancellation_noise: float = 0.0

    @property
    def limit_estimate(self) -> float:
        return self.values[-1]


def convergence_study(
    mu: DiscreteMeasure,
    kernel,
    f: SimpleFunction,
    g: SimpleFunction,
    eps_schedule,
) -> PairingTrace:
    """Trace the pairing along the schedule, decomposing each shape pair
    into the four overlap blocks; the blocks with x outside Q are routed
    through the complement regions A_r(Q), grouped by region index, as
    in the convergence argument.

    The schedule must be geometric with at least 8 points and stay at or
    above 4x the measure resolution.
    """
    schedule = [float(e) for e in eps_schedule]
    if len(schedule) < 8:
        raise ValueError("schedule must have at least 8 points")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing")
    ratios = [b / a for a, b in zip(schedule, schedule[1:])]
    if max(ratios) - min(ratios) > 1e-9:
        raise ValueError("schedule must be geometric")
    if schedule[-1] < 4.0 * mu.resolution * (1.0 - 1e-12):
        raise ValueError("schedule goes below 4x the measure resolution")

    rows: list[TraceRow] = []
    totals: list[list[float]] = [[] for _ in schedule]
    max_term = 0.0
    pair_count = 0
    for j, (b_j, p_shape) in enumerate(g.terms):
        for i, (a_i, q_shape) in enumerate(f.terms):
            both, p_only, q_only = _overlap_masks(mu, p_shape, q_shape)
            # group the x-atoms outside Q by complement region of Q
            decomp = decompose_complement(q_shape)
            region = decomp.assign(mu.positions)
            region_masks = [
                p_only & (region == r) for r in range(len(decomp.pieces))
            ]
            for k, eps in enumerate(schedule):
                parts = [_masked_pair(mu, kernel, both, both, eps)]
                parts += [_masked_pair(mu, kernel, m, both, eps) for m in region_masks]
                i3_part = _masked_pair(mu, kernel, both, q_only, eps)
                parts.append(i3_part)
                parts += [_masked_pair(mu, kernel, m, q_only, eps) for m in region_masks]
                i1 = parts[0].value
                i2 = math.fsum(s.value for s in parts[1 : 1 + len(region_masks)])
                i3 = i3_part.value
                i4 = math.fsum(s.value for s in parts[2 + len(region_masks):])
                max_term = max(max_term, max(s.max_abs_term for s in parts))
                pair_count = max(pair_count, sum(s.pair_count for s in parts))
                contribution = b_j * a_i * math.fsum([i1, i2, i3, i4])
                rows.append(TraceRow(j, i, eps, contribution, i1, i2, i3, i4))
                totals[k].append(contribution)
    values = [math.fsum(parts) for parts in totals]
    quarter = max(2, -(-len(values) // 4))
    last = values[-quarter:]
    tail = max(last) - min(last)
    noise = max(pair_count, 1) * CANCELLATION_FACTOR * max_term
    return PairingTrace(schedule, values, tail, rows, noise)
