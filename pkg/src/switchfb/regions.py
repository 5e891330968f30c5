"""Rate regions and sum-rate bounds for the switched-feedback MAC.

Regions are stored as half-planes ``a R1 + b R2 <= c`` plus sampled frontier points.
Inner regions are the down-closed convex hull of explicitly achievable points, so every
frontier point satisfies every constraint by construction.

The block-structured bounds (step-pattern region, finite-B achievable region, converse
evaluation and the known-switching-pattern sum capacity) share one engine: each block's
input law is a mixture of precomputed structured optima ("samples"), and the mixture
weights are chosen by a linear program.  Mixtures are realised as actual
``StructuredInputDist`` objects (the mixture index joins U) and re-evaluated exactly:
the three conditional terms are linear in the mixture weights and I(X1,X2;Y) is
concave, so a realised mixture never does worse than the LP predicted.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import xlogy

from .capacity import (
    TwoWayBounds,
    cached_max_joint_mi,
    default_u_size,
    joint_quantities,
    max_cond_entropy_on_optimal_face,
    max_min_conditional_entropy,
    max_structured,
    theorem1_class_check,
    two_way_sum_bounds,
)
from .channel import MAX_CELLS, FeedforwardProfile, MacChannel, compute_switch_probs, deterministic_channel
from .errors import ResourceCapError, ValidationError
from .info import LN2, StructuredInputDist, structured_terms

DEFAULT_ANGLES = 64
DEFAULT_RESTARTS = 16
IC, I1, I2, IJ = range(4)


@dataclass(frozen=True)
class Constraint:
    a: float
    b: float
    c: float
    label: str


@dataclass
class RateRegion:
    constraints: list[Constraint]
    frontier: np.ndarray
    kind: str
    label: str
    sum_value: float
    details: dict = field(default_factory=dict, repr=False)

    def contains(self, point, slack: float = 1e-9) -> bool:
        r1, r2 = point
        if r1 < -slack or r2 < -slack:
            return False
        return all(c.a * r1 + c.b * r2 <= c.c + slack for c in self.constraints)

    def to_document(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "sum_value": self.sum_value,
            "constraints": [
                {"a": c.a, "b": c.b, "c": c.c, "label": c.label, "kind": self.kind} for c in self.constraints
            ],
            "frontier": [[float(r1), float(r2)] for r1, r2 in self.frontier],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R1", "R2", "kind", "label"])
        for r1, r2 in self.frontier:
            w.writerow([f"{r1:.6f}", f"{r2:.6f}", self.kind, self.label])
        return buf.getvalue()


def directions(count: int = DEFAULT_ANGLES) -> np.ndarray:
    """Unit weight vectors spanning the first quadrant, always including (1, 1)/sqrt 2."""
    theta = np.unique(np.concatenate([np.linspace(0.0, math.pi / 2, max(count, 2)), [math.pi / 4]]))
    lam = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    lam[np.abs(lam) < 1e-15] = 0.0
    return lam


def _hull_region(points: np.ndarray, lams: np.ndarray, kind: str, label: str, extra=(), details=None) -> RateRegion:
    """Down-closed convex hull of ``points`` described by supporting lines along ``lams``."""
    points = np.maximum(np.asarray(points, dtype=float).reshape(-1, 2), 0.0)
    scores = points @ lams.T
    best = np.argmax(scores, axis=0)
    cons = [Constraint(float(l[0]), float(l[1]), float(scores[:, j].max()), f"{label}: support {j}")
            for j, l in enumerate(lams)]
    cons.extend(extra)
    frontier = points[best]
    _, first = np.unique(np.round(frontier, 12), axis=0, return_index=True)
    frontier = frontier[np.sort(first)]
    s = points.sum(axis=1).max()
    return RateRegion(cons, frontier, kind, label, float(s), details or {})


# --- single-letter regions ---------------------------------------------------


def prop1_outer(channel: MacChannel, profile: FeedforwardProfile, tol: float = 1e-10) -> RateRegion:
    """Cooperative outer bound: R1 + R2 <= p_avg max I(X1,X2;Y)."""
    p = profile.p_avg
    ba = cached_max_joint_mi(channel, tol)
    c = p * ba.value
    t = np.linspace(0.0, 1.0, DEFAULT_ANGLES + 1)
    frontier = np.stack([c * t, c * (1 - t)], axis=1)
    cons = [Constraint(1.0, 1.0, p * (ba.value + ba.gap_bound), "cooperative sum bound")]
    return RateRegion(cons, frontier, "outer", "prop1", c, {"max_I": ba.value, "gap": ba.gap_bound, "p_avg": p})


def _prop2_weights(lam: np.ndarray) -> tuple[float, ...]:
    l1, l2 = lam
    if l1 >= l2:
        w = (l2, l1 - l2, 0.0, 0.0)
    else:
        w = (l1, 0.0, l2 - l1, 0.0)
    s = sum(w)
    return tuple(round(x / s, 12) for x in w)


def _vertex(lam, a1, a2, a12):
    """Maximiser of lam . R over {R >= 0, R1 <= a1, R2 <= a2, R1 + R2 <= a12}."""
    a1, a2, a12 = max(a1, 0.0), max(a2, 0.0), max(a12, 0.0)
    if lam[0] >= lam[1]:
        r1 = min(a1, a12)
        return np.array([r1, min(a2, a12 - r1)])
    r2 = min(a2, a12)
    return np.array([min(a1, a12 - r2), r2])


@lru_cache(maxsize=256)
def _structured_cached(channel, weights, u_size, restarts, seed):
    return max_structured(weights, channel, u_size=u_size, restarts=restarts, seed=seed)


def prop2_inner(channel: MacChannel, profile: FeedforwardProfile, u_size: int | None = None,
                angles: int = DEFAULT_ANGLES, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> RateRegion:
    """No-feedback MAC region scaled by p_avg, swept along weight directions."""
    p = profile.p_avg
    u_size = default_u_size(channel) if u_size is None else u_size
    lams = directions(angles)
    pts = []
    for lam in lams:
        res = _structured_cached(channel, _prop2_weights(lam), u_size, restarts, seed)
        t = structured_terms(channel, res.argmax)
        pts.append(p * _vertex(lam, t[I1], t[I2], t[IC]))
    pts.append(np.zeros(2))
    return _hull_region(np.array(pts), lams, "inner", "prop2", details={"p_avg": p, "u_size": u_size})


# --- decodable-feedback class ---------------------------------------------------


@dataclass
class ConditionReport:
    p: float
    max_I: float
    max_cond_entropy: float
    margin: float
    holds: bool
    threshold: float

    @property
    def status(self) -> str:
        return "holds" if self.holds else "fails"


def _require_class(channel: MacChannel):
    check = theorem1_class_check(channel)
    if not check:
        raise ValidationError(f"channel is outside the decodable-feedback class; ambiguity {check.witness}")


def _dsbs_scan(channel: MacChannel, p: float, steps: int = 10_001) -> tuple[float, float, float]:
    """Best min{H(Xi|Xj), p I} over double-symmetric binary sources (binary inputs only)."""
    q = np.linspace(0.0, 1.0, steps)
    P = np.empty((steps, 2, 2))
    P[:, 0, 0] = P[:, 1, 1] = (1 - q) / 2
    P[:, 0, 1] = P[:, 1, 0] = q / 2
    W = channel.transition
    J = P[:, :, :, None] * W[None]
    hy = -(xlogy(J.sum(axis=(1, 2)), J.sum(axis=(1, 2))).sum(axis=1)) / LN2
    hyx = -(xlogy(J, W[None]).sum(axis=(1, 2, 3))) / LN2
    hq = -(xlogy(q, q) + xlogy(1 - q, 1 - q)) / LN2
    val = np.minimum(hq, p * (hy - hyx))
    k = int(np.argmax(val))
    return float(val[k]), float(q[k]), float(val[k])


@lru_cache(maxsize=64)
def _optimal_face(channel: MacChannel) -> dict:
    return max_cond_entropy_on_optimal_face(channel)


def theorem1_threshold(channel: MacChannel) -> float:
    """Largest constant p for which the exactness condition holds at some I-maximising input.

    The condition p I* <= max{H(X1|X2), H(X2|X1)} is linear in p, so the threshold is the
    largest conditional entropy over the I-optimal face divided by I*.
    """
    _require_class(channel)
    face = _optimal_face(channel)
    if face["I"] <= 0:
        return 1.0
    return float(min(1.0, max(face["H(X1|X2)"], face["H(X2|X1)"]) / face["I"]))


def condition_report(channel: MacChannel, p: float) -> ConditionReport:
    _require_class(channel)
    face = _optimal_face(channel)
    h = max(face["H(X1|X2)"], face["H(X2|X1)"])
    margin = h - p * face["I"]
    return ConditionReport(p, face["I"], h, margin, margin >= -1e-9, theorem1_threshold(channel))


def theorem1_region(channel: MacChannel, p: float) -> tuple[RateRegion, ConditionReport]:
    """Time-sharing region of the corner rates; exact when the condition holds."""
    _require_class(channel)
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    report = condition_report(channel, p)
    corners = []
    for user in (1, 2):
        val, P = max_min_conditional_entropy(channel, p, user)
        if channel.x1_size == 2 and channel.x2_size == 2:
            val = max(val, _dsbs_scan(channel.transpose() if user == 2 else channel, p)[0])
        corners.append(val)
    r1, r2 = corners
    details = {"R1_corner": r1, "R2_corner": r2, "condition": report}
    if report.holds:
        c = p * report.max_I
        t = np.linspace(0.0, 1.0, DEFAULT_ANGLES + 1)
        frontier = np.stack([c * t, c * (1 - t)], axis=1)
        cons = [Constraint(1.0, 1.0, c, "sum bound at cooperative optimum")]
        return RateRegion(cons, frontier, "exact", "thm1", c, details), report
    t = np.linspace(0.0, 1.0, DEFAULT_ANGLES + 1)
    frontier = np.stack([r1 * t, r2 * (1 - t)], axis=1)
    if r1 > 0 and r2 > 0:
        scale = max(r1, r2)
        cons = [Constraint(r2 / scale, r1 / scale, r1 * r2 / scale, "time-sharing of corner rates")]
    else:
        cons = [Constraint(1.0, 0.0, r1, "corner rate 1"), Constraint(0.0, 1.0, r2, "corner rate 2")]
    return RateRegion(cons, frontier, "inner", "thm1", max(r1, r2), details), report


def build_example2(alpha: int) -> MacChannel:
    """Deterministic class channel whose exactness threshold shrinks as alpha grows.

    Inputs are 0..m-1 with m = alpha 2^alpha.  Inputs in the same group of alpha
    symbols produce the pair itself (index m + x1 alpha + x2 mod alpha); otherwise the
    output is (x1 + x2) mod m.
    """
    alpha = int(alpha)
    if alpha < 2:
        raise ValidationError("alpha must be >= 2")
    m = alpha * 2**alpha
    y_size = m + m * alpha
    if m * m * y_size > MAX_CELLS:
        raise ResourceCapError(f"alpha={alpha} needs {m * m * y_size} table cells")

    def fn(x1, x2):
        if x1 // alpha == x2 // alpha:
            return m + x1 * alpha + x2 % alpha
        return (x1 + x2) % m

    return deterministic_channel(m, m, y_size, fn)


def example2_entropy_bound(alpha: int) -> float:
    m = alpha * 2**alpha
    return 1 + alpha * math.log2(alpha) / (alpha + 1) + 2 * math.log2(m) / (alpha + 1)


# --- block engine ----------------------------------------------------------------


def _simplex_grid(parts: int, dim: int = 4):
    if dim == 1:
        yield (parts,)
        return
    for k in range(parts + 1):
        for rest in _simplex_grid(parts - k, dim - 1):
            yield (k,) + rest


def sample_weights(angles: int = DEFAULT_ANGLES) -> list[tuple[float, ...]]:
    """Weight vectors over [Ic, I1, I2, Ij] whose optima seed the block LPs."""
    ws = {_prop2_weights(lam) for lam in directions(angles)}
    ws |= {tuple(round(x / 4, 12) for x in g) for g in _simplex_grid(4)}
    return sorted(ws)


@dataclass
class TermSamples:
    dists: list
    terms: np.ndarray  # (K, 4)


@lru_cache(maxsize=64)
def term_samples(channel: MacChannel, u_size: int, angles: int, restarts: int, seed: int) -> TermSamples:
    dists, terms = [], []
    for w in sample_weights(angles):
        res = _structured_cached(channel, w, u_size, restarts, seed)
        dists.append(res.argmax)
        terms.append(structured_terms(channel, res.argmax))
    return TermSamples(dists, np.array(terms))


@dataclass
class BlockSetup:
    p_bars: np.ndarray
    eps: float = 0.0
    s_fixed: tuple[float, float] | None = None  # (S1, S2)
    s_outer: TwoWayBounds | None = None  # S1, S2 free within the outer bounds
    individual: bool = True

    @property
    def B(self) -> int:
        return len(self.p_bars)


def _coefficients(setup: BlockSetup, terms: np.ndarray):
    """Linear forms of the block constraints in the mixture weights theta[b, k] (and S)."""
    B, K = setup.B, terms.shape[0]
    pb = setup.p_bars
    fb = (1 - setup.eps) * (1 - pb)  # feedback share per block
    # sum constraints, one per b0 = 1..B+1: theta part and S-sum coefficient
    G = np.zeros((B + 1, B, K))
    g_s = np.zeros(B + 1)
    for b0 in range(B + 1):
        for b in range(B):
            if b < b0:
                G[b0, b] = pb[b] * terms[:, IC]
                g_s[b0] += fb[b]
            else:
                G[b0, b] = pb[b] * terms[:, IJ]
    A1 = pb[:, None] * terms[None, :, I1]
    A2 = pb[:, None] * terms[None, :, I2]
    return G / B, g_s / B, A1 / B, A2 / B, fb.sum() / B


def _evaluate(setup: BlockSetup, block_terms: np.ndarray, S: tuple[float, float]):
    """Exact (sum-by-b0, R1 cap, R2 cap) for per-block term vectors (B, 4)."""
    B = setup.B
    pb = setup.p_bars
    fb = (1 - setup.eps) * (1 - pb)
    s1, s2 = S
    g = np.array([
        (np.sum(fb[:b0] * (s1 + s2) + pb[:b0] * block_terms[:b0, IC]) + np.sum(pb[b0:] * block_terms[b0:, IJ])) / B
        for b0 in range(B + 1)
    ])
    a1 = float(np.sum(fb * s1 + pb * block_terms[:, I1]) / B)
    a2 = float(np.sum(fb * s2 + pb * block_terms[:, I2]) / B)
    return g, a1, a2


def _solve_block_lp(setup: BlockSetup, samples: TermSamples, lam: np.ndarray | None):
    """Maximise lam . R (or the sum bound when lam is None) over mixture weights."""
    B, K = setup.B, samples.terms.shape[0]
    G, g_s, A1, A2, fb_avg = _coefficients(setup, samples.terms)
    nth = B * K
    # variables: theta (B*K), R1, R2, S1, S2
    nv = nth + 4
    iR1, iR2, iS1, iS2 = nth, nth + 1, nth + 2, nth + 3
    A_ub, b_ub = [], []
    for b0 in range(B + 1):
        row = np.zeros(nv)
        row[:nth] = -G[b0].ravel()
        row[iR1] = row[iR2] = 1.0
        row[iS1] = row[iS2] = -g_s[b0]
        A_ub.append(row)
        b_ub.append(0.0)
    if setup.individual:
        for A, iR, iS in ((A1, iR1, iS1), (A2, iR2, iS2)):
            row = np.zeros(nv)
            row[:nth] = -A.ravel()
            row[iR] = 1.0
            row[iS] = -fb_avg
            A_ub.append(row)
            b_ub.append(0.0)
    bounds = [(0, None)] * nth + [(0, None), (0, None)]
    if setup.s_outer is not None:
        tw = setup.s_outer
        row = np.zeros(nv)
        row[iS1] = row[iS2] = 1.0
        A_ub.append(row)
        b_ub.append(tw.sum_outer)
        bounds += [(0, tw.s1_outer), (0, tw.s2_outer)]
    else:
        s1, s2 = setup.s_fixed or (0.0, 0.0)
        bounds += [(s1, s1), (s2, s2)]
    A_eq = np.zeros((B, nv))
    for b in range(B):
        A_eq[b, b * K:(b + 1) * K] = 1.0
    cobj = np.zeros(nv)
    if lam is None:
        cobj[iR1] = cobj[iR2] = -1.0
    else:
        cobj[iR1], cobj[iR2] = -lam[0], -lam[1]
    res = linprog(cobj, A_ub=np.array(A_ub), b_ub=np.array(b_ub), A_eq=A_eq, b_eq=np.ones(B), bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise ValidationError(f"block program failed: {res.message}")
    theta = np.clip(res.x[:nth].reshape(B, K), 0.0, None)
    theta /= theta.sum(axis=1, keepdims=True)
    return -res.fun, theta, (float(res.x[iS1]), float(res.x[iS2]))


def _realise(samples: TermSamples, theta: np.ndarray, channel: MacChannel):
    """Per-block mixture laws and their exact term vectors."""
    dists, terms = [], []
    for row in theta:
        keep = np.flatnonzero(row > 1e-12)
        if keep.size == 1:
            d = samples.dists[keep[0]]
        else:
            d = StructuredInputDist.mixture([samples.dists[k] for k in keep], row[keep])
        dists.append(d)
        terms.append(structured_terms(channel, d))
    return dists, np.array(terms)


def _clip_s(S, tw: TwoWayBounds | None):
    s1, s2 = max(S[0], 0.0), max(S[1], 0.0)
    if tw is not None:
        s1, s2 = min(s1, tw.s1_outer), min(s2, tw.s2_outer)
        tot = s1 + s2
        if tot > tw.sum_outer:
            s1, s2 = s1 * tw.sum_outer / tot, s2 * tw.sum_outer / tot
    return s1, s2


def _block_region(channel, setup: BlockSetup, samples: TermSamples, angles: int, kind: str, label: str,
                  details: dict, seed_points=()) -> RateRegion:
    lams = directions(angles)
    pts = [np.zeros(2), *seed_points]
    S_default = setup.s_fixed or (0.0, 0.0)
    # time-invariant single-sample choices: exact, and a floor under every LP answer
    for t in samples.terms:
        g, a1, a2 = _evaluate(setup, np.repeat(t[None], setup.B, axis=0), S_default)
        for lam in lams:
            pts.append(_vertex(lam, a1, a2, g.min()))
    lp_values = []
    for lam in lams:
        val, theta, S = _solve_block_lp(setup, samples, lam)
        S = _clip_s(S, setup.s_outer) if setup.s_outer is not None else S_default
        _, bt = _realise(samples, theta, channel)
        g, a1, a2 = _evaluate(setup, bt, S)
        pts.append(_vertex(lam, a1, a2, g.min()))
        lp_values.append(val)
    region = _hull_region(np.array(pts), lams, kind, label, details=details)
    if kind == "outer":
        # keep the solver's optimum as the bound even if realisation fell short of it
        region.constraints = [Constraint(c.a, c.b, max(c.c, v), c.label) for c, v in zip(region.constraints, lp_values)]
    sval, theta, S = _solve_block_lp(setup, samples, None)
    S = _clip_s(S, setup.s_outer) if setup.s_outer is not None else S_default
    _, bt = _realise(samples, theta, channel)
    g, a1, a2 = _evaluate(setup, bt, S)
    exact_sum = min(g.min(), a1 + a2) if setup.individual else g.min()
    region.sum_value = max(region.sum_value, float(exact_sum))
    if kind == "outer":
        region.sum_value = max(region.sum_value, float(sval))
    return region


def _setup_args(channel, u_size, angles, restarts, seed):
    u_size = default_u_size(channel) if u_size is None else int(u_size)
    return term_samples(channel, u_size, angles, restarts, seed)


def corollary_region(channel: MacChannel, p_avg: float, u_size: int | None = None, angles: int = DEFAULT_ANGLES,
                     restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> tuple[RateRegion, RateRegion]:
    """Step-pattern region: (inner with the two-way witness rates, outer with the two-way outer bounds).

    The four constraints are the finite-B ones at B = 1 with no slack: b0 = 2 gives the
    feedback-then-feedforward sum bound, b0 = 1 the cooperative sum bound.
    """
    if not 0.0 <= p_avg <= 1.0:
        raise ValidationError("p_avg must lie in [0, 1]")
    samples = _setup_args(channel, u_size, angles, restarts, seed)
    tw = two_way_sum_bounds(channel)
    pb = np.array([float(p_avg)])
    inner = _block_region(channel, BlockSetup(pb, 0.0, s_fixed=(tw.s1_inner, tw.s2_inner)), samples, angles,
                          "inner", "corollary", {"p_avg": p_avg, "tw": tw})
    # the inner expression is the outer one at a feasible S, so its realised points belong to it;
    # realised mixtures can beat the linearised LP, hence the explicit seeding
    outer = _block_region(channel, BlockSetup(pb, 0.0, s_outer=tw), samples, angles,
                          "outer", "corollary", {"p_avg": p_avg, "tw": tw}, seed_points=inner.frontier)
    outer.sum_value = max(outer.sum_value, inner.sum_value)
    if tw.sum_outer - tw.sum_inner <= 1e-9 and abs(outer.sum_value - inner.sum_value) <= 1e-6:
        inner.kind = "exact"
    return inner, outer


def lemma1_finite_B_region(channel: MacChannel, profile: FeedforwardProfile, B: int, epsilon: float,
                           tw_pair: tuple[float, float] | None = None, u_size: int | None = None,
                           angles: int = DEFAULT_ANGLES, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> RateRegion:
    """Finite-B achievable region with the (1 - epsilon) feedback-length slack."""
    if B < 1:
        raise ValidationError("B must be >= 1")
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError("epsilon must lie in [0, 1)")
    tw = two_way_sum_bounds(channel)
    if tw_pair is None:
        tw_pair = (tw.s1_inner, tw.s2_inner)
    s1, s2 = map(float, tw_pair)
    if s1 < 0 or s2 < 0 or s1 + s2 > tw.sum_inner + 1e-9:
        raise ValidationError("(S1, S2) must lie within the two-way inner bound")
    samples = _setup_args(channel, u_size, angles, restarts, seed)
    setup = BlockSetup(compute_switch_probs(profile, B), float(epsilon), s_fixed=(s1, s2))
    return _block_region(channel, setup, samples, angles, "inner", "lemma1",
                         {"B": B, "epsilon": epsilon, "S": (s1, s2), "p_bars": setup.p_bars})


def lemma2_outer_region(channel: MacChannel, profile: FeedforwardProfile, B: int, u_size: int | None = None,
                        angles: int = DEFAULT_ANGLES, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> RateRegion:
    """Converse constraints evaluated with the two-way outer bounds standing in for the two-way region."""
    if B < 1:
        raise ValidationError("B must be >= 1")
    tw = two_way_sum_bounds(channel)
    samples = _setup_args(channel, u_size, angles, restarts, seed)
    setup = BlockSetup(compute_switch_probs(profile, B), 0.0, s_outer=tw)
    return _block_region(channel, setup, samples, angles, "outer", "lemma2", {"B": B, "tw": tw})


# --- known switching pattern sum capacity ------------------------------------------


@dataclass
class BlockChoice:
    p_bar: float
    dist: StructuredInputDist
    I_cond: float
    I_joint: float


@dataclass
class KspEvaluation:
    profile: FeedforwardProfile
    B: int
    per_block: list[BlockChoice]
    tau_star: int
    sum_value_inner: float
    sum_value_outer: float
    tw_bounds: TwoWayBounds
    objective_by_b0: np.ndarray
    upper_envelope: float

    @property
    def p_bars(self) -> np.ndarray:
        return np.array([c.p_bar for c in self.per_block])


def ksp_objective(p_bars, I_cond, I_joint, tw_sum: float) -> np.ndarray:
    """Discretised objective for every b0 = 1..B+1 (index 0..B)."""
    p_bars, I_cond, I_joint = map(np.asarray, (p_bars, I_cond, I_joint))
    B = len(p_bars)
    fb = (1 - p_bars) * tw_sum + p_bars * I_cond
    ff = p_bars * I_joint
    head = np.concatenate([[0.0], np.cumsum(fb)])
    tail = np.concatenate([np.cumsum(ff[::-1])[::-1], [0.0]])
    return (head + tail) / B


def _best_ksp(setup: BlockSetup, samples: TermSamples, channel: MacChannel):
    _, theta, _ = _solve_block_lp(setup, samples, None)
    dists, bt = _realise(samples, theta, channel)
    tw = setup.s_fixed[0] + setup.s_fixed[1]
    obj = ksp_objective(setup.p_bars, bt[:, IC], bt[:, IJ], tw)
    best = (obj.min(), dists, bt, obj)
    for k, t in enumerate(samples.terms):
        o = ksp_objective(setup.p_bars, np.full(setup.B, t[IC]), np.full(setup.B, t[IJ]), tw)
        if o.min() > best[0] + 1e-12:
            best = (o.min(), [samples.dists[k]] * setup.B, np.repeat(t[None], setup.B, axis=0), o)
    return best


def ksp_sum_capacity(channel: MacChannel, profile: FeedforwardProfile, B: int = 16, u_size: int | None = None,
                     restarts: int = DEFAULT_RESTARTS, seed: int = 0, angles: int = DEFAULT_ANGLES,
                     tw_bounds: TwoWayBounds | None = None) -> KspEvaluation:
    """Max over per-block laws of the min over b0 of the discretised sum-capacity objective.

    Evaluated once with the two-way inner bound (achievable) and once with the outer
    bound.  ``upper_envelope`` swaps max and min and uses certified per-term maxima, a
    guaranteed upper bound on the discretised objective with the outer two-way bound.
    """
    if B < 1:
        raise ValidationError("B must be >= 1")
    tw = tw_bounds or two_way_sum_bounds(channel)
    samples = _setup_args(channel, u_size, angles, restarts, seed)
    p_bars = compute_switch_probs(profile, B)
    inner_val, dists, bt, obj_in = _best_ksp(BlockSetup(p_bars, s_fixed=(tw.sum_inner, 0.0), individual=False),
                                             samples, channel)
    outer_val, _, _, _ = _best_ksp(BlockSetup(p_bars, s_fixed=(tw.sum_outer, 0.0), individual=False), samples, channel)
    # the inner laws evaluated with the larger two-way value are a valid outer candidate
    outer_val = max(outer_val, float(ksp_objective(p_bars, bt[:, IC], bt[:, IJ], tw.sum_outer).min()))
    ba = cached_max_joint_mi(channel)
    cap = ba.value + ba.gap_bound
    envelope = float(ksp_objective(p_bars, np.full(B, cap), np.full(B, cap), tw.sum_outer).min())
    per_block = [BlockChoice(float(p), d, float(t[IC]), float(t[IJ])) for p, d, t in zip(p_bars, dists, bt)]
    tau = int(np.argmin(obj_in)) + 1
    return KspEvaluation(profile, B, per_block, tau, float(inner_val), float(outer_val), tw, obj_in, envelope)


def region_to_json(region: RateRegion) -> str:
    return json.dumps(region.to_document(), indent=2, sort_keys=True)
