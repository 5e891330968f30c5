"""Mutual-information maximisation over MAC input laws.

* ``max_joint_mi`` -- Blahut-Arimoto on the compound input (x1, x2) (cooperative encoders).
* ``max_structured`` -- alternating mirror ascent over P(u) P(x1|u) P(x2|u) for any
  non-negative weighting of the four MAC rate functionals.  Nonconvex, so the value is
  an achieved (lower) bound, not a certificate.
* ``two_way_sum_bounds`` -- Shannon-type inner/outer bounds on the two-way sum rate.
* concave programs over the joint law P(x1, x2), solved with cvxpy.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .channel import MacChannel
from .errors import ConvergenceError, ValidationError
from .info import LN2, StructuredInputDist, entropy_of, structured_terms
from .streams import substream

TINY = 1e-300
POLISH_AFTER = 2000


@dataclass
class OptResult:
    value: float
    argmax: object
    iterations: int
    gap_bound: float
    history: list = field(default_factory=list, repr=False)


cp = None  # cvxpy, imported on first use: it takes ~2 s and only the concave programs need it


def _require_cvxpy():
    global cp
    if cp is None:
        import cvxpy

        cp = cvxpy


# --- Blahut-Arimoto ------------------------------------------------------


def _divergences(W: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = r @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        logratio = np.where(W > 0, np.log(W / np.where(q > 0, q, 1.0)[None, :]), 0.0)
    return (W * logratio).sum(axis=1) / LN2, q


def blahut_arimoto(W: np.ndarray, tol: float = 1e-9, max_iter: int = 100_000):
    """Capacity of the DMC ``W[x, y]`` in bits.

    Returns ``(value, r, iterations, gap)`` where ``value = I(r)`` and ``gap`` is the
    standard bound max_x D(W_x || rW) - I(r) >= C - I(r).
    """
    W = np.asarray(W, dtype=float)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    r = np.full(W.shape[0], 1.0 / W.shape[0])
    history = []
    for it in range(1, max_iter + 1):
        d, _ = _divergences(W, r)
        value = float(r @ d)
        gap = float(d.max() - value)
        history.append(value)
        if gap < tol:
            return value, r, it, max(gap, 0.0), history
        if it == POLISH_AFTER:
            # near-duplicate input rows make the iteration sublinear; jump once to an
            # interior-point solution if it is better, then keep iterating from there
            p = _polish(W)
            if p is not None and float(p @ _divergences(W, p)[0]) > value:
                r = p
                continue
        r = r * np.exp2(d - d.max())
        r /= r.sum()
    raise ConvergenceError("Blahut-Arimoto did not converge", value, gap)


def _polish(W: np.ndarray) -> np.ndarray | None:
    _require_cvxpy()
    r = cp.Variable(W.shape[0], nonneg=True)
    h = -(xlogy(W, W).sum(axis=1))
    prob = cp.Problem(cp.Maximize(cp.sum(cp.entr(W.T @ r)) - h @ r), [cp.sum(r) == 1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
        except cp.error.SolverError:
            return None
    if r.value is None:
        return None
    p = np.clip(r.value, 0.0, None)
    return p / p.sum()


def max_joint_mi(channel: MacChannel, tol: float = 1e-9, max_iter: int = 100_000) -> OptResult:
    """max over P(x1, x2) of I(X1, X2; Y); argmax is the joint table P[x1, x2]."""
    value, r, it, gap, hist = blahut_arimoto(channel.compound(), tol, max_iter)
    return OptResult(value, r.reshape(channel.x1_size, channel.x2_size), it, gap, hist)


@lru_cache(maxsize=64)
def _cached_joint_mi(channel: MacChannel, tol: float) -> OptResult:
    return max_joint_mi(channel, tol)


def cached_max_joint_mi(channel: MacChannel, tol: float = 1e-10) -> OptResult:
    return _cached_joint_mi(channel, tol)


# --- structured ascent ---------------------------------------------------


class _Structured:
    """Objective sum_k w_k T_k over (p_u, a = P(x1|u), b = P(x2|u)) with natural gradients."""

    def __init__(self, W: np.ndarray, weights: np.ndarray):
        self.W = W
        self.w = weights
        with np.errstate(divide="ignore"):
            self.logW = np.where(W > 0, np.log(np.maximum(W, TINY)), 0.0)
        self.h_cond = -(xlogy(W, W).sum(axis=2)) / LN2  # H(Y | x1, x2)

    def joint(self, pu, a, b):
        return pu[:, None, None, None] * a[:, :, None, None] * b[:, None, :, None] * self.W[None]

    def value(self, pu, a, b) -> float:
        Q = self.joint(pu, a, b)
        wc, w1, w2, wj = self.w
        pux = Q.sum(axis=3)
        hyx = float((pux * self.h_cond[None]).sum())
        v = 0.0
        if wc:
            v += wc * (entropy_of(Q.sum(axis=(1, 2))) - entropy_of(pu) - hyx)
        if w1:
            qu2y = Q.sum(axis=1)
            v += w1 * (entropy_of(qu2y) - entropy_of(qu2y.sum(axis=2)) - hyx)
        if w2:
            qu1y = Q.sum(axis=2)
            v += w2 * (entropy_of(qu1y) - entropy_of(qu1y.sum(axis=2)) - hyx)
        if wj:
            v += wj * (entropy_of(Q.sum(axis=(0, 1, 2))) - hyx)
        return v

    def cell_gradient(self, pu, a, b) -> np.ndarray:
        """dF/dQ per (u, x1, x2, y) cell, up to constants that cancel on the simplex."""
        Q = self.joint(pu, a, b)
        wc, w1, w2, wj = self.w
        G = self.w.sum() * self.logW[None]
        if wc:
            quy = Q.sum(axis=(1, 2))
            G = G - wc * (np.log(np.maximum(quy, TINY)) - np.log(np.maximum(pu, TINY))[:, None])[:, None, None, :]
        if w1:
            qu2y = Q.sum(axis=1)
            qu2 = qu2y.sum(axis=2, keepdims=True)
            G = G - w1 * (np.log(np.maximum(qu2y, TINY)) - np.log(np.maximum(qu2, TINY)))[:, None, :, :]
        if w2:
            qu1y = Q.sum(axis=2)
            qu1 = qu1y.sum(axis=2, keepdims=True)
            G = G - w2 * (np.log(np.maximum(qu1y, TINY)) - np.log(np.maximum(qu1, TINY)))[:, :, None, :]
        if wj:
            qy = Q.sum(axis=(0, 1, 2))
            G = G - wj * np.log(np.maximum(qy, TINY))[None, None, None, :]
        return G * (self.W[None] > 0) / LN2


def _mirror_step(p: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    z = eta * g
    z = z - z.max(axis=-1, keepdims=True)
    out = p * np.exp(z)
    s = out.sum(axis=-1, keepdims=True)
    return np.where(s > 0, out / np.where(s > 0, s, 1.0), p)


def _ascend(obj: _Structured, pu, a, b, tol: float, max_iter: int, fix_u: bool):
    """Alternating mirror ascent with backtracking; the objective never decreases."""
    W = obj.W
    f = obj.value(pu, a, b)
    history = [f]
    etas = [1.0, 1.0, 1.0]
    improvement = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f_start = f
        for block in range(3):
            if block == 0 and (fix_u or pu.size == 1):
                continue
            G = obj.cell_gradient(pu, a, b)
            if block == 0:
                g = (G * a[:, :, None, None] * b[:, None, :, None] * W[None]).sum(axis=(1, 2, 3))
                cur = pu
            elif block == 1:
                g = (G * b[:, None, :, None] * W[None]).sum(axis=(2, 3))
                cur = a
            else:
                g = (G * a[:, :, None, None] * W[None]).sum(axis=(1, 3))
                cur = b
            eta = etas[block]
            for _ in range(40):
                cand = _mirror_step(cur, g, eta)
                trial = (cand, a, b) if block == 0 else (pu, cand, b) if block == 1 else (pu, a, cand)
                f_new = obj.value(*trial)
                if f_new >= f:
                    if f_new > f:
                        pu, a, b = trial
                        f = f_new
                    eta = min(eta * 2.0, 1e6)
                    break
                eta *= 0.5
            etas[block] = max(eta, 1e-8)
        history.append(f)
        improvement = f - f_start
        if improvement < tol:
            break
    return f, pu, a, b, it, improvement, history


def _pad(d: StructuredInputDist, u_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pu, a, b = d.p_u.copy(), d.p_x1_given_u.copy(), d.p_x2_given_u.copy()
    if pu.size > u_size:
        keep = np.argsort(-pu, kind="stable")[:u_size]
        pu, a, b = pu[keep], a[keep], b[keep]
        pu /= pu.sum()
    if pu.size < u_size:
        extra = u_size - pu.size
        pu = np.concatenate([pu, np.zeros(extra)])
        a = np.concatenate([a, np.full((extra, a.shape[1]), 1.0 / a.shape[1])])
        b = np.concatenate([b, np.full((extra, b.shape[1]), 1.0 / b.shape[1])])
    return pu, a, b


def default_u_size(channel: MacChannel) -> int:
    return channel.x1_size * channel.x2_size + 1


def structured_inits(channel: MacChannel, u_size: int, weights: np.ndarray) -> list[StructuredInputDist]:
    """Deterministic starting points, tried before any random restart."""
    k1, k2 = channel.x1_size, channel.x2_size
    inits = [StructuredInputDist.product(np.full(k1, 1 / k1), np.full(k2, 1 / k2))]
    ba = cached_max_joint_mi(channel).argmax
    inits.append(StructuredInputDist.product(ba.sum(axis=1), ba.sum(axis=0)))
    if weights[3] > 0 and u_size > 1:
        inits.append(StructuredInputDist.from_joint(ba, u_size))
    return inits


def max_structured(
    weights: Sequence[float],
    channel: MacChannel,
    u_size: int | None = None,
    restarts: int = 32,
    tol: float = 1e-7,
    seed: int = 0,
    max_iter: int = 100_000,
    inits: Sequence[StructuredInputDist] = (),
) -> OptResult:
    """Maximise ``w . [I(X1,X2;Y|U), I(X1;Y|U,X2), I(X2;Y|U,X1), I(X1,X2;Y)]``.

    Starting points are the caller's ``inits``, then the built-in deterministic ones,
    then ``restarts`` Dirichlet draws from ``seed``.  The best run wins; ties keep the
    earliest start, so the result does not depend on execution order.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,) or np.any(w < 0):
        raise ValidationError("weights must be four non-negative numbers")
    u_size = default_u_size(channel) if u_size is None else int(u_size)
    if u_size < 1:
        raise ValidationError("u_size must be >= 1")
    obj = _Structured(channel.transition, w)
    starts = [_pad(d, u_size) for d in list(inits) + structured_inits(channel, u_size, w)]
    k1, k2 = channel.x1_size, channel.x2_size
    for r in range(restarts):
        rng = substream(seed, 0x5743, r)
        starts.append((rng.dirichlet(np.ones(u_size)), rng.dirichlet(np.ones(k1), u_size), rng.dirichlet(np.ones(k2), u_size)))
    # U only matters through the unconditional term; otherwise one U value suffices
    fix_u = w[3] == 0 and u_size == 1
    best = None
    total_iters = 0
    for pu, a, b in starts:
        f, pu, a, b, it, imp, hist = _ascend(obj, pu, a, b, tol, max_iter, fix_u)
        total_iters += it
        if best is None or f > best[0] + 1e-12:
            best = (f, pu, a, b, imp, hist)
    f, pu, a, b, imp, hist = best
    dist = StructuredInputDist(pu / pu.sum(), a / a.sum(axis=1, keepdims=True), b / b.sum(axis=1, keepdims=True))
    value = float(w @ structured_terms(channel, dist))
    return OptResult(value, dist, total_iters, max(float(imp), 0.0), hist)


# --- concave programs over the joint law -----------------------------------



class _JointProgram:
    """cvxpy expressions (in bits) for entropies of the joint law P(x1, x2) pushed through the channel."""

    def __init__(self, channel: MacChannel):
        _require_cvxpy()
        self.channel = channel
        k1, k2, ny = channel.transition.shape
        self.k1, self.k2, self.ny = k1, k2, ny
        self.P = cp.Variable((k1, k2), nonneg=True)
        self.p = cp.vec(self.P, order="C")
        self.constraints = [cp.sum(self.P) == 1]
        self.Wc = channel.compound()
        self.h = -(xlogy(self.Wc, self.Wc).sum(axis=1)) / LN2

    def h_x1_given_x2(self):
        px2 = cp.sum(self.P, axis=0)
        return -cp.sum(cp.rel_entr(self.P, np.ones((self.k1, 1)) @ cp.reshape(px2, (1, self.k2), order="C"))) / LN2

    def h_x2_given_x1(self):
        px1 = cp.sum(self.P, axis=1)
        return -cp.sum(cp.rel_entr(self.P, cp.reshape(px1, (self.k1, 1), order="C") @ np.ones((1, self.k2)))) / LN2

    def h_y(self):
        return cp.sum(cp.entr(self.Wc.T @ self.p)) / LN2

    def h_y_given_x1x2(self):
        return self.h @ self.p

    def h_y_given(self, keep: int):
        """H(Y | X_keep) for keep in {1, 2}."""
        k1, k2, ny = self.k1, self.k2, self.ny
        W = self.channel.transition
        kk = k1 if keep == 1 else k2
        A = np.zeros((kk * ny, k1 * k2))
        S = np.zeros((kk * ny, k1 * k2))
        for i in range(k1):
            for j in range(k2):
                c = i * k2 + j
                x = i if keep == 1 else j
                A[x * ny: (x + 1) * ny, c] = W[i, j]
                S[x * ny: (x + 1) * ny, c] = 1.0
        return -cp.sum(cp.rel_entr(A @ self.p, S @ self.p)) / LN2

    def mi(self):
        return self.h_y() - self.h_y_given_x1x2()

    def solve(self, objective, extra=()):
        prob = cp.Problem(cp.Maximize(objective), self.constraints + list(extra))
        # the returned law is re-evaluated exactly by the caller, so "inaccurate" is acceptable
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            try:
                prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
            except cp.error.SolverError:
                prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200_000)
        if self.P.value is None:
            raise ConvergenceError("concave program failed", float("nan"), float("inf"))
        P = np.clip(self.P.value, 0.0, None)
        return P / P.sum(), prob.status


def joint_quantities(channel: MacChannel, P: np.ndarray) -> dict[str, float]:
    """Exact entropies/MIs at a joint input law P[x1, x2]."""
    W = channel.transition
    J = P[:, :, None] * W
    hxy = entropy_of(J)
    hx = entropy_of(P)
    h_y = entropy_of(J.sum(axis=(0, 1)))
    h_y_x = hxy - hx
    h_x1x2y = hxy
    return {
        "I": max(0.0, h_y - h_y_x),
        "H(X1|X2)": max(0.0, hx - entropy_of(P.sum(axis=0))),
        "H(X2|X1)": max(0.0, hx - entropy_of(P.sum(axis=1))),
        "I(X1;Y|X2)": max(0.0, entropy_of(J.sum(axis=0)) - entropy_of(P.sum(axis=0)) - h_y_x),
        "I(X2;Y|X1)": max(0.0, entropy_of(J.sum(axis=1)) - entropy_of(P.sum(axis=1)) - h_y_x),
        "H(X1|Y,X2)": max(0.0, h_x1x2y - entropy_of(J.sum(axis=0))),
        "H(X2|Y,X1)": max(0.0, h_x1x2y - entropy_of(J.sum(axis=1))),
    }


def max_min_conditional_entropy(channel: MacChannel, p: float, user: int) -> tuple[float, np.ndarray]:
    """max over P(x1,x2) of min{H(X_user | X_other), p I(X1,X2;Y)} (a concave program)."""
    prog = _JointProgram(channel)
    t = cp.Variable()
    h = prog.h_x1_given_x2() if user == 1 else prog.h_x2_given_x1()
    P, _ = prog.solve(t, [t <= h, t <= p * prog.mi()])
    q = joint_quantities(channel, P)
    key = "H(X1|X2)" if user == 1 else "H(X2|X1)"
    return min(q[key], p * q["I"]), P


def max_cond_entropy_on_optimal_face(channel: MacChannel, tol: float = 1e-10) -> dict:
    """Largest H(X1|X2) and H(X2|X1) over the I(X1,X2;Y)-maximising input laws.

    All capacity-achieving inputs share one output law q*, so the optimal set is the
    polytope {P : P W = q*, sum_x P(x) H(Y|x) <= H(q*) - C}; entropy is concave on it.
    """
    ba = cached_max_joint_mi(channel, tol)
    r = ba.argmax.ravel()
    q = r @ channel.compound()
    out = {"I": ba.value, "gap": ba.gap_bound}
    for user, key in ((1, "H(X1|X2)"), (2, "H(X2|X1)")):
        prog = _JointProgram(channel)
        face = [prog.Wc.T @ prog.p == q, prog.h @ prog.p <= float(prog.h @ r) + 1e-9]
        obj = prog.h_x1_given_x2() if user == 1 else prog.h_x2_given_x1()
        P, _ = prog.solve(obj, face)
        val = joint_quantities(channel, P)[key]
        # the BA point is feasible, so never report less than it achieves
        base = joint_quantities(channel, ba.argmax)[key]
        if base >= val:
            val, P = base, ba.argmax
        out[key] = val
        out[f"argmax {key}"] = P
    return out


# --- two-way channel bounds ------------------------------------------------


@dataclass
class TwoWayBounds:
    sum_inner: float
    sum_outer: float
    witness_inner: StructuredInputDist
    s1_inner: float
    s2_inner: float
    s1_outer: float
    s2_outer: float

    def __post_init__(self):
        # the inner value is an achieved point of a relaxation of the outer program
        self.sum_outer = max(self.sum_outer, self.sum_inner)


def _grid_product_seed(channel: MacChannel, steps: int = 101) -> StructuredInputDist | None:
    if channel.x1_size != 2 or channel.x2_size != 2:
        return None
    g = np.linspace(0, 1, steps)
    W = channel.transition
    a, b = np.meshgrid(g, g, indexing="ij")
    P = np.stack([np.stack([(1 - a) * (1 - b), (1 - a) * b], -1), np.stack([a * (1 - b), a * b], -1)], -2)
    J = P[..., None] * W
    hyx = -(xlogy(J, W[None, None]).sum(axis=(-1, -2, -3))) / LN2
    h = lambda T, ax: -(xlogy(T, T).sum(axis=ax)) / LN2
    j1 = J.sum(axis=-3)  # (x2, y)
    j2 = J.sum(axis=-2)  # (x1, y)
    px2 = P.sum(axis=-2)
    px1 = P.sum(axis=-1)
    val = (h(j1, (-1, -2)) - h(px2, -1) - hyx) + (h(j2, (-1, -2)) - h(px1, -1) - hyx)
    i, j = np.unravel_index(int(np.argmax(val)), val.shape)
    return StructuredInputDist.product([1 - g[i], g[i]], [1 - g[j], g[j]])


@lru_cache(maxsize=64)
def _two_way(channel: MacChannel, restarts: int, seed: int) -> TwoWayBounds:
    seed_dist = _grid_product_seed(channel)
    inner = max_structured((0, 1, 1, 0), channel, u_size=1, restarts=restarts, tol=1e-12, seed=seed,
                           inits=[seed_dist] if seed_dist is not None else [])
    terms = structured_terms(channel, inner.argmax)
    outer = {}
    for name, parts in (("sum", (1, 2)), ("s1", (1,)), ("s2", (2,))):
        prog = _JointProgram(channel)
        expr = 0
        if 1 in parts:
            expr = expr + prog.h_y_given(2) - prog.h_y_given_x1x2()
        if 2 in parts:
            expr = expr + prog.h_y_given(1) - prog.h_y_given_x1x2()
        P, _ = prog.solve(expr)
        q = joint_quantities(channel, P)
        outer[name] = sum(q[k] for k, part in (("I(X1;Y|X2)", 1), ("I(X2;Y|X1)", 2)) if part in parts)
    return TwoWayBounds(
        sum_inner=float(terms[1] + terms[2]),
        sum_outer=max(outer["sum"], float(terms[1] + terms[2])),
        witness_inner=inner.argmax,
        s1_inner=float(terms[1]),
        s2_inner=float(terms[2]),
        s1_outer=max(outer["s1"], float(terms[1])),
        s2_outer=max(outer["s2"], float(terms[2])),
    )


def two_way_sum_bounds(channel: MacChannel, restarts: int = 8, seed: int = 0) -> TwoWayBounds:
    """Inner: independent inputs, I(X1;Y|X2) + I(X2;Y|X1).  Outer: same over joint inputs."""
    return _two_way(channel, restarts, seed)


# --- class check ------------------------------------------------------------


@dataclass(frozen=True)
class ClassCheck:
    holds: bool
    witness: tuple | None = None

    def __bool__(self):
        return self.holds


def theorem1_class_check(channel: MacChannel) -> ClassCheck:
    """Does every output pin down each input given the other, for every input law?

    Equivalent to H(X1|Y,X2) = H(X2|Y,X1) = 0 for all P(x1, x2).  On failure the
    witness is ``("x1", y, x2, (x1, x1'))`` or ``("x2", y, x1, (x2, x2'))``.
    """
    support = channel.transition > 0
    for j in range(channel.x2_size):
        for y in range(channel.y_size):
            xs = np.flatnonzero(support[:, j, y])
            if xs.size > 1:
                return ClassCheck(False, ("x1", y, j, (int(xs[0]), int(xs[1]))))
    for i in range(channel.x1_size):
        for y in range(channel.y_size):
            xs = np.flatnonzero(support[i, :, y])
            if xs.size > 1:
                return ClassCheck(False, ("x2", y, i, (int(xs[0]), int(xs[1]))))
    return ClassCheck(True, None)


def inverse_maps(channel: MacChannel) -> tuple[np.ndarray, np.ndarray]:
    """``x1_of[x2, y]`` and ``x2_of[x1, y]`` (-1 where y is impossible) for class channels."""
    check = theorem1_class_check(channel)
    if not check:
        raise ValidationError(f"channel is outside the decodable-feedback class; ambiguity {check.witness}")
    support = channel.transition > 0
    x1_of = np.full((channel.x2_size, channel.y_size), -1, dtype=np.int64)
    x2_of = np.full((channel.x1_size, channel.y_size), -1, dtype=np.int64)
    for i, j, y in zip(*np.nonzero(support)):
        x1_of[j, y] = i
        x2_of[i, y] = j
    return x1_of, x2_of
