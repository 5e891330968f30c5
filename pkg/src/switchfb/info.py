"""Entropy and mutual information on finite joint distributions (bits), and robust typicality."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .channel import MacChannel
from .errors import ResourceCapError, ValidationError

LN2 = np.log(2.0)
MAX_JOINT_CELLS = 10**8
MASS_TOL = 1e-12


def entropy_of(p: np.ndarray) -> float:
    """Shannon entropy in bits of a probability array (any shape)."""
    return float(-xlogy(p, p).sum() / LN2)


@dataclass(frozen=True, eq=False)
class JointDist:
    """Dense joint pmf over named finite variables; ``mass`` has one axis per name."""

    names: tuple[str, ...]
    mass: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        mass = np.asarray(self.mass, dtype=float)
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate variable names in {names}")
        if mass.ndim != len(names):
            raise ValidationError(f"mass has {mass.ndim} axes but {len(names)} names were given")
        if mass.size > MAX_JOINT_CELLS:
            raise ResourceCapError(f"joint table of {mass.size} cells exceeds cap {MAX_JOINT_CELLS}")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > MASS_TOL * max(1, mass.size) ** 0.5:
            raise ValidationError(f"mass must be non-negative and sum to 1 (sum={mass.sum():.15g})")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "mass", mass)

    @property
    def cards(self) -> dict[str, int]:
        return dict(zip(self.names, self.mass.shape))

    def axes_of(self, names: Iterable[str]) -> tuple[int, ...]:
        out = []
        for nm in names:
            if nm not in self.names:
                raise ValidationError(f"unknown variable {nm!r}; have {self.names}")
            out.append(self.names.index(nm))
        return tuple(out)

    def marginal(self, names: Sequence[str]) -> "JointDist":
        names = tuple(names)
        keep = self.axes_of(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        m = self.mass.sum(axis=drop) if drop else self.mass
        # summed axes come out in original order; reorder to the request
        order = sorted(keep)
        m = np.moveaxis(m, [order.index(k) for k in keep], range(len(keep)))
        return JointDist(names, m)


def _as_names(v) -> tuple[str, ...]:
    if isinstance(v, str):
        return (v,)
    return tuple(v)


def entropy(dist: JointDist, vars) -> float:
    """H of the marginal on ``vars`` (0 log 0 = 0)."""
    vars = _as_names(vars)
    if not vars:
        raise ValidationError("entropy needs at least one variable")
    axes = dist.axes_of(vars)
    drop = tuple(i for i in range(len(dist.names)) if i not in axes)
    return max(0.0, entropy_of(dist.mass.sum(axis=drop)))


def _H(dist: JointDist, vars: tuple[str, ...]) -> float:
    return entropy(dist, vars) if vars else 0.0


def conditional_mutual_information(dist: JointDist, a, b, c=()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), clipped at 0 against rounding."""
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if not a or not b:
        raise ValidationError("mutual information needs non-empty A and B")
    sa, sb, sc = set(a), set(b), set(c)
    if sa & sb or sa & sc or sb & sc:
        raise ValidationError(f"variable sets must be disjoint: {a}, {b}, {c}")
    dist.axes_of(a + b + c)
    val = _H(dist, a + c) + _H(dist, b + c) - _H(dist, a + b + c) - _H(dist, c)
    return max(0.0, val)


def mutual_information(dist: JointDist, a, b) -> float:
    return conditional_mutual_information(dist, a, b, ())


def conditional_entropy(dist: JointDist, a, c=()) -> float:
    a, c = _as_names(a), _as_names(c)
    return max(0.0, _H(dist, a + c) - _H(dist, c))


@dataclass(frozen=True, eq=False)
class StructuredInputDist:
    """Input law P(u) P(x1|u) P(x2|u): encoders conditionally independent given U."""

    p_u: np.ndarray
    p_x1_given_u: np.ndarray
    p_x2_given_u: np.ndarray

    def __post_init__(self):
        pu = np.asarray(self.p_u, dtype=float)
        a = np.asarray(self.p_x1_given_u, dtype=float)
        b = np.asarray(self.p_x2_given_u, dtype=float)
        if pu.ndim != 1 or a.ndim != 2 or b.ndim != 2 or a.shape[0] != pu.size or b.shape[0] != pu.size:
            raise ValidationError(f"inconsistent shapes p_u{pu.shape}, x1|u{a.shape}, x2|u{b.shape}")
        for name, arr, ax in (("p_u", pu, 0), ("p_x1_given_u", a, 1), ("p_x2_given_u", b, 1)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=ax) - 1.0) > MASS_TOL * 10):
                raise ValidationError(f"{name} is not stochastic")
        object.__setattr__(self, "p_u", pu)
        object.__setattr__(self, "p_x1_given_u", a)
        object.__setattr__(self, "p_x2_given_u", b)

    @property
    def u_size(self) -> int:
        return self.p_u.size

    def joint_ux1x2(self) -> np.ndarray:
        return self.p_u[:, None, None] * self.p_x1_given_u[:, :, None] * self.p_x2_given_u[:, None, :]

    def joint_x1x2(self) -> np.ndarray:
        return self.joint_ux1x2().sum(axis=0)

    @classmethod
    def product(cls, p_x1, p_x2) -> "StructuredInputDist":
        return cls(np.ones(1), np.asarray(p_x1, float)[None, :], np.asarray(p_x2, float)[None, :])

    @classmethod
    def from_joint(cls, p_x1x2, u_size: int | None = None) -> "StructuredInputDist":
        """Let U index the (x1, x2) cells so any joint law is representable.

        Cells beyond ``u_size`` (smallest mass first) are dropped and renormalised;
        unused U values get zero mass.
        """
        P = np.asarray(p_x1x2, dtype=float)
        k1, k2 = P.shape
        cells = np.argsort(-P.ravel(), kind="stable")
        cells = cells[P.ravel()[cells] > 0]
        size = len(cells) if u_size is None else u_size
        cells = cells[:size]
        pu = np.zeros(max(size, 1))
        a = np.full((pu.size, k1), 1.0 / k1)
        b = np.full((pu.size, k2), 1.0 / k2)
        for u, c in enumerate(cells):
            i, j = divmod(int(c), k2)
            pu[u] = P.ravel()[c]
            a[u] = 0.0
            a[u, i] = 1.0
            b[u] = 0.0
            b[u, j] = 1.0
        if pu.sum() == 0:
            pu[0] = 1.0
        return cls(pu / pu.sum(), a, b)

    @classmethod
    def mixture(cls, dists: Sequence["StructuredInputDist"], weights) -> "StructuredInputDist":
        """Time-sharing: U' = (J, U) with J ~ weights, dropping zero-weight parts."""
        w = np.asarray(weights, dtype=float)
        parts = [(wi, d) for wi, d in zip(w, dists) if wi > 0]
        if not parts:
            raise ValidationError("mixture needs positive weight")
        tot = sum(wi for wi, _ in parts)
        pu = np.concatenate([wi / tot * d.p_u for wi, d in parts])
        a = np.concatenate([d.p_x1_given_u for _, d in parts])
        b = np.concatenate([d.p_x2_given_u for _, d in parts])
        return cls(pu / pu.sum(), a, b)


TERM_NAMES = ("I(X1,X2;Y|U)", "I(X1;Y|U,X2)", "I(X2;Y|U,X1)", "I(X1,X2;Y)")


def structured_terms(channel: MacChannel, dist: StructuredInputDist) -> np.ndarray:
    """The four rate functionals [I(X1,X2;Y|U), I(X1;Y|U,X2), I(X2;Y|U,X1), I(X1,X2;Y)] in bits."""
    Q = dist.joint_ux1x2()[:, :, :, None] * channel.transition[None]
    h_full = entropy_of(Q)
    h_ux = entropy_of(Q.sum(axis=3))
    ic = entropy_of(Q.sum(axis=(1, 2))) - entropy_of(Q.sum(axis=(1, 2, 3))) - h_full + h_ux
    i1 = entropy_of(Q.sum(axis=1)) - entropy_of(Q.sum(axis=(1, 3))) - h_full + h_ux
    i2 = entropy_of(Q.sum(axis=2)) - entropy_of(Q.sum(axis=(2, 3))) - h_full + h_ux
    J = Q.sum(axis=0)
    ij = entropy_of(J.sum(axis=(0, 1))) - entropy_of(J) + entropy_of(J.sum(axis=2))
    return np.maximum(np.array([ic, i1, i2, ij]), 0.0)


def induced_joint(channel: MacChannel, input: StructuredInputDist, switch_p: float) -> JointDist:
    """Joint law of (U, X1, X2, Y, V, Y_d, Y_e) with V ~ Ber(switch_p) and the erasure switch.

    V = 1 sends Y to the decoder (Y_e erased); V = 0 feeds it back (Y_d erased).
    """
    if input.p_x1_given_u.shape[1] != channel.x1_size or input.p_x2_given_u.shape[1] != channel.x2_size:
        raise ValidationError("input distribution alphabets do not match the channel")
    if not 0.0 <= switch_p <= 1.0:
        raise ValidationError(f"switch probability {switch_p} outside [0, 1]")
    ny = channel.y_size
    e = channel.erasure
    cells = input.u_size * channel.x1_size * channel.x2_size * ny * 2 * (ny + 1) ** 2
    if cells > MAX_JOINT_CELLS:
        raise ResourceCapError(f"induced joint needs {cells} cells (cap {MAX_JOINT_CELLS})")
    base = input.joint_ux1x2()[..., None] * channel.transition[None]
    mass = np.zeros(base.shape + (2, ny + 1, ny + 1))
    ys = np.arange(ny)
    # V = 1: Y_d = Y, Y_e = e ; V = 0: Y_d = e, Y_e = Y
    mass[:, :, :, ys, 1, ys, e] = switch_p * base[:, :, :, ys]
    mass[:, :, :, ys, 0, e, ys] = (1.0 - switch_p) * base[:, :, :, ys]
    return JointDist(("U", "X1", "X2", "Y", "V", "Yd", "Ye"), mass)


def joint_from_x1x2(channel: MacChannel, p_x1x2, switch_p: float = 1.0) -> JointDist:
    """Induced joint for an unstructured input law (U trivial)."""
    full = induced_joint(channel, StructuredInputDist.from_joint(p_x1x2), switch_p)
    return full.marginal(("X1", "X2", "Y", "V", "Yd", "Ye"))


def empirical_counts(sequences: Sequence[np.ndarray], shape: Sequence[int]) -> np.ndarray:
    seqs = [np.asarray(s, dtype=np.int64) for s in sequences]
    n = len(seqs[0])
    if any(len(s) != n for s in seqs):
        raise ValidationError("sequences must have equal length")
    for s, k in zip(seqs, shape):
        if s.size and (s.min() < 0 or s.max() >= k):
            raise ValidationError(f"symbol out of range 0..{k - 1}")
    flat = np.ravel_multi_index(tuple(seqs), tuple(shape)) if n else np.zeros(0, np.int64)
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(tuple(shape))


def is_robustly_typical(sequences, reference: JointDist, epsilon: float) -> bool:
    """Robust typicality: |freq(a) - p(a)| <= epsilon * p(a) for every joint cell a.

    ``sequences`` holds one sequence per axis of ``reference`` (in axis order); a single
    array is accepted for a one-variable reference.  Zero-probability cells may not occur.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if isinstance(sequences, np.ndarray) and sequences.ndim == 1:
        sequences = [sequences]
    sequences = list(sequences)
    if len(sequences) != reference.mass.ndim:
        raise ValidationError(f"need {reference.mass.ndim} sequences, got {len(sequences)}")
    n = len(sequences[0])
    if n == 0:
        return False
    counts = empirical_counts(sequences, reference.mass.shape)
    lo, hi = typical_count_bounds(reference.mass, n, epsilon)
    return bool(np.all((counts >= lo) & (counts <= hi)))


def typical_count_bounds(p: np.ndarray, n: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer count window [lo, hi] per cell equivalent to robust typicality at length n."""
    lo = np.ceil(n * p * (1 - epsilon) - 1e-9).astype(np.int64)
    hi = np.floor(n * p * (1 + epsilon) + 1e-9).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.where(p > 0, hi, 0)
    return lo, hi
