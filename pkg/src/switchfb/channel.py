"""Raw MAC model, feedforward profiles and the switched (erasure-extended) channel."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .streams import substream

ROW_TOL = 1e-9
MAX_CELLS = 10**8


@dataclass(frozen=True, eq=False)
class MacChannel:
    """Finite-alphabet two-user MAC with law ``transition[x1, x2, y]``."""

    transition: np.ndarray

    def __post_init__(self):
        t = np.array(self.transition, dtype=float)
        if t.ndim != 3 or min(t.shape) < 1:
            raise ValidationError(f"transition must be a non-empty 3-d table, got shape {t.shape}")
        if t.size > MAX_CELLS:
            raise ValidationError(f"transition table has {t.size} cells (cap {MAX_CELLS})")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValidationError("transition entries must be finite and non-negative")
        err = np.abs(t.sum(axis=2) - 1.0)
        if np.any(err > 1e-12):
            bad = np.unravel_index(int(np.argmax(err)), err.shape)
            raise ValidationError(f"row {bad} sums to {t[bad].sum():.15g}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)

    @property
    def x1_size(self) -> int:
        return self.transition.shape[0]

    @property
    def x2_size(self) -> int:
        return self.transition.shape[1]

    @property
    def y_size(self) -> int:
        return self.transition.shape[2]

    @property
    def erasure(self) -> int:
        """Index of the erasure symbol in the extended output alphabet."""
        return self.y_size

    def compound(self) -> np.ndarray:
        """Channel matrix with (x1, x2) flattened to one input index ``x1 * x2_size + x2``."""
        return self.transition.reshape(self.x1_size * self.x2_size, self.y_size)

    def transpose(self) -> "MacChannel":
        """The same channel with the roles of the two transmitters swapped."""
        return MacChannel(np.ascontiguousarray(self.transition.transpose(1, 0, 2)))

    def key(self) -> bytes:
        """Hashable identity used for memoising expensive per-channel computations."""
        return np.asarray(self.transition.shape, dtype=np.int64).tobytes() + self.transition.tobytes()

    def __eq__(self, other):
        return isinstance(other, MacChannel) and self.transition.shape == other.transition.shape and bool(
            np.array_equal(self.transition, other.transition)
        )

    def __hash__(self):
        return hash(self.key())


def deterministic_channel(x1_size: int, x2_size: int, y_size: int, fn: Callable[[int, int], int]) -> MacChannel:
    t = np.zeros((x1_size, x2_size, y_size))
    for a in range(x1_size):
        for b in range(x2_size):
            t[a, b, fn(a, b)] = 1.0
    return MacChannel(t)


def binary_adder() -> MacChannel:
    """Y = X1 + X2 over binary inputs, |Y| = 3."""
    return deterministic_channel(2, 2, 3, lambda a, b: a + b)


def binary_xor() -> MacChannel:
    return deterministic_channel(2, 2, 2, lambda a, b: a ^ b)


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    # decimal literal, so 0.1 means 1/10 rather than the nearest double
    return Fraction(repr(float(v)))


@dataclass(frozen=True)
class FeedforwardProfile:
    """Piecewise-constant feedforward probability function on [0, 1].

    Breakpoints are stored as exact fractions so per-interval integrals are exact.
    """

    segments: tuple[tuple[Fraction, Fraction, float], ...]

    def __post_init__(self):
        segs = tuple((_as_fraction(a), _as_fraction(b), float(p)) for a, b, p in self.segments)
        if not segs:
            raise ValidationError("profile needs at least one segment")
        if segs[0][0] != 0 or segs[-1][1] != 1:
            raise ValidationError("profile segments must start at t=0 and end at t=1")
        for (a, b, p), nxt in zip(segs, segs[1:] + (None,)):
            if not b > a:
                raise ValidationError(f"empty or reversed segment [{a}, {b}]")
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"segment probability {p} outside [0, 1]")
            if nxt is not None and nxt[0] != b:
                kind = "gap" if nxt[0] > b else "overlap"
                raise ValidationError(f"{kind} between segments at t={b} and t={nxt[0]}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, p: float) -> "FeedforwardProfile":
        return cls(((0, 1, p),))

    @classmethod
    def step(cls, p_avg) -> "FeedforwardProfile":
        """All feedback first, then all feedforward: p(t) = 0 for t < 1 - p_avg, else 1."""
        p_avg = _as_fraction(p_avg)
        if p_avg <= 0:
            return cls.constant(0.0)
        if p_avg >= 1:
            return cls.constant(1.0)
        return cls(((0, 1 - p_avg, 0.0), (1 - p_avg, 1, 1.0)))

    @classmethod
    def from_blocks(cls, values: Sequence[float]) -> "FeedforwardProfile":
        """Profile constant on each of ``len(values)`` equal-length blocks."""
        B = len(values)
        return cls(tuple((Fraction(b, B), Fraction(b + 1, B), float(v)) for b, v in enumerate(values)))

    def integral(self, lo, hi) -> Fraction:
        """Exact integral of p(t) over [lo, hi] (p values taken as exact binary fractions)."""
        lo, hi = _as_fraction(lo), _as_fraction(hi)
        total = Fraction(0)
        for a, b, p in self.segments:
            left, right = max(a, lo), min(b, hi)
            if right > left:
                total += (right - left) * Fraction(p)
        return total

    @property
    def p_avg(self) -> float:
        return float(self.integral(0, 1))

    def __call__(self, t: float) -> float:
        t = _as_fraction(t)
        for a, b, p in self.segments:
            if a <= t < b:
                return p
        return self.segments[-1][2]


def compute_switch_probs(profile: FeedforwardProfile, n: int) -> np.ndarray:
    """Per-step feedforward probabilities p_i = n * integral of p(t) over [(i-1)/n, i/n]."""
    if int(n) != n or n < 1:
        raise ValidationError(f"blocklength must be a positive integer, got {n}")
    n = int(n)
    return np.array([float(n * profile.integral(Fraction(i, n), Fraction(i + 1, n))) for i in range(n)])


@dataclass(frozen=True)
class SwitchedChannelInstance:
    channel: MacChannel
    profile: FeedforwardProfile
    n: int
    seed: int = 0
    switch_probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = compute_switch_probs(self.profile, self.n)
        probs.setflags(write=False)
        object.__setattr__(self, "switch_probs", probs)

    @property
    def extended_size(self) -> int:
        return self.channel.y_size + 1


def _check_symbols(seq, size: int, name: str, n: int) -> np.ndarray:
    arr = np.asarray(seq)
    if arr.shape != (n,):
        raise ValidationError(f"{name} must have length {n}, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ValidationError(f"{name} has symbols outside 0..{size - 1}")
    return arr.astype(np.int64)


def draw_outputs(channel: MacChannel, x1: np.ndarray, x2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Raw channel outputs for input sequences (no validation)."""
    cdf = np.cumsum(channel.transition, axis=2)[x1, x2]
    u = rng.random(len(x1))
    y = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(y, channel.y_size - 1)


def apply_switch(y: np.ndarray, v: np.ndarray, erasure: int) -> tuple[np.ndarray, np.ndarray]:
    y_d = np.where(v == 1, y, erasure)
    y_e = np.where(v == 1, erasure, y)
    return y_d, y_e


def sample_block(
    instance: SwitchedChannelInstance,
    x1_seq,
    x2_seq,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One use of the switched channel over a block: returns ``(y_raw, y_d, y_e, v)``.

    Without an explicit ``rng`` the draw comes from the instance's own seed, so
    repeated calls with the same inputs give the same block.
    """
    ch = instance.channel
    x1 = _check_symbols(x1_seq, ch.x1_size, "x1", instance.n)
    x2 = _check_symbols(x2_seq, ch.x2_size, "x2", instance.n)
    if rng is None:
        rng = substream(instance.seed)
    y = draw_outputs(ch, x1, x2, rng)
    v = (rng.random(instance.n) < instance.switch_probs).astype(np.int64)
    y_d, y_e = apply_switch(y, v, ch.erasure)
    return y, y_d, y_e, v


# --- documents -------------------------------------------------------------


def load_channel(document) -> MacChannel:
    """Validate a channel-spec document (mapping, JSON text or path) into a MacChannel.

    Rows within ``ROW_TOL`` of stochastic are renormalised; anything further off is rejected.
    """
    doc = _read_document(document)
    if not isinstance(doc, Mapping):
        raise ValidationError("channel document must be an object")
    try:
        sizes = [int(doc[k]) for k in ("x1_size", "x2_size", "y_size")]
        t = np.array(doc["transition"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed channel document: {exc}") from exc
    if t.shape != tuple(sizes):
        raise ValidationError(f"transition shape {t.shape} does not match sizes {tuple(sizes)}")
    if min(sizes) < 1:
        raise ValidationError("alphabet sizes must be >= 1")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValidationError("transition entries must be finite and non-negative")
    sums = t.sum(axis=2)
    bad = np.abs(sums - 1.0) > ROW_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(f"row {idx} sums to {sums[idx]:.12g}; not stochastic within {ROW_TOL}")
    return MacChannel(t / sums[:, :, None])


def channel_to_document(channel: MacChannel) -> dict:
    return {
        "x1_size": channel.x1_size,
        "x2_size": channel.x2_size,
        "y_size": channel.y_size,
        "transition": channel.transition.tolist(),
    }


def _fraction_out(f: Fraction):
    as_float = float(f)
    return as_float if Fraction(repr(as_float)) == f else f"{f.numerator}/{f.denominator}"


def load_profile(document) -> FeedforwardProfile:
    doc = _read_document(document)
    if not isinstance(doc, list):
        raise ValidationError("profile document must be an array of segments")
    try:
        segs = [(s["t_start"], s["t_end"], s["p"]) for s in doc]
        return FeedforwardProfile(tuple(segs))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"malformed profile document: {exc}") from exc


def profile_to_document(profile: FeedforwardProfile) -> list[dict]:
    return [{"t_start": _fraction_out(a), "t_end": _fraction_out(b), "p": p} for a, b, p in profile.segments]


def _read_document(document):
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith(("{", "["))):
        try:
            text = Path(document).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read {document}: {exc}") from exc
        document = text
    if isinstance(document, (str, bytes)):
        try:
            return json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
    return document


def dump_document(obj, path: Path | str | None = None) -> str:
    text = json.dumps(obj, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


__all__ = [
    "MacChannel",
    "FeedforwardProfile",
    "SwitchedChannelInstance",
    "compute_switch_probs",
    "sample_block",
    "load_channel",
    "load_profile",
    "channel_to_document",
    "profile_to_document",
    "dump_document",
    "binary_adder",
    "binary_xor",
    "deterministic_channel",
]
