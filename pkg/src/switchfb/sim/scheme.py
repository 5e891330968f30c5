"""Block-Markov scheme with shared feedback information, simulated with explicit codebooks.

Encoder 2 sends x2(m0_b); encoder 1 superposes x1(m1_b | m0_b).  After each block both
encoders know Z_i = (x1_i, x2_i) on fed-back steps and erasure otherwise, and the next
cloud index is a keyed hash of z^n.  The decoder first finds the smallest cloud index
typical with y_d(b), then the smallest message whose codeword, together with the implied
z^n(b-1), is typical with y_d(b-1) and hashes to the decoded cloud index.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ..capacity import cached_max_joint_mi, inverse_maps, theorem1_class_check
from ..channel import MacChannel, apply_switch, draw_outputs
from ..errors import ResourceCapError, ValidationError
from ..info import joint_from_x1x2, mutual_information, typical_count_bounds
from ..kernels import scan_typical
from ..streams import prf_index, substream

CODEBOOK_CAP = 2**26
R0_FRACTION = 0.8
BIN_TAG = b"switchfb-bin"

# substream tags
TAG_MSG, TAG_X2, TAG_X1, TAG_HASH, TAG_CHAN, TAG_ENS = range(1, 7)


def codebook_size(n: int, rate: float) -> int:
    """ceil(2^{nR}), robust to float noise when nR is an integer."""
    if rate < 0:
        raise ValidationError("rates must be non-negative")
    e = n * rate
    k = round(e)
    if abs(e - k) < 1e-9:
        return 2 ** int(k)
    return math.ceil(2.0**e)


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    channel: MacChannel
    p: float
    n: int
    B: int = 4
    R1: float = 0.0
    R0: float | None = None
    R2: float = 0.0
    input_dist: np.ndarray | None = None
    epsilon: float = 0.1
    seed: int = 0
    engine: str = "auto"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("p must lie in [0, 1]")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("n must be a positive integer")
        if int(self.B) != self.B or self.B < 2:
            raise ValidationError("B must be an integer >= 2")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.engine not in ("auto", "explicit", "ensemble"):
            raise ValidationError(f"unknown engine {self.engine!r}")
        for r in (self.R1, self.R2) + ((self.R0,) if self.R0 is not None else ()):
            if r < 0:
                raise ValidationError("rates must be non-negative")
        if self.input_dist is None:
            P = cached_max_joint_mi(self.channel).argmax
        else:
            P = np.asarray(self.input_dist, dtype=float)
            if P.shape != (self.channel.x1_size, self.channel.x2_size) or np.any(P < 0):
                raise ValidationError("input_dist must be a non-negative |X1| x |X2| table")
            if abs(P.sum() - 1) > 1e-9:
                raise ValidationError("input_dist must sum to 1")
        P = P / P.sum()
        P.setflags(write=False)
        object.__setattr__(self, "input_dist", P)

    def with_(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)

    @cached_property
    def joint(self):
        """Law of (X1, X2, Y_d) under the codebook distribution and switch probability p."""
        return joint_from_x1x2(self.channel, self.input_dist, self.p).marginal(("X1", "X2", "Yd"))

    @cached_property
    def rate0(self) -> float:
        if self.R0 is not None:
            return float(self.R0)
        return R0_FRACTION * mutual_information(self.joint, "X2", "Yd")

    @property
    def M0(self) -> int:
        return codebook_size(self.n, self.rate0)

    @property
    def M1(self) -> int:
        return codebook_size(self.n, self.R1)

    @property
    def M2(self) -> int:
        return codebook_size(self.n, self.R2)

    @property
    def effective_rate(self) -> float:
        return (self.B - 1) * self.R1 / self.B

    def describe(self) -> dict:
        return {
            "p": self.p, "n": self.n, "B": self.B, "R1": self.R1, "R0": self.rate0, "R2": self.R2,
            "epsilon": self.epsilon, "seed": self.seed, "engine": self.engine,
            "input_dist": self.input_dist.tolist(),
        }


# --- shared information ------------------------------------------------------------


@dataclass(frozen=True)
class SharedInfoSymbol:
    """Alphabet of Z: the pair (x1, x2) coded as x1 * |X2| + x2, or the erasure |X1||X2|."""

    x1_size: int
    x2_size: int

    @property
    def size(self) -> int:
        return self.x1_size * self.x2_size + 1

    @property
    def erasure(self) -> int:
        return self.x1_size * self.x2_size

    def encode(self, x1, x2, fed_back) -> np.ndarray:
        return np.where(fed_back, np.asarray(x1) * self.x2_size + np.asarray(x2), self.erasure)

    def decode(self, z) -> tuple[np.ndarray, np.ndarray]:
        """(x1, x2) per step, -1 at erasures."""
        z = np.asarray(z)
        er = z == self.erasure
        return np.where(er, -1, z // self.x2_size), np.where(er, -1, z % self.x2_size)


def reconstruct_shared(channel: MacChannel, inv, x1, x2, y_e) -> tuple[np.ndarray, np.ndarray]:
    """z^n as computed by encoder 1 (from x1, y_e) and by encoder 2 (from x2, y_e)."""
    x1_of, x2_of = inv
    zs = SharedInfoSymbol(channel.x1_size, channel.x2_size)
    fed = y_e != channel.erasure
    y = np.where(fed, y_e, 0)
    x2_hat = np.where(fed, x2_of[x1, y], 0)
    x1_hat = np.where(fed, x1_of[x2, y], 0)
    return zs.encode(x1, x2_hat, fed), zs.encode(x1_hat, x2, fed)


# --- typicality tables -----------------------------------------------------------------


@dataclass
class TypicalityTables:
    """Count windows and cell maps for the three decoding tests."""

    lo1: np.ndarray
    hi1: np.ndarray
    table1: np.ndarray  # [x2, y_d] -> cell of (X2, Y_d)
    lo2: np.ndarray
    hi2: np.ndarray
    table2: np.ndarray  # [x1, x2 * |Yd| + y_d] -> cell of (X1, X2, Y_d)

    @classmethod
    def build(cls, mass_x1x2yd: np.ndarray, n: int, eps: float) -> "TypicalityTables":
        k1, k2, nyd = mass_x1x2yd.shape
        lo1, hi1 = typical_count_bounds(mass_x1x2yd.sum(axis=0).ravel(), n, eps)
        lo2, hi2 = typical_count_bounds(mass_x1x2yd.ravel(), n, eps)
        table1 = np.arange(k2 * nyd, dtype=np.int64).reshape(k2, nyd)
        table2 = np.arange(k1 * k2 * nyd, dtype=np.int64).reshape(k1, k2 * nyd)
        return cls(lo1, hi1, table1, lo2, hi2, table2)


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-cdf sampling; ``cdf`` broadcasts against u[..., None]."""
    return np.minimum((u[..., None] >= cdf).sum(axis=-1), cdf.shape[-1] - 1)


# --- explicit codebooks -----------------------------------------------------------------


@dataclass
class CodebookBundle:
    """Random codebooks for one trial, generated lazily from counter-based substreams.

    ``x2`` is materialised (M0 x n); the superposition rows x1(. | m0) are generated per
    cloud index on demand, and the bin hash is a keyed PRF over z-sequences.
    """

    config: SchemeConfig
    trial: int
    x2: np.ndarray = field(init=False, repr=False)
    _x1_cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        cfg = self.config
        P = cfg.input_dist
        rng = substream(cfg.seed, TAG_X2, self.trial)
        self.x2 = _draw(np.cumsum(P.sum(axis=0)), rng.random((cfg.M0, cfg.n)))
        px2 = P.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(px2[None, :] > 0, P / np.where(px2 > 0, px2, 1.0)[None, :], 1.0 / P.shape[0])
        self._cdf_x1 = np.cumsum(cond.T, axis=1)  # [x2, x1]
        self._hash_key = int(substream(cfg.seed, TAG_HASH, self.trial).integers(2**63))

    def x1_rows(self, m0: int) -> np.ndarray:
        rows = self._x1_cache.get(m0)
        if rows is None:
            cfg = self.config
            u = substream(cfg.seed, TAG_X1, self.trial, m0).random((cfg.M1, cfg.n))
            rows = _draw(self._cdf_x1[self.x2[m0]][None, :, :], u)
            if len(self._x1_cache) >= 4:
                self._x1_cache.pop(next(iter(self._x1_cache)))
            self._x1_cache[m0] = rows
        return rows

    def bin_of(self, z: np.ndarray) -> int:
        return prf_index(self._hash_key, BIN_TAG, np.ascontiguousarray(z, dtype=np.int64).tobytes(), self.config.M0)


def explicit_storage(config: SchemeConfig) -> int:
    return (config.M0 + config.M1) * config.n


def generate_codebooks(config: SchemeConfig, trial: int = 0) -> CodebookBundle:
    need = explicit_storage(config)
    if need > CODEBOOK_CAP:
        raise ResourceCapError(
            f"codebooks need {need} symbols (cap {CODEBOOK_CAP}); lower n or the rates, or use the ensemble engine"
        )
    return CodebookBundle(config, trial)


@dataclass
class TrialOutcome:
    error: bool
    stage: int  # 0 none, 1 cloud-index stage, 2 message stage
    decode_time: float = 0.0


def _transmit(cfg: SchemeConfig, x1, x2, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y = draw_outputs(cfg.channel, x1, x2, rng)
    v = (rng.random(cfg.n) < cfg.p).astype(np.int64)
    y_d, y_e = apply_switch(y, v, cfg.channel.erasure)
    return y_d, y_e, v


def check_shared(cfg: SchemeConfig, inv, x1, x2, y_e, v) -> np.ndarray:
    """Both encoders' z^n; asserts they equal the true shared sequence."""
    za, zb = reconstruct_shared(cfg.channel, inv, x1, x2, y_e)
    truth = SharedInfoSymbol(cfg.channel.x1_size, cfg.channel.x2_size).encode(x1, x2, v == 0)
    if not (np.array_equal(za, truth) and np.array_equal(zb, truth)):
        raise AssertionError("encoders disagree on the shared sequence")
    return truth


def explicit_block_markov_trial(cfg: SchemeConfig, tables: TypicalityTables, inv, trial: int) -> TrialOutcome:
    books = generate_codebooks(cfg, trial)
    msg_rng = substream(cfg.seed, TAG_MSG, trial)
    B, n = cfg.B, cfg.n
    m1 = [int(msg_rng.integers(cfg.M1)) for _ in range(B - 1)] + [0]
    m0 = [0]
    yd_blocks = []
    e_y = cfg.channel.erasure
    nyd = cfg.channel.y_size + 1
    for b in range(B):
        x2 = books.x2[m0[b]]
        x1 = books.x1_rows(m0[b])[m1[b]]
        y_d, y_e, v = _transmit(cfg, x1, x2, substream(cfg.seed, TAG_CHAN, trial, b))
        z = check_shared(cfg, inv, x1, x2, y_e, v)
        yd_blocks.append(y_d)
        m0.append(books.bin_of(z))

    t0 = time.perf_counter()
    m0_hat = [0] + [None] * (B - 1)
    m1_hat = [None] * (B - 1)
    for b in range(1, B):
        r = scan_typical(books.x2, yd_blocks[b], tables.table1, tables.lo1, tables.hi1, 0)
        m0_hat[b] = r if r >= 0 else None
        if m0_hat[b] is None or m0_hat[b - 1] is None:
            continue
        rows = books.x1_rows(m0_hat[b - 1])
        x2 = books.x2[m0_hat[b - 1]]
        ydp = yd_blocks[b - 1]
        ctx = x2 * nyd + ydp
        start = 0
        while True:
            r = scan_typical(rows, ctx, tables.table2, tables.lo2, tables.hi2, start)
            if r < 0:
                break
            z_hat = np.where(ydp == e_y, rows[r] * cfg.channel.x2_size + x2, cfg.channel.x1_size * cfg.channel.x2_size)
            if books.bin_of(z_hat) == m0_hat[b]:
                m1_hat[b - 1] = r
                break
            start = r + 1
    elapsed = time.perf_counter() - t0
    for b in range(1, B):
        if m0_hat[b] != m0[b]:
            if any(m1_hat[j] != m1[j] for j in range(b - 1, B - 1)):
                return TrialOutcome(True, 1, elapsed)
        if m1_hat[b - 1] != m1[b - 1]:
            return TrialOutcome(True, 2, elapsed)
    return TrialOutcome(False, 0, elapsed)


def explicit_baseline_trial(cfg: SchemeConfig, mass: np.ndarray, trial: int) -> TrialOutcome:
    """Standard two-codebook MAC code over one block of y_d, smallest-pair typicality decoding."""
    if (cfg.M1 + cfg.M2) * cfg.n > CODEBOOK_CAP:
        raise ResourceCapError(f"baseline codebooks need {(cfg.M1 + cfg.M2) * cfg.n} symbols (cap {CODEBOOK_CAP})")
    P = cfg.input_dist
    rng1 = substream(cfg.seed, TAG_X1, trial)
    rng2 = substream(cfg.seed, TAG_X2, trial)
    book1 = _draw(np.cumsum(P.sum(axis=1)), rng1.random((cfg.M1, cfg.n)))
    book2 = _draw(np.cumsum(P.sum(axis=0)), rng2.random((cfg.M2, cfg.n)))
    msg = substream(cfg.seed, TAG_MSG, trial)
    m1, m2 = int(msg.integers(cfg.M1)), int(msg.integers(cfg.M2))
    y_d, _, _ = _transmit(cfg, book1[m1], book2[m2], substream(cfg.seed, TAG_CHAN, trial, 0))
    k1, k2, nyd = mass.shape
    lo, hi = typical_count_bounds(mass.ravel(), cfg.n, cfg.epsilon)
    # cell of (x1, x2, y_d) from x2 and the context x1 * |Yd| + y_d
    ctx_x1, ctx_y = np.divmod(np.arange(k1 * nyd), nyd)
    table = (ctx_x1[None, :] * k2 + np.arange(k2)[:, None]) * nyd + ctx_y[None, :]
    table = np.ascontiguousarray(table, dtype=np.int64)
    t0 = time.perf_counter()
    found = None
    for a in range(cfg.M1):
        r = scan_typical(book2, book1[a] * nyd + y_d, table, lo, hi, 0)
        if r >= 0:
            found = (a, r)
            break
    elapsed = time.perf_counter() - t0
    err = found != (m1, m2)
    return TrialOutcome(err, 2 if err else 0, elapsed)


def require_class(channel: MacChannel):
    check = theorem1_class_check(channel)
    if not check:
        raise ValidationError(f"block-Markov scheme needs decodable feedback; ambiguity {check.witness}")
    return inverse_maps(channel)
