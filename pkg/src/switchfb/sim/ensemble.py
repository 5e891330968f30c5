"""Random-coding ensemble engine.

For rates where explicit codebooks are far too large (2^{nR} rows), the decoder's outcome
is sampled from its distribution over random codebooks instead.  The transmitted
codewords, channel and switch are drawn explicitly.  Every wrong candidate is an
independent draw from the codebook law, so the probability pi that one of them passes
a typicality test against the realised sequences is a product, over the classes of
positions sharing the same fixed symbols, of multinomial box probabilities.  With the
true index uniform in [M], the smallest-index rule picks the truth with probability
(1 - pi)^K, K = number of smaller indices.

Codebooks and bin hashes are drawn afresh for every block (the standard analysis holds
for this variant).  In the message stage a wrong candidate whose implied z^n equals the
true one matches the bin index for sure; otherwise it matches with probability 1/M0.
"""
from __future__ import annotations

import math
import time

import numpy as np

from ..info import typical_count_bounds
from ..kernels import box_probability
from ..streams import substream
from .scheme import (
    TAG_ENS,
    SchemeConfig,
    TrialOutcome,
    TypicalityTables,
    _draw,
    _transmit,
    check_shared,
    require_class,
)


def _log_box(n_c: int, probs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    if n_c == 0:
        return 0.0 if np.all(lo <= 0) else -math.inf
    v = box_probability(int(n_c), np.ascontiguousarray(probs, dtype=float),
                        np.ascontiguousarray(lo, dtype=np.int64), np.ascontiguousarray(hi, dtype=np.int64))
    return math.log(v) if v > 0 else -math.inf


def _no_smaller_passes(log_pi: float, K: float) -> float:
    """(1 - pi)^K for K wrong candidates each passing with probability pi = exp(log_pi)."""
    if K <= 0 or log_pi == -math.inf:
        return 1.0
    pi = math.exp(log_pi)
    if pi >= 1.0:
        return 0.0
    return math.exp(K * math.log1p(-pi))


def _uniform_rank(rng, M: int) -> float:
    """Number of indices below a uniform index in [M] (as a float, M may exceed 2^64)."""
    return float(math.floor(rng.random() * M)) if M < 2**53 else rng.random() * float(M)


def _typical(counts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    return bool(np.all((counts >= lo) & (counts <= hi)))


class EnsembleModel:
    """Per-configuration constants for the ensemble sampler."""

    def __init__(self, cfg: SchemeConfig, tables: TypicalityTables, inv=None):
        self.cfg = cfg
        self.inv = inv
        self.tables = tables
        P = cfg.input_dist
        self.k1, self.k2 = P.shape
        self.nyd = cfg.channel.y_size + 1
        self.px2 = P.sum(axis=0)
        px2 = np.where(self.px2 > 0, self.px2, 1.0)
        self.cond_x1 = (P / px2[None, :]).T  # [x2, x1]
        self.cdf_x2 = np.cumsum(self.px2)
        self.cdf_x1 = np.cumsum(self.cond_x1, axis=1)
        self.lo1 = tables.lo1.reshape(self.k2, self.nyd)
        self.hi1 = tables.hi1.reshape(self.k2, self.nyd)
        self.lo2 = tables.lo2.reshape(self.k1, self.k2, self.nyd)
        self.hi2 = tables.hi2.reshape(self.k1, self.k2, self.nyd)

    def draw_block(self, rng):
        cfg = self.cfg
        x2 = _draw(self.cdf_x2, rng.random(cfg.n))
        x1 = _draw(self.cdf_x1[x2], rng.random(cfg.n))
        y_d, y_e, v = _transmit(cfg, x1, x2, rng)
        return x1, x2, y_d, y_e, v

    def stage1_log_pi(self, y_d: np.ndarray) -> float:
        """log P(an independent x2 codeword is typical with y_d)."""
        n_c = np.bincount(y_d, minlength=self.nyd)
        return sum(_log_box(n_c[c], self.px2, self.lo1[:, c], self.hi1[:, c]) for c in range(self.nyd))

    def stage2_log_pis(self, x1, x2, y_d) -> tuple[float, float]:
        """(log P(typical), log P(typical and same z^n)) for an independent superposition row."""
        e = self.cfg.channel.erasure
        ctx = np.bincount(x2 * self.nyd + y_d, minlength=self.k2 * self.nyd).reshape(self.k2, self.nyd)
        true_counts = np.zeros((self.k1, self.k2, self.nyd), dtype=np.int64)
        np.add.at(true_counts, (x1, x2, y_d), 1)
        log_typ = 0.0
        log_agree = 0.0
        for j in range(self.k2):
            for c in range(self.nyd):
                lb = _log_box(ctx[j, c], self.cond_x1[j], self.lo2[:, j, c], self.hi2[:, j, c])
                log_typ += lb
                if c == e:
                    # the row must repeat the true x1 on every fed-back step
                    tc = true_counts[:, j, c]
                    if not _typical(tc, self.lo2[:, j, c], self.hi2[:, j, c]):
                        log_agree = -math.inf
                    elif log_agree != -math.inf:
                        with np.errstate(divide="ignore"):
                            logs = np.log(self.cond_x1[j])
                        log_agree += float(np.sum(np.where(tc > 0, tc * logs, 0.0)))
                else:
                    log_agree += lb
        return log_typ, log_agree

    def block_markov_trial(self, trial: int) -> TrialOutcome:
        cfg = self.cfg
        rng = substream(cfg.seed, TAG_ENS, trial)
        inv = self.inv if self.inv is not None else require_class(cfg.channel)
        t0 = time.perf_counter()
        prev = None
        M0, M1 = cfg.M0, cfg.M1
        for b in range(cfg.B):
            x1, x2, y_d, y_e, v = self.draw_block(rng)
            check_shared(cfg, inv, x1, x2, y_e, v)
            if b >= 1:
                # cloud-index stage on block b
                counts = np.bincount(x2 * self.nyd + y_d, minlength=self.k2 * self.nyd)
                ok = _typical(counts, self.tables.lo1, self.tables.hi1)
                ok = ok and rng.random() < _no_smaller_passes(self.stage1_log_pi(y_d), _uniform_rank(rng, M0))
                if not ok:
                    return TrialOutcome(True, 1, time.perf_counter() - t0)
                # message stage on block b - 1
                px1, px2, pyd = prev
                counts = np.bincount((px1 * self.k2 + px2) * self.nyd + pyd, minlength=self.tables.lo2.size)
                ok = _typical(counts, self.tables.lo2, self.tables.hi2)
                log_typ, log_agree = self.stage2_log_pis(px1, px2, pyd)
                pi = math.exp(log_agree) * (1 - 1 / M0) + math.exp(log_typ) / M0
                log_pi = math.log(pi) if pi > 0 else -math.inf
                ok = ok and rng.random() < _no_smaller_passes(log_pi, _uniform_rank(rng, M1))
                if not ok:
                    return TrialOutcome(True, 2, time.perf_counter() - t0)
            prev = (x1, x2, y_d)
        return TrialOutcome(False, 0, time.perf_counter() - t0)

    def baseline_trial(self, trial: int, mass: np.ndarray) -> TrialOutcome:
        """Two-codebook MAC code.  Candidate pairs sharing a codeword are treated as independent."""
        cfg = self.cfg
        rng = substream(cfg.seed, TAG_ENS, trial)
        t0 = time.perf_counter()
        k1, k2, nyd = mass.shape
        px1 = mass.sum(axis=(1, 2))
        px2 = mass.sum(axis=(0, 2))
        x1 = _draw(np.cumsum(px1), rng.random(cfg.n))
        x2 = _draw(np.cumsum(px2), rng.random(cfg.n))
        y_d, _, _ = _transmit(cfg, x1, x2, rng)
        lo, hi = typical_count_bounds(mass, cfg.n, cfg.epsilon)
        counts = np.zeros_like(lo)
        np.add.at(counts, (x1, x2, y_d), 1)
        ok = _typical(counts, lo, hi)
        # wrong x1 with the true x2; both wrong; true x1 with a wrong x2
        a = np.bincount(x2 * nyd + y_d, minlength=k2 * nyd).reshape(k2, nyd)
        log_a = sum(_log_box(a[j, c], px1, lo[:, j, c], hi[:, j, c]) for j in range(k2) for c in range(nyd))
        cy = np.bincount(y_d, minlength=nyd)
        pair = np.outer(px1, px2).ravel()
        log_b = sum(_log_box(cy[c], pair, lo[:, :, c].ravel(), hi[:, :, c].ravel()) for c in range(nyd))
        cc = np.bincount(x1 * nyd + y_d, minlength=k1 * nyd).reshape(k1, nyd)
        log_c = sum(_log_box(cc[i, c], px2, lo[i, :, c], hi[i, :, c]) for i in range(k1) for c in range(nyd))
        K1, K2 = _uniform_rank(rng, cfg.M1), _uniform_rank(rng, cfg.M2)
        p_ok = (_no_smaller_passes(log_a, K1) * _no_smaller_passes(log_b, K1 * (cfg.M2 - 1))
                * _no_smaller_passes(log_c, K2))
        ok = ok and rng.random() < p_ok
        return TrialOutcome(not ok, 0 if ok else 2, time.perf_counter() - t0)
