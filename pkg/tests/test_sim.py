import numpy as np
import pytest
from scipy.stats import chisquare

from switchfb.channel import FeedforwardProfile, SwitchedChannelInstance, binary_adder, deterministic_channel, sample_block
from switchfb.errors import ResourceCapError, ValidationError
from switchfb.sim import (
    SchemeConfig,
    SharedInfoSymbol,
    clopper_pearson,
    generate_codebooks,
    run_block_markov,
    run_no_feedback_baseline,
    sweep,
    sweep_to_csv,
)
from switchfb.sim.scheme import codebook_size

DSBS = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
IDENTITY = deterministic_channel(2, 2, 2, lambda a, b: a)


def cfg(**kw):
    base = dict(channel=binary_adder(), p=0.5, n=30, B=2, R1=0.0, R0=0.1, input_dist=DSBS, epsilon=0.8)
    base.update(kw)
    return SchemeConfig(**base)


def test_codebook_size():
    assert codebook_size(20, 0.2) == 16
    assert codebook_size(10, 0.0) == 1
    assert codebook_size(3, 0.5) == 3
    with pytest.raises(ValidationError):
        codebook_size(3, -0.1)


def test_zero_rates_give_single_codewords():
    books = generate_codebooks(cfg(R1=0.0, R0=0.0))
    assert books.x2.shape == (1, 30) and books.x1_rows(0).shape == (1, 30)


def test_bin_hash_uniform():
    books = generate_codebooks(cfg(n=20, R0=0.2))
    assert books.config.M0 == 16
    rng = np.random.default_rng(0)
    zs = rng.integers(0, 5, (10**4, 20))
    bins = np.array([books.bin_of(z) for z in zs])
    counts = np.bincount(bins, minlength=16)
    assert chisquare(counts).pvalue > 1e-3


def test_codebook_symbol_frequencies():
    books = generate_codebooks(cfg(n=200, R0=0.05, R1=0.05))
    x2 = books.x2[3]
    x1 = books.x1_rows(3)
    freq = np.zeros((2, 2))
    for row in x1:
        np.add.at(freq, (row, x2), 1)
    freq /= freq.sum()
    assert np.max(np.abs(freq - DSBS)) <= 0.05


def test_codebook_cap():
    with pytest.raises(ResourceCapError):
        generate_codebooks(cfg(n=120, R1=0.5))
    with pytest.raises(ResourceCapError):
        run_block_markov(cfg(n=120, R1=0.5, engine="explicit"), 1)


def test_shared_symbol():
    zs = SharedInfoSymbol(2, 3)
    assert zs.size == 7 and zs.erasure == 6
    z = zs.encode([1, 0], [2, 1], [True, False])
    assert z.tolist() == [5, 6]
    x1, x2 = zs.decode(z)
    assert x1.tolist() == [1, -1] and x2.tolist() == [2, -1]


def test_switch_fraction_concentrates():
    n, p, trials = 200, 0.5, 200
    x = np.zeros(n, dtype=int)
    hits = 0
    for s in range(trials):
        inst = SwitchedChannelInstance(binary_adder(), FeedforwardProfile.constant(p), n, seed=s)
        v = sample_block(inst, x, x)[3]
        hits += abs(v.mean() - p) <= 0.25 * p
    assert hits / trials >= 0.99


def test_config_validation():
    for bad in (dict(p=1.5), dict(n=0), dict(B=1), dict(epsilon=0), dict(engine="gpu"), dict(R1=-1),
                dict(input_dist=np.ones((2, 2)))):
        with pytest.raises(ValidationError):
            cfg(**bad)


def test_block_markov_needs_class():
    from switchfb.capacity import max_joint_mi
    from conftest import random_channel

    ch = random_channel(np.random.default_rng(0), 2, 2, 2)
    with pytest.raises(ValidationError):
        run_block_markov(SchemeConfig(ch, 0.5, 10, input_dist=max_joint_mi(ch).argmax), 1)


def test_thread_count_does_not_change_counts():
    c = cfg(n=30, R1=0.2, B=3)
    serial = run_block_markov(c, 40, threads=1)
    parallel = run_block_markov(c, 40, threads=4)
    assert serial.counts() == parallel.counts()
    assert run_block_markov(c.with_(engine="ensemble"), 40, threads=1).counts() == \
        run_block_markov(c.with_(engine="ensemble"), 40, threads=3).counts()


def test_stage1_errors_fall_with_n():
    rates = [run_block_markov(cfg(n=n, engine="ensemble"), 200).message_error_rate for n in (30, 120)]
    assert rates[1] < rates[0]


def test_stage_counts_partition_errors():
    for engine in ("explicit", "ensemble"):
        rep = run_block_markov(cfg(n=30, R1=0.2, engine=engine), 60)
        assert rep.block_errors == rep.stage1_errors + rep.stage2_errors


def test_identity_channel_with_full_feedforward_is_error_free():
    c = SchemeConfig(IDENTITY, 1.0, 40, B=2, R1=0.1, R0=0.0, input_dist=np.full((2, 2), 0.25), epsilon=0.9)
    for engine in ("explicit", "ensemble"):
        assert run_no_feedback_baseline(c.with_(engine=engine, R2=0.0), 30).block_errors == 0


def test_baseline_decreasing_at_low_rate():
    c = cfg(R1=0.25, R2=0.2, input_dist=np.full((2, 2), 0.25), engine="ensemble")
    rates = [run_no_feedback_baseline(c.with_(n=n), 200).message_error_rate for n in (30, 60, 120)]
    assert rates[0] > rates[1] > rates[2] or rates[2] == 0.0


def test_baseline_above_capacity_fails():
    c = cfg(n=120, R1=0.45, R2=0.45, input_dist=np.full((2, 2), 0.25), engine="ensemble")
    assert run_no_feedback_baseline(c, 200).message_error_rate >= 0.3


def test_baseline_without_feedforward_is_guessing():
    c = cfg(p=0.0, n=10, R1=0.2, R2=0.2, input_dist=np.full((2, 2), 0.25))
    rep = run_no_feedback_baseline(c, 100)
    assert rep.message_error_rate >= 0.85


def test_explicit_and_ensemble_agree():
    c = cfg(n=30, R1=0.3, B=2, epsilon=1.0)
    ex = run_block_markov(c.with_(engine="explicit"), 400)
    en = run_block_markov(c.with_(engine="ensemble"), 400)
    assert ex.engine == "explicit" and en.engine == "ensemble"
    assert abs(ex.message_error_rate - en.message_error_rate) <= 0.1


def test_auto_engine_switch():
    assert run_block_markov(cfg(n=30, R1=0.1), 2).engine == "explicit"
    assert run_block_markov(cfg(n=120, R1=0.3), 2).engine == "ensemble"


def test_sweep_and_csv():
    rows = sweep(cfg(R1=0.1, engine="ensemble"), "n", [20, 40], 20)
    text = sweep_to_csv(rows).splitlines()
    assert text[0].startswith("axis_value,trials,errors,error_rate,ci_low,ci_high")
    assert len(text) == 3 and text[1].startswith("20,20,")
    assert rows[0].report.effective_rate == pytest.approx(0.05)


@pytest.mark.parametrize("axis, values", [("B", [2, 3]), ("n", [30, 30]), ("n", []), ("p", [0.1, 0.5, 0.3])])
def test_sweep_validation(axis, values):
    with pytest.raises(ValidationError):
        sweep(cfg(), axis, values, 5)


def test_trials_validation():
    with pytest.raises(ValidationError):
        run_block_markov(cfg(), 0)


def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0.0 and hi == pytest.approx(0.3085, abs=1e-4)
    lo, hi = clopper_pearson(10, 10)
    assert hi == 1.0 and lo == pytest.approx(1 - 0.3085, abs=1e-4)
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi


def test_report_document():
    doc = run_block_markov(cfg(), 5).to_document()
    assert doc["trials"] == 5 and doc["scheme"] == "block_markov" and doc["seed"] == 0
