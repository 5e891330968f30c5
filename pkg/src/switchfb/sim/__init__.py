"""Monte Carlo simulation of the block-Markov feedback scheme and a no-feedback baseline."""
from .report import (
    SimReport,
    SweepRow,
    clopper_pearson,
    run_block_markov,
    run_no_feedback_baseline,
    sweep,
    sweep_to_csv,
)
from .scheme import CodebookBundle, SchemeConfig, SharedInfoSymbol, generate_codebooks

__all__ = [
    "CodebookBundle",
    "SchemeConfig",
    "SharedInfoSymbol",
    "SimReport",
    "SweepRow",
    "clopper_pearson",
    "generate_codebooks",
    "run_block_markov",
    "run_no_feedback_baseline",
    "sweep",
    "sweep_to_csv",
]
