"""Shared fixtures.

The benchmark fixtures train one classifier per session on the synthetic
corpus and are shared by the acceptance suite and a few behavioral tests.
FALLWATCH_SCALE controls the corpus size (default 0.25, the documented
quarter-size fallback; set 1.0 for the full benchmark).
"""

import os

import numpy as np
import pytest

from fallwatch.data import GenConfig, generate_synthetic, prepare_split, scaled_counts
from fallwatch.network import init_model
from fallwatch.optim import TrainConfig, train
from fallwatch.signals import PreprocessConfig

BENCH_SEED = 42
BENCH_TEST_FRACTION = 0.176


def bench_scale() -> float:
    return float(os.environ.get("FALLWATCH_SCALE", "0.25"))


@pytest.fixture(scope="session")
def tiny_recordings():
    return generate_synthetic(GenConfig(seed=42, counts=scaled_counts(0.05)))


@pytest.fixture(scope="session")
def tiny_split(tiny_recordings):
    split, norm = prepare_split(
        tiny_recordings, preprocess=PreprocessConfig(), seed=42, test_fraction=0.2
    )
    return split, norm


@pytest.fixture(scope="session")
def trained_tiny(tiny_split):
    """A small but genuinely trained model, good enough to detect falls."""
    split, norm = tiny_split
    model = init_model(42, norm_params=norm, preprocess=PreprocessConfig())
    trained, _ = train(model, split, TrainConfig(epochs=8, seed=42, early_stopping=False))
    return trained


@pytest.fixture(scope="session")
def bench_data():
    scale = bench_scale()
    recordings = generate_synthetic(GenConfig(seed=BENCH_SEED, counts=scaled_counts(scale)))
    split, norm = prepare_split(
        recordings,
        preprocess=PreprocessConfig(),
        seed=BENCH_SEED,
        test_fraction=BENCH_TEST_FRACTION,
    )
    return {"scale": scale, "recordings": recordings, "split": split, "norm": norm}


@pytest.fixture(scope="session")
def bench_model(bench_data):
    """The end-to-end benchmark classifier: seed 42, 30-epoch budget."""
    model = init_model(
        BENCH_SEED, norm_params=bench_data["norm"], preprocess=PreprocessConfig()
    )
    trained, history = train(
        model, bench_data["split"], TrainConfig(epochs=30, seed=BENCH_SEED)
    )
    return {"model": trained, "history": history}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
