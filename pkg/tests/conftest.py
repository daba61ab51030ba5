import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def shipped_models():
    """Pretrained and fine-tuned models from the shipped seeded configs (trained once).

    Returns (pretrained, finetuned, training_seconds).
    """
    from lombardctl.tts.train import shipped_configs, train

    start = time.perf_counter()
    pre, fine = shipped_configs()
    pretrained = train(pre)
    finetuned = train(fine, checkpoint=pretrained.model)
    return pretrained, finetuned, time.perf_counter() - start


@pytest.fixture(scope="session")
def tiny_models():
    """A few steps of each stage on a small network, for contract tests."""
    from lombardctl.tts.model import ModelConfig
    from lombardctl.tts.train import TrainConfig, train

    cfg = ModelConfig(hidden=16, text_dim=4, time_dim=4, style_dim=4, encoder_hidden=4)
    pre = train(TrainConfig(seed=1, epochs=2, steps_per_epoch=10, batch_size=4, model=cfg))
    fine = train(TrainConfig(seed=2, stage="finetune", epochs=2, steps_per_epoch=10, batch_size=4, model=cfg),
                 checkpoint=pre.model)
    return pre, fine
