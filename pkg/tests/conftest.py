import numpy as np
import pytest

from sedpipe.corpus import Corpus, SynthConfig, index_split, synth_corpus
from sedpipe.detectors import RegConfig, reg_train

MINI_CLASSES = ["tone_burst", "chirp", "noise_burst"]


@pytest.fixture(scope="session")
def mini_synth_config() -> SynthConfig:
    return SynthConfig(
        classes=MINI_CLASSES,
        sessions=3,
        events_per_class=4,
        session_duration=25.0,
        event_duration=(0.6, 0.9),
        snr_db=20.0,
    )


@pytest.fixture(scope="session")
def mini_corpus(mini_synth_config):
    return Corpus(
        sessions=synth_corpus(mini_synth_config, seed=11), classes=MINI_CLASSES
    )


@pytest.fixture(scope="session")
def mini_split(mini_synth_config):
    return index_split(mini_synth_config, 2)


@pytest.fixture(scope="session")
def mini_reg_detector(mini_corpus, mini_split):
    return reg_train(
        mini_corpus, mini_split, RegConfig(trees=12, cv_folds=2, cv_trees=6, seed=1)
    )


@pytest.fixture(scope="session")
def mini_asr_detector(mini_corpus, mini_split):
    from sedpipe.detectors import AsrConfig, asr_train

    return asr_train(mini_corpus, mini_split, AsrConfig(mixtures=2, seed=1))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
