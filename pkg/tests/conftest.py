import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def face_cascade():
    """Small trained cascade over the synthetic face fixture; shared across
    detector tests to keep the suite fast."""
    from fatiguedet.synth import train_face_cascade

    return train_face_cascade(n_frames=60, seed=9, stage_rounds=(3, 8),
                              feature_step=3)
