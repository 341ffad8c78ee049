import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from degctrl.operators import CoefficientSpec, SystemConfig

settings.register_profile(
    "degctrl", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("degctrl")


def cascade(nx=60, nt=120, **kw):
    """Cascade fixture: only u is controlled, v is reached through b21 = 1 on omega1."""
    base = dict(
        omega=(0.3, 0.8),
        omega1=(0.4, 0.7),
        b21=CoefficientSpec(1.0, (0.4, 0.7)),
        nx=nx,
        nt=nt,
    )
    base.update(kw)
    return SystemConfig(0.5, 0.75, 1.0, **base)


def sine_data(mesh):
    u = np.sin(np.pi * mesh.nodes)
    u[0] = u[-1] = 0.0
    return u, u.copy()


def random_data(mesh, rng):
    u = rng.standard_normal(mesh.n + 1)
    v = rng.standard_normal(mesh.n + 1)
    u[0] = u[-1] = v[0] = v[-1] = 0.0
    return u, v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
