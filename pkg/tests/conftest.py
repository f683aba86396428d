import pytest
from hypothesis import HealthCheck, settings

from bowenlab.constructions import (
    KuAffineConfig, KuEscapeConfig, MayerConfig, build_ku_affine, build_ku_escape, build_mayer,
)
from bowenlab.families import tan_power, z_cos_sqrt_z, z_sin_z

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def tan1():
    return tan_power(1, 1.0)


@pytest.fixture(scope="session")
def zsinz():
    return z_sin_z()


@pytest.fixture(scope="session")
def zcos():
    return z_cos_sqrt_z()


@pytest.fixture(scope="session")
def mayer8(tan1):
    return build_mayer(MayerConfig(tan1, N_t=8))


@pytest.fixture(scope="session")
def escape_sys(zsinz):
    return build_ku_escape(KuEscapeConfig(zsinz, t_target=0.1))


@pytest.fixture(scope="session")
def affine_small(zsinz):
    return build_ku_affine(KuAffineConfig(zsinz, N_t=6))
