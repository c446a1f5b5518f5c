import pytest
from hypothesis import HealthCheck, settings

from motivpl.domain import FACTORS, Dataset, Feature, FeatureKind, FeatureSchema, default_schema
from motivpl.synth import generate, linear_latents

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def continuous_schema(p: int) -> FeatureSchema:
    return FeatureSchema(tuple(Feature(f"x{i}", FeatureKind.CONTINUOUS) for i in range(p)), FACTORS)


@pytest.fixture
def schema():
    return default_schema()


@pytest.fixture
def small_ds(schema) -> Dataset:
    return generate(40, schema, linear_latents(schema, seed=3))


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
