import pytest

from spideradapt.subjects import (
    SubjectPopulation,
    VirtualSubject,
    generate_population,
    scale_coefficient,
)

# Worked-example weight vector used throughout the tests; its exact scale
# coefficient is 10/7.29.
EXAMPLE_WEIGHTS = (0.97, 0.87, 0.07, 0.63, 0.67, 0.77)


@pytest.fixture(scope="session")
def example_subject() -> VirtualSubject:
    return VirtualSubject(id=0, weights=EXAMPLE_WEIGHTS, coefficient=scale_coefficient(EXAMPLE_WEIGHTS))


@pytest.fixture(scope="session")
def rounded_example_subject() -> VirtualSubject:
    # Same weights with the display-rounded coefficient 1.37; handy for
    # asserting hand-computable stress values.
    return VirtualSubject(id=0, weights=EXAMPLE_WEIGHTS, coefficient=1.37)


@pytest.fixture(scope="session")
def small_population() -> SubjectPopulation:
    return generate_population(10, 4242)
