import numpy as np
import pytest

from preqcode.families import (
    Bernoulli,
    Binomial,
    Exponential,
    Geometric,
    NormalFixedMean,
    NormalFixedVariance,
    Poisson,
)


def all_families():
    return [
        Bernoulli(),
        Binomial(2),
        Binomial(7),
        Poisson(),
        Geometric(),
        Exponential(),
        NormalFixedVariance(1.0),
        NormalFixedVariance(2.5),
        NormalFixedMean(),
    ]


def interior_mu(family, rng, margin=0.15):
    """A mean parameter comfortably inside the family's domain."""
    name = family.name
    if name == "bernoulli":
        return float(rng.uniform(margin, 1.0 - margin))
    if name.startswith("binomial"):
        return float(rng.uniform(margin * family.m, (1.0 - margin) * family.m))
    if name.startswith("normal-fixed-variance"):
        return float(rng.uniform(-10.0, 10.0))
    return float(rng.uniform(0.5, 8.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240812)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One ACCEPTANCE PASS/FAIL line per criterion after the run."""
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid:
                name = nodeid.split("::")[-1]
                lines.append(f"ACCEPTANCE {outcome.upper():<6} {name}")
    if lines:
        terminalreporter.write_line("")
        for line in sorted(lines, key=lambda s: s.split()[-1]):
            terminalreporter.write_line(line)
