import numpy as np
import pytest

from secrecybc.channel_model import DegradedBcSpec, bsc, identity
from secrecybc.region import ChainDistribution


def random_spec(gen, k, x=2, y=None):
    """Random degraded spec with alphabet sizes drawn from {2, 3} unless given."""
    sizes = [x] + [int(gen.integers(2, 4)) if y is None else y for _ in range(k + 1)]
    tables = [gen.dirichlet(np.ones(sizes[i + 1]), size=sizes[i]) for i in range(k + 1)]
    return DegradedBcSpec.cascade(tables[0], tables[1:])


def bsc_cascade(*ps):
    """Base bsc(ps[0]) followed by bsc kernels ps[1:]."""
    return DegradedBcSpec.cascade(bsc(ps[0]), [bsc(p) for p in ps[1:]])


def flip_chain(alpha):
    """K=2 chain: U2 uniform binary, X = U2 xor Bern(alpha)."""
    return ChainDistribution([0.5, 0.5], ([[1 - alpha, alpha], [alpha, 1 - alpha]],))


@pytest.fixture
def k2_cascade():
    return bsc_cascade(0.05, 0.1, 0.15)


@pytest.fixture
def noiseless_k2():
    return DegradedBcSpec.cascade(identity(2), [identity(2), [[0.5, 0.5], [0.5, 0.5]]])


ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[str(number)] = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(ACCEPTANCE[str(number)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[0]), s)):
            terminalreporter.write_line(ACCEPTANCE[k])
