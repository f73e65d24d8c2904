import numpy as np
import pytest

from solarinvest import (FundamentalSolution, ValueFunction, integrate_boundary,
                         table_preset)

MUS = (0.2, 1.4, 2.25)


@pytest.fixture(scope="session")
def solved():
    """(params, fs, fb, vf) per long-run mean; solved once for the session."""
    out = {}
    for mu in MUS:
        params = table_preset(mu)
        fs = FundamentalSolution(params)
        fb = integrate_boundary(params, fs, n_steps=2000)
        vf = ValueFunction(params, fs, fb)
        out[mu] = (params, fs, fb, vf)
    return out


@pytest.fixture(scope="session")
def base(solved):
    """The mu = 1.4 case (boundary intersects the line of means)."""
    return solved[1.4]


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


@pytest.fixture(scope="session")
def y_grid():
    return np.linspace(0.0, 5.0, 21)
