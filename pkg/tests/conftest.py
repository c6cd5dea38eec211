import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from penalab import ProblemParams, assemble, build_grid, preset, sweep_m

ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance():
    return record


# ----------------------------------------------------------------------
# one-node toy: interval (0, 2), h = 1, so A = [[2]] and vol = 1
def toy_roots(lam, p, m):
    """Positive roots of 2 + v^{m-2} - lam v^{p-2} = 0, found by bracketing (scalar oracle)."""
    f = lambda v: 2.0 + v ** (m - 2) - lam * v ** (p - 2)
    vmin = (lam * (p - 2) / (m - 2)) ** (1.0 / (m - p))  # minimizer of f
    if f(vmin) >= 0:
        return []
    return [brentq(f, 1e-12, vmin, xtol=1e-15), brentq(f, vmin, 10.0, xtol=1e-15)]


def toy_energy(v, lam, p, m):
    return v * v + v**m / m - lam * v**p / p


@pytest.fixture(scope="session")
def toy_cfg():
    return preset("toy-1node")


@pytest.fixture(scope="session")
def toy_op(toy_cfg):
    return toy_cfg.build_operator()


@pytest.fixture(scope="session")
def pi_cfg():
    return preset("interval-pi")


@pytest.fixture(scope="session")
def pi_op(pi_cfg):
    return pi_cfg.build_operator()


@pytest.fixture(scope="session")
def pi_coarse():
    """(0, pi) with 101 nodes: quick enough for per-test solves."""
    return assemble(build_grid("interval", 101, extents=(0.0, math.pi)))


@pytest.fixture(scope="session")
def pi_sweep(pi_cfg, pi_op):
    t0 = time.perf_counter()
    base = pi_cfg.params(max(pi_cfg.m_list))
    sw = sweep_m(base, pi_op, pi_cfg.m_list, psi0=pi_cfg.build_psi0(pi_op))
    sw.elapsed = time.perf_counter() - t0
    return sw


@pytest.fixture(scope="session")
def square_sweep():
    t0 = time.perf_counter()
    cfg = preset("square")
    op = cfg.build_operator()
    sw = sweep_m(cfg.params(max(cfg.m_list)), op, cfg.m_list, psi0=cfg.build_psi0(op))
    sw.elapsed = time.perf_counter() - t0
    return cfg, op, sw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params_pi():
    return ProblemParams(3.0, 4.0, 16.0)
