import time

import numpy as np
import pytest

from lrasobol.benchmarks import get_benchmark
from lrasobol.lra import select_degree
from lrasobol.pce import build_pce
from lrasobol.sampling import make_design


def _design(name, n):
    bm = get_benchmark(name)
    ed = make_design("sobol", bm.input_model, n)
    return bm, ed.with_responses(bm(ed.points_physical))


@pytest.fixture(scope="session")
def sobol_g_ed():
    return _design("sobol-g", 500)


@pytest.fixture(scope="session")
def sobol_g_lra(sobol_g_ed):
    bm, ed = sobol_g_ed
    t0 = time.perf_counter()
    _, model = select_degree(ed, bm.input_model, range(1, 16), r_max=5)
    return model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sobol_g_pce(sobol_g_ed):
    bm, ed = sobol_g_ed
    t0 = time.perf_counter()
    model = build_pce(ed, bm.input_model)
    return model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sobol_g_validation():
    bm = get_benchmark("sobol-g")
    x = np.random.default_rng(12345).random((10**5, bm.input_model.dim))
    return x, bm(x)


@pytest.fixture(scope="session")
def beam_lra():
    bm, ed = _design("beam", 50)
    t0 = time.perf_counter()
    _, model = select_degree(ed, bm.input_model, range(1, 16), r_max=10)
    return model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def beam_pce():
    bm, ed = _design("beam", 50)
    return build_pce(ed, bm.input_model)


@pytest.fixture(scope="session")
def truss_lra():
    bm, ed = _design("truss", 200)
    t0 = time.perf_counter()
    _, model = select_degree(ed, bm.input_model, range(1, 16), r_max=10)
    return model, time.perf_counter() - t0
