import os
import time

import pytest

os.environ.setdefault("NUMBA_CACHE_DIR", os.path.join(os.path.dirname(__file__), ".numba_cache"))


@pytest.fixture(scope="session")
def lp_timed():
    from counterrace.lp_opt import build_lp, solve_lp

    t0 = time.perf_counter()
    sols = {n: solve_lp(build_lp(n)) for n in range(4, 17)}
    return sols, time.perf_counter() - t0


@pytest.fixture(scope="session")
def lp_solutions(lp_timed):
    return lp_timed[0]
