import numpy as np
import pytest

from edgerec.catalog import CacheSet, generate_synthetic
from edgerec.cli import toy_graph


@pytest.fixture(scope="session")
def toy():
    """Nine-item hand-traceable graph: v fans out to a,b,c; a->d,e; b->c,f; c->g,h."""
    return toy_graph()


@pytest.fixture(scope="session")
def toy_cache():
    return CacheSet.from_ids(("e", "g", "z"), capacity=3)


@pytest.fixture(scope="session")
def small_graph():
    return generate_synthetic(60, 1.0, 6.0, rng_seed=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
