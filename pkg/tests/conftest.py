import math

import numpy as np
import pytest

from rcrp import model

DEG = math.pi / 180.0


@pytest.fixture(scope="session")
def rgt_instance():
    return model.generate_instance((4, 60, 3, 60), seed=7)


@pytest.fixture(scope="session")
def desk_instance():
    return model.generate_instance((10, 500, 10, 500), seed=1)


def tiny_instances(n, seed0=1000, max_threshold=2):
    """Seeded tiny synthetic ARC instances for oracle comparisons."""
    out = []
    for seed in range(n):
        rng = np.random.default_rng(seed0 + seed)
        I = int(rng.integers(1, 4))
        J = int(rng.integers(max(I, 2), 11))
        P = int(rng.integers(1, 3))
        m = int(rng.integers(10, 61))
        inst = model.random_instance((I, J, P, m), seed, max_threshold=max_threshold)
        eps = float(rng.uniform(0.0, inst.cost.max(axis=1).sum()))
        out.append(inst.with_budget(model.Budget.arc(eps)))
    return out
