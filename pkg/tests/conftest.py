import numpy as np
import pytest

from lcnn import ArchConfig, build

TABLE_CONFIGS = {
    "Unpruned": "16-16-32-100",
    "Pruned_C1": "12-16-32-100",
    "Pruned_C2": "16-12-32-100",
    "Pruned_C3": "16-16-22-100",
    "Pruned_C12": "12-12-32-100",
    "Pruned_C23": "16-12-22-100",
    "Pruned_C123": "12-12-22-100",
}

GOLDEN_PARAMS = {
    "Unpruned": 14886,
    "Pruned_C1": 14254,
    "Pruned_C2": 13138,
    "Pruned_C3": 11396,
    "Pruned_C12": 12650,
    "Pruned_C23": 10008,
    "Pruned_C123": 9520,
}

GOLDEN_MACS_M = {
    "Unpruned": 5.41,
    "Pruned_C1": 4.16,
    "Pruned_C2": 4.13,
    "Pruned_C3": 5.29,
    "Pruned_C12": 3.18,
    "Pruned_C23": 4.04,
    "Pruned_C123": 3.08,
}

GOLDEN_SIZE_KB = {
    "Unpruned": 18.59,
    "Pruned_C1": 17.86,
    "Pruned_C2": 16.85,
    "Pruned_C3": 15.11,
    "Pruned_C12": 16.26,
    "Pruned_C23": 13.73,
    "Pruned_C123": 13.14,
}

PRUNED_NAMES = [n for n in TABLE_CONFIGS if n != "Unpruned"]


@pytest.fixture(scope="session")
def unpruned_net():
    return build(ArchConfig.parse(TABLE_CONFIGS["Unpruned"]), seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
