"""Shared random generators for property and fuzz tests."""

import numpy as np
import pytest

from latflow.core import AdmissibleSet, FlowParam, admissible_sets
from latflow.caseplan import check_separated


def random_balanced_param(rng: np.random.Generator, m: int, n: int, scale: float = 5.0) -> FlowParam:
    """A random balanced nonnegative flow parameter, occasionally sparse."""
    coords = rng.uniform(0.0, scale, size=m + n)
    mask = rng.random(m + n) < 0.2
    coords[mask] = 0.0
    s1, s2 = coords[:m].sum(), coords[m:].sum()
    if s1 == 0.0 or s2 == 0.0:
        coords[:] = 0.0
        return FlowParam(m, n, tuple(coords))
    target = 0.5 * (s1 + s2)
    coords[:m] *= target / s1
    coords[m:] *= target / s2
    return FlowParam(m, n, tuple(coords))


def random_separated_tuple(
    rng: np.random.Generator,
    m: int,
    n: int,
    r: int,
    alpha: float = 0.5,
    beta: float = 0.25,
    max_tries: int = 400,
):
    """A tuple satisfying the two separation hypotheses, or None.

    Builds well-spread levels per factor with small off-support coordinates,
    rebalances the blocks, and keeps the tuple only if the hypotheses verify.
    """
    adm = admissible_sets(m, n)
    for _ in range(max_tries):
        Is = [adm[int(rng.integers(len(adm)))] for _ in range(r)]
        spacing = rng.uniform(1.0, 10.0)
        ts = []
        for s in range(r):
            level = (s + 1) * 1.5 * spacing * rng.uniform(0.95, 1.05)
            coords = np.empty(m + n)
            for i in range(1, m + n + 1):
                if i in Is[s]:
                    coords[i - 1] = level * rng.uniform(1.0, 1.25)
                else:
                    coords[i - 1] = rng.uniform(0.0, 0.4 * beta * spacing)
            s1, s2 = coords[:m].sum(), coords[m:].sum()
            target = 0.5 * (s1 + s2)
            coords[:m] *= target / s1
            coords[m:] *= target / s2
            ts.append(FlowParam(m, n, tuple(coords)))
        report = check_separated(ts, Is, alpha, beta)
        if report.eq1_holds and report.eq2_holds and not report.degenerate:
            return ts, Is, report
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
