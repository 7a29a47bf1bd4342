import dataclasses

import numpy as np
import pytest

from latflow.core import AdmissibleSet, FlowParam
from latflow.caseplan import (
    CASE_1_PRIME,
    CASE_2,
    CasePlanError,
    TERMINAL_DEGENERATE,
    TERMINAL_FAVOURABLE,
    check_separated,
    classify_case,
    lambda_constant,
    recursion_constants,
)

from conftest import random_balanced_param, random_separated_tuple


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def test_lambda_examples():
    assert lambda_constant(2, 1, 1.0) == 8.0
    assert lambda_constant(1, 1, 100.0) == 2.0
    with pytest.raises(ValueError):
        lambda_constant(1, 1, 0.0)


def test_lambda_monotonicity():
    assert lambda_constant(3, 1, 1.0) >= lambda_constant(2, 1, 1.0)
    assert lambda_constant(2, 2, 1.0) >= lambda_constant(2, 1, 1.0)
    assert lambda_constant(2, 1, 2.0) <= lambda_constant(2, 1, 1.0)


def test_recursion_constants_values():
    consts = recursion_constants(1, 1, 2, ell=1, delta=1.0, slack=1.1)
    assert consts.lam == 8.0
    assert consts.c[0] == pytest.approx(1.1)
    # growth factor: 4 (r - k) max(m, n) lam^(r (m+n)) / delta = 4 * 8^4 = 16384
    assert consts.c[1] == pytest.approx(1.1 * 16384 * 1.1)
    assert consts.c[0] < consts.c[1]
    consts.validate_ladder(1, 1)


def test_recursion_constants_strictly_increasing():
    consts = recursion_constants(2, 1, 3)
    assert consts.c[0] < consts.c[1] < consts.c[2]


def test_recursion_constants_errors():
    with pytest.raises(ValueError):
        recursion_constants(1, 1, 2, slack=1.0)
    with pytest.raises(OverflowError):
        recursion_constants(3, 3, 40, delta=1e-6)


# ---------------------------------------------------------------------------
# separated-tuple hypotheses
# ---------------------------------------------------------------------------

def test_check_separated_full_sets():
    I = AdmissibleSet(1, 1, (1, 2))
    t1 = FlowParam(1, 1, (5.0, 5.0))
    t2 = FlowParam(1, 1, (10.0, 10.0))
    rep = check_separated([t1, t2], [I, I], 0.5, 0.25)
    assert rep.delta == 5.0
    assert rep.eq1_holds  # min floor 5 >= 2.5
    assert rep.eq2_holds  # empty complements give ceiling 0
    assert rep.ineq_checked and rep.ineq_holds


def test_check_separated_degenerate():
    I = AdmissibleSet(1, 1, (1, 2))
    t = FlowParam(1, 1, (3.0, 3.0))
    rep = check_separated([t, t], [I, I], 0.5, 0.25)
    assert rep.degenerate
    assert rep.eq1_holds and rep.eq2_holds
    assert rep.ineq_holds


def test_check_separated_hand_worked_example():
    I1 = AdmissibleSet(2, 1, (1, 3))
    I2 = AdmissibleSet(2, 1, (2, 3))
    t1 = FlowParam(2, 1, (6.0, 0.1, 6.1))
    t2 = FlowParam(2, 1, (0.1, 6.0, 6.1))
    rep = check_separated([t1, t2], [I1, I2], 0.5, 0.25)
    assert rep.delta == pytest.approx(5.9)
    assert rep.floors == (6.0, 6.0)
    assert rep.complement_ceils == (0.1, 0.1)
    assert rep.eq1_holds and rep.eq2_holds
    assert rep.ineq_holds and not rep.violations


def test_check_separated_rejects_bad_bounds():
    I = AdmissibleSet(1, 1, (1, 2))
    t = FlowParam(1, 1, (1.0, 1.0))
    with pytest.raises(ValueError):
        check_separated([t, t], [I, I], 0.0, 0.25)
    with pytest.raises(ValueError):
        check_separated([t, t], [I, I], 0.5, 1.0)


def test_restriction_inequality_fuzz(rng):
    """Constrained tuples never violate the restriction inequality (module-scale fuzz)."""
    produced = 0
    while produced < 500:
        r = int(rng.integers(2, 4))
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5 - m))
        out = random_separated_tuple(rng, m, n, r)
        if out is None:
            continue
        _, _, rep = out
        assert rep.ineq_holds, (m, n, r)
        produced += 1


# ---------------------------------------------------------------------------
# the classifier
# ---------------------------------------------------------------------------

def test_classify_wide_pair_terminates_level2():
    consts = recursion_constants(1, 1, 2, ell=1, delta=1.0, slack=1.1)
    t1 = FlowParam(1, 1, (1.0, 1.0))
    t2 = FlowParam(1, 1, (9.0, 9.0))
    trace = classify_case([t1, t2], consts)
    assert trace.terminal == TERMINAL_FAVOURABLE
    assert trace.terminal_level == 2
    assert trace.steps[-1].tag == CASE_1_PRIME
    assert trace.steps[-1].restart == 0
    assert trace.steps[-1].sets == ((1, 2), (1, 2))


def test_classify_degenerate_pair():
    consts = recursion_constants(1, 1, 2)
    t = FlowParam(1, 1, (4.0, 4.0))
    trace = classify_case([t, t], consts)
    assert trace.terminal == TERMINAL_DEGENERATE
    assert trace.steps == ()


def test_classify_case2_descent_with_override():
    # small c2 forces the level-2 check to fail and absorb the tiny factor
    consts = recursion_constants(2, 1, 2, ell=1, delta=1.0, slack=1.1)
    consts = dataclasses.replace(consts, c=(consts.c[0], 40.0))
    t1 = FlowParam(2, 1, (5.0, 5.0, 10.0))
    t2 = FlowParam(2, 1, (0.1, 0.1, 0.2))
    trace = classify_case([t1, t2], consts)
    assert trace.delta == pytest.approx(9.8)
    first = trace.steps[0]
    assert first.tag == CASE_2 and first.level == 2
    assert first.absorbed == 1  # the tiny factor, with ceiling 0.2
    # level-2 check: best floor of the tiny factor is 0.1 < delta / c2
    assert max(0.1, 0.1) <= trace.delta / 40.0
    assert trace.terminal == TERMINAL_FAVOURABLE
    assert trace.terminal_level == 1


def test_classify_validates_constants():
    consts = recursion_constants(1, 1, 2)
    bad = dataclasses.replace(consts, c=(0.5, consts.c[1]))  # c1 <= max(m, n)
    with pytest.raises(CasePlanError):
        classify_case([FlowParam(1, 1, (1.0, 1.0)), FlowParam(1, 1, (2.0, 2.0))], bad)
    with pytest.raises(ValueError):
        classify_case([FlowParam(1, 1, (1.0, 1.0))], consts)


def test_classify_enlargement_monotone(rng):
    """Along any trace, each live index set only grows, and J sits in the complement."""
    consts_cache = {}
    seen_enlargement = 0
    for _ in range(400):
        r = int(rng.integers(2, 4))
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5 - m))
        key = (m, n, r)
        if key not in consts_cache:
            consts_cache[key] = recursion_constants(m, n, r)
        ts = [random_balanced_param(rng, m, n, scale=float(rng.uniform(0.5, 12.0))) for _ in range(r)]
        trace = classify_case(ts, consts_cache[key])
        assert trace.terminal in (TERMINAL_FAVOURABLE, TERMINAL_DEGENERATE)
        per_factor: dict[int, set] = {}
        for step in trace.steps:
            for idx, members in zip(step.live, step.sets):
                cur = set(members)
                if idx in per_factor:
                    assert per_factor[idx] <= cur
                per_factor[idx] = cur
            if step.J is not None:
                seen_enlargement += 1
                for members, js in zip(step.sets, step.J):
                    assert not (set(js) & set(members))
        for level, count in trace.restarts_per_level:
            assert count <= r * (m + n)
    assert seen_enlargement >= 0  # structural walk executed


def test_classify_fuzz_totality(rng):
    """Smaller-scale version of the totality fuzz (the acceptance suite runs 10^4)."""
    consts_cache = {}
    for _ in range(1500):
        r = int(rng.integers(2, 4))
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5 - m))
        key = (m, n, r)
        if key not in consts_cache:
            consts_cache[key] = recursion_constants(m, n, r)
        ts = [random_balanced_param(rng, m, n, scale=float(rng.uniform(0.5, 20.0))) for _ in range(r)]
        trace = classify_case(ts, consts_cache[key])
        assert trace.terminal in (TERMINAL_FAVOURABLE, TERMINAL_DEGENERATE)
