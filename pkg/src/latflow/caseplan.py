"""Executable case analysis for separated parameter tuples.

The classification machinery splits any tuple of flow parameters into cases by
comparing the pairwise spread Delta against floors and ceilings over chosen
admissible sets, scaled by a ladder of constants c_1 < ... < c_r and a
multiplier lambda.  A trace records every decision; with a valid constant
ladder the recursion always ends in a favourable terminal case, and reaching
the impossible final bound would expose a classifier bug.

The constants ell and delta are not pinned down here (they come from
quantitative equidistribution inputs); the defaults ell = 1, delta = 1 are
nominal values for structural testing only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import AdmissibleSet, FlowParam, admissible_sets, delta_spread, restricted_extrema, restrict_param

CASE_1_PRIME = "1'"
CASE_1_DOUBLE = "1''"
CASE_2 = "2"
TERMINAL_FAVOURABLE = "case1prime"
TERMINAL_DEGENERATE = "degenerate"


class CasePlanError(RuntimeError):
    """Raised when the impossible branch is reached or constants are unusable."""


def lambda_constant(r: int, ell: int, delta: float) -> float:
    if r < 1 or ell < 1:
        raise ValueError("r and ell must be positive integers")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return max(2.0, 4.0 * r * ell / delta)


@dataclass(frozen=True)
class CasePlanConstants:
    """Constant ladder for the case analysis.

    lam must equal max(2, 4 r ell / delta).  `validate_ladder` additionally
    enforces the recursive growth c_{k+1} > max(1, 4 (r-k) max(m,n)
    lam^{r(m+n)} / delta) * c_k; classify_case only needs the structural part
    (monotone ladder with c_1 > max(m, n)), which keeps hand-overridden
    ladders usable for experiments.
    """

    r: int
    ell: int
    delta: float
    lam: float
    c: tuple[float, ...]

    def __post_init__(self):
        if len(self.c) != self.r:
            raise ValueError("need one constant per factor")

    def check_structure(self, m: int, n: int) -> None:
        if self.lam != lambda_constant(self.r, self.ell, self.delta):
            raise CasePlanError("lambda does not match max(2, 4 r ell / delta)")
        if self.c[0] <= max(m, n):
            raise CasePlanError("c_1 must exceed max(m, n)")
        if any(b < a for a, b in zip(self.c, self.c[1:])):
            raise CasePlanError("constant ladder must be nondecreasing")
        if any(x <= 0 for x in self.c):
            raise CasePlanError("constants must be positive")

    def validate_ladder(self, m: int, n: int) -> None:
        self.check_structure(m, n)
        growth = self.lam ** (self.r * (m + n))
        for k in range(1, self.r):
            need = max(1.0, 4.0 * (self.r - k) * max(m, n) * growth / self.delta)
            if not self.c[k] > need * self.c[k - 1]:
                raise CasePlanError(f"c_{k + 1} violates the recursive growth bound")


def recursion_constants(
    m: int,
    n: int,
    r: int,
    ell: int = 1,
    delta: float = 1.0,
    slack: float = 1.1,
) -> CasePlanConstants:
    """Smallest-by-construction valid ladder, inflated by a strictness slack."""
    if slack <= 1.0:
        raise ValueError("slack must exceed 1 (the ladder inequalities are strict)")
    lam = lambda_constant(r, ell, delta)
    if r * (m + n) * math.log(lam) > 700.0:
        raise OverflowError(
            "lambda ** (r (m+n)) overflows; reduce the factor count or increase delta"
        )
    growth = lam ** (r * (m + n))
    c = [slack * max(m, n)]
    for k in range(1, r):
        factor = max(1.0, 4.0 * (r - k) * max(m, n) * growth / delta)
        c.append(slack * factor * c[-1])
    if not all(math.isfinite(x) for x in c):
        raise OverflowError("constant ladder overflows; reduce r or increase delta")
    consts = CasePlanConstants(r, ell, float(delta), lam, tuple(c))
    consts.validate_ladder(m, n)
    return consts


# ---------------------------------------------------------------------------
# separated-tuple hypotheses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparationReport:
    delta: float
    floors: tuple[float, ...]
    complement_ceils: tuple[float, ...]
    eq1_holds: bool
    eq2_holds: bool
    degenerate: bool
    ineq_checked: bool
    ineq_holds: bool
    violations: tuple[tuple[int, int], ...]


def check_separated(
    ts: Sequence[FlowParam],
    Is: Sequence[AdmissibleSet],
    alpha: float,
    beta: float,
) -> SeparationReport:
    """Check the two separation hypotheses and, when they hold, the restriction inequality.

    eq1: every floor over its own set is at least alpha * Delta.
    eq2: every ceiling over the complement is at most beta * Delta.
    With beta < 1 these force the restricted parameters to spread at least as
    much as the originals, pairwise; the report verifies that exhaustively.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    if len(ts) != len(Is):
        raise ValueError("need one admissible set per parameter")
    delta = delta_spread(ts)
    floors = tuple(restricted_extrema(t, I.members, "floor") for t, I in zip(ts, Is))
    ceils = tuple(restricted_extrema(t, I.complement, "ceil") for t, I in zip(ts, Is))
    eq1 = min(floors) >= alpha * delta
    eq2 = max(ceils) <= beta * delta
    degenerate = delta == 0.0

    ineq_checked = eq1 and eq2
    violations: list[tuple[int, int]] = []
    if ineq_checked:
        restricted = [restrict_param(t, I.members)[0].coords for t, I in zip(ts, Is)]
        full = [t.coords for t in ts]
        r = len(ts)
        for a in range(r):
            for b in range(a + 1, r):
                dr = max(abs(x - y) for x, y in zip(restricted[a], restricted[b]))
                df = max(abs(x - y) for x, y in zip(full[a], full[b]))
                if dr < df:
                    violations.append((a, b))
    return SeparationReport(
        delta=delta,
        floors=floors,
        complement_ceils=ceils,
        eq1_holds=eq1,
        eq2_holds=eq2,
        degenerate=degenerate,
        ineq_checked=ineq_checked,
        ineq_holds=ineq_checked and not violations,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# the recursive classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseStep:
    """One decision in the trace.

    live lists the original factor indices still in play, in order; sets holds
    the current index sets for those factors.  J carries the enlargement sets
    of a restart; absorbed names the factor removed by a level-2 descent.
    """

    level: int
    tag: str
    live: tuple[int, ...]
    sets: tuple[tuple[int, ...], ...]
    J: tuple[tuple[int, ...], ...] | None
    restart: int
    multiplier: float
    absorbed: int | None = None


@dataclass(frozen=True)
class CaseTrace:
    steps: tuple[CaseStep, ...]
    terminal: str
    terminal_level: int
    delta: float
    restarts_per_level: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {
            "terminal": self.terminal,
            "terminal_level": self.terminal_level,
            "delta": self.delta,
            "restarts_per_level": [list(x) for x in self.restarts_per_level],
            "steps": [
                {
                    "level": s.level,
                    "case": s.tag,
                    "live": list(s.live),
                    "sets": [list(x) for x in s.sets],
                    "J": None if s.J is None else [list(x) for x in s.J],
                    "restart": s.restart,
                    "multiplier": s.multiplier,
                    "absorbed": s.absorbed,
                }
                for s in self.steps
            ],
        }


def _best_floor_set(coords: tuple[float, ...], adm: list[AdmissibleSet]) -> tuple[AdmissibleSet, float]:
    best, best_floor = None, -math.inf
    for I in adm:
        fl = min(coords[i - 1] for i in I.members)
        if fl > best_floor:
            best, best_floor = I, fl
    return best, best_floor


def classify_case(ts: Sequence[FlowParam], constants: CasePlanConstants) -> CaseTrace:
    """Run the case recursion on a parameter tuple and return the full trace.

    At each level k (the number of live factors) the classifier either finds
    admissible sets whose floors dominate Delta / c_k (case 1, then the
    restart loop between the favourable subcase 1' and the enlargement
    subcase 1''), or absorbs the factor with the smallest overall ceiling
    (case 2) and descends.  Reaching the final impossible bound raises.
    """
    r = len(ts)
    if r < 2:
        raise ValueError("classification needs at least two factors")
    if constants.r != r:
        raise ValueError("constants were built for a different factor count")
    dims = {(t.m, t.n) for t in ts}
    if len(dims) != 1:
        raise ValueError("parameters must share dimensions")
    (m, n), = dims
    constants.check_structure(m, n)

    delta = delta_spread(ts)
    if delta == 0.0:
        return CaseTrace((), TERMINAL_DEGENERATE, r, 0.0, ())

    adm = admissible_sets(m, n)
    coords = [t.coords for t in ts]
    maxmn = max(m, n)
    live = list(range(r))
    steps: list[CaseStep] = []
    restart_counts: list[tuple[int, int]] = []
    max_restarts = r * (m + n)

    while live:
        k = len(live)
        ck = constants.c[k - 1]
        chosen = []
        floors = []
        for s in live:
            I, fl = _best_floor_set(coords[s], adm)
            chosen.append(set(I.members))
            floors.append(fl)

        if delta <= ck * min(floors):
            multiplier = ck
            restart = 0
            while True:
                comps = [
                    tuple(j for j in range(1, m + n + 1) if j not in cur)
                    for cur in chosen
                ]
                ceils = [
                    max((coords[s][j - 1] for j in comp), default=0.0)
                    for s, comp in zip(live, comps)
                ]
                sets_now = tuple(tuple(sorted(cur)) for cur in chosen)
                if delta >= constants.lam * multiplier * max(ceils):
                    steps.append(
                        CaseStep(k, CASE_1_PRIME, tuple(live), sets_now, None, restart, multiplier)
                    )
                    restart_counts.append((k, restart))
                    return CaseTrace(
                        tuple(steps),
                        TERMINAL_FAVOURABLE,
                        k,
                        delta,
                        tuple(restart_counts),
                    )
                threshold = delta / (constants.lam * multiplier)
                J = tuple(
                    tuple(j for j in comp if coords[s][j - 1] > threshold)
                    for s, comp in zip(live, comps)
                )
                if not any(J):
                    raise CasePlanError(
                        "restart subcase fired with empty enlargements; classifier bug"
                    )
                steps.append(
                    CaseStep(k, CASE_1_DOUBLE, tuple(live), sets_now, J, restart, multiplier)
                )
                for cur, js in zip(chosen, J):
                    cur.update(js)
                multiplier *= constants.lam
                restart += 1
                if restart > max_restarts:
                    raise CasePlanError(
                        f"more than r (m+n) = {max_restarts} restarts; classifier bug"
                    )
        else:
            ceil_full = {s: max(coords[s]) for s in live}
            candidates = [s for s in live if delta > ck / maxmn * ceil_full[s]]
            if not candidates or k == 1:
                raise CasePlanError(
                    "impossible final bound reached; the constant ladder or the "
                    "classifier is inconsistent"
                )
            absorbed = min(candidates, key=lambda s: (ceil_full[s], s))
            steps.append(
                CaseStep(
                    k,
                    CASE_2,
                    tuple(live),
                    tuple(tuple(sorted(cur)) for cur in chosen),
                    None,
                    0,
                    ck,
                    absorbed=absorbed,
                )
            )
            live.remove(absorbed)

    raise CasePlanError("classifier exited without a terminal case")
