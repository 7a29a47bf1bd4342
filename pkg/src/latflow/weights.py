"""Weight calculus on the expanding directions, and exact separation certificates.

The adjoint action of a flow parameter t on the elementary direction E_ij has
weight alpha_ij(t) = t_i + t_j.  A weight is mixing for an admissible set I
when i lies in I' and j in I''.  For two distinct admissible sets the
separation constant

    theta*(I1, I2) = inf over normalized (s, t)  of  max over candidates of
                     { alpha(s - t) : alpha mixing for I1 }
                     union { alpha(t - s) : alpha mixing for I2 }

is computed exactly as a rational min-max linear program.  The normalization
uses Pi(s, t) = min over supported coordinates; by degree-1 homogeneity the
infimum over {Pi >= 1} (the convex relaxation "all supported coordinates
>= 1") equals the infimum over {Pi == 1}.  Positivity of theta* for a pair is
exactly the separation statement for that pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import rational_lp
from .core import AdmissibleSet
from .rational_lp import LPError

CASE1 = "case1"
CASE2 = "case2"

MODE_BALANCED = "balanced"
MODE_UNBALANCED = "unbalanced"


@dataclass(frozen=True)
class Weight:
    """Index pair of an elementary direction; value at t is t_i + t_j."""

    i: int
    j: int

    def value(self, t: Sequence) -> float:
        return weight_value(self.i, self.j, t)


def weight_value(i: int, j: int, t: Sequence):
    if not (1 <= i <= len(t)) or not (1 <= j <= len(t)):
        raise ValueError(f"weight indices ({i}, {j}) out of range for length {len(t)}")
    return t[i - 1] + t[j - 1]


def mixing_weights(I: AdmissibleSet) -> list[Weight]:
    """All weights (i, j) with i in I' and j in I'', lexicographically ordered."""
    return [Weight(i, j) for i in I.first_block for j in I.second_block]


@dataclass(frozen=True)
class WeightCertificate:
    """Exact optimum of the separation program, with an LP optimality proof.

    theta_star is the exact rational optimum; witness_s / witness_t attain it.
    lp_dual holds one rational multiplier per LP row (in the order rebuilt by
    `_build_lp`), proving optimality by weak duality; `verify` re-checks
    everything from scratch in rational arithmetic.
    """

    m: int
    n: int
    I1: AdmissibleSet
    I2: AdmissibleSet
    mode: str
    theta_star: Fraction
    witness_s: tuple[Fraction, ...]
    witness_t: tuple[Fraction, ...]
    achieving_weight: Weight
    achieving_side: str
    lp_dual: tuple[Fraction, ...]

    def verify(self) -> None:
        verify_certificate(self)


@dataclass(frozen=True)
class SeparationWitness:
    weight: Weight
    side: str
    value: object
    pi: object
    margin: object
    degenerate: bool


def _candidate_forms(I1: AdmissibleSet, I2: AdmissibleSet):
    """Candidates as (side, weight, eval) with eval(s, t) the separation value."""
    out = []
    for w in mixing_weights(I1):
        out.append((CASE1, w))
    for w in mixing_weights(I2):
        out.append((CASE2, w))
    return out


def _form_value(side: str, w: Weight, s: Sequence, t: Sequence):
    if side == CASE1:
        return weight_value(w.i, w.j, s) - weight_value(w.i, w.j, t)
    return weight_value(w.i, w.j, t) - weight_value(w.i, w.j, s)


def _build_lp(m: int, n: int, I1: AdmissibleSet, I2: AdmissibleSet, mode: str):
    """LP data for min z s.t. z >= every candidate form, (s, t) in the
    normalized polytope.  Variables: u_i = s_i - 1 (i in I1), v_j = t_j - 1
    (j in I2), z+ and z-; all nonnegative.  Returns (c, A, b, senses, meta).
    """
    s_vars = {i: k for k, i in enumerate(I1.members)}
    v_off = len(s_vars)
    t_vars = {j: v_off + k for k, j in enumerate(I2.members)}
    zp = v_off + len(t_vars)
    zn = zp + 1
    nvar = zn + 1

    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    senses: list[str] = []
    row_labels: list[str] = []

    def s_coord(i: int) -> tuple[Fraction, dict[int, Fraction]]:
        # value of s_i as (constant, linear coefficients)
        if i in s_vars:
            return Fraction(1), {s_vars[i]: Fraction(1)}
        return Fraction(0), {}

    def t_coord(i: int) -> tuple[Fraction, dict[int, Fraction]]:
        if i in t_vars:
            return Fraction(1), {t_vars[i]: Fraction(1)}
        return Fraction(0), {}

    for side, w in _candidate_forms(I1, I2):
        const = Fraction(0)
        coef: dict[int, Fraction] = {}
        sign = Fraction(1) if side == CASE1 else Fraction(-1)
        for idx in (w.i, w.j):
            sc, scoef = s_coord(idx)
            tc, tcoef = t_coord(idx)
            const += sign * (sc - tc)
            for k, v in scoef.items():
                coef[k] = coef.get(k, Fraction(0)) + sign * v
            for k, v in tcoef.items():
                coef[k] = coef.get(k, Fraction(0)) - sign * v
        # form <= z  ->  coef.(u, v) - z+ + z- <= -const
        row = [Fraction(0)] * nvar
        for k, v in coef.items():
            row[k] = v
        row[zp] = Fraction(-1)
        row[zn] = Fraction(1)
        A.append(row)
        b.append(-const)
        senses.append("<=")
        row_labels.append(f"{side}:{w.i},{w.j}")

    if mode == MODE_BALANCED:
        for I, vars_, tag in ((I1, s_vars, "s"), (I2, t_vars, "t")):
            row = [Fraction(0)] * nvar
            for i in I.first_block:
                row[vars_[i]] += Fraction(1)
            for j in I.second_block:
                row[vars_[j]] -= Fraction(1)
            A.append(row)
            b.append(Fraction(len(I.second_block) - len(I.first_block)))
            senses.append("==")
            row_labels.append(f"balance:{tag}")

    c = [Fraction(0)] * nvar
    c[zp] = Fraction(1)
    c[zn] = Fraction(-1)
    meta = {"s_vars": s_vars, "t_vars": t_vars, "zp": zp, "zn": zn, "labels": row_labels}
    return c, A, b, senses, meta


def optimal_theta(
    m: int,
    n: int,
    I1: AdmissibleSet,
    I2: AdmissibleSet,
    mode: str = MODE_BALANCED,
) -> WeightCertificate:
    """Exact separation constant for an ordered pair of distinct admissible sets."""
    if mode not in (MODE_BALANCED, MODE_UNBALANCED):
        raise ValueError(f"unknown mode {mode!r}")
    if m == 1 and n == 1:
        raise ValueError("no distinct admissible pair exists for m = n = 1")
    if (I1.m, I1.n) != (m, n) or (I2.m, I2.n) != (m, n):
        raise ValueError("admissible sets do not match the given dimensions")
    if I1.members == I2.members:
        raise ValueError("admissible sets must be distinct")

    c, A, b, senses, meta = _build_lp(m, n, I1, I2, mode)
    res = rational_lp.solve_min(c, A, b, senses)
    if res.status == rational_lp.UNBOUNDED:
        # ruled out by homogeneity of the candidate family; reaching this
        # would disprove the separation statement for the pair
        raise LPError(f"separation LP unbounded below for ({I1.members}, {I2.members})")
    if res.status != rational_lp.OPTIMAL:
        raise LPError(f"separation LP failed with status {res.status}")

    d = m + n
    witness_s = tuple(
        Fraction(1) + res.x[meta["s_vars"][i]] if i in meta["s_vars"] else Fraction(0)
        for i in range(1, d + 1)
    )
    witness_t = tuple(
        Fraction(1) + res.x[meta["t_vars"][j]] if j in meta["t_vars"] else Fraction(0)
        for j in range(1, d + 1)
    )
    theta = res.objective

    best = None
    for side, w in _candidate_forms(I1, I2):
        val = _form_value(side, w, witness_s, witness_t)
        if best is None or val > best[0]:
            best = (val, side, w)
    assert best is not None and best[0] == theta, "LP optimum must equal the best candidate"

    cert = WeightCertificate(
        m=m,
        n=n,
        I1=I1,
        I2=I2,
        mode=mode,
        theta_star=theta,
        witness_s=witness_s,
        witness_t=witness_t,
        achieving_weight=best[2],
        achieving_side=best[1],
        lp_dual=res.duals,
    )
    cert.verify()
    return cert


def verify_certificate(cert: WeightCertificate) -> None:
    """Re-verify a certificate from scratch in rational arithmetic."""
    I1, I2 = cert.I1, cert.I2
    d = cert.m + cert.n
    s, t = cert.witness_s, cert.witness_t
    for i in range(1, d + 1):
        if i in I1:
            if s[i - 1] < 1:
                raise LPError(f"witness s_{i} below normalization")
        elif s[i - 1] != 0:
            raise LPError(f"witness s_{i} outside support must be zero")
        if i in I2:
            if t[i - 1] < 1:
                raise LPError(f"witness t_{i} below normalization")
        elif t[i - 1] != 0:
            raise LPError(f"witness t_{i} outside support must be zero")
    if cert.mode == MODE_BALANCED:
        for vec, I in ((s, I1), (t, I2)):
            if sum(vec[: cert.m]) != sum(vec[cert.m :]):
                raise LPError("balanced witness has unequal block sums")

    values = {}
    for side, w in _candidate_forms(I1, I2):
        values[(side, w.i, w.j)] = _form_value(side, w, s, t)
    if any(v > cert.theta_star for v in values.values()):
        raise LPError("some candidate exceeds theta_star at the witness")
    key = (cert.achieving_side, cert.achieving_weight.i, cert.achieving_weight.j)
    if values[key] != cert.theta_star:
        raise LPError("achieving weight does not attain theta_star")

    c, A, b, senses, _ = _build_lp(cert.m, cert.n, I1, I2, cert.mode)
    x = _witness_to_vars(cert)
    rational_lp.verify_optimality(c, A, b, senses, x, cert.lp_dual, cert.theta_star)


def _witness_to_vars(cert: WeightCertificate) -> list[Fraction]:
    _, _, _, _, meta = _build_lp(cert.m, cert.n, cert.I1, cert.I2, cert.mode)
    nvar = meta["zn"] + 1
    x = [Fraction(0)] * nvar
    for i, k in meta["s_vars"].items():
        x[k] = cert.witness_s[i - 1] - 1
    for j, k in meta["t_vars"].items():
        x[k] = cert.witness_t[j - 1] - 1
    if cert.theta_star >= 0:
        x[meta["zp"]] = cert.theta_star
    else:
        x[meta["zn"]] = -cert.theta_star
    return x


def separation_witness(
    s: Sequence,
    t: Sequence,
    I1: AdmissibleSet,
    I2: AdmissibleSet,
) -> SeparationWitness:
    """Best separating candidate at a concrete pair (s, t).

    Ties are broken case1 before case2, then lexicographically in (i, j).
    When the normalization Pi(s, t) is zero the pair is degenerate and the
    margin is reported as infinite.
    """
    d = I1.m + I1.n
    if len(s) != d or len(t) != d:
        raise ValueError("parameter length mismatch")
    for i in range(1, d + 1):
        if i not in I1 and s[i - 1] != 0:
            raise ValueError(f"s must be supported on I1 (coordinate {i} is nonzero)")
        if i not in I2 and t[i - 1] != 0:
            raise ValueError(f"t must be supported on I2 (coordinate {i} is nonzero)")

    best = None
    for side, w in _candidate_forms(I1, I2):
        val = _form_value(side, w, s, t)
        if best is None or val > best[0]:
            best = (val, side, w)
    value, side, w = best

    pi = min(min(s[i - 1] for i in I1.members), min(t[j - 1] for j in I2.members))
    if pi == 0:
        return SeparationWitness(w, side, value, pi, float("inf"), True)
    return SeparationWitness(w, side, value, pi, value / pi, False)
