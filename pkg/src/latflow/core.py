"""Lattice and flow algebra.

Diagonal flows a(t) acting on unimodular lattices in R^(m+n), torus points B
and the block-triangular lattices they generate, admissible index sets and the
block structure of the intermediate groups they select, plus the lattice
workhorses: LLL reduction with an exact unimodular change-of-basis
certificate, short-vector enumeration, and dual lattices.

Index sets are 1-based throughout the public API: the first block is
{1, ..., m}, the second {m+1, ..., m+n}.  Norms are sup-norms unless a
function name says otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

BALANCE_TOL = 1e-12
DET_TOL = 1e-9

IDENT = "identity"
STAR = "star"
SL = "sl"
ZERO = "zero"


class LatticeReductionError(RuntimeError):
    """Basis reduction failed (numerically singular or non-terminating)."""


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class FlowParam:
    """A point t of the balanced nonnegative flow cone.

    coords has length m + n; the first m entries drive expansion, the last n
    contraction.  The two block sums must agree within BALANCE_TOL; inputs off
    by at most that are re-balanced exactly, larger violations are rejected.
    """

    m: int
    n: int
    coords: tuple[float, ...]

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("block sizes m, n must be positive")
        coords = _as_float_tuple(self.coords)
        if len(coords) != self.m + self.n:
            raise ValueError(f"expected {self.m + self.n} coordinates, got {len(coords)}")
        if any(c < 0.0 for c in coords):
            raise ValueError("flow coordinates must be nonnegative")
        s1 = sum(coords[: self.m])
        s2 = sum(coords[self.m :])
        if abs(s1 - s2) > BALANCE_TOL:
            raise ValueError(
                f"unbalanced flow parameter: block sums {s1!r} vs {s2!r} differ by more than {BALANCE_TOL}"
            )
        if s1 != s2:
            # re-balance: scale the second block so the sums match exactly
            if s2 > 0.0:
                factor = s1 / s2
                coords = coords[: self.m] + tuple(c * factor for c in coords[self.m :])
            else:
                coords = (0.0,) * self.m + coords[self.m :]
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.m + self.n

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __add__(self, other: "FlowParam") -> "FlowParam":
        if (self.m, self.n) != (other.m, other.n):
            raise ValueError("dimension mismatch")
        return FlowParam(self.m, self.n, tuple(a + b for a, b in zip(self.coords, other.coords)))


@dataclass(frozen=True)
class RestrictedParam:
    """Coordinatewise restriction of a flow parameter to an index set.

    Not necessarily balanced; the `balanced` flag records whether the block
    sums happen to agree.  Coordinates outside `support` are exactly zero.
    """

    m: int
    n: int
    coords: tuple[float, ...]
    support: tuple[int, ...]
    balanced: bool

    def __post_init__(self):
        coords = _as_float_tuple(self.coords)
        support = tuple(sorted(int(i) for i in self.support))
        if len(coords) != self.m + self.n:
            raise ValueError("coordinate count mismatch")
        for i, c in enumerate(coords, start=1):
            if i not in support and c != 0.0:
                raise ValueError(f"coordinate {i} outside support must be zero")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "support", support)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class AdmissibleSet:
    """An index set meeting both blocks: I' = I ∩ {1..m} and I'' = I ∩ {m+1..m+n}."""

    m: int
    n: int
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(sorted(set(int(i) for i in self.members)))
        if any(i < 1 or i > self.m + self.n for i in members):
            raise ValueError("indices out of range")
        object.__setattr__(self, "members", members)
        if not self.first_block or not self.second_block:
            raise ValueError(f"set {members} is not admissible: must meet both blocks")

    @property
    def first_block(self) -> tuple[int, ...]:
        return tuple(i for i in self.members if i <= self.m)

    @property
    def second_block(self) -> tuple[int, ...]:
        return tuple(i for i in self.members if i > self.m)

    @property
    def complement(self) -> tuple[int, ...]:
        mem = set(self.members)
        return tuple(i for i in range(1, self.m + self.n + 1) if i not in mem)

    def __contains__(self, i: int) -> bool:
        return i in self.members

    def __le__(self, other: "AdmissibleSet") -> bool:
        return set(self.members) <= set(other.members)


def admissible_sets(m: int, n: int) -> list[AdmissibleSet]:
    """All admissible subsets of {1..m+n}, sorted by member tuple."""
    first = range(1, m + 1)
    second = range(m + 1, m + n + 1)
    out = []
    for k1 in range(1, m + 1):
        for a in itertools.combinations(first, k1):
            for k2 in range(1, n + 1):
                for b in itertools.combinations(second, k2):
                    out.append(AdmissibleSet(m, n, a + b))
    out.sort(key=lambda s: s.members)
    return out


@dataclass(frozen=True)
class TorusPoint:
    """An m x n real matrix with entries taken mod 1 (a point of the base torus)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2:
            raise ValueError("entries must be a 2-d matrix")
        e = np.mod(e, 1.0)
        e[e == 1.0] = 0.0
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class UnimodularLattice:
    """A full-rank lattice in R^dim given by basis columns, |det| = 1.

    Immutable after construction; the reduced-basis cache is write-once.
    """

    basis: np.ndarray
    _reduced: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("basis must be square")
        det = float(np.linalg.det(b))
        if abs(abs(det) - 1.0) > DET_TOL:
            raise ValueError(f"basis determinant {det!r} is not +-1 within {DET_TOL}")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def reduced(self) -> tuple[np.ndarray, list[list[int]]]:
        """LLL-reduced basis and the exact integer change-of-basis matrix."""
        if self._reduced is None:
            object.__setattr__(self, "_reduced", lll_reduce(self.basis))
        return self._reduced


def standard_lattice(dim: int) -> UnimodularLattice:
    return UnimodularLattice(np.eye(dim))


# ---------------------------------------------------------------------------
# flow and lattice constructions
# ---------------------------------------------------------------------------

def flow_matrix(t: FlowParam) -> np.ndarray:
    """Diagonal matrix diag(e^{t_1}, .., e^{t_m}, e^{-t_{m+1}}, .., e^{-t_{m+n}})."""
    c = t.as_array()
    diag = np.concatenate([np.exp(c[: t.m]), np.exp(-c[t.m :])])
    return np.diag(diag)


def lattice_from_matrix(B: TorusPoint) -> UnimodularLattice:
    """The lattice generated by the columns of [[I_m, B], [0, I_n]]."""
    m, n = B.m, B.n
    basis = np.eye(m + n)
    basis[:m, m:] = B.entries
    return UnimodularLattice(basis)


def apply_flow(t: FlowParam, L: UnimodularLattice) -> UnimodularLattice:
    if t.dim != L.dim:
        raise ValueError(f"dimension mismatch: flow in dim {t.dim}, lattice in dim {L.dim}")
    return UnimodularLattice(flow_matrix(t) @ L.basis)


def delta_spread(ts: Sequence[FlowParam]) -> float:
    """Minimum over unordered pairs of the sup-norm distance between parameters."""
    if len(ts) < 2:
        raise ValueError("need at least two flow parameters")
    dims = {(t.m, t.n) for t in ts}
    if len(dims) != 1:
        raise ValueError("flow parameters must share dimensions")
    arrs = [t.as_array() for t in ts]
    best = np.inf
    for a, b in itertools.combinations(arrs, 2):
        best = min(best, float(np.max(np.abs(a - b))))
    return best


def restricted_extrema(t, indices: Iterable[int], mode: str) -> float:
    """min (mode='floor') or max (mode='ceil') of t over a 1-based index set; 0 if empty."""
    if mode not in ("floor", "ceil"):
        raise ValueError("mode must be 'floor' or 'ceil'")
    coords = t.coords if hasattr(t, "coords") else _as_float_tuple(t)
    idx = [int(i) for i in indices]
    if any(i < 1 or i > len(coords) for i in idx):
        raise ValueError("index out of range")
    if not idx:
        return 0.0
    vals = [coords[i - 1] for i in idx]
    return min(vals) if mode == "floor" else max(vals)


def _is_balanced(m: int, coords: Sequence[float]) -> bool:
    return abs(sum(coords[:m]) - sum(coords[m:])) <= BALANCE_TOL


def restrict_param(t: FlowParam, indices: Iterable[int]) -> tuple[RestrictedParam, RestrictedParam]:
    """Split t = t' + t'' with t' supported on the index set and t'' on its complement."""
    idx = set(int(i) for i in indices)
    if any(i < 1 or i > t.dim for i in idx):
        raise ValueError("index out of range")
    comp = tuple(i for i in range(1, t.dim + 1) if i not in idx)
    c_in = tuple(t.coords[i - 1] if i in idx else 0.0 for i in range(1, t.dim + 1))
    c_out = tuple(t.coords[i - 1] if i not in idx else 0.0 for i in range(1, t.dim + 1))
    t_in = RestrictedParam(t.m, t.n, c_in, tuple(sorted(idx)), _is_balanced(t.m, c_in))
    t_out = RestrictedParam(t.m, t.n, c_out, comp, _is_balanced(t.m, c_out))
    return t_in, t_out


# ---------------------------------------------------------------------------
# basis reduction and short vectors
# ---------------------------------------------------------------------------

LLL_DELTA = 0.99
_LLL_MAX_SWEEPS = 10_000


def _int_det(M: list[list[int]]) -> int:
    """Exact determinant of a small integer matrix (fraction-free elimination)."""
    d = len(M)
    A = [[Fraction(x) for x in row] for row in M]
    det = Fraction(1)
    for col in range(d):
        piv = next((r for r in range(col, d) if A[r][col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        det *= A[col][col]
        inv = A[col][col]
        for r in range(col + 1, d):
            f = A[r][col] / inv
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    assert det.denominator == 1
    return int(det)


def _gram_schmidt(cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (mu, norms2): mu[k, j] coefficients (j < k) and squared GS norms."""
    d = cols.shape[1]
    mu = np.zeros((d, d))
    star = np.zeros((d, d))
    norms2 = np.zeros(d)
    for k in range(d):
        v = cols[:, k].copy()
        for j in range(k):
            if norms2[j] == 0.0:
                raise LatticeReductionError("numerically singular basis")
            mu[k, j] = float(np.dot(cols[:, k], star[:, j]) / norms2[j])
            v -= mu[k, j] * star[:, j]
        star[:, k] = v
        norms2[k] = float(np.dot(v, v))
        if not np.isfinite(norms2[k]) or norms2[k] <= 0.0:
            raise LatticeReductionError("numerically singular basis")
    return mu, norms2


def lll_reduce(basis: np.ndarray, delta: float = LLL_DELTA) -> tuple[np.ndarray, list[list[int]]]:
    """LLL reduction of the column basis.

    Returns (reduced, U) where U is an exact integer matrix with det +-1 and
    reduced = basis @ U.  The float columns are always re-derived from U so the
    integer transform is the single source of truth.
    """
    basis = np.asarray(basis, dtype=float)
    d = basis.shape[1]
    U = [[1 if i == j else 0 for j in range(d)] for i in range(d)]

    def current() -> np.ndarray:
        return basis @ np.array(U, dtype=float)

    cols = current()
    sweeps = 0
    k = 1
    while k < d:
        mu, norms2 = _gram_schmidt(cols)
        changed = False
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q != 0:
                for i in range(d):
                    U[i][k] -= q * U[i][j]
                changed = True
        if changed:
            cols = current()
            mu, norms2 = _gram_schmidt(cols)
        if norms2[k] >= (delta - mu[k, k - 1] ** 2) * norms2[k - 1]:
            k += 1
        else:
            for i in range(d):
                U[i][k], U[i][k - 1] = U[i][k - 1], U[i][k]
            cols = current()
            k = max(k - 1, 1)
        sweeps += 1
        if sweeps > _LLL_MAX_SWEEPS:
            raise LatticeReductionError("LLL did not terminate (ill-conditioned basis)")

    if _int_det(U) not in (1, -1):
        raise LatticeReductionError("change-of-basis certificate is not unimodular")
    return current(), U


def reduce_basis(L: UnimodularLattice) -> np.ndarray:
    """LLL-reduced basis generating the same lattice (cached on the lattice)."""
    reduced, _ = L.reduced()
    return reduced


def short_vectors(L: UnimodularLattice, radius: float) -> np.ndarray:
    """All nonzero lattice vectors with Euclidean norm <= radius.

    Enumerates integer coefficients against the reduced basis with ellipsoid
    pruning from the Gram-Schmidt data, so the search is sound for any radius.
    """
    reduced, _ = L.reduced()
    d = L.dim
    mu, norms2 = _gram_schmidt(reduced)
    r2 = float(radius) ** 2 * (1.0 + 1e-12)
    found: list[np.ndarray] = []
    x = [0] * d

    def descend(j: int, remaining: float):
        if j < 0:
            if any(x):
                found.append(reduced @ np.array(x, dtype=float))
            return
        center = sum(mu[k, j] * x[k] for k in range(j + 1, d))
        half_width = np.sqrt(remaining / norms2[j]) if remaining > 0 else 0.0
        lo = int(np.ceil(-center - half_width - 1e-12))
        hi = int(np.floor(-center + half_width + 1e-12))
        for xj in range(lo, hi + 1):
            x[j] = xj
            y = xj + center
            descend(j - 1, remaining - y * y * norms2[j])
        x[j] = 0

    descend(d - 1, r2)
    if not found:
        return np.empty((0, d))
    return np.array(found)


def shortest_vector_length(L: UnimodularLattice) -> float:
    """Minimum sup-norm over nonzero lattice vectors."""
    reduced, _ = L.reduced()
    col_sup = np.max(np.abs(reduced), axis=0)
    bound = float(np.min(col_sup))
    # any sup-shorter vector lies in the Euclidean ball of radius sqrt(d)*bound
    cand = short_vectors(L, np.sqrt(L.dim) * bound)
    sups = np.max(np.abs(cand), axis=1)
    return float(min(bound, sups.min())) if sups.size else bound


def dual_lattice(L: UnimodularLattice) -> UnimodularLattice:
    """Dual lattice: basis is the inverse transpose."""
    try:
        inv = np.linalg.inv(L.basis)
    except np.linalg.LinAlgError as exc:
        raise LatticeReductionError("singular basis has no dual") from exc
    return UnimodularLattice(inv.T)


# ---------------------------------------------------------------------------
# block structure of the intermediate groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPattern:
    """Symbolic shape of the group selected by an admissible set.

    perm[i-1] is the permutation value at i (1-based).  pattern is a
    (m+n) x (m+n) grid over {identity, star, sl, zero}; the sl cells occupy
    exactly the rows and columns of the admissible set.
    """

    m: int
    n: int
    perm: tuple[int, ...]
    k1: int
    k2: int
    pattern: tuple[tuple[str, ...], ...]


def group_blocks(I: AdmissibleSet) -> BlockPattern:
    """Permutation, block sizes and conjugated symbolic pattern for an admissible set.

    The permutation is the unique one that is order-preserving on each of the
    four index classes (complement-in-first, I', I'', complement-in-second),
    which is also the lexicographically smallest valid choice.
    """
    m, n = I.m, I.n
    d = m + n
    Ip, Ipp = I.first_block, I.second_block
    k1, k2 = len(Ip), len(Ipp)
    comp1 = tuple(i for i in range(1, m + 1) if i not in I)
    comp2 = tuple(i for i in range(m + 1, d + 1) if i not in I)

    sigma = [0] * d
    targets = itertools.chain(
        range(1, m - k1 + 1),            # complement of I in the first block
        range(m - k1 + 1, m + 1),        # I'
        range(m + 1, m + k2 + 1),        # I''
        range(m + k2 + 1, d + 1),        # complement of I in the second block
    )
    for src, dst in zip(comp1 + Ip + Ipp + comp2, targets):
        sigma[src - 1] = dst

    # pattern of the reference group for I_0 = {m-k1+1, .., m+k2}: three
    # diagonal blocks (identity, SL_{k1+k2}, identity) with stars above.
    def ref_cell(a: int, b: int) -> str:
        def block(i: int) -> int:
            if i <= m - k1:
                return 0
            if i <= m + k2:
                return 1
            return 2

        ba, bb = block(a), block(b)
        if ba == bb:
            if ba == 1:
                return SL
            return IDENT if a == b else ZERO
        return STAR if ba < bb else ZERO

    pattern = tuple(
        tuple(ref_cell(sigma[a - 1], sigma[b - 1]) for b in range(1, d + 1))
        for a in range(1, d + 1)
    )
    return BlockPattern(m, n, tuple(sigma), k1, k2, pattern)
