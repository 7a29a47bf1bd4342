"""Monte Carlo estimators for translate integrals and decorrelation gaps.

Sampling contract
-----------------
All randomness comes from the counter-based Philox generator keyed by
(master seed, stream tag); the stream tag is derived from a short text label,
and sample index i owns a fixed counter range.  Estimators therefore are pure
functions of (configuration, seed): reruns are bit-identical regardless of
the worker count, which only partitions chunks of fixed size across threads.
Per-chunk moments are combined along a fixed-shape pairwise tree keyed by
chunk index, never by scheduling order.

Estimators with distinct labels read disjoint streams and are statistically
independent; that is what justifies first-order error propagation when
combining a joint estimate with the product of marginal estimates.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from numpy.random import Generator, Philox

from . import _kernels
from .core import (
    AdmissibleSet,
    FlowParam,
    TorusPoint,
    UnimodularLattice,
    apply_flow,
    delta_spread,
    lattice_from_matrix,
)
from .testfns import BumpSpec, TrigPoly, omega_kernel

WORKERS_ENV = "LATFLOW_WORKERS"
CHUNK = 4096
_MASK64 = (1 << 64) - 1
_GRID_LIMIT = 50_000_000


def worker_count() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# counter-based sampling
# ---------------------------------------------------------------------------

def stream_tag(label: str) -> int:
    """Stable 64-bit stream tag for a text label."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _uniform_block(seed: int, tag: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniform [0,1) samples for indices [start, start+count), `width` per index.

    Each index owns ceil(width / 4) Philox blocks, so any batching of a given
    index range yields bit-identical values.
    """
    blocks_per = (width + 3) // 4
    bg = Philox(key=np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64))
    if start:
        bg.advance(start * blocks_per)
    vals = Generator(bg).random(count * blocks_per * 4)
    return vals.reshape(count, blocks_per * 4)[:, :width]


def sample_torus(m: int, n: int, seed: int, index: int, label: str = "torus") -> TorusPoint:
    """Uniform torus point from the counter-based stream (seed, label, index)."""
    row = _uniform_block(seed, stream_tag(label), index, 1, m * n)
    return TorusPoint(row.reshape(m, n))


# ---------------------------------------------------------------------------
# estimates and deterministic accumulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo mean with its standard error and cusp diagnostics.

    max_sample is the largest |value| seen over the run: the truncated Siegel
    transform is unbounded near the cusp, so a huge max flags heavy tails.
    """

    mean: complex | float
    stderr: float
    n_samples: int
    seed: int
    max_sample: float
    label: str = ""
    t_horizon: float | None = None


@dataclass(frozen=True)
class _Stats:
    count: int
    mean: complex
    m2: float
    max_abs: float


def _stats_of(values: np.ndarray) -> _Stats:
    n = int(values.size)
    mean = values.mean()
    d = values - mean
    m2 = float(np.real(d * np.conj(d)).sum())
    return _Stats(n, complex(mean), m2, float(np.abs(values).max()))


def _merge(a: _Stats, b: _Stats) -> _Stats:
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + abs(delta) ** 2 * (a.count * b.count / n)
    return _Stats(n, mean, m2, max(a.max_abs, b.max_abs))


def _merge_tree(stats: list[_Stats]) -> _Stats:
    while len(stats) > 1:
        nxt = [_merge(stats[i], stats[i + 1]) for i in range(0, len(stats) - 1, 2)]
        if len(stats) % 2:
            nxt.append(stats[-1])
        stats = nxt
    return stats[0]


def _chunk_ranges(n: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]


def _map_chunks(fn: Callable[[int], _Stats], n_chunks: int) -> list[_Stats]:
    workers = worker_count()
    if workers <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_chunks)))


def _finalize(st: _Stats, seed: int, label: str, real: bool) -> Estimate:
    var = st.m2 / (st.count - 1) if st.count > 1 else 0.0
    stderr = float(np.sqrt(var / st.count))
    mean = st.mean.real if real else st.mean
    return Estimate(mean, stderr, st.count, seed, st.max_abs, label)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

class SiegelObservable:
    """offset + (truncated Siegel transform of a bump) evaluated on a(t)Lambda_B.

    The lattice points of a(t)Lambda_B inside the bump support are enumerated
    exactly; values agree with testfns.siegel_transform on the same lattice.
    """

    complex_valued = False

    def __init__(self, bump: BumpSpec, m: int, n: int, offset: float = 0.0):
        if bump.dim != m + n:
            raise ValueError("bump dimension must equal m + n")
        self.bump = bump
        self.m, self.n = m, n
        self.offset = float(offset)

    def prepare(self, t: FlowParam) -> Callable[[np.ndarray], np.ndarray]:
        if (t.m, t.n) != (self.m, self.n):
            raise ValueError("flow parameter dimension mismatch")
        R = self.bump.radius
        tv = t.as_array()
        et = np.exp(tv[: self.m])
        emt = np.exp(-tv[self.m :])
        qmax = np.floor(R / emt + 1e-9).astype(np.int64)
        total = 1
        for qm in qmax:
            total *= 2 * int(qm) + 1
        if total > _GRID_LIMIT:
            raise ValueError(
                f"second-block enumeration grid has {total} points; "
                "reduce the flow parameter or the bump radius"
            )
        axes = [np.arange(-qm, qm + 1, dtype=np.float64) for qm in qmax]
        if self.n == 1:
            qgrid = axes[0].reshape(-1, 1)
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            qgrid = np.stack([g.ravel() for g in mesh], axis=1)
        y2 = np.sum((qgrid * emt[None, :]) ** 2, axis=1)
        keep = y2 < R * R
        qgrid = np.ascontiguousarray(qgrid[keep])
        y2 = np.ascontiguousarray(y2[keep])
        Ds = np.floor(R / et + 0.5 + 1e-12).astype(np.int64)
        amp, power = self.bump.amplitude, float(self.bump.power)
        offset = self.offset

        if self.m == 1 and self.n == 1:
            qm, d0 = int(qmax[0]), int(Ds[0])
            e0, em0 = float(et[0]), float(emt[0])

            def ev(B: np.ndarray) -> np.ndarray:
                raw = _kernels.flow_bump_sums_d2(
                    np.ascontiguousarray(B.reshape(-1)), e0, em0, qm, d0, R * R, power
                )
                return offset + amp * (raw - 1.0)  # drop the zero-vector term

            return ev

        def ev(B: np.ndarray) -> np.ndarray:
            raw = _kernels.flow_bump_sums(
                np.ascontiguousarray(B), et, emt, qgrid, y2, Ds, R * R, power
            )
            return offset + amp * (raw - 1.0)  # drop the zero-vector term

        return ev


class ConstantObservable:
    complex_valued = False

    def __init__(self, value: float, m: int, n: int):
        self.value = float(value)
        self.m, self.n = m, n

    def prepare(self, t: FlowParam) -> Callable[[np.ndarray], np.ndarray]:
        value = self.value

        def ev(B: np.ndarray) -> np.ndarray:
            return np.full(B.shape[0], value)

        return ev


class _TorusFunctionObservable:
    """Base for observables defined on the torus itself (flow must be zero)."""

    def _check_zero_flow(self, t: FlowParam) -> None:
        if any(c != 0.0 for c in t.coords):
            raise ValueError(
                f"{type(self).__name__} lives on the base torus; "
                "translate integrals require a zero flow parameter"
            )


class CharacterObservable(_TorusFunctionObservable):
    complex_valued = True

    def __init__(self, k, m: int, n: int):
        self.k = np.asarray(k, dtype=float).reshape(m, n)
        self.m, self.n = m, n

    def prepare(self, t: FlowParam) -> Callable[[np.ndarray], np.ndarray]:
        self._check_zero_flow(t)
        k = self.k

        def ev(B: np.ndarray) -> np.ndarray:
            phase = np.einsum("sij,ij->s", B, k)
            return np.exp(2j * np.pi * phase)

        return ev


class TrigPolyObservable(_TorusFunctionObservable):
    complex_valued = True

    def __init__(self, poly: TrigPoly):
        self.poly = poly
        self.m, self.n = poly.m, poly.n

    def prepare(self, t: FlowParam) -> Callable[[np.ndarray], np.ndarray]:
        self._check_zero_flow(t)
        freqs = sorted(self.poly.coeffs)
        coefs = [self.poly.coeffs[k] for k in freqs]
        karr = np.array(freqs, dtype=float)
        carr = np.array(coefs, dtype=complex)

        def ev(B: np.ndarray) -> np.ndarray:
            flat = B.reshape(B.shape[0], -1)
            phases = flat @ karr.T
            return np.exp(2j * np.pi * phases) @ carr

        return ev


class ProductObservable:
    def __init__(self, *factors):
        dims = {(f.m, f.n) for f in factors}
        if len(dims) != 1:
            raise ValueError("factors must share dimensions")
        self.factors = factors
        (self.m, self.n), = dims
        self.complex_valued = any(f.complex_valued for f in factors)

    def prepare(self, t: FlowParam) -> Callable[[np.ndarray], np.ndarray]:
        evs = [f.prepare(t) for f in self.factors]

        def ev(B: np.ndarray) -> np.ndarray:
            vals = evs[0](B)
            for e in evs[1:]:
                vals = vals * e(B)
            return vals

        return ev


# ---------------------------------------------------------------------------
# translate integrals and correlations
# ---------------------------------------------------------------------------

def estimate_joint_correlation(
    phis: Sequence,
    ts: Sequence[FlowParam],
    n_samples: int,
    seed: int,
    label: str = "corr",
) -> Estimate:
    """Mean over B of the product of translated observables, one shared B per sample."""
    if len(phis) != len(ts) or not phis:
        raise ValueError("need matching, nonempty observable and parameter lists")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    dims = {(t.m, t.n) for t in ts} | {(p.m, p.n) for p in phis}
    if len(dims) != 1:
        raise ValueError("observables and parameters must share dimensions")
    (m, n), = dims
    evs = [phi.prepare(t) for phi, t in zip(phis, ts)]
    is_complex = any(p.complex_valued for p in phis)
    tag = stream_tag(label)
    ranges = _chunk_ranges(n_samples)

    def work(ci: int) -> _Stats:
        lo, hi = ranges[ci]
        B = _uniform_block(seed, tag, lo, hi - lo, m * n).reshape(-1, m, n)
        vals = evs[0](B)
        for ev in evs[1:]:
            vals = vals * ev(B)
        return _stats_of(vals)

    st = _merge_tree(_map_chunks(work, len(ranges)))
    return _finalize(st, seed, label, real=not is_complex)


def estimate_nu_integral(
    phi,
    t: FlowParam,
    n_samples: int,
    seed: int,
    label: str = "corr",
) -> Estimate:
    """Translate integral of a single observable (the r = 1 joint correlation)."""
    return estimate_joint_correlation([phi], [t], n_samples, seed, label)


@dataclass(frozen=True)
class GapResult:
    gap: complex | float
    stderr: float
    joint: Estimate
    singles: tuple[Estimate, ...]


def decorrelation_gap(
    phis: Sequence,
    ts: Sequence[FlowParam],
    n_samples: int,
    seed: int,
    label: str = "gap",
) -> GapResult:
    """Joint correlation minus the product of marginals, with propagated error.

    The joint estimate and each marginal use disjoint streams, so they are
    independent and the first-order (delta method) variance is the sum of the
    product-weighted marginal variances plus the joint variance.
    """
    if len(phis) < 2:
        raise ValueError("decorrelation needs at least two factors")
    joint = estimate_joint_correlation(phis, ts, n_samples, seed, f"{label}:joint")
    singles = tuple(
        estimate_nu_integral(phi, t, n_samples, seed, f"{label}:single:{s}")
        for s, (phi, t) in enumerate(zip(phis, ts))
    )
    prod = 1.0 + 0.0j if any(p.complex_valued for p in phis) else 1.0
    for e in singles:
        prod = prod * e.mean
    gap = joint.mean - prod
    var = joint.stderr**2
    for s, e in enumerate(singles):
        partial = 1.0
        for s2, e2 in enumerate(singles):
            if s2 != s:
                partial *= abs(e2.mean)
        var += (partial * e.stderr) ** 2
    return GapResult(gap, float(np.sqrt(var)), joint, singles)


# ---------------------------------------------------------------------------
# decay sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    delta: float
    gap: float
    stderr: float
    n_samples: int
    seed: int
    ts: tuple[tuple[float, ...], ...]
    max_sample: float


@dataclass(frozen=True)
class SweepResult:
    """Gap rows over a spread grid plus a fitted decay exponent.

    fitted_eta is minus the least-squares slope of log|gap| against the spread,
    using only rows whose gap clears 3 standard errors; it is a descriptive
    statistic, not an estimate of any universal constant.
    """

    rows: tuple[SweepRow, ...]
    fitted_eta: float
    fit_stderr: float
    fit_available: bool
    n_fit_rows: int


def _fit_decay(rows: Sequence[SweepRow]) -> tuple[float, float, bool, int]:
    usable = [r for r in rows if abs(r.gap) > 3.0 * r.stderr and r.gap != 0.0]
    if len(usable) < 2:
        return float("nan"), float("nan"), False, len(usable)
    x = np.array([r.delta for r in usable])
    y = np.log(np.array([abs(r.gap) for r in usable]))
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        return float("nan"), float("nan"), False, len(usable)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    resid = y - (ym + slope * (x - xm))
    dof = len(usable) - 2
    sigma2 = float(np.sum(resid**2) / dof) if dof > 0 else 0.0
    return -slope, float(np.sqrt(sigma2 / sxx)), True, len(usable)


def decay_sweep(
    phis: Sequence,
    base_t: FlowParam,
    direction: FlowParam,
    deltas: Sequence[float],
    n_samples: int,
    seed: int,
    label: str = "gap",
) -> SweepResult:
    """One decorrelation gap per grid value, translating factor s by s*delta*direction."""
    if not deltas:
        raise ValueError("spread grid must be nonempty")
    r = len(phis)
    rows = []
    for d in sorted(float(x) for x in deltas):
        ts = [
            FlowParam(
                base_t.m,
                base_t.n,
                tuple(b + s * d * v for b, v in zip(base_t.coords, direction.coords)),
            )
            for s in range(r)
        ]
        res = decorrelation_gap(phis, ts, n_samples, seed, label)
        spread = delta_spread(ts)
        max_samp = max([res.joint.max_sample] + [e.max_sample for e in res.singles])
        rows.append(
            SweepRow(
                delta=spread,
                gap=float(np.real(res.gap)),
                stderr=res.stderr,
                n_samples=n_samples,
                seed=seed,
                ts=tuple(t.coords for t in ts),
                max_sample=max_samp,
            )
        )
    eta, eta_se, ok, nfit = _fit_decay(rows)
    return SweepResult(tuple(rows), eta, eta_se, ok, nfit)


# ---------------------------------------------------------------------------
# intermediate-space integrals and approximate Haar sampling
# ---------------------------------------------------------------------------

def balanced_support_param(I: AdmissibleSet, T: float) -> FlowParam:
    """Flow parameter supported on I, balanced, with floor over I equal to T.

    Coordinates on I' get T * |I''| / g and on I'' get T * |I'| / g with
    g = min(|I'|, |I''|), so both block sums agree and the minimum over I is T.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    k1, k2 = len(I.first_block), len(I.second_block)
    g = min(k1, k2)
    a = T * k2 / g
    b = T * k1 / g
    coords = [0.0] * (I.m + I.n)
    for i in I.first_block:
        coords[i - 1] = a
    for j in I.second_block:
        coords[j - 1] = b
    return FlowParam(I.m, I.n, tuple(coords))


def estimate_muI_integral(
    phi,
    I: AdmissibleSet,
    T: float,
    n_samples: int,
    seed: int,
    label: str = "muI",
) -> Estimate:
    """Integral over the intermediate space selected by I, via a long translate.

    Bootstraps the intermediate measure from translates of the torus measure:
    the estimate is the plain translate integral at the balanced parameter with
    floor T over I, and carries T so callers can compare horizons (the bias
    decays like e^{-delta * T} for an unknown positive delta).
    """
    t = balanced_support_param(I, T)
    est = estimate_nu_integral(phi, t, n_samples, seed, label)
    return replace(est, t_horizon=float(T))


def full_set(m: int, n: int) -> AdmissibleSet:
    return AdmissibleSet(m, n, tuple(range(1, m + n + 1)))


def approx_haar_sample(
    m: int,
    n: int,
    T: float,
    seed: int,
    index: int,
    label: str = "haar",
) -> UnimodularLattice:
    """Approximately Haar-distributed lattice: a long translate of a random torus point.

    The bias is O(e^{-delta T}) for an unknown delta > 0; compare horizons
    (say T and T + 2) to check stabilization empirically.
    """
    B = sample_torus(m, n, seed, index, label)
    t = balanced_support_param(full_set(m, n), T)
    return apply_flow(t, lattice_from_matrix(B))


def estimate_haar_siegel(
    bump: BumpSpec,
    m: int,
    n: int,
    T: float,
    n_samples: int,
    seed: int,
    label: str = "haar",
) -> Estimate:
    """Mean Siegel transform over approx_haar_sample draws.

    Identical in law (and in stream) to evaluating testfns.siegel_transform on
    approx_haar_sample(m, n, T, seed, i) for i < n_samples; computed via the
    vectorized observable for speed.
    """
    phi = SiegelObservable(bump, m, n)
    t = balanced_support_param(full_set(m, n), T)
    est = estimate_joint_correlation([phi], [t], n_samples, seed, label)
    return replace(est, t_horizon=float(T))


# ---------------------------------------------------------------------------
# circle decorrelation (exact)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleDecorrelation:
    value: complex
    main_term: complex
    gap: complex


def circle_mean_decorrelation(phi: TrigPoly, psi: TrigPoly, L: float) -> CircleDecorrelation:
    """Window-averaged circle correlation, in closed form.

    value = sum over frequencies of phi_hat(k) * conj(psi_hat(k)) * omega(pi L k);
    the main term is the product of the zero coefficients, and the gap is their
    difference.  The omega kernel is exactly the window average of a character.
    """
    if L <= 0:
        raise ValueError("window length must be positive")
    if (phi.m, phi.n) != (1, 1) or (psi.m, psi.n) != (1, 1):
        raise ValueError("circle decorrelation needs single-frequency-axis polynomials")
    value = 0j
    for k in sorted(set(phi.coeffs) | set(psi.coeffs)):
        value += phi.hat(k) * np.conj(psi.hat(k)) * omega_kernel(np.pi * L * k[0])
    main = phi.hat((0,)) * np.conj(psi.hat((0,)))
    return CircleDecorrelation(complex(value), complex(main), complex(value - main))


# ---------------------------------------------------------------------------
# affine mean decorrelation (d = 2, degenerate fiber case)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineLatticePoint:
    """An affine lattice: a 2-d unimodular lattice plus an offset in its cell."""

    lattice: UnimodularLattice
    offset: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.offset, dtype=float).reshape(-1)
        if x.size != self.lattice.dim:
            raise ValueError("offset dimension mismatch")
        u = np.linalg.solve(self.lattice.basis, x)
        u -= np.floor(u)
        x = self.lattice.basis @ u
        x.setflags(write=False)
        object.__setattr__(self, "offset", x)


class AffineBumpObservable:
    """Periodized bump on affine 2-d lattices: value(L + x) = sum over v in L of rho(x + v).

    Well defined on the affine space because the sum is L-periodic in x; its
    fiber average is the full-space integral of the bump, independent of the
    lattice.
    """

    complex_valued = False

    def __init__(self, bump: BumpSpec):
        if bump.dim != 2:
            raise ValueError("affine observables are 2-dimensional here")
        self.bump = bump

    def prepare_affine(self, T: float, o2_max: float) -> Callable:
        R = self.bump.radius
        et, emt = float(np.exp(T)), float(np.exp(-T))
        span = (R + abs(o2_max)) * et
        qlo, qhi = int(np.floor(-span - 1)), int(np.ceil(span + 1))
        if qhi - qlo > _GRID_LIMIT:
            raise ValueError("enumeration range too large; reduce T or the radius")
        D = int(np.floor(R * emt + 0.5 + 1e-12))
        amp, power = self.bump.amplitude, float(self.bump.power)

        def ev(B: np.ndarray, o1c: np.ndarray, o2: np.ndarray) -> np.ndarray:
            raw = _kernels.affine_bump_sums(
                np.ascontiguousarray(B),
                np.ascontiguousarray(o1c),
                np.ascontiguousarray(o2),
                et,
                emt,
                qlo,
                qhi,
                D,
                R * R,
                power,
            )
            return amp * raw

        return ev


class AffineConstantObservable:
    complex_valued = False

    def __init__(self, value: float):
        self.value = float(value)

    def prepare_affine(self, T: float, o2_max: float) -> Callable:
        value = self.value

        def ev(B: np.ndarray, o1c: np.ndarray, o2: np.ndarray) -> np.ndarray:
            return np.full(B.shape[0], value)

        return ev


@dataclass(frozen=True)
class AffineDecorrelation:
    correlated: Estimate
    main_term: Estimate
    gap: Estimate


def affine_mean_decorrelation(
    phi,
    psi,
    w: Sequence[float],
    L: float,
    T: float,
    n_samples: int,
    seed: int,
    n_fiber: int = 64,
    grid_points: int = 64,
    label: str = "affine",
) -> AffineDecorrelation:
    """Window-averaged correlation along a straight-line flow on affine lattices.

    Lattices are approximate Haar samples at horizon T (d = 2) and offsets are
    exactly uniform on the fundamental cell.  The window average over the two
    flow times uses a deterministic midpoint grid (the integrand is smooth in
    the flow times, so this removes one variance source); the fiber averages in
    the main term use two independent inner Monte Carlo batches so the product
    is unbiased.  Returns estimates of the correlated integral, of the
    fiber-averaged main term, and of their difference (computed per sample, so
    its error bar accounts for the shared lattice draws).
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != 2:
        raise ValueError("direction must be a 2-vector")
    wnorm = float(np.max(np.abs(w)))
    if wnorm <= 0:
        raise ValueError("direction must be nonzero")
    if L <= 0 or T <= 0:
        raise ValueError("window length and horizon must be positive")
    if n_samples < 2:
        raise ValueError("need at least two samples")

    et, emt = float(np.exp(T)), float(np.exp(-T))
    ug = (np.arange(grid_points) + 0.5) * (L / grid_points)
    o2_max = emt + L * abs(w[1])
    ev_phi = phi.prepare_affine(T, o2_max)
    ev_psi = psi.prepare_affine(T, o2_max)

    tag_outer = stream_tag(label)
    tag_fiber = stream_tag(f"{label}:fiber")
    ranges = _chunk_ranges(n_samples)

    def work(ci: int) -> tuple[_Stats, _Stats, _Stats]:
        lo, hi = ranges[ci]
        count = hi - lo
        outer = _uniform_block(seed, tag_outer, lo, count, 3)
        B, u1, u2 = outer[:, 0], outer[:, 1], outer[:, 2]
        # offset x = basis @ (u1, u2): x1 = e^T (u1 + B u2), x2 = e^-T u2;
        # the kernel takes the first offset contracted by e^-T
        o1c = u1 + B * u2
        o2 = emt * u2

        a = np.zeros(count)
        c = np.zeros(count)
        for u in ug:
            a += ev_phi(B, o1c + u * w[0] * emt, o2 + u * w[1])
            c += ev_psi(B, o1c + u * w[0] * emt, o2 + u * w[1])
        a /= grid_points
        c /= grid_points
        corr_vals = a * c

        fiber = _uniform_block(seed, tag_fiber, lo, count, 4 * n_fiber)
        pa = np.zeros(count)
        pb = np.zeros(count)
        for k in range(n_fiber):
            f1, f2 = fiber[:, 2 * k], fiber[:, 2 * k + 1]
            pa += ev_phi(B, f1 + B * f2, emt * f2)
            g1, g2 = fiber[:, 2 * n_fiber + 2 * k], fiber[:, 2 * n_fiber + 2 * k + 1]
            pb += ev_psi(B, g1 + B * g2, emt * g2)
        pa /= n_fiber
        pb /= n_fiber
        main_vals = pa * pb

        return _stats_of(corr_vals), _stats_of(main_vals), _stats_of(corr_vals - main_vals)

    results = _map_chunks(work, len(ranges))
    corr = _merge_tree([r[0] for r in results])
    main = _merge_tree([r[1] for r in results])
    gap = _merge_tree([r[2] for r in results])
    return AffineDecorrelation(
        _finalize(corr, seed, f"{label}:corr", real=True),
        _finalize(main, seed, f"{label}:main", real=True),
        _finalize(gap, seed, f"{label}:gap", real=True),
    )
