"""Concrete observables.

Polynomial bumps rho(v) = amplitude * (1 - |v|^2 / radius^2)_+^power give
compactly supported C^(power-1) test data whose lattice sums (truncated Siegel
transforms) are exactly computable finite sums.  Trigonometric polynomials
with finitely many frequencies model smooth functions on the base torus; the
Wiener norm is the l1 norm of their coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import UnimodularLattice, TorusPoint, short_vectors


@dataclass(frozen=True)
class BumpSpec:
    """rho(v) = amplitude * max(0, 1 - |v|_2^2 / radius^2) ** power.

    The support is the Euclidean ball of the given radius (hence contained in
    the sup-norm ball used for lattice enumeration); rho is C^(power-1).
    """

    dim: int
    radius: float = 2.0
    power: int = 2
    amplitude: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.power < 2:
            raise ValueError("power must be at least 2")


def bump_eval(spec: BumpSpec, v: Sequence[float]) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.dim,):
        raise ValueError(f"expected a vector of dimension {spec.dim}")
    w = 1.0 - float(np.dot(v, v)) / spec.radius**2
    if w <= 0.0:
        return 0.0
    return spec.amplitude * w**spec.power


def bump_integral(spec: BumpSpec) -> float:
    """Closed form of the full-space integral of the bump.

    integral = amplitude * V_d * radius^d * d/2 * B(d/2, power+1) where V_d is
    the unit-ball volume; for d = 2 this is amplitude * pi * radius^2 / (power+1).
    """
    from math import gamma, pi

    d, p = spec.dim, spec.power
    vd = pi ** (d / 2) / gamma(d / 2 + 1)
    # radial integral of (1 - r^2)^p r^(d-1) dr over [0, 1] = B(d/2, p+1) / 2
    beta = gamma(d / 2) * gamma(p + 1) / gamma(d / 2 + p + 1)
    return spec.amplitude * vd * spec.radius**d * (d / 2) * beta


def siegel_transform(spec: BumpSpec, L: UnimodularLattice) -> float:
    """Exact sum of the bump over the nonzero vectors of the lattice.

    The support is compact so the sum is finite; vectors are enumerated from
    the reduced basis.  Unbounded near the cusp: lattices with very short
    vectors produce large values.
    """
    if L.dim != spec.dim:
        raise ValueError("dimension mismatch")
    vs = short_vectors(L, spec.radius)
    if vs.shape[0] == 0:
        return 0.0
    w = 1.0 - np.sum(vs * vs, axis=1) / spec.radius**2
    np.clip(w, 0.0, None, out=w)
    return float(spec.amplitude * np.sum(w**spec.power))


def character_eval(k, B: TorusPoint) -> complex:
    """Unit character e^{2 pi i <k, B>} with the entrywise dot product."""
    k = np.asarray(k)
    if k.size != B.entries.size:
        raise ValueError("frequency shape does not match the torus point")
    phase = float(np.sum(k.reshape(B.entries.shape) * B.entries))
    return complex(np.exp(2j * np.pi * phase))


@dataclass(frozen=True)
class TrigPoly:
    """Finitely supported Fourier series on the (m*n)-torus.

    coeffs maps integer frequency tuples of length m*n to complex amplitudes.
    Real-valued polynomials are exactly the conjugate-symmetric ones.
    """

    m: int
    n: int
    coeffs: Mapping[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in self.coeffs.items():
            key = tuple(int(x) for x in (k if isinstance(k, tuple) else tuple(np.atleast_1d(k))))
            if len(key) != self.m * self.n:
                raise ValueError(f"frequency {key} has wrong length, expected {self.m * self.n}")
            v = complex(v)
            if v != 0:
                clean[key] = clean.get(key, 0) + v
        object.__setattr__(self, "coeffs", {k: v for k, v in clean.items() if v != 0})

    def eval(self, B) -> complex:
        x = np.asarray(B, dtype=float).reshape(-1)
        if x.size != self.m * self.n:
            raise ValueError("point has wrong dimension")
        total = 0j
        for k, v in self.coeffs.items():
            total += v * np.exp(2j * np.pi * float(np.dot(k, x)))
        return complex(total)

    def is_real(self, tol: float = 0.0) -> bool:
        for k, v in self.coeffs.items():
            mk = tuple(-x for x in k)
            if abs(self.coeffs.get(mk, 0) - v.conjugate()) > tol:
                return False
        return True

    def __mul__(self, other: "TrigPoly") -> "TrigPoly":
        if (self.m, self.n) != (other.m, other.n):
            raise ValueError("dimension mismatch")
        out: dict[tuple[int, ...], complex] = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return TrigPoly(self.m, self.n, out)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        if (self.m, self.n) != (other.m, other.n):
            raise ValueError("dimension mismatch")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return TrigPoly(self.m, self.n, out)

    def hat(self, k) -> complex:
        return self.coeffs.get(tuple(int(x) for x in np.atleast_1d(k)), 0j)


def trig_constant(m: int, n: int, value: complex) -> TrigPoly:
    return TrigPoly(m, n, {(0,) * (m * n): value})


def wiener_norm(f: TrigPoly) -> float:
    return float(sum(abs(v) for v in f.coeffs.values()))


def l2_norm(f: TrigPoly) -> float:
    """L2 norm on the torus; by Parseval the l2 norm of the coefficients."""
    return float(np.sqrt(sum(abs(v) ** 2 for v in f.coeffs.values())))


_OMEGA_SMALL = 1e-4


def omega_kernel(x: float) -> float:
    """sin(x)^2 / x^2 with the removable singularity handled by series.

    Averaging a frequency-n character over a square window gives exactly this
    kernel: (1/L^2) * int_0^L int_0^L e^{2 pi i (s1 - s2) n} ds1 ds2
    = omega_kernel(pi * L * n).  Bounds: 0 <= omega(x) <= min(1, x^-2).
    """
    x = float(x)
    if abs(x) < _OMEGA_SMALL:
        x2 = x * x
        s = 1.0 - x2 / 6.0 + x2 * x2 / 120.0  # sin(x)/x
        return s * s
    s = np.sin(x) / x
    return float(s * s)


def frequency_box(max_freq: int, dims: int):
    """All integer frequency tuples with sup-norm at most max_freq."""
    return itertools.product(range(-max_freq, max_freq + 1), repeat=dims)
