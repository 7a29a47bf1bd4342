import numpy as np
import pytest

from latflow.core import (
    FlowParam,
    TorusPoint,
    apply_flow,
    lattice_from_matrix,
    shortest_vector_length,
    standard_lattice,
)
from latflow.montecarlo import (
    CHUNK,
    AffineBumpObservable,
    AffineConstantObservable,
    AffineLatticePoint,
    CharacterObservable,
    ConstantObservable,
    ProductObservable,
    SiegelObservable,
    WORKERS_ENV,
    affine_mean_decorrelation,
    approx_haar_sample,
    balanced_support_param,
    circle_mean_decorrelation,
    decay_sweep,
    decorrelation_gap,
    estimate_haar_siegel,
    estimate_joint_correlation,
    estimate_muI_integral,
    estimate_nu_integral,
    full_set,
    sample_torus,
    stream_tag,
    _uniform_block,
)
from latflow.core import AdmissibleSet
from latflow.testfns import BumpSpec, TrigPoly, bump_integral, omega_kernel, siegel_transform, trig_constant

BUMP2 = BumpSpec(dim=2, radius=2.0, power=2, amplitude=1.0)


def siegel11(offset=0.0):
    return SiegelObservable(BUMP2, 1, 1, offset=offset)


def one11():
    return SiegelObservable(BumpSpec(dim=2, radius=2.0, power=2, amplitude=0.0), 1, 1, offset=1.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_torus_deterministic_replay():
    a = sample_torus(2, 3, seed=42, index=17)
    b = sample_torus(2, 3, seed=42, index=17)
    assert np.array_equal(a.entries, b.entries)
    assert a.entries.shape == (2, 3)
    assert np.all((a.entries >= 0) & (a.entries < 1))


def test_sample_torus_batch_matches_single():
    tag = stream_tag("torus")
    batch = _uniform_block(seed=42, tag=tag, start=0, count=100, width=6)
    for i in (0, 3, 99):
        single = sample_torus(2, 3, seed=42, index=i)
        assert np.array_equal(single.entries.reshape(-1), batch[i])


def test_sample_torus_mean_half():
    tag = stream_tag("torus")
    vals = _uniform_block(seed=7, tag=tag, start=0, count=100_000, width=1).ravel()
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - 0.5) <= 3 * se


def test_sample_torus_distinct_streams():
    tag = stream_tag("torus")
    a = _uniform_block(seed=9, tag=tag, start=0, count=10_000, width=1).ravel()
    b = _uniform_block(seed=9, tag=tag, start=10_000, count=10_000, width=1).ravel()
    assert not np.intersect1d(a, b).size  # counter mode: disjoint segments
    c = sample_torus(1, 1, seed=9, index=0)
    d = sample_torus(1, 1, seed=9, index=1)
    assert c.entries[0, 0] != d.entries[0, 0]


# ---------------------------------------------------------------------------
# basic estimator contracts
# ---------------------------------------------------------------------------

def test_constant_observable_exact():
    t = FlowParam(1, 1, (3.0, 3.0))
    est = estimate_nu_integral(one11(), t, 1000, seed=5)
    assert est.mean == 1.0
    assert est.stderr == 0.0
    assert est.n_samples == 1000


def test_character_orthogonality_at_zero_flow():
    t0 = FlowParam(1, 1, (0.0, 0.0))
    est = estimate_nu_integral(CharacterObservable([[1]], 1, 1), t0, 50_000, seed=3)
    assert abs(est.mean) <= 3 * est.stderr
    assert est.max_sample == pytest.approx(1.0)


def test_character_requires_zero_flow():
    t = FlowParam(1, 1, (1.0, 1.0))
    with pytest.raises(ValueError):
        estimate_nu_integral(CharacterObservable([[1]], 1, 1), t, 10, seed=0)


def test_nu_integral_matches_quadrature_at_spread_flow():
    t = FlowParam(1, 1, (6.0, 6.0))
    est = estimate_nu_integral(siegel11(), t, 20_000, seed=11)
    target = bump_integral(BUMP2)
    assert abs(est.mean - target) <= 3 * est.stderr


def test_joint_r1_bit_identical_to_single():
    t = FlowParam(1, 1, (2.0, 2.0))
    a = estimate_nu_integral(siegel11(), t, 5000, seed=21)
    b = estimate_joint_correlation([siegel11()], [t], 5000, seed=21)
    assert a == b


def test_joint_equal_translates_is_product_observable():
    t = FlowParam(1, 1, (2.0, 2.0))
    phi1, phi2 = siegel11(), siegel11(offset=0.5)
    joint = estimate_joint_correlation([phi1, phi2], [t, t], 5000, seed=8)
    prod = estimate_nu_integral(ProductObservable(phi1, phi2), t, 5000, seed=8)
    assert joint.mean == prod.mean


def test_stderr_matches_direct_formula():
    t = FlowParam(1, 1, (1.0, 1.0))
    n = CHUNK  # single chunk: direct comparison
    est = estimate_nu_integral(siegel11(), t, n, seed=13)
    ev = siegel11().prepare(t)
    B = _uniform_block(13, stream_tag("corr"), 0, n, 1).reshape(-1, 1, 1)
    vals = ev(B)
    assert est.mean == vals.mean()
    assert est.stderr == pytest.approx(vals.std(ddof=1) / np.sqrt(n), rel=1e-12)
    assert est.max_sample == np.abs(vals).max()


def test_clt_stderr_scaling():
    t = FlowParam(1, 1, (2.0, 2.0))
    a = estimate_nu_integral(siegel11(), t, 10_000, seed=2)
    b = estimate_nu_integral(siegel11(), t, 40_000, seed=2)
    ratio = a.stderr / b.stderr
    assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2


def test_worker_count_does_not_change_results(monkeypatch):
    t = FlowParam(1, 1, (3.0, 3.0))
    results = []
    for w in ("1", "4", "16"):
        monkeypatch.setenv(WORKERS_ENV, w)
        results.append(estimate_nu_integral(siegel11(), t, 30_000, seed=77))
    assert results[0] == results[1] == results[2]


# ---------------------------------------------------------------------------
# decorrelation gaps and sweeps
# ---------------------------------------------------------------------------

def test_gap_constant_observables_zero():
    t1 = FlowParam(1, 1, (1.0, 1.0))
    t2 = FlowParam(1, 1, (4.0, 4.0))
    res = decorrelation_gap([one11(), one11()], [t1, t2], 1000, seed=3)
    assert res.gap == 0.0
    assert res.stderr == 0.0


def test_gap_identical_translates_significant():
    t = FlowParam(1, 1, (2.0, 2.0))
    res = decorrelation_gap([siegel11(), siegel11()], [t, t], 20_000, seed=5)
    assert abs(res.gap) > 3 * res.stderr


def test_gap_far_translates_within_noise():
    t1 = FlowParam(1, 1, (0.0, 0.0))
    t2 = FlowParam(1, 1, (8.0, 8.0))
    res = decorrelation_gap([siegel11(), siegel11()], [t1, t2], 20_000, seed=5)
    assert abs(res.gap) <= 3 * res.stderr


def test_sweep_structure_and_flags():
    phis = [siegel11(), siegel11()]
    base = FlowParam(1, 1, (2.0, 2.0))
    direction = FlowParam(1, 1, (1.0, 1.0))
    sweep = decay_sweep(phis, base, direction, [4, 0, 2], 2000, seed=9)
    assert [r.delta for r in sweep.rows] == [0.0, 2.0, 4.0]
    assert all(r.n_samples == 2000 for r in sweep.rows)
    noisy = decay_sweep([one11(), one11()], base, direction, [0, 1], 100, seed=9)
    assert not noisy.fit_available  # constant observables: all rows are zero


def test_sweep_empty_grid_rejected():
    with pytest.raises(ValueError):
        decay_sweep(
            [siegel11(), siegel11()],
            FlowParam(1, 1, (0.0, 0.0)),
            FlowParam(1, 1, (1.0, 1.0)),
            [],
            100,
            seed=1,
        )


# ---------------------------------------------------------------------------
# intermediate spaces and approximate Haar sampling
# ---------------------------------------------------------------------------

def test_balanced_support_param_structure():
    I = AdmissibleSet(2, 1, (1, 3))
    t = balanced_support_param(I, 6.0)
    assert t.coords == (6.0, 0.0, 6.0)
    If = AdmissibleSet(2, 1, (1, 2, 3))
    tf = balanced_support_param(If, 4.0)
    assert tf.coords == (4.0, 4.0, 8.0)
    assert min(tf.coords[i - 1] for i in If.members) == 4.0


def test_mui_constant_is_one():
    I = AdmissibleSet(2, 1, (1, 3))
    one = SiegelObservable(BumpSpec(dim=3, radius=2.0, power=2, amplitude=0.0), 2, 1, offset=1.0)
    est = estimate_muI_integral(one, I, 6.0, 500, seed=1)
    assert est.mean == 1.0
    assert est.t_horizon == 6.0


def test_mui_full_set_matches_quadrature():
    est = estimate_muI_integral(siegel11(), full_set(1, 1), 8.0, 10_000, seed=23)
    assert abs(est.mean - bump_integral(BUMP2)) <= 3 * est.stderr


def test_haar_sample_properties():
    for i in range(25):
        L = approx_haar_sample(1, 1, 8.0, seed=3, index=i)
        assert abs(abs(np.linalg.det(L.basis)) - 1.0) <= 1e-9
        assert shortest_vector_length(L) > 0


def test_haar_estimator_matches_per_sample_transform():
    """The vectorized estimator is literally the mean of siegel_transform over draws."""
    t = balanced_support_param(full_set(1, 1), 5.0)
    ev = siegel11().prepare(t)
    B = _uniform_block(31, stream_tag("haar"), 0, 40, 1).reshape(-1, 1, 1)
    fast = ev(B)
    for i in range(40):
        L = approx_haar_sample(1, 1, 5.0, seed=31, index=i)
        slow = siegel_transform(BUMP2, L)
        assert fast[i] == pytest.approx(slow, rel=1e-9, abs=1e-12)


def test_haar_estimator_consistency():
    est = estimate_haar_siegel(BUMP2, 1, 1, 8.0, 10_000, seed=23)
    direct = estimate_muI_integral(siegel11(), full_set(1, 1), 8.0, 10_000, seed=23, label="haar")
    assert est.mean == direct.mean
    assert est.t_horizon == 8.0


def test_intro_product_split_example():
    """Joint translate along two complementary faces factorizes into the two
    intermediate integrals (within combined noise)."""
    m, n = 2, 1
    bump3 = BumpSpec(dim=3, radius=2.0, power=2, amplitude=1.0)
    phi1 = SiegelObservable(bump3, m, n)
    phi2 = SiegelObservable(bump3, m, n)
    s = t = 5.0
    t1 = FlowParam(m, n, (s, 0.0, s))
    t2 = FlowParam(m, n, (0.0, t, t))
    joint = estimate_joint_correlation([phi1, phi2], [t1, t2], 20_000, seed=4, label="ex:joint")
    mu1 = estimate_muI_integral(phi1, AdmissibleSet(m, n, (1, 3)), s, 20_000, seed=4, label="ex:mu1")
    mu2 = estimate_muI_integral(phi2, AdmissibleSet(m, n, (2, 3)), t, 20_000, seed=4, label="ex:mu2")
    gap = joint.mean - mu1.mean * mu2.mean
    se = np.sqrt(
        joint.stderr**2
        + (mu2.mean * mu1.stderr) ** 2
        + (mu1.mean * mu2.stderr) ** 2
    )
    assert abs(gap) <= 3 * se


# ---------------------------------------------------------------------------
# circle decorrelation (exact)
# ---------------------------------------------------------------------------

def test_circle_constant_polys():
    two = trig_constant(1, 1, 2.0)
    res = circle_mean_decorrelation(two, two, 1.0)
    assert res.value == 4.0
    assert res.gap == 0.0


def test_circle_single_frequency():
    e = TrigPoly(1, 1, {(1,): 1.0})
    res1 = circle_mean_decorrelation(e, e, 1.0)
    assert res1.main_term == 0.0
    assert res1.value == pytest.approx(omega_kernel(np.pi), abs=1e-30)
    res10 = circle_mean_decorrelation(e, e, 10.0)
    assert res10.gap == pytest.approx(omega_kernel(10 * np.pi))
    assert abs(res10.gap) <= (10 * np.pi) ** -2


def test_circle_gap_bound_random_polys(rng):
    for _ in range(100):
        def rand_poly():
            coeffs = {}
            for _ in range(int(rng.integers(1, 9))):
                k = int(rng.integers(-8, 9))
                coeffs[(k,)] = complex(rng.normal(), rng.normal())
            return TrigPoly(1, 1, coeffs)

        phi, psi = rand_poly(), rand_poly()
        L = float(rng.uniform(0.5, 20.0))
        res = circle_mean_decorrelation(phi, psi, L)
        bound = sum(
            abs(phi.hat(k)) * abs(psi.hat(k)) / k[0] ** 2
            for k in set(phi.coeffs) | set(psi.coeffs)
            if k != (0,)
        ) / (np.pi * L) ** 2
        assert abs(res.gap) <= bound + 1e-12


# ---------------------------------------------------------------------------
# affine lattices
# ---------------------------------------------------------------------------

def test_affine_lattice_point_reduction():
    L = standard_lattice(2)
    p = AffineLatticePoint(L, np.array([2.25, -0.5]))
    assert np.allclose(p.offset, [0.25, 0.5])
    skew = apply_flow(FlowParam(1, 1, (1.0, 1.0)), lattice_from_matrix(TorusPoint(np.array([[0.3]]))))
    q = AffineLatticePoint(skew, np.array([10.0, 10.0]))
    u = np.linalg.solve(skew.basis, q.offset)
    assert np.all(u >= -1e-12) and np.all(u < 1.0 + 1e-12)


def test_affine_constants_exact():
    res = affine_mean_decorrelation(
        AffineConstantObservable(3.0),
        AffineConstantObservable(2.0),
        w=(1.0, 0.0),
        L=1.0,
        T=3.0,
        n_samples=500,
        seed=5,
    )
    assert res.correlated.mean == 6.0
    assert res.main_term.mean == 6.0
    assert res.gap.mean == 0.0 and res.gap.stderr == 0.0


def test_affine_fiber_average_is_bump_integral():
    """The periodized bump's fiber average is the plain integral, whatever the lattice."""
    bump = BumpSpec(dim=2, radius=0.4, power=2, amplitude=1.0)
    res = affine_mean_decorrelation(
        AffineBumpObservable(bump),
        AffineBumpObservable(bump),
        w=(1.0, 0.0),
        L=1.0,
        T=3.0,
        n_samples=4000,
        seed=17,
    )
    target = bump_integral(bump) ** 2
    assert abs(res.main_term.mean - target) <= 3 * res.main_term.stderr + 1e-6


def test_affine_offset_sampler_matches_quadrature():
    """Mean of the periodized bump over uniform offsets equals the cell quadrature."""
    from scipy.integrate import dblquad

    bump = BumpSpec(dim=2, radius=0.4, power=2, amplitude=1.0)
    T = 2.0
    obs = AffineBumpObservable(bump)
    ev = obs.prepare_affine(T, float(np.exp(-T)))
    n = 4000
    u = _uniform_block(99, stream_tag("cell"), 0, n, 2)
    b = 0.37
    B = np.full(n, b)
    vals = ev(B, u[:, 0] + b * u[:, 1], np.exp(-T) * u[:, 1])
    se = vals.std(ddof=1) / np.sqrt(n)
    # quadrature over the unit cube in basis coordinates; the cell has volume 1
    et, emt = np.exp(T), np.exp(-T)

    def periodized(u1, u2):
        x1, x2 = et * (u1 + b * u2), emt * u2
        total = 0.0
        for p in range(-2, 3):
            for q in range(-int(np.ceil(0.4 * et)) - 1, int(np.ceil(0.4 * et)) + 2):
                v1 = x1 + et * (p + b * q)
                v2 = x2 + emt * q
                r2 = v1 * v1 + v2 * v2
                if r2 < 0.16:
                    total += (1 - r2 / 0.16) ** 2
        return total

    quad, _ = dblquad(periodized, 0.0, 1.0, lambda _: 0.0, lambda _: 1.0, epsabs=1e-9)
    assert abs(vals.mean() - quad) <= 3 * se + 1e-8


def test_affine_gap_decays_with_window():
    bump = BumpSpec(dim=2, radius=0.4, power=2, amplitude=1.0)
    phi = AffineBumpObservable(bump)
    common = dict(T=3.0, n_samples=20_000, seed=29, n_fiber=64, grid_points=64)
    near = affine_mean_decorrelation(phi, phi, w=(1.0, 0.0), L=1.0, **common)
    far = affine_mean_decorrelation(phi, phi, w=(1.0, 0.0), L=16.0, **common)
    assert abs(near.gap.mean) > 3 * near.gap.stderr
    assert abs(far.gap.mean) < abs(near.gap.mean)
