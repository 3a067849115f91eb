import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from kpproads.dispersion import DomainError, Params
from kpproads.speed import (
    RECORD_FIELDS,
    Geometry,
    SolverError,
    TangencyResult,
    WaveType,
    classify_type,
    first_touch,
    gap_profile,
    limit_c0,
    limit_cinf,
    limit_ctilde,
    limit_speeds,
    min_gap,
    r_max,
    regions_overlap,
    residuals,
    solve_cstar,
    tangency_clusters,
)

BASE = Params()  # d = f0 = mu = nu = 1, N = 1

# D = 4, R = 10: c* from the solver, frozen; cross-checked below against an
# independent dense scan of the (beta, alpha) plane
GOLDEN_D4_R10 = 2.2737234028754756
# limit_c0 on R = 0.5, 1, 2, 4, 8 (base parameters)
GOLDEN_C0 = [1.0103087032121594, 1.476828282874688, 1.7728400027204798,
             1.9151945830017312, 1.9723723553439503]


def dense_scan_overlap(c, d=1.0, D=4.0, mu=1.0, nu=1.0, R=10.0, f0=1.0, h=1e-4):
    """Do the two regions share a point of a 1e-4 (beta, alpha) lattice?

    Written directly from the N = 1 inequalities (psi1 = cos, psi2 = cosh),
    without any of the library's interval formulas.
    """
    g = np.arange(h / 10, math.pi / (2 * R), h / 10)
    bb = g[np.argmax(nu * np.cos(g * R) - d * g * np.sin(g * R) <= 0)]
    beta = np.arange(-0.5, bb, h)
    safe = np.where(beta == 0, 1.0, beta)
    chi = np.where(beta >= 0,
                   mu * d * beta * np.tan(beta * R) / (nu - d * beta * np.tan(beta * R)),
                   -mu * d * beta / (d * beta + nu / np.tanh(safe * R)))
    sgn = np.where(beta >= 0, 1.0, -1.0)
    alpha = np.arange(0, (c + math.sqrt(c * c + 4 * D * mu)) / (2 * D) + h, h)[:, None]
    in_D = -D * alpha ** 2 + c * alpha >= chi[None, :]
    in_d = -d * alpha ** 2 + c * alpha - f0 + sgn * d * beta ** 2 >= 0
    return bool(np.any(in_D & in_d))


class TestClosedForms:
    def test_r_max_example(self):
        R_M, c_M = r_max(BASE.replace(D=4.0))
        assert R_M == 2.0
        assert c_M == pytest.approx(4 / math.sqrt(12) * 2, rel=1e-15)
        assert c_M == pytest.approx(2.3094011, abs=1e-7)

    def test_r_max_n2(self):
        R_M, c_M = r_max(BASE.replace(D=3.0, N=2))
        assert R_M == pytest.approx(6.0)
        assert c_M == pytest.approx(2.1213203, abs=1e-7)

    def test_r_max_diverges_at_2d(self):
        assert r_max(BASE.replace(D=2 + 1e-9))[0] > 1e9

    @pytest.mark.parametrize("D", [0.5, 2.0])
    def test_r_max_domain(self, D):
        with pytest.raises(DomainError):
            r_max(BASE.replace(D=D))

    @pytest.mark.parametrize("D, R, expect", [
        (1.0, 0.1, WaveType.TYPE1),
        (2.0, 100.0, WaveType.TYPE1),
        (4.0, 2.0, WaveType.MIXED),
        (4.0, 10.0, WaveType.TYPE2),
        (4.0, 1.0, WaveType.TYPE1),
    ])
    def test_classify(self, D, R, expect):
        assert classify_type(BASE.replace(D=D, R=R)) is expect


class TestSolver:
    @pytest.mark.parametrize("D", [3.0, 4.0, 8.0])
    def test_maximum_at_r_m(self, D):
        p = BASE.replace(D=D)
        R_M, c_M = r_max(p)
        res = solve_cstar(p.replace(R=R_M))
        assert res.c_star == pytest.approx(c_M, rel=1e-10)
        assert abs(res.beta_star) < 1e-4
        assert res.type is WaveType.MIXED

    @pytest.mark.parametrize("N, D", [(2, 3.0), (3, 4.0)])
    def test_maximum_higher_dimension(self, N, D):
        p = BASE.replace(N=N, D=D)
        R_M, c_M = r_max(p)
        assert solve_cstar(p.replace(R=R_M)).c_star == pytest.approx(c_M, rel=1e-10)

    @pytest.mark.parametrize("R", [0.3, 1.0, 2.0, 7.0])
    def test_equal_diffusivities(self, R):
        res = solve_cstar(BASE.replace(R=R))
        assert res.c_star < 2.0
        assert res.type is WaveType.TYPE1

    def test_type2_golden(self):
        res = solve_cstar(BASE.replace(D=4.0, R=10.0))
        assert res.type is WaveType.TYPE2
        assert 2.0 < res.c_star < r_max(BASE.replace(D=4.0))[1]
        assert res.c_star == pytest.approx(GOLDEN_D4_R10, rel=1e-9)

    def test_golden_against_dense_scan(self):
        lo, hi = 2.2, 2.35
        while hi - lo > 1e-5:
            mid = 0.5 * (lo + hi)
            if dense_scan_overlap(mid):
                hi = mid
            else:
                lo = mid
        assert GOLDEN_D4_R10 == pytest.approx(0.5 * (lo + hi), abs=1e-4)

    def test_record(self):
        p = BASE.replace(D=4.0, R=10.0)
        rec = solve_cstar(p).record(p)
        assert tuple(rec) == RECORD_FIELDS
        assert rec["type"] == "Type2"
        assert rec["D"] == 4.0

    @pytest.mark.parametrize("p", [
        BASE.replace(D=4.0, R=10.0),
        BASE.replace(D=0.5, R=1.0),
        BASE.replace(D=20.0, R=1.0, N=2),
        Params(d=0.6, D=2.5, mu=1.7, nu=0.4, R=3.0, N=3, f0=1.4),
    ])
    def test_tangency_point(self, p):
        res = solve_cstar(p)
        assert max(abs(e) for e in residuals(res, p)) < 1e-6
        assert res.gamma_star > 0 and res.alpha_star > 0
        g, _ = min_gap_at(res.c_star, p)
        assert abs(g) < 1e-5
        assert tangency_clusters(res.c_star, p, tol=abs(g) + 1e-3) == 1

    def test_overlap_examples(self):
        p = BASE.replace(D=4.0, R=2.0)
        assert regions_overlap(100.0, p)
        assert not regions_overlap(1e-4, p)
        c_M = r_max(p)[1]
        assert regions_overlap(c_M * (1 + 1e-10), p)
        with pytest.raises(DomainError):
            regions_overlap(0.0, p)

    @pytest.mark.parametrize("p", [BASE.replace(D=4.0, R=10.0), BASE.replace(D=0.3, R=2.0)])
    def test_overlap_monotone_in_c(self, p):
        cs = np.linspace(0.05, 4.0, 100)
        flags = [regions_overlap(c, p) for c in cs]
        first = flags.index(True)
        assert all(flags[first:]) and not any(flags[:first])

    def test_gap_profile_sign_change(self):
        p = BASE.replace(D=4.0, R=10.0)
        _, below = gap_profile(GOLDEN_D4_R10 * (1 - 1e-4), p)
        _, above = gap_profile(GOLDEN_D4_R10 * (1 + 1e-2), p)
        assert np.nanmin(below) > 0
        assert np.nanmin(above) < 0

    def test_bracket_failure(self):
        never = Geometry(window=lambda c: None, bounds=lambda c, b: (b, b))
        with pytest.raises(SolverError):
            first_touch(never, 1e-3, 1.0)

    def test_overlap_at_seed(self):
        always = Geometry(window=lambda c: (0.0, 1.0),
                          bounds=lambda c, b: (np.zeros_like(b), np.ones_like(b)))
        with pytest.raises(SolverError):
            first_touch(always, 1e-3, 1.0)


def min_gap_at(c, p):
    from kpproads.speed import full_geometry

    return min_gap(full_geometry(p), c)


class TestMonotonicity:
    def test_increasing_in_D(self):
        cs = [solve_cstar(BASE.replace(D=D, R=1.5)).c_star for D in (0.5, 1, 2, 4, 8)]
        assert np.all(np.diff(cs) > 0)

    def test_nondecreasing_in_R_small_D(self):
        cs = [solve_cstar(BASE.replace(D=1.5, R=R)).c_star for R in np.geomspace(0.2, 20, 6)]
        assert np.all(np.diff(cs) >= 0)

    def test_unimodal_in_R_and_bounded_by_c_m(self):
        p = BASE.replace(D=4.0)
        R_M, c_M = r_max(p)
        Rs = [0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0]
        cs = np.array([solve_cstar(p.replace(R=R)).c_star for R in Rs])
        k = int(np.argmax(cs))
        assert Rs[k] == R_M
        assert np.all(np.diff(cs[:k + 1]) > 0) and np.all(np.diff(cs[k:]) < 0)
        assert cs.max() <= c_M * (1 + 1e-10)


class TestLimits:
    @pytest.mark.parametrize("R", [0.5, 1.0, 5.0])
    def test_c0_below_kpp(self, R):
        assert 0 < limit_c0(BASE.replace(R=R)) < 2.0

    def test_c0_goldens_increasing(self):
        vals = [limit_c0(BASE.replace(R=R)) for R in (0.5, 1, 2, 4, 8)]
        np.testing.assert_allclose(vals, GOLDEN_C0, rtol=1e-9)
        assert np.all(np.diff(vals) > 0)

    @pytest.mark.parametrize("R", [1.0, 5.0])
    def test_small_D(self, R):
        p = BASE.replace(R=R)
        assert solve_cstar(p.replace(D=1e-4)).c_star == pytest.approx(limit_c0(p), rel=1e-2)

    @pytest.mark.parametrize("R", [1.0, 5.0])
    def test_large_D(self, R):
        p = BASE.replace(R=R)
        c = solve_cstar(p.replace(D=1e6)).c_star / 1e3
        assert c == pytest.approx(limit_ctilde(p), rel=1e-2)

    def test_ctilde_ignores_D(self):
        assert limit_ctilde(BASE.replace(D=0.1)) == limit_ctilde(BASE.replace(D=50.0))

    @pytest.mark.parametrize("D", [0.5, 2.0])
    def test_cinf_is_kpp_for_small_D(self, D):
        assert limit_cinf(BASE.replace(D=D)) == 2.0

    @pytest.mark.parametrize("D", [3.0, 4.0, 8.0])
    def test_cinf_large_R(self, D):
        p = BASE.replace(D=D)
        c_inf = limit_cinf(p)
        assert c_inf > 2.0
        assert solve_cstar(p.replace(R=1e3)).c_star == pytest.approx(c_inf, rel=1e-2)

    def test_limit_speeds_bundle(self):
        ls = limit_speeds(BASE.replace(D=4.0, R=2.0))
        assert ls.c_inf > 2.0 > ls.c0 > 0 and ls.c_tilde2 > 0

    def test_scaling_of_large_D_system(self):
        # c* / sqrt(D) is already close to the limit at D = 1e4 and gets closer
        p = BASE.replace(R=2.0)
        ct = limit_ctilde(p)
        errs = [abs(solve_cstar(p.replace(D=D)).c_star / math.sqrt(D) - ct) for D in (1e2, 1e4)]
        assert errs[1] < errs[0]
        assert errs[1] < 1e-3 * ct


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    D=st.floats(0.05, 30.0),
    R=st.floats(0.1, 20.0),
    N=st.integers(1, 3),
    mu=st.floats(0.2, 5.0),
    nu=st.floats(0.2, 5.0),
)
def test_solver_properties(D, R, N, mu, nu):
    p = Params(D=D, R=R, N=N, mu=mu, nu=nu)
    res = solve_cstar(p)
    assert res.c_star > 0
    assert max(abs(e) for e in residuals(res, p)) < 1e-6
    if D < 2:
        assert res.c_star < p.c_kpp
    kind = classify_type(p)
    if abs(res.beta_star) > 1e-3:  # away from the mixed boundary the signs must agree
        assert (res.beta_star > 0) == (kind is WaveType.TYPE1)
