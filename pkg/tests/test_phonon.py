import numpy as np
import pytest

import dipolarray.phonon as phonon_mod
from dipolarray.lattice import build_lattice, momentum_grid
from dipolarray.phonon import (
    build_phonon_model,
    coupling_weight_g,
    dynamical_matrix,
    gamma1_fgr,
    gamma1_time,
    gamma2,
    phonon_spectrum,
)

ZETA3 = 1.2020569031595942854
ZETA5 = 1.0369277551433699


def chain_model(n, beta=1e4, u_dd=3.0, kappa=1.0):
    return build_phonon_model(build_lattice("chain", n, boundary="periodic"), beta, u_dd, kappa)


def tri_model(n, beta=1e4, u_dd=3.0, kappa=1.0):
    return build_phonon_model(build_lattice("triangular", n, boundary="periodic"), beta, u_dd, kappa)


# ---------------------------------------------------------------------------
# independent oracle: finite-difference Hessian of the exact pair energy
# ---------------------------------------------------------------------------

def hessian_dynamical_1d(n, q, h):
    """Bloch-projected numerical Hessian of V = sum_{i<j} 1/|x_i - x_j|^3.

    The periodic image of each pair is frozen at its equilibrium choice
    (matching the kernel convention); displacing a site never switches the
    image, so the energy stays smooth.
    """
    base = np.arange(n, dtype=float)
    eq_diff = base[:, None] - base[None, :]
    offsets = -n * np.round(eq_diff / n)
    iu = np.triu_indices(n, 1)

    def energy(u):
        x = base + u
        diff = x[:, None] - x[None, :] + offsets
        return (1.0 / np.abs(diff[iu]) ** 3).sum()

    row = np.zeros(n)
    for j in range(n):
        for s0, sj, sgn in ((h, h, 1), (h, -h, -1), (-h, h, -1), (-h, -h, 1)):
            u = np.zeros(n)
            u[0] += s0
            u[j] += sj
            row[j] += sgn * energy(u)
        row[j] /= 4 * h * h
    rel = np.arange(n) - n * np.round(np.arange(n) / float(n))
    return (row * np.cos(q * rel)).sum()


def hessian_dynamical_1d_richardson(n, q, h=2e-3):
    d1 = hessian_dynamical_1d(n, q, h)
    d2 = hessian_dynamical_1d(n, q, h / 2)
    return (4 * d2 - d1) / 3.0


class TestDynamicalMatrix:
    def test_zero_at_q0(self):
        for lat in (build_lattice("chain", 12, boundary="periodic"),
                    build_lattice("triangular", 16, boundary="periodic")):
            d = dynamical_matrix(lat, np.zeros(lat.dimension))
            assert np.abs(d).max() <= 1e-12

    def test_pair_coupling_pattern_1d(self):
        # longitudinal force constant between sites at distance d is the
        # second derivative of 1/r^3, i.e. 12/d^5 = 3*(5-1)/d^5
        def pair_energy(r):
            return 1.0 / np.abs(r) ** 3

        h = 1e-4
        for dist in (1.0, 2.0, 3.0):
            num = (pair_energy(dist + h) - 2 * pair_energy(dist) + pair_energy(dist - h)) / h**2
            assert num == pytest.approx(12.0 / dist**5, rel=1e-6)

    def test_zone_edge_matches_hessian_oracle(self):
        n = 32
        f2 = dynamical_matrix(build_lattice("chain", n, boundary="periodic"), np.array([np.pi]))[0, 0]
        oracle = hessian_dynamical_1d_richardson(n, np.pi)
        assert abs(f2 - oracle) / f2 <= 1e-6

    def test_generic_q_matches_hessian_oracle(self):
        n = 24
        q = 2 * np.pi * 5 / n
        f2 = dynamical_matrix(build_lattice("chain", n, boundary="periodic"), np.array([q]))[0, 0]
        oracle = hessian_dynamical_1d_richardson(n, q)
        assert abs(f2 - oracle) / f2 <= 1e-6

    def test_hermitian_2d(self):
        lat = build_lattice("triangular", 25, boundary="periodic")
        g = momentum_grid(lat)
        for q in g.kvecs[::5]:
            d = dynamical_matrix(lat, q)
            assert np.abs(d - d.T).max() < 1e-12

    def test_rejects_square_and_open(self):
        with pytest.raises(ValueError, match="unsupported"):
            dynamical_matrix(build_lattice("square", 16, boundary="periodic"), np.zeros(2))
        with pytest.raises(ValueError, match="periodic"):
            dynamical_matrix(build_lattice("chain", 8), np.zeros(1))


class TestSpectrum:
    def test_acoustic_at_gamma(self):
        m = chain_model(24)
        assert np.abs(m.freqs[0]).max() <= 1e-10
        m2 = tri_model(25)
        assert np.abs(m2.freqs[0]).max() <= 1e-10

    def test_branch_counts(self):
        assert chain_model(16).n_branches == 1
        assert tri_model(16).n_branches == 2

    def test_even_spectrum(self):
        m = tri_model(25)
        g = m.grid
        freqs = {tuple(np.round(q, 9)): f for q, f in zip(g.kvecs, m.freqs)}
        # compare f(q) against f(-q) via the grid's pair fold
        reps, mult = g.pair_fold()
        for i, mu in zip(reps, mult):
            if mu == 1:
                continue
            qi = g.kvecs[i]
            # locate -q modulo reciprocal vectors
            from dipolarray.lattice import grid_labels
            lbl = grid_labels(np.array([-qi]), g.reciprocal_vectors, g.n_points)[0]
            all_lbl = grid_labels(g.kvecs, g.reciprocal_vectors, g.n_points)
            j = all_lbl.index(lbl)
            assert np.allclose(m.freqs[i], m.freqs[j], atol=1e-10)

    def test_1d_zone_edge_value(self):
        m = chain_model(64)
        edge = m.freqs.max()
        assert edge == pytest.approx(np.sqrt(46.5 * ZETA5), rel=1e-3)

    def test_1d_linear_small_q(self):
        lat = build_lattice("chain", 400, boundary="periodic")
        qs = 2 * np.pi * np.arange(1, 14) / 400
        f = np.array([np.sqrt(dynamical_matrix(lat, np.array([q]))[0, 0]) for q in qs])
        ratio = f / qs
        assert (ratio.max() - ratio.min()) / ratio.mean() < 0.03
        assert ratio[0] == pytest.approx(2.0 * np.sqrt(3.0 * ZETA3), rel=0.01)

    def test_sound_speeds_reported(self):
        spec = phonon_spectrum(chain_model(64))
        assert len(spec["sound_speeds"]) == 1
        assert spec["sound_speeds"][0] == pytest.approx(2.0 * np.sqrt(3.0 * ZETA3), rel=0.02)

    def test_instability_reported_with_q(self, monkeypatch):
        lat = build_lattice("chain", 8, boundary="periodic")
        monkeypatch.setattr(phonon_mod, "_dyn_from_rel", lambda *_: np.array([[-1.0]]))
        with pytest.raises(ValueError, match="unstable crystal mode at q"):
            build_phonon_model(lat, 1e4, 3.0, 1.0)


class TestCouplingWeight:
    def test_even_in_q(self):
        m = chain_model(16)
        g = m.grid
        for i in range(1, 8):
            j = (g.n_points - i) % g.n_points  # index of -q on the chain grid
            assert coupling_weight_g(m, i) == pytest.approx(coupling_weight_g(m, j), rel=1e-10)

    def test_small_q_linear_with_taylor_coefficient(self):
        # g ~ 9 (2 zeta3 q)^2 / (2 sqrt(3 zeta3) q) = 6 sqrt(3) zeta3^(3/2) q
        m = chain_model(512)
        expect = 6.0 * np.sqrt(3.0) * ZETA3**1.5
        for i in (1, 2, 3):
            q = m.grid.kvecs[i, 0]
            g = coupling_weight_g(m, i)[0]
            assert g / q == pytest.approx(expect, rel=0.01)

    def test_transverse_suppressed_on_mirror_axis(self):
        m = tri_model(36)
        # q along the x axis: i varies, j = 0 (b2 has no x component)
        # find a grid point with q_y == 0 and q_x != 0
        idx = [i for i, q in enumerate(m.grid.kvecs)
               if abs(q[1]) < 1e-12 and abs(q[0]) > 1e-12][0]
        g = coupling_weight_g(m, idx)
        pol_x = [abs(m.pols[idx, lam, 0]) for lam in range(2)]
        lam_l = int(np.argmax(pol_x))  # longitudinal branch: polarization along q
        lam_t = 1 - lam_l
        assert g[lam_t] < 1e-12
        assert g[lam_l] > 0


class TestGamma1:
    def test_zero_coupling_combination(self):
        # xi + 4 b0 = 0 kills the matrix element entirely
        m = chain_model(12)
        t = np.linspace(0, 50, 30)
        d = gamma1_time(m, -0.4, 0.1, 1.0, t)
        assert np.all(d.decay == 0.0)

    def test_zero_at_t0_and_positive(self):
        m = chain_model(12)
        d = gamma1_time(m, 0.05, 0.1, 0.5, np.linspace(0, 80, 60))
        assert d.decay[0] == 0.0
        assert d.decay[1:].max() > 0

    def test_t0_only_spontaneous(self):
        # at T = 0 the occupation factors vanish; doubling (n+1) -> (2n+1)
        # would change nothing only if n = 0
        m = chain_model(12)
        t = np.linspace(0, 60, 40)
        d0 = gamma1_time(m, 0.05, 0.1, 0.0, t)
        assert d0.decay.max() > 0
        d1 = gamma1_time(m, 0.05, 0.1, 1.0, t)
        assert d1.decay.max() > d0.decay.max()

    def test_high_temperature_linearity(self):
        m = chain_model(24)
        t = np.linspace(0, 40, 50)
        d1 = gamma1_time(m, 0.05, 0.1, 50.0, t).decay[25]
        d2 = gamma1_time(m, 0.05, 0.1, 100.0, t).decay[25]
        assert d2 / d1 == pytest.approx(2.0, rel=0.05)

    def test_normalization_invariance(self):
        # (xi, b0) -> 2(xi, b0): normalized curve unchanged
        m = chain_model(12)
        t = np.linspace(0, 50, 30)
        a = gamma1_time(m, 0.05, 0.1, 1.0, t)
        b = gamma1_time(m, 0.10, 0.2, 1.0, t)
        assert np.allclose(a.decay_normalized, b.decay_normalized, rtol=1e-12)

    def test_1d_maximum_grows_with_n(self):
        out = {}
        for n in (36, 81):
            m = chain_model(n)
            s = 2 * (1 / np.arange(1, n // 2 + 1) ** 3).sum()
            chi = 2 * s / (n - 1)
            tpi = np.pi / (2 * 0.05 * chi)
            t = np.linspace(0, tpi, 300)
            out[n] = gamma1_time(m, 0.05, 0.1, 0.5, t).decay_normalized.max()
        assert out[81] > out[36]

    def test_rejects_negative_temperature(self):
        with pytest.raises(ValueError):
            gamma1_time(chain_model(8), 0.05, 0.1, -1.0, np.linspace(0, 1, 5))

    def test_triangular_2d_runs(self):
        m = tri_model(16)
        d = gamma1_time(m, 0.05, 0.1, 0.5, np.linspace(0, 20, 20))
        assert d.decay[0] == 0.0
        assert np.isfinite(d.decay).all()


class TestGamma2:
    def test_dominant_is_twice_gamma1(self):
        for model in (chain_model(16), tri_model(16)):
            t = np.linspace(0, 40, 30)
            one = gamma1_time(model, 0.05, 0.1, 0.5, t)
            two = gamma2(model, 0.05, 0.1, 0.5, t)
            assert np.allclose(two.decay_dominant, 2.0 * one.decay, rtol=1e-13, atol=0)

    def test_xi_zero_full_equals_dominant(self):
        m = chain_model(12)
        t = np.linspace(0, 40, 25)
        two = gamma2(m, 0.0, 0.1, 0.5, t)
        assert np.allclose(two.decay, two.decay_dominant, rtol=1e-12)

    def test_correction_bound(self):
        m = chain_model(36)
        t = np.linspace(0, 60, 25)
        two = gamma2(m, 0.05, 0.1, 0.5, t)
        xi, b0, n = 0.05, 0.1, 36
        bound = 2.0 * 8.0 * xi / (n * (xi + 4 * b0))
        assert two.correction_ratio <= bound


class TestGoldenRule:
    def test_1d_temperature_ratio(self):
        m = chain_model(64)
        r1 = gamma1_fgr(m, 0.05, 0.1, 5.0, grid_factors=(4,))["rate"]
        r2 = gamma1_fgr(m, 0.05, 0.1, 10.0, grid_factors=(4,))["rate"]
        assert r2 / r1 == pytest.approx(2.0, rel=0.05)

    def test_1d_nonzero_with_asymptote(self):
        m = chain_model(64)
        rep = gamma1_fgr(m, 0.05, 0.1, 5.0, grid_factors=(2, 4))
        assert rep["rate"] > 0
        assert rep["asymptote_1d"] > 0

    def test_2d_rate_decreases_under_refinement(self):
        m = tri_model(36)
        rep = gamma1_fgr(m, 0.05, 0.1, 5.0, grid_factors=(1, 2, 4))
        rates = rep["rates"]
        assert rates[0] > 0
        assert all(b < a for a, b in zip(rates, rates[1:]))
        assert rates[-1] < 0.75 * rates[0]
