import numpy as np
import pytest
from scipy.linalg import expm

from meanforce.corrections import build_upsilon_table
from meanforce.errors import DegenerateSteadyStateError, ValidationError
from meanforce.generators import (
    Superoperator,
    build_cumulant_exponent,
    build_davies_generator,
    build_redfield_generator,
    choi_matrix,
    cumulant_map,
    interaction_redfield_generator,
    propagate,
    steady_state_of_generator,
    thermal_state,
    unvectorize,
    vectorize,
)
from meanforce.operators import assemble_correction, bohr_decompose, pauli_coupling, spectral_decompose
from meanforce.oracle import scaling_exponent

LAM = 0.05


class TestVectorisation:
    def test_column_stacking_round_trip(self):
        rho = np.array([[1.0, 2.0 + 1j], [3.0 - 2j, 4.0]])
        v = vectorize(rho)
        # column stacking: (rho00, rho10, rho01, rho11)
        assert np.allclose(v, [1.0, 3.0 - 2j, 2.0 + 1j, 4.0])
        assert np.allclose(unvectorize(v), rho)

    def test_sandwich_convention(self):
        rng = np.random.default_rng(1)
        a, b, rho = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
        from meanforce.generators import _sandwich

        lhs = unvectorize(_sandwich(a, b) @ vectorize(rho))
        assert np.allclose(lhs, a @ rho @ b)


class TestRedfieldGenerator:
    def test_free_spectrum_at_zero_coupling(self, h0, jumps, bath):
        gen = build_redfield_generator(h0, jumps, bath, 0.0)
        ev = np.sort_complex(np.linalg.eigvals(gen.matrix))
        assert np.allclose(ev, [-1j, 0.0, 0.0, 1j], atol=1e-12)

    def test_trace_preservation(self, h0, jumps, bath):
        gen = build_redfield_generator(h0, jumps, bath, LAM)
        assert gen.trace_defect() <= 1e-12 * np.linalg.norm(gen.matrix)

    def test_negative_coupling_rejected(self, h0, jumps, bath):
        with pytest.raises(ValidationError):
            build_redfield_generator(h0, jumps, bath, -0.1)

    def test_steady_coherence_matches_perturbative_gibbs(self, h0, jumps, bath):
        table = build_upsilon_table("steady_state", jumps, bath, equation="redfield")
        hst = assemble_correction(table, jumps)
        diffs = []
        lams = [0.1, 0.05, 0.02]
        for lam in lams:
            gen = build_redfield_generator(h0, jumps, bath, lam)
            num = steady_state_of_generator(gen)
            ana = thermal_state(h0 + lam**2 * hst, 1.0)
            diffs.append(abs(num[0, 1] - ana[0, 1]))
        slope = scaling_exponent(lams, diffs)
        assert slope == pytest.approx(4.0, abs=0.35)


class TestDaviesGenerator:
    def test_steady_state_is_bare_gibbs(self, h0, jumps, bath):
        gen = build_davies_generator(h0, jumps, bath, LAM)
        rho = steady_state_of_generator(gen)
        assert np.abs(rho - thermal_state(h0, 1.0)).max() <= 1e-10

    def test_secular_kossakowski_psd(self, h0, jumps, bath):
        # 1x1 blocks gamma(w) >= 0; the builder performs the check internally
        build_davies_generator(h0, jumps, bath, LAM)
        from meanforce.bath import measure_value

        for w in jumps[0].frequencies:
            assert measure_value(bath, w) >= -1e-12

    def test_coherence_decays_monotonically(self, h0, jumps, bath):
        gen = build_davies_generator(h0, jumps, bath, LAM)
        rho = np.eye(2, dtype=complex) / 2 + np.array([[0, 0.25], [0.25, 0]])
        mags = []
        for t in (0.0, 20.0, 40.0, 80.0, 160.0):
            out = propagate(gen, rho, t)
            mags.append(abs(out[0, 1]))
        assert all(a > b for a, b in zip(mags, mags[1:]))


class TestCumulant:
    def test_zero_time_identity_map(self, h0, jumps, bath):
        k = build_cumulant_exponent(h0, jumps, bath, LAM, 0.0)
        assert np.abs(k.matrix).max() == 0.0
        m = cumulant_map(h0, jumps, bath, LAM, 0.0)
        assert np.allclose(m.matrix, np.eye(4))

    def test_exponent_derivative_is_interaction_redfield(self, h0, jumps, bath):
        lam, t, h = 0.02, 2.0, 1e-4
        kp = build_cumulant_exponent(h0, jumps, bath, lam, t + h).matrix
        km = build_cumulant_exponent(h0, jumps, bath, lam, t - h).matrix
        li = interaction_redfield_generator(jumps, bath, lam, t).matrix
        assert np.linalg.norm((kp - km) / (2 * h) - li) <= 1e-6

    def test_propagation_cptp(self, h0, jumps, bath, rho0):
        out = propagate(cumulant_map(h0, jumps, bath, LAM, 10.0), rho0)
        assert abs(np.trace(out) - 1.0) <= 1e-12
        herm = 0.5 * (out + out.conj().T)
        assert np.abs(out - herm).max() <= 1e-12
        assert np.linalg.eigvalsh(herm).min() >= -1e-10

    def test_map_tracks_time_ordered_redfield(self, h0, jumps, bath, rho0):
        # independent oracle: RK4 on the time-dependent Redfield equation
        lam, t, dt = 0.05, 4.0, 0.005
        gens = {}

        def gen_at(s):
            key = round(s, 10)
            if key not in gens:
                gens[key] = build_redfield_generator(h0, jumps, bath, lam, t=key).matrix
            return gens[key]

        v = vectorize(rho0)
        for k in range(int(round(t / dt))):
            s = k * dt
            k1 = gen_at(s) @ v
            k2 = gen_at(s + dt / 2) @ (v + dt / 2 * k1)
            k3 = gen_at(s + dt / 2) @ (v + dt / 2 * k2)
            k4 = gen_at(s + dt) @ (v + dt * k3)
            v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        oracle = unvectorize(v)
        out = propagate(cumulant_map(h0, jumps, bath, lam, t), rho0)
        assert np.abs(out - oracle).max() <= 5e-4


class TestPropagate:
    def test_zero_time_returns_input(self, h0, jumps, bath, rho0):
        gen = build_redfield_generator(h0, jumps, bath, LAM)
        assert np.allclose(propagate(gen, rho0, 0.0), rho0)

    def test_davies_long_time_reaches_gibbs(self, h0, jumps, bath):
        gen = build_davies_generator(h0, jumps, bath, 0.1)
        plus = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
        out = propagate(gen, plus, 3000.0)
        assert np.abs(out - thermal_state(h0, 1.0)).max() <= 1e-8

    def test_invalid_state_rejected(self, h0, jumps, bath):
        gen = build_redfield_generator(h0, jumps, bath, LAM)
        with pytest.raises(ValidationError):
            propagate(gen, np.array([[1.0, 0.0], [0.0, 1.0]]), 1.0)  # trace 2
        with pytest.raises(ValidationError):
            propagate(gen, np.array([[1.0, 1.0], [0.0, 0.0]]), 1.0)  # not hermitian


class TestChoi:
    def test_identity_map(self):
        ident = Superoperator(2, np.eye(4, dtype=complex))
        c = choi_matrix(ident)
        ev = np.sort(np.linalg.eigvalsh(c))
        assert np.allclose(ev, [0.0, 0.0, 0.0, 2.0], atol=1e-12)

    @pytest.mark.parametrize("t", [0.5, 5.0, 50.0])
    def test_cumulant_map_is_cp(self, h0, jumps, bath, t):
        m = cumulant_map(h0, jumps, bath, LAM, t)
        assert np.linalg.eigvalsh(choi_matrix(m)).min() >= -1e-10

    def test_redfield_scan_exhibits_cp_violation(self, h0, bath):
        # no canonical parameter point exists; scan and require at least one violation
        worst = 0.0
        report = []
        for x, z in ((1 / np.sqrt(2), 1 / np.sqrt(2)), (1.0, 0.0)):
            jumps_l = [bohr_decompose(spectral_decompose(h0), pauli_coupling(x, 0.0, z))]
            for lam in (0.2, 0.5):
                gen = build_redfield_generator(h0, jumps_l, bath, lam)
                for t in (0.05, 0.2, 1.0):
                    m = Superoperator(2, expm(gen.matrix * t))
                    low = np.linalg.eigvalsh(choi_matrix(m)).min()
                    report.append(low)
                    worst = min(worst, low)
        assert worst < -1e-8, f"no CP violation found in scan: {report}"


class TestSteadyState:
    def test_degenerate_null_space_rejected(self, h0, jumps, bath):
        gen = build_redfield_generator(h0, jumps, bath, 0.0)
        with pytest.raises(DegenerateSteadyStateError):
            steady_state_of_generator(gen)

    def test_unit_trace_hermitian(self, h0, jumps, bath):
        rho = steady_state_of_generator(build_redfield_generator(h0, jumps, bath, LAM))
        assert abs(np.trace(rho) - 1.0) <= 1e-12
        assert np.abs(rho - rho.conj().T).max() <= 1e-12

    def test_headline_coherence_dominates_davies(self, h0, jumps, bath, rho0):
        # cumulant coherence at a long but finite time stays well above the
        # Davies fixed-point coherence, which is exactly zero
        davies = steady_state_of_generator(build_davies_generator(h0, jumps, bath, LAM))
        gen = build_redfield_generator(h0, jumps, bath, LAM)
        ev = np.linalg.eigvals(gen.matrix)
        gap = -max(e.real for e in ev if e.real < -1e-13)
        rho_c = propagate(cumulant_map(h0, jumps, bath, LAM, 10.0 / gap), rho0)
        assert abs(davies[0, 1]) <= 1e-14
        assert abs(rho_c[0, 1]) > 10.0 * abs(davies[0, 1])
        assert abs(rho_c[0, 1]) > 1e-5
