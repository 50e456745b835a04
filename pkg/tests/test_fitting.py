import math

import numpy as np
import pytest

from vortexlab import fitting, rabi
from vortexlab.errors import DegenerateFitError, InvalidParameterError

F_R, G, GAMMA, B0, F_Q0 = 7.572e9, 92.5e6, 20e12, 128e-6, 2e9


def hyperbola_points(n=25, span=100e-6, sigma=1e6, noise=0.0, seed=None):
    B = np.linspace(B0 - span, B0 + span, n)
    f = np.sqrt(F_Q0**2 + (GAMMA * (B - B0)) ** 2)
    if noise:
        f = f + np.random.default_rng(seed).normal(0, noise, f.size)
    return np.column_stack([B, f, np.full(n, sigma)])


class TestEngine:
    def test_linear_exact(self):
        x = np.linspace(0, 1, 20)
        res = fitting.least_squares(lambda p: p["a"] * x - 3.7 * x, {"a": 1.0})
        assert res.converged
        assert res.params["a"] == pytest.approx(3.7, rel=1e-10)

    def test_exponential_rate_recovery(self):
        t = np.linspace(0, 5, 60)
        y = np.exp(-1.37 * t)
        res = fitting.least_squares(
            lambda p: np.exp(-p["k"] * t) - y, {"k": 1.0})
        assert res.params["k"] == pytest.approx(1.37, rel=1e-8)

    def test_dead_parameter_flagged(self):
        x = np.linspace(0, 1, 30)
        res = fitting.least_squares(
            lambda p: p["a"] * x - 2 * x + 0 * p["b"], {"a": 1.0, "b": 5.0})
        assert res.params["a"] == pytest.approx(2.0, rel=1e-9)
        assert math.isinf(res.std_errors["b"])

    def test_residual_history_non_increasing(self):
        t = np.linspace(0, 1, 40)
        y = 2.5 * np.exp(-3 * t) + 0.2
        res = fitting.least_squares(
            lambda p: p["A"] * np.exp(-p["k"] * t) + p["c"] - y,
            {"A": 1.0, "k": 1.0, "c": 0.0})
        hist = np.array(res.residual_history)
        assert np.all(np.diff(hist) <= 0)

    def test_converged_implies_small_gradient_measure(self):
        t = np.linspace(0, 1, 40)
        y = 2.5 * np.exp(-3 * t) + 0.2
        res = fitting.least_squares(
            lambda p: p["A"] * np.exp(-p["k"] * t) + p["c"] - y,
            {"A": 1.0, "k": 1.0, "c": 0.0})
        assert res.converged
        assert res.gradient_measure <= 1e-6

    def test_nonfinite_init_rejected(self):
        with pytest.raises(InvalidParameterError):
            fitting.least_squares(lambda p: np.array([p["a"]]),
                                  {"a": math.nan})


class TestHyperbola:
    def test_noiseless_round_trip(self):
        res = fitting.fit_hyperbola(hyperbola_points())
        assert res.converged
        assert res.params["f_q0"] == pytest.approx(F_Q0, rel=1e-6)
        assert res.params["gamma"] == pytest.approx(GAMMA, rel=1e-6)
        assert res.params["B0"] == pytest.approx(B0, rel=1e-6)

    def test_symmetric_pair_centers_B0(self):
        pts = np.array([[100e-6, 2.2e9, 1e6], [156e-6, 2.2e9, 1e6],
                        [128e-6, 2.0e9, 1e6]])
        res = fitting.fit_hyperbola(pts)
        assert res.params["B0"] == pytest.approx(128e-6, rel=1e-9)

    def test_noisy_within_three_sigma(self):
        res = fitting.fit_hyperbola(hyperbola_points(noise=10e6, sigma=10e6,
                                                     seed=11))
        assert res.converged
        for key, truth in (("f_q0", F_Q0), ("gamma", GAMMA), ("B0", B0)):
            assert abs(res.params[key] - truth) < 3 * res.std_errors[key]

    def test_reflection_invariance(self):
        pts = hyperbola_points()
        pivot = 150e-6
        mirrored = pts.copy()
        mirrored[:, 0] = 2 * pivot - pts[:, 0]
        res1 = fitting.fit_hyperbola(pts)
        res2 = fitting.fit_hyperbola(mirrored)
        assert res2.params["f_q0"] == pytest.approx(res1.params["f_q0"],
                                                    rel=1e-8)
        assert res2.params["gamma"] == pytest.approx(res1.params["gamma"],
                                                     rel=1e-8)
        assert res2.params["B0"] == pytest.approx(2 * pivot - res1.params["B0"],
                                                  rel=1e-8)

    def test_permutation_invariance(self):
        pts = hyperbola_points(noise=5e6, sigma=5e6, seed=3)
        perm = np.random.default_rng(4).permutation(len(pts))
        res1 = fitting.fit_hyperbola(pts)
        res2 = fitting.fit_hyperbola(pts[perm])
        for key in ("f_q0", "gamma", "B0"):
            assert res2.params[key] == pytest.approx(res1.params[key],
                                                     rel=1e-12)

    def test_degenerate_fields(self):
        pts = np.array([[1e-4, 2e9, 1e6]] * 4)
        with pytest.raises(DegenerateFitError):
            fitting.fit_hyperbola(pts)


class TestJointAqrm:
    trunc = rabi.HilbertTruncation(24)

    def _dataset(self, g=G, noise_q=0.0, noise_r=0.0, seed=None):
        true = rabi.QrmParams.asymmetric(F_R, g, GAMMA, B0, F_Q0)
        B_q = B0 + np.linspace(-150e-6, 150e-6, 13)
        B_r = B0 + np.linspace(-250e-6, 250e-6, 11)
        rng = np.random.default_rng(seed)
        qpts, rpts = [], []
        for B in B_q:
            f = rabi.solve_qrm(true, B, self.trunc).f_q_dressed
            sig = max(noise_q * f, 1e6)
            qpts.append([B, f + (rng.normal(0, noise_q * f) if noise_q else 0),
                         sig])
        for B in B_r:
            f = rabi.solve_qrm(true, B, self.trunc).f_r_g
            sig = max(noise_r * f, 0.2e6)
            rpts.append([B, f + (rng.normal(0, noise_r * f) if noise_r else 0),
                         sig])
        return fitting.SpectrumDataset(qubit_points=np.array(qpts),
                                       resonator_points=np.array(rpts))

    def test_noiseless_round_trip(self):
        res = fitting.fit_joint_aqrm(self._dataset(), None, self.trunc)
        assert res.converged
        for key, truth in (("f_r", F_R), ("g", G), ("gamma", GAMMA),
                           ("B0", B0), ("f_q0", F_Q0)):
            assert abs(res.params[key] - truth) / truth < 1e-3

    def test_zero_coupling_dataset(self):
        res = fitting.fit_joint_aqrm(self._dataset(g=0.0), {"g": 0.0},
                                     self.trunc)
        # zero-residual start: the fit has nothing to improve and the flat
        # coupling direction stays at zero, consistent with 0 within its
        # standard error
        assert abs(res.params["g"]) <= res.std_errors["g"]
        for key, truth in (("f_r", F_R), ("gamma", GAMMA), ("B0", B0),
                           ("f_q0", F_Q0)):
            assert abs(res.params[key] - truth) / truth < 1e-6

    def test_noisy_within_three_sigma(self):
        res = fitting.fit_joint_aqrm(self._dataset(noise_q=0.05, noise_r=5e-4,
                                                   seed=17), None, self.trunc)
        assert res.converged
        for key, truth in (("f_r", F_R), ("g", G), ("gamma", GAMMA),
                           ("B0", B0), ("f_q0", F_Q0)):
            assert abs(res.params[key] - truth) < 3 * res.std_errors[key]

    def test_labeling_failures_at_trial_params_not_fatal(self):
        # points just off the avoided crossing are labelable at the true
        # coupling but not at a wildly large trial coupling; the fit must
        # survive the penalized phase and still converge
        true = rabi.QrmParams.asymmetric(F_R, G, GAMMA, B0, F_Q0)
        B_cross = B0 + math.sqrt(F_R**2 - F_Q0**2) / GAMMA
        ds = self._dataset()
        extra = []
        for B in (B_cross - 3e-6, B_cross + 3e-6):
            extra.append([B, rabi.solve_qrm(true, B, self.trunc).f_r_g,
                          0.2e6])
        ds2 = fitting.SpectrumDataset(
            qubit_points=ds.qubit_points,
            resonator_points=np.vstack([ds.resonator_points, extra]))
        res = fitting.fit_joint_aqrm(ds2, {"g": 250e6}, self.trunc)
        assert res.converged
        assert abs(res.params["g"] - G) / G < 0.01


class TestTimeTrace:
    def test_requires_ascending_times(self):
        with pytest.raises(InvalidParameterError):
            fitting.TimeTrace(times=np.array([0.0, 2.0, 1.0]),
                              values=np.zeros(3))

    def test_requires_positive_sigma(self):
        with pytest.raises(InvalidParameterError):
            fitting.TimeTrace(times=np.arange(3.0), values=np.zeros(3),
                              sigma=np.array([1.0, 0.0, 1.0]))


class TestExponential:
    def test_t1_round_trip(self):
        t = np.linspace(0, 1e-3, 120)
        v = 0.8 * np.exp(-t / 186e-6) + 0.1
        res = fitting.fit_exponential(fitting.TimeTrace(times=t, values=v))
        assert res.params["T"] == pytest.approx(186e-6, rel=1e-6)

    def test_echo_round_trip(self):
        t = np.linspace(0, 6e-6, 80)
        v = 0.5 * np.exp(-t / 1.2e-6) + 0.05
        res = fitting.fit_exponential(fitting.TimeTrace(times=t, values=v))
        assert res.params["T"] == pytest.approx(1.2e-6, rel=0.02)

    def test_constant_trace_unidentifiable(self):
        t = np.linspace(0, 1e-3, 50)
        res = fitting.fit_exponential(
            fitting.TimeTrace(times=t, values=np.full(50, 0.3)))
        assert abs(res.params["A"]) < 1e-9
        assert res.std_errors["T"] > abs(res.params["T"])

    def test_too_few_points(self):
        with pytest.raises(DegenerateFitError):
            fitting.fit_exponential(
                fitting.TimeTrace(times=np.arange(3.0), values=np.ones(3)))


class TestRamseyBeat:
    def test_two_tone_round_trip(self):
        t = np.linspace(0, 2e-6, 300)
        v = np.exp(-t / 440e-9) * (
            0.4 * np.cos(2 * np.pi * 5e6 * t + 0.3)
            + 0.4 * np.cos(2 * np.pi * 7e6 * t - 0.2)) + 0.5
        res = fitting.fit_ramsey_beat(fitting.TimeTrace(times=t, values=v))
        assert res.converged
        assert res.params["T2s"] == pytest.approx(440e-9, rel=0.02)
        assert res.params["f_beat"] == pytest.approx(2e6, rel=0.02)

    def test_single_tone_degenerates(self):
        t = np.linspace(0, 2e-6, 300)
        v = np.exp(-t / 440e-9) * 0.8 * np.cos(2 * np.pi * 6e6 * t + 0.1) + 0.5
        res = fitting.fit_ramsey_beat(fitting.TimeTrace(times=t, values=v))
        assert res.residual_norm < 1e-8
        assert res.params["a1"] + res.params["a2"] == pytest.approx(0.8,
                                                                    rel=0.02)
        assert math.isinf(res.std_errors["f_beat"]) or \
            "unidentifiable" in res.message

    def test_zero_amplitude(self):
        t = np.linspace(0, 2e-6, 64)
        res = fitting.fit_ramsey_beat(
            fitting.TimeTrace(times=t, values=np.full(64, 0.5)))
        assert abs(res.params["a1"]) < 1e-9
        assert abs(res.params["a2"]) < 1e-9


class TestRabiLinear:
    @staticmethod
    def _scan(amplitude, slope=1e12, n=200, t_max=2e-6):
        t = np.linspace(0, t_max, n)
        if amplitude == 0:
            return amplitude, fitting.TimeTrace(times=t, values=np.zeros(n))
        v = 0.5 - 0.5 * np.cos(2 * np.pi * slope * amplitude * t)
        return amplitude, fitting.TimeTrace(times=t, values=v)

    def test_linear_slope_round_trip(self):
        scans = [self._scan(a) for a in (0.0, 4e-6, 8e-6, 16e-6, 24e-6)]
        fit, omegas, warnings = fitting.fit_rabi_linear(scans)
        assert not warnings
        assert fit.params["slope"] == pytest.approx(1e12, rel=0.01)
        assert omegas[0.0] == 0.0

    def test_pi_pulse_consistency(self):
        # a 20 ns inverting pulse corresponds to a 25 MHz oscillation
        amp = 10e-6
        t = np.linspace(0, 200e-9, 120)
        v = 0.5 - 0.5 * np.cos(2 * np.pi * 25e6 * t)
        fit, omegas, _ = fitting.fit_rabi_linear([(amp, fitting.TimeTrace(
            times=t, values=v))])
        assert omegas[amp] == pytest.approx(25e6, rel=1e-3)
        pi_time = 1.0 / (2.0 * omegas[amp])
        assert pi_time == pytest.approx(20e-9, rel=1e-3)

    def test_non_oscillating_excluded(self):
        scans = [self._scan(8e-6)]
        t = np.linspace(0, 2e-6, 50)
        scans.append((4e-6, fitting.TimeTrace(times=t,
                                              values=np.full(50, 0.25))))
        fit, omegas, warnings = fitting.fit_rabi_linear(scans)
        assert len(warnings) == 1
        assert 4e-6 not in omegas


class TestReflectionPhase:
    def test_far_detuned_phase_vanishes(self):
        ph = fitting.reflection_phase(7.9e9, F_R, 0.2e6, 0.6e6)
        assert abs(ph) < 0.01

    def test_lossless_on_resonance(self):
        s = fitting.reflection_s11(F_R, F_R, 0.0, 0.6e6)
        assert abs(s) == pytest.approx(1.0, rel=1e-12)
        assert fitting.reflection_phase(F_R, F_R, 0.0, 0.6e6) == pytest.approx(
            math.pi, rel=1e-12)

    def test_full_phase_roll_when_overcoupled(self):
        # log-spaced offsets: dense near resonance, wings out to 2 GHz
        off = np.geomspace(1e3, 2e9, 3000)
        f = F_R + np.concatenate([-off[::-1], [0.0], off])
        ph = np.unwrap(fitting.reflection_phase(f, F_R, 0.15e6, 0.6e6))
        assert abs(ph[0] - ph[-1]) == pytest.approx(2 * math.pi, rel=1e-3)

    def test_no_roll_when_undercoupled(self):
        off = np.geomspace(1e3, 2e9, 3000)
        f = F_R + np.concatenate([-off[::-1], [0.0], off])
        ph = np.unwrap(fitting.reflection_phase(f, F_R, 0.9e6, 0.6e6))
        assert abs(ph[0] - ph[-1]) < 0.1

    def test_two_state_chi_recovery(self):
        # curves offset by chi = -1.32 MHz at kappa ~ 0.75 MHz total
        chi = -1.32e6
        f = np.linspace(7.56e9, 7.585e9, 400)
        rng = np.random.default_rng(5)
        ph_g = fitting.reflection_phase(f, F_R, 0.15e6, 0.6e6) \
            + rng.normal(0, 0.002, f.size)
        ph_e = fitting.reflection_phase(f, F_R + chi, 0.15e6, 0.6e6) \
            + rng.normal(0, 0.002, f.size)
        init = {"f_r": 7.5715e9, "kappa_int": 0.2e6, "kappa_ext": 0.5e6}
        fit_g = fitting.fit_reflection_phase(f, ph_g, init)
        fit_e = fitting.fit_reflection_phase(f, ph_e, init)
        chi_fit = fit_e.params["f_r"] - fit_g.params["f_r"]
        assert chi_fit == pytest.approx(chi, rel=0.02)
