import math

import numpy as np
import pytest

from kirchlab import NonlinearitySpec, SolverConfig
from kirchlab.corrector import assemble
from kirchlab.energies import (
    bound_suite, cumulative_integral, energy_series, eval_energies, integrand_spec,
    lemma_lin_bound, lemma_sqrt_bound, s_condition_margin, weighted_integral,
)
from kirchlab.hyperbolic import solve_hyperbolic
from kirchlab.model import compute_eps0
from kirchlab.parabolic import solve_parabolic
from conftest import make_setup
from oracles import lin_lemma_suite, sqrt_lemma_suite

CFG = SolverConfig(T=100.0)


@pytest.fixture(scope="module")
def affine_pair():
    s = make_setup(0.05, [1.0, 2.0, 4.0], [0.1, 0.05, -0.02], [0.05, -0.05, 0.02],
                   m=NonlinearitySpec.affine(1.0, 0.5))
    hyp, par = solve_hyperbolic(s, CFG), solve_parabolic(s, CFG)
    return s, hyp, assemble(hyp, par)


def test_zero_trajectory_has_zero_energies():
    s = make_setup(0.1, [1.0, 2.0], [0, 0], [0, 0])
    hyp, par = solve_hyperbolic(s, CFG), solve_parabolic(s, CFG)
    e = eval_energies(s, hyp, hyp.times[10], assemble(hyp, par), orders=(2, 3))
    for name in ("H", "D_eps0", "D_eps1", "F_eps", "G_eps", "c_eps_prime", "cal_D", "cal_E"):
        assert getattr(e, name) == 0.0
    assert all(v == 0.0 for d in e.higher.values() for v in d.values())


def test_error_energies_vanish_initially(affine_pair):
    s, hyp, dec = affine_pair
    e = eval_energies(s, hyp, 0.0, dec, orders=(2,))
    assert e.cal_D == 0.0 and e.cal_E == 0.0
    assert e.higher[2]["cal_D"] == 0.0 and e.higher[2]["cal_E"] == 0.0


def test_constant_m_energy_literal():
    s = make_setup(0.1, [1.0, 3.0], [0.5, 0.2], [0.1, 0.3])
    hyp = solve_hyperbolic(s, CFG)
    j = 50
    e = eval_energies(s, hyp, hyp.times[j])
    lam, u, du = s.op.eigenvalues, hyp.u[j], hyp.du[j]
    assert e.c_eps == 1.0 and e.c_eps_prime == 0.0
    assert e.F_eps == pytest.approx(0.1 * np.sum(lam * du**2) + np.sum(lam**2 * u**2), rel=1e-14)


def test_energy_sample_invariants(affine_pair):
    s, hyp, dec = affine_pair
    e = energy_series(s, hyp, dec, orders=(2,))
    assert np.all(e["H"] >= s.eps * np.sum(hyp.du**2, axis=1))
    for name in ("F_eps", "G_eps", "cal_E", "cal_E_2", "cal_G_2"):
        assert np.all(e[name] >= 0)


def test_chain_rule_coefficient_derivative(affine_pair):
    s, hyp, _ = affine_pair
    e = energy_series(s, hyp)
    t, h = 3.0, 1e-4
    c = [s.m(s.op.eigenvalues @ hyp.at(x)[0] ** 2) for x in (t - h, t + h)]
    assert eval_energies(s, hyp, t).c_eps_prime == pytest.approx((c[1] - c[0]) / (2 * h), rel=1e-5)
    assert e["c_eps_prime"].shape == hyp.times.shape


def test_higher_orders_need_k_at_least_two(affine_pair):
    s, hyp, dec = affine_pair
    with pytest.raises(ValueError):
        energy_series(s, hyp, dec, orders=(1,))


def test_weighted_integral_of_zero():
    s = make_setup(0.1, [1.0], [0.0], [0.0])
    wi = weighted_integral(solve_hyperbolic(s, CFG), 1.0, "|u'|^2")
    assert wi.value == 0.0 and wi.converged


def test_weighted_integral_parabolic_closed_form():
    # int_0^inf (1+s) exp(-((1+s)^2 - 1)) ds = 1/2
    s = make_setup(0.1, [1.0], [1.0], [0.0])
    par = solve_parabolic(s, SolverConfig(T=10.0))
    wi = weighted_integral(par, 1.0, "|A^1/2 u|^2", tail=True)
    assert wi.converged
    assert wi.value == pytest.approx(0.5, rel=1e-6)


def test_weighted_integral_stable_under_horizon_doubling():
    s = make_setup(0.05, [1.0], [1.0], [0.5])
    a = weighted_integral(solve_hyperbolic(s, SolverConfig(T=200.0)), 1.0, "|u'|^2")
    b = weighted_integral(solve_hyperbolic(s, SolverConfig(T=400.0)), 1.0, "|u'|^2")
    assert a.converged and b.converged
    assert b.value == pytest.approx(a.value, rel=0.01)


def test_cumulative_matches_carried_integral(affine_pair):
    _, hyp, _ = affine_pair
    cum = cumulative_integral(hyp, 1.0, "|u'|^2")
    np.testing.assert_allclose(cum, hyp.integrals["w1_du2"], rtol=1e-4, atol=1e-12)


def test_unknown_integrand():
    with pytest.raises(ValueError):
        integrand_spec("|B u|^2")
    assert integrand_spec(("dr", 1)) == ("dr", 1.0)


def test_s_margin_constant_m():
    s = make_setup(0.1, [1.0], [1.0], [0.5])
    margin, where = s_condition_margin(s, solve_hyperbolic(s, CFG))
    assert where == 100.0
    assert margin == pytest.approx(0.5 / 101.0, rel=1e-14)


def test_s_margin_positive_and_relative_usage_grows_with_eps(critical_setup):
    eps0 = compute_eps0(critical_setup)
    usage = []
    for f in (0.25, 0.99):
        s = critical_setup.with_eps(f * eps0)
        traj = solve_hyperbolic(s, CFG)
        assert s_condition_margin(s, traj)[0] > 0
        e = energy_series(s, traj)
        usage.append(np.max(2 * (1 + traj.times) * s.eps * np.abs(e["c_eps_prime"]) / e["c_eps"]))
    assert usage[0] < usage[1] < 1


def test_bound_suite_holds_below_threshold(critical_setup):
    s = critical_setup.with_eps(compute_eps0(critical_setup) / 2)
    suite = bound_suite(s, solve_hyperbolic(s, CFG))
    assert set(suite) == {"decay_E", "D0_final", "F", "D1_final"}
    assert all(v["holds"] and 0 < v["ratio"] <= 1 for v in suite.values())


@pytest.mark.parametrize("y0,c1,c2,expected", [(0, 1, 1, 1), (9, 1, 1, 9), (1, 2, 6, 9)])
def test_sqrt_lemma_examples(y0, c1, c2, expected):
    assert lemma_sqrt_bound(y0, c1, c2) == expected


@pytest.mark.parametrize("args", [(1, 0, 1), (1, 1, -1), (-1, 1, 1)])
def test_sqrt_lemma_rejects_bad_input(args):
    with pytest.raises(ValueError):
        lemma_sqrt_bound(*args)


def test_lin_lemma_examples():
    assert lemma_lin_bound(2.0, 0.0, 0.0) == -2.0
    assert lemma_lin_bound(0.0, math.log(2), 3.0) == pytest.approx(6.0, rel=1e-15)


def test_sqrt_lemma_property_suite():
    assert sqrt_lemma_suite() == 0


def test_lin_lemma_property_suite():
    assert lin_lemma_suite() == 0


def test_oracle_detects_a_bound_that_is_too_small():
    assert sqrt_lemma_suite(n=50, slack=0.5) > 0
    assert lin_lemma_suite(n=50, slack=0.5) > 0
