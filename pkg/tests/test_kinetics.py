import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_kinetics import (
    DomainError,
    RateSet,
    Species,
    SpeciesTriple,
    StabilityGuardError,
    get_constants,
    photon,
)
from cavity_kinetics.constants import ev_to_joule
from cavity_kinetics.kinetics import (
    Network,
    ReactionChannel,
    ReservoirCoupling,
    SimState,
    atom_laser_ensemble,
    channel_modes,
    channel_propensities,
    equilibrium_residual,
    independent_channels_network,
    occupation_propensities,
    per_mode_fractions,
    rate_scale,
    reservoir_propensities,
    run_ode,
    run_ssa,
    run_ssa_batches,
    run_ssa_ensemble,
    runaway_network,
    scenario_atom_laser,
    thermal_balance_residual,
)
from cavity_kinetics.statistics import ThermalEnvironment, bose_occupation

ENV = ThermalEnvironment(1000.0)
KT = ENV.kT
HBAR = get_constants().hbar
# toy species with O(1) thermal occupations at 1000 K
TOY = SpeciesTriple.build(Species("toy", 0.6 * KT, 2), photon(), 1.0 * KT, 1)
HEAVY = SpeciesTriple.build(Species("atom", ev_to_joule(1e9), 1), photon(), ev_to_joule(10.0), 1)


def toy_network(rates=RateSet.uniform(1.0), kappa=None, n_channels=1):
    omegas = [(0.6 + 0.3 * j) * KT / HBAR for j in range(n_channels)]
    res = None if kappa is None else ReservoirCoupling(kappa, ENV)
    return independent_channels_network(TOY, 0.4 * KT, omegas, rates, res)


def decay_network(alpha=1.0):
    w = HEAVY.transition_energy / HBAR
    return independent_channels_network(HEAVY, ev_to_joule(1e-3), [w], RateSet(alpha, 0.0, 0.0, 0.0))


def decay_state(n0=1000):
    return SimState(0.0, np.array([n0, 0, 0], dtype=np.int64))


class TestPropensities:
    def test_values(self):
        ch = ReactionChannel(0, 1, 2, RateSet(1.0, 2.0, 3.0, 4.0))
        p = channel_propensities(ch, [5, 7, 11])
        assert p.rate_L == 2.0 * 11 * 7
        assert (p.rate_R_spont, p.rate_R_photon, p.rate_R_atom) == (5.0, 3.0 * 11 * 5, 4.0 * 7 * 5)
        assert p.rate_R == 5.0 + 165.0 + 140.0
        assert occupation_propensities(ch.rates, 5, 7, 11) == p

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(1e-3, 1e3))
    def test_residual_vanishes_at_thermal_occupations(self, x, y, rate):
        n = [1 / math.expm1(x + y), 1 / math.expm1(x), 1 / math.expm1(y)]
        ch = ReactionChannel(0, 1, 2, RateSet.uniform(rate))
        p = channel_propensities(ch, n)
        assert abs(equilibrium_residual(ch, n)) <= 1e-12 * p.rate_L

    @pytest.mark.parametrize("field,sign", [("alpha", -1), ("beta_abs", 1), ("beta_em", -1), ("gamma", -1)])
    def test_residual_detects_one_percent_perturbation(self, field, sign):
        x, y = 1.0, 0.6
        n = [1 / math.expm1(x + y), 1 / math.expm1(x), 1 / math.expm1(y)]
        ch = ReactionChannel(0, 1, 2, RateSet.uniform(1.0).scaled(**{field: 1.01}))
        res = equilibrium_residual(ch, n)
        assert np.sign(res) == sign
        assert abs(res) > 1e-4 * channel_propensities(ch, n).rate_L

    def test_thermal_balance_heavy_atom(self):
        for temp in (1.0, 300.0, 6000.0, 1e6):
            env = ThermalEnvironment(temp)
            r = thermal_balance_residual(RateSet.uniform(1e-3), ev_to_joule(1e9), ev_to_joule(10.0), env)
            assert abs(r) <= 1e-12

    def test_thermal_balance_perturbed(self):
        r = thermal_balance_residual(RateSet.uniform(1.0).scaled(gamma=1.01), 1.0 * KT, 0.6 * KT, ENV)
        assert r < -1e-4

    def test_thermal_balance_needs_zero_mu(self):
        with pytest.raises(DomainError):
            thermal_balance_residual(RateSet.uniform(1.0), KT, KT, ThermalEnvironment(1000.0, 0.1 * KT))


class TestReservoir:
    def test_stationary_geometric(self):
        net = toy_network(kappa=2.0)
        mode = net.modes[2]
        b = math.exp(-HBAR * mode.omega / KT)
        coupling = net.reservoir
        for n in range(5):
            birth, _ = reservoir_propensities(mode, n, coupling)
            _, death = reservoir_propensities(mode, n + 1, coupling)
            # pi(n) birth(n) = pi(n+1) death(n+1) with pi(n+1)/pi(n) = b
            assert birth == pytest.approx(b * death, rel=1e-14)

    def test_mean_field_fixed_point(self):
        net = toy_network(kappa=2.0)
        mode = net.modes[0]
        n = bose_occupation(mode.omega, ENV)
        birth, death = reservoir_propensities(mode, n, net.reservoir)
        assert birth == pytest.approx(death, rel=1e-14)

    def test_zero_kappa(self):
        net = toy_network(kappa=0.0)
        assert reservoir_propensities(net.modes[0], 3, net.reservoir) == (0.0, 0.0)
        with pytest.raises(DomainError):
            ReservoirCoupling(-1.0, ENV)


class TestNetwork:
    def test_energy_conservation_check(self):
        ex, gr, bo = channel_modes(TOY, 0.4 * KT, 0.6 * KT / HBAR)
        Network((ex, gr, bo), (ReactionChannel(0, 1, 2, RateSet.uniform(1.0)),))
        ex2, _, _ = channel_modes(TOY, 0.5 * KT, 0.6 * KT / HBAR)
        with pytest.raises(DomainError):
            Network((ex2, gr, bo), (ReactionChannel(0, 1, 2, RateSet.uniform(1.0)),))

    def test_distinct_modes_and_names(self):
        net = toy_network()
        with pytest.raises(DomainError):
            Network(net.modes, (ReactionChannel(0, 0, 2, RateSet.uniform(1.0)),))
        with pytest.raises(DomainError):
            Network(net.modes, net.channels, ("a", "a", "b"))

    def test_conservation_matrix(self):
        net = toy_network(n_channels=3)
        c = net.conservation_matrix()
        assert c.shape == (6, 9)
        assert np.allclose(c @ net.stoichiometry(), 0.0, atol=1e-12)

    def test_runaway_layout(self):
        net = runaway_network(TOY, 0.4 * KT, 0.6 * KT / HBAR, RateSet.uniform(1.0))
        assert net.names == ("excited", "boson", "ground0", "ground1")
        assert all(c.boson == 1 and c.excited == 0 for c in net.channels)
        with pytest.raises(DomainError):
            runaway_network(TOY, 0.4 * KT, 0.6 * KT / HBAR, RateSet.uniform(1.0), d_a=3)

    def test_fingerprint_stable(self):
        assert toy_network().fingerprint() == toy_network().fingerprint()
        assert toy_network().fingerprint() != toy_network(kappa=1.0).fingerprint()


class TestODE:
    def test_thermal_fixed_point(self):
        net = toy_network(kappa=0.5, n_channels=3)
        n0 = net.thermal_occupations()
        tr = run_ode(net, SimState(0.0, n0), 0.01, 100.0, sample_every=1000)
        assert np.max(np.abs(tr.samples[-1] / n0 - 1)) < 1e-12

    def test_relaxes_to_thermal(self):
        net = toy_network(kappa=0.2, n_channels=2)
        tr = run_ode(net, SimState(0.0, np.zeros(6)), 0.02, 200.0, sample_every=10000)
        assert np.allclose(tr.samples[-1], net.thermal_occupations(), rtol=1e-6)

    def test_closed_network_conserves(self):
        net = toy_network(n_channels=2)
        n0 = np.array([3.0, 0.5, 1.0, 0.0, 2.0, 4.0])
        tr = run_ode(net, SimState(0.0, n0), 0.001, 5.0, sample_every=100)
        c = net.conservation_matrix()
        assert np.allclose(tr.samples @ c.T, c @ n0, rtol=0, atol=1e-9)

    def test_fourth_order(self):
        net = decay_network()
        errs = []
        for dt in (0.04, 0.02, 0.01):
            tr = run_ode(net, SimState(0.0, np.array([1.0, 0.0, 0.0])), dt, 2.0)
            errs.append(abs(tr.samples[-1, 0] - math.exp(-2.0)))
        assert 14 < errs[0] / errs[1] < 18
        assert 14 < errs[1] / errs[2] < 18

    def test_stability_guard(self):
        with pytest.raises(StabilityGuardError):
            run_ode(decay_network(alpha=100.0), SimState(0.0, np.array([1.0, 0, 0])), 0.01, 1.0)

    def test_dt_must_divide_span(self):
        with pytest.raises(DomainError):
            run_ode(decay_network(), SimState(0.0, np.array([1.0, 0, 0])), 0.03, 1.0)

    def test_rate_scale(self):
        net = toy_network(kappa=5.0)
        assert rate_scale(net, np.zeros(3)) >= 5.0


class TestSSA:
    def test_determinism(self):
        net = toy_network(kappa=1.0, n_channels=2)
        s0 = SimState(0.0, np.zeros(6, dtype=np.int64))
        a = run_ssa(net, s0, 42, 50.0, sample_dt=1.0)
        b = run_ssa(net, s0, 42, 50.0, sample_dt=1.0)
        c = run_ssa(net, s0, 43, 50.0, sample_dt=1.0)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.event_counts, b.event_counts)
        assert not np.array_equal(a.samples, c.samples)

    def test_ensemble_independent_of_workers(self):
        net = toy_network(kappa=1.0)
        s0 = SimState(0.0, np.zeros(3, dtype=np.int64))
        a = run_ssa_ensemble(net, s0, 5, 8, 10.0, sample_dt=1.0, workers=1)
        b = run_ssa_ensemble(net, s0, 5, 8, 10.0, sample_dt=1.0, workers=4)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.sem, b.sem)

    def test_integer_state_required(self):
        with pytest.raises(DomainError):
            run_ssa(toy_network(), SimState(0.0, np.array([0.5, 0, 0])), 1, 1.0)

    def test_closed_network_invariants(self):
        net = toy_network(n_channels=2)
        n0 = np.array([5, 2, 1, 0, 3, 4], dtype=np.int64)
        tr = run_ssa(net, SimState(0.0, n0), 9, 20.0, sample_dt=0.5)
        c = net.conservation_matrix()
        assert np.allclose(tr.samples @ c.T, c @ n0, atol=1e-9)

    def test_decay_extinction(self):
        tr = run_ssa(decay_network(), decay_state(50), 3, 1e3, sample_dt=100.0)
        assert tr.extinct
        assert np.array_equal(tr.samples[-1], [0, 50, 50])
        assert tr.event_counts[0, 1] == 50
        assert tr.n_events == 50

    def test_decay_mean(self):
        ens = run_ssa_ensemble(decay_network(), decay_state(200), 11, 200, 2.0, sample_dt=0.5)
        expected = 200 * np.exp(-ens.times)
        z = np.abs(ens.mean[1:, 0] - expected[1:]) / ens.sem[1:, 0]
        assert np.all(z < 4)

    def test_event_log(self):
        tr = run_ssa(decay_network(), decay_state(20), 4, 100.0, record_events=True)
        log = tr.event_log
        assert len(log["time"]) == 20
        assert np.all(np.diff(log["time"]) > 0)
        assert np.all(log["kind"] == 1)

    def test_cause_expectation_matches_counts(self):
        net = toy_network(kappa=5.0, n_channels=2)
        tr = run_ssa(net, SimState(0.0, np.zeros(6, dtype=np.int64)), 8, 2000.0)
        obs = tr.cause_counts
        exp = tr.expected_causes
        assert obs.sum() == pytest.approx(exp.sum(), rel=1e-9)
        assert np.all(np.abs(obs - exp) < 5 * np.sqrt(exp) + 1)


def master_equation_means(rates, boltz, kappa, nmax):
    """Stationary mean occupations of one channel with a reservoir, by direct solve.

    States are (excited, ground, boson) truncated at ``nmax`` quanta each.
    """
    g = np.indices((nmax,) * 3).reshape(3, -1).T
    e, a, p = g.T
    n_states = len(g)

    def flat(v):
        v = np.clip(v, 0, nmax - 1)
        return (v[:, 0] * nmax + v[:, 1]) * nmax + v[:, 2]

    src, dst, rate = [], [], []

    def add(mask, step, r):
        s = np.nonzero(mask)[0]
        src.append(s)
        dst.append(flat(g + step)[s])
        rate.append(np.broadcast_to(r, mask.shape)[s])

    add((a > 0) & (p > 0) & (e + 1 < nmax), np.array([1, -1, -1]), rates.beta_abs * a * p)
    add((e > 0) & (a + 1 < nmax) & (p + 1 < nmax), np.array([-1, 1, 1]),
        e * (rates.alpha + rates.beta_em * p + rates.gamma * a))
    for k in range(3):
        unit = np.eye(3, dtype=int)[k]
        add(g[:, k] + 1 < nmax, unit, kappa * boltz[k] * (g[:, k] + 1))
        add(g[:, k] > 0, -unit, kappa * g[:, k])
    s, d, r = (np.concatenate(x) for x in (src, dst, rate))
    q = sp.csr_matrix((r, (d, s)), shape=(n_states, n_states))
    q = (q - sp.diags(np.bincount(s, weights=r, minlength=n_states))).tolil()
    q[0] = np.ones(n_states)
    rhs = np.zeros(n_states)
    rhs[0] = 1.0
    pi = spl.spsolve(q.tocsc(), rhs)
    return pi @ g


def test_ssa_matches_master_equation_not_product_bose_einstein():
    # the rate law makes thermal occupations a mean-field fixed point only;
    # the exact stationary state of the jump process sits slightly off it
    net = toy_network(kappa=10.0)
    be = net.thermal_occupations()
    boltz = be / (1 + be)
    exact = master_equation_means(RateSet.uniform(1.0), boltz, 10.0, 16)
    assert exact[0] / be[0] - 1 < -0.005
    batches = run_ssa_batches(net, SimState(0.0, np.zeros(3, dtype=np.int64)), 11, 2e4, 20, burn_in=1e3)
    for i in (0, 1):
        assert abs(batches.mean[i] - exact[i]) < 4 * batches.sem[i]
    assert batches.mean[0] < be[0] - 3 * batches.sem[0]


class TestRunaway:
    def network(self, d_a=2, rates=RateSet.uniform(1.0)):
        triple = SpeciesTriple.build(Species("toy", 0.6 * KT, d_a), photon(), 1.0 * KT, 1)
        return runaway_network(triple, 0.4 * KT, 0.6 * KT / HBAR, rates)

    def test_single_quantum_split(self):
        # one excited quantum, no bosons, no re-absorption: P(seeded) = (1 + s) / (d_a + s)
        net = self.network(d_a=3, rates=RateSet(1.0, 0.0, 1.0, 1.0))
        s = 4
        rep = atom_laser_ensemble(net, "ground0", s, 50.0, 2, 3000, excited_population=1)
        p = (1 + s) / (3 + s)
        assert rep.predicted_fraction == pytest.approx(p)
        assert abs(rep.seed_fraction - p) < 4 * math.sqrt(p * (1 - p) / 3000)

    def test_strong_seed_dominates(self):
        net = self.network()
        traj, rep = scenario_atom_laser(net, "ground0", 10_000, 1e-3 * 50, 3, excited_population=100)
        assert rep.runaway_condition
        assert rep.seed_fraction > 0.9
        assert rep.uniform_baseline == 0.5

    def test_zero_seed_is_uniform(self):
        net = self.network()
        mean, sem = per_mode_fractions(net, "ground0", 0, 5.0, 7, 400, excited_population=10)
        assert np.all(np.abs(mean - 0.5) < 4 * sem)

    def test_unknown_seed_mode(self):
        net = self.network()
        with pytest.raises(DomainError):
            scenario_atom_laser(net, 1, 10, 1.0, 0)


def test_negative_occupation_guard():
    # an oversized step (the public API refuses it) overshoots an absorption-only channel
    from cavity_kinetics.kinetics import _kernels as K

    cidx = np.array([[0, 1, 2]], dtype=np.int64)
    crate = np.array([[0.0, 1.0, 0.0, 0.0]])
    none_i, none_f = np.zeros(0, dtype=np.int64), np.zeros(0)

    def step(dt):
        n = np.array([0.0, 1.0, 1.0])
        status, _, _ = K.rk4_run(n, dt, 1, 1, cidx, crate, none_i, none_f, none_f, np.zeros((0, 3)),
                                 1e-9, 1e-9, np.empty((2, 3)), np.zeros((4, 2), dtype=np.int64))
        return status

    assert step(0.5) == K.OK
    assert step(2.0) == K.NEGATIVE
    with pytest.raises(StabilityGuardError):
        run_ode(toy_network(rates=RateSet(0.0, 1.0, 0.0, 0.0)), SimState(0.0, np.array([0.0, 1.0, 1.0])), 2.0, 2.0)
