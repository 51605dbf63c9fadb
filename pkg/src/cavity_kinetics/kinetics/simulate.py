"""Deterministic (RK4) and stochastic (direct-method SSA) evolution of a network."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NegativeOccupationError, SizeGuardError, StabilityGuardError
from . import _kernels as K
from .network import Network, SimState, Trajectory, rate_scale

# dt * rate_scale must stay below this
STABILITY_LIMIT = 0.1
# clamp tolerance for negative ODE occupations
NEGATIVE_TOLERANCE = 1e-9
UNIFORM_BLOCK = 1 << 17
MAX_LOGGED_EVENTS = 10**7


def _sample_grid(t0, t_end, sample_dt):
    if sample_dt is None:
        return np.array([t0, t_end]) if t_end > t0 else np.array([t0])
    if not sample_dt > 0:
        raise DomainError("sample_dt must be > 0")
    n = int(np.floor((t_end - t0) / sample_dt * (1 + 1e-12))) + 1
    return t0 + sample_dt * np.arange(n)


def _conservation(network: Network, check: bool):
    if not check or network.reservoir_arrays()[0].size:
        return np.zeros((0, network.n_modes))
    return np.ascontiguousarray(network.conservation_matrix())


def run_ode(network: Network, state0: SimState, dt, t_end, sample_every=1,
            *, check_conservation=True, config_hash=None, max_clamp_log=10_000) -> Trajectory:
    """Fixed-step RK4 on the mean-field rate equations.

    Samples are taken every ``sample_every`` steps. Raises
    :class:`StabilityGuardError` when ``dt`` exceeds ``0.1 / rate_scale``.
    """
    if not dt > 0:
        raise DomainError("dt must be > 0")
    if t_end < state0.time:
        raise DomainError("t_end precedes the initial time")
    n = np.array(state0.occupations, dtype=np.float64)
    scale = rate_scale(network, n)
    if dt * scale > STABILITY_LIMIT:
        raise StabilityGuardError(
            f"dt = {float(dt):.6g} s exceeds {STABILITY_LIMIT} / rate scale = {float(STABILITY_LIMIT / scale):.6g} s"
        )
    n_steps = int(round((t_end - state0.time) / dt))
    if not np.isclose(n_steps * dt, t_end - state0.time, rtol=1e-9, atol=0):
        raise DomainError("t_end - t0 must be an integer multiple of dt")
    sample_every = max(int(sample_every), 1)
    n_samples = n_steps // sample_every + 1
    samples = np.empty((n_samples, network.n_modes))
    clamps = np.zeros((max_clamp_log, 2), dtype=np.int64)
    cidx, crate = network.channel_arrays()
    ridx, rkap, rbol = network.reservoir_arrays()
    conserv = _conservation(network, check_conservation)
    status, steps, n_clamp = K.rk4_run(
        n, float(dt), n_steps, sample_every, cidx, crate, ridx, rkap, rbol,
        conserv, 1e-9, NEGATIVE_TOLERANCE, samples, clamps,
    )
    t_fail = state0.time + steps * dt
    if status == K.NEGATIVE:
        raise NegativeOccupationError(f"occupation fell below -{NEGATIVE_TOLERANCE} at t = {t_fail!r} s")
    if status == K.CONSERVATION:
        raise StabilityGuardError(f"conserved quantities drifted at t = {t_fail!r} s")
    times = state0.time + dt * sample_every * np.arange(n_samples)
    clamp_events = [(state0.time + int(s) * dt, int(i)) for s, i in clamps[: min(n_clamp, max_clamp_log)]]
    return Trajectory(
        times=times, samples=samples, config_hash=config_hash, method="ode",
        final_time=float(state0.time + n_steps * dt), clamp_events=clamp_events,
        n_events=n_steps,
    )


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def run_ssa(network: Network, state0: SimState, seed, t_end, sample_times=None, *,
            sample_dt=None, record_events=False, max_logged_events=MAX_LOGGED_EVENTS,
            check_conservation=True, config_hash=None, max_events=None) -> Trajectory:
    """Exact stochastic simulation up to ``t_end``.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    Generator. Each step consumes two uniforms: one for the waiting time and
    one for the event, picked by a cumulative-sum scan in channel order
    followed by the reservoir modes.
    """
    occ = np.asarray(state0.occupations)
    if not np.all(occ == np.round(occ)):
        raise DomainError("SSA occupations must be integers")
    if t_end < state0.time:
        raise DomainError("t_end precedes the initial time")
    n = occ.astype(np.int64).copy()
    if sample_times is None:
        sample_times = _sample_grid(state0.time, t_end, sample_dt)
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.size and (np.any(np.diff(sample_times) <= 0) or sample_times[0] < state0.time):
        raise DomainError("sample times must be strictly increasing and >= t0")
    m = network.n_modes
    samples = np.zeros((sample_times.size, m), dtype=np.int64)
    integral = np.zeros(m)
    cidx, crate = network.channel_arrays()
    ridx, rkap, rbol = network.reservoir_arrays()
    counts = np.zeros((len(network.channels), 4), dtype=np.int64)
    rcounts = np.zeros((m, 2), dtype=np.int64)
    expected = np.zeros(3)
    conserv = _conservation(network, check_conservation)
    cap = max_logged_events if record_events else 0
    log_t = np.zeros(cap)
    log_kind = np.zeros(cap, dtype=np.int8)
    log_idx = np.zeros(cap, dtype=np.int64)

    rng = _as_rng(seed)
    t = float(state0.time)
    s_pos = log_pos = 0
    total_events = 0
    extinct = False
    while True:
        block = UNIFORM_BLOCK
        if max_events is not None:
            block = min(block, 2 * (max_events - total_events))
            if block <= 0:
                raise SizeGuardError(f"SSA exceeded {max_events} events before t_end")
        uniforms = rng.random(block)
        status, t, _, s_pos, log_pos, n_ev = K.ssa_run(
            n, t, float(t_end), uniforms, 0, cidx, crate, ridx, rkap, rbol,
            sample_times, s_pos, samples, integral, counts, rcounts, expected,
            conserv, log_t, log_kind, log_idx, log_pos,
        )
        total_events += n_ev
        if status == K.EXHAUSTED:
            continue
        if status == K.EXTINCT:
            extinct = True
            break
        if status == K.LOG_FULL:
            raise SizeGuardError(f"event log exceeded {max_logged_events} entries")
        if status == K.NEGATIVE:
            raise NegativeOccupationError(f"negative occupation at t = {t!r} s")
        if status == K.CONSERVATION:
            raise StabilityGuardError(f"conservation violated at t = {t!r} s")
        break
    span = float(t_end) - state0.time
    event_log = None
    if record_events:
        event_log = {"time": log_t[:log_pos].copy(), "kind": log_kind[:log_pos].copy(),
                     "index": log_idx[:log_pos].copy()}
    return Trajectory(
        times=sample_times, samples=samples, seed=_seed_repr(seed), config_hash=config_hash,
        method="ssa", extinct=extinct, final_time=float(t),
        event_counts=counts, reservoir_counts=rcounts,
        time_average=integral / span if span > 0 else n.astype(float),
        expected_causes=expected, n_events=total_events, event_log=event_log,
    )


def _seed_repr(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.entropy) if not seed.spawn_key else None
    return None


@dataclass
class EnsembleResult:
    """Per-sample mean and standard error over independent SSA runs."""

    times: np.ndarray
    mean: np.ndarray
    sem: np.ndarray
    n_trajectories: int
    seed: int | None
    event_counts: np.ndarray
    expected_causes: np.ndarray
    n_extinct: int

    @property
    def cause_counts(self):
        return self.event_counts[:, 1:4].sum(axis=0)


def run_ssa_ensemble(network: Network, state0: SimState, seed, n_trajectories, t_end,
                     sample_times=None, *, sample_dt=None, workers=1, **kwargs) -> EnsembleResult:
    """Independent runs seeded by ``SeedSequence(seed).spawn(n_trajectories)``.

    Results do not depend on ``workers``: each run owns its generator and the
    reduction is done in spawn order.
    """
    if n_trajectories < 1:
        raise DomainError("n_trajectories must be >= 1")
    if sample_times is None:
        sample_times = _sample_grid(state0.time, t_end, sample_dt)
    children = np.random.SeedSequence(seed).spawn(n_trajectories)

    def one(child):
        return run_ssa(network, state0, child, t_end, sample_times, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, children))
    else:
        runs = [one(c) for c in children]
    stack = np.stack([r.samples for r in runs]).astype(np.float64)
    mean = stack.mean(axis=0)
    sem = stack.std(axis=0, ddof=1) / np.sqrt(n_trajectories) if n_trajectories > 1 else np.zeros_like(mean)
    return EnsembleResult(
        times=np.asarray(sample_times, dtype=float), mean=mean, sem=sem,
        n_trajectories=n_trajectories, seed=seed if isinstance(seed, int) else None,
        event_counts=sum(r.event_counts for r in runs),
        expected_causes=sum(r.expected_causes for r in runs),
        n_extinct=sum(r.extinct for r in runs),
    )


@dataclass
class BatchAverage:
    """Long-run time averages with batch-means standard errors."""

    mean: np.ndarray
    sem: np.ndarray
    batch_means: np.ndarray
    n_events: int
    event_counts: np.ndarray
    reservoir_counts: np.ndarray
    expected_causes: np.ndarray
    final_state: SimState

    @property
    def cause_counts(self):
        return self.event_counts[:, 1:4].sum(axis=0)


def run_ssa_batches(network: Network, state0: SimState, seed, batch_time, n_batches,
                    burn_in=0.0) -> BatchAverage:
    """One long SSA run cut into ``n_batches`` consecutive windows.

    The run continues across batches; each window draws from its own child of
    ``SeedSequence(seed)``. Statistics after ``burn_in`` only.
    """
    if n_batches < 2:
        raise DomainError("n_batches must be >= 2")
    children = np.random.SeedSequence(seed).spawn(n_batches + 1)
    state = SimState(0.0, np.asarray(state0.occupations, dtype=np.int64))
    if burn_in > 0:
        warm = run_ssa(network, state, children[0], burn_in, check_conservation=False)
        state = SimState(0.0, warm.samples[-1])
    means = []
    counts = rcounts = expected = 0
    n_events = 0
    for child in children[1:]:
        tr = run_ssa(network, state, child, batch_time, check_conservation=False)
        state = SimState(0.0, tr.samples[-1])
        means.append(tr.time_average)
        counts = counts + tr.event_counts
        rcounts = rcounts + tr.reservoir_counts
        expected = expected + tr.expected_causes
        n_events += tr.n_events
    means = np.array(means)
    return BatchAverage(
        mean=means.mean(axis=0), sem=means.std(axis=0, ddof=1) / np.sqrt(n_batches),
        batch_means=means, n_events=n_events, event_counts=counts, reservoir_counts=rcounts,
        expected_causes=expected, final_state=state,
    )
