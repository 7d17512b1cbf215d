"""Exact stochastic simulation: free/restricted paths, the two-phase
coupling, and the martingale / exit-time deviation experiments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import engine, rng as _rng
from .dist import LatticeDistribution
from .dynamics import integrate_ode
from .errors import DomainError, SimulationError
from .model import eval_rates

CONTRACTIVE = "contractive"
INDEPENDENT = "independent"
COALESCED = "coalesced"

_PHASE_CODE = {CONTRACTIVE: 0, INDEPENDENT: 1, COALESCED: 2}


@dataclass(frozen=True)
class ChainState:
    X: tuple
    t: float


@dataclass(frozen=True)
class SimOptions:
    """Simulation options; immutable and shareable across workers.

    ``restriction`` is an optional (certificate, delta) pair switching off
    every jump that would leave B_M(N c, N delta); delta must not exceed the
    certified radius delta0.
    """

    N: int
    seed: int
    horizon: float
    restriction: tuple = None  # (StabilityCertificate, delta)
    record: tuple = ()

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if not (self.horizon > 0):
            raise ValueError("horizon must be positive")
        rec = tuple(float(t) for t in self.record)
        if any(b < a for a, b in zip(rec, rec[1:])):
            raise ValueError("record times must be sorted")
        if rec and (rec[0] < 0 or rec[-1] > self.horizon):
            raise ValueError("record times must lie within [0, horizon]")
        object.__setattr__(self, "record", rec)
        if self.restriction is not None:
            cert, delta = self.restriction
            if not (0 < delta <= cert.delta0):
                raise ValueError(
                    f"restriction delta {delta} must lie in (0, delta0={cert.delta0:.6g}]"
                )

    def engine_restriction(self):
        if self.restriction is None:
            return None
        cert, delta = self.restriction
        return engine.Restriction(M=cert.M, center=self.N * cert.c, radius=self.N * delta)


@dataclass(frozen=True)
class Trajectory:
    """One SSA path: every event plus the states at the requested record times."""

    times: np.ndarray  # event times, starting at 0
    states: np.ndarray  # (n_events+1, d) int64
    record_times: tuple
    recorded: np.ndarray  # (n_record, d) int64
    absorbed: bool

    @property
    def final(self):
        return ChainState(tuple(int(v) for v in self.states[-1]), float(self.times[-1]))


def _check_start(m, opts, X0):
    X0 = np.asarray(X0, dtype=np.int64)
    if X0.shape != (m.d,):
        raise ValueError(f"X0 has shape {X0.shape}, expected ({m.d},)")
    if not m.domain.contains(X0 / opts.N):
        raise DomainError(f"start {X0.tolist()} outside domain at N={opts.N}")
    restr = opts.engine_restriction()
    if restr is not None:
        w = X0 - restr.center
        if w @ restr.M @ w > restr.radius**2:
            raise DomainError(f"start {X0.tolist()} outside the restriction ball")
    return X0


def simulate_path(m, opts, X0, replicate=0):
    """Exact Gillespie path, deterministic given (seed, replicate, X0, opts).

    Bit-identical to replicate ``replicate`` of the batched engine: both
    consume two uniforms per event (waiting time, jump pick) from the stream
    (seed, replicate, PATH).  A state with zero total rate is held to the
    horizon and flagged absorbed.
    """
    X0 = _check_start(m, opts, X0)
    N = opts.N
    rates_fn = engine.compile_rates(m)
    jumps = m.jump_array
    restr = opts.engine_restriction()
    ub = _rng.UniformBlocks(opts.seed, replicate, _rng.PATH)

    rec_times = opts.record
    n_rec = len(rec_times)
    recorded = np.zeros((n_rec, m.d), dtype=np.int64)
    rec_idx = 0

    X = X0.copy()
    t = 0.0
    times = [0.0]
    states = [X.copy()]
    absorbed = False
    while t < opts.horizon:
        y = X.astype(float) / N
        r = rates_fn(y)
        engine._validate_rates(r[None, :], X[None, :], N)
        if restr is not None:
            mask = engine._restriction_mask(X[None, :], jumps, restr)[0]
            r = np.where(mask, r, 0.0)
        tot = r.sum()
        if tot <= 0.0:
            absorbed = True
            break
        u1 = ub.next()
        u2 = ub.next()
        dt = -np.log(u1) / (N * tot)
        t_next = t + dt
        while rec_idx < n_rec and rec_times[rec_idx] < t_next:
            recorded[rec_idx] = X
            rec_idx += 1
        if t_next >= opts.horizon:
            t = opts.horizon
            break
        cum = np.cumsum(r)
        j = min(int((cum < u2 * tot).sum()), len(jumps) - 1)
        X = X + jumps[j]
        t = t_next
        times.append(t)
        states.append(X.copy())
    while rec_idx < n_rec:
        recorded[rec_idx] = X
        rec_idx += 1
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        record_times=rec_times,
        recorded=recorded,
        absorbed=absorbed,
    )


def sample_states(m, opts, X0, times, reps, workers=1):
    """States of ``reps`` independent replicates at each time, (reps, n_t, d).

    Replicate r uses the stream (seed, r, PATH); outputs are independent of
    worker count and chunking.
    """
    X0 = _check_start(m, opts, X0)
    times = tuple(float(t) for t in times)
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted")
    if times and times[-1] > opts.horizon:
        raise ValueError("times must not exceed the horizon")
    out = engine.run_paths(
        m,
        opts.N,
        X0,
        opts.seed,
        reps,
        workers=workers,
        mode=engine.RECORDS,
        record_times=times,
        restriction=opts.engine_restriction(),
    )
    return out["records"]


def sample_at(m, opts, X0, t, reps, workers=1):
    """Empirical law of X(t) from ``reps`` replicates."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rec = sample_states(m, opts, X0, (t,), reps, workers=workers)
    return LatticeDistribution.from_points(rec[:, 0, :])


# ---------------------------------------------------------------------------
# Two-phase Markovian coupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledTrace:
    """H(t) = ||U(t)-V(t)||_M along one coupled pair, with phase markers."""

    record_times: tuple
    H: np.ndarray
    phases: np.ndarray  # int8 codes 0/1/2 at record times
    coalesce_time: float  # inf when the pair never coalesced
    K3: float
    nuK3: float
    U: np.ndarray = None  # optional (n_rec, d) states
    V: np.ndarray = None


def estimate_K2(m, cert, N, samples=4000, seed=0, cap_factor=16.0):
    """Empirical contractive-phase threshold.

    Scans lattice pairs inside B_M(N c, N delta0) and returns the smallest H
    above which the exact coupling generator satisfies A H <= -rho H on all
    samples; falls back to cap_factor * JstarM when no threshold works.
    """
    rng = np.random.default_rng(seed)
    d = m.d
    L = np.linalg.cholesky(cert.M)
    Linv_T = np.linalg.inv(L).T
    Nc = N * cert.c
    rad = N * cert.delta0
    jumps = m.jump_array
    rows = []
    for _ in range(samples):
        pts = []
        for _k in range(2):
            r = cert.delta0 * math.sqrt(rng.random())
            u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            x = cert.c + r * (Linv_T @ u)
            X = np.round(N * x).astype(np.int64)
            if cert.m_norm(X - Nc) > rad or not m.domain.contains(X / N):
                pts = None
                break
            pts.append(X)
        if pts is None:
            continue
        U, V = pts
        H = cert.m_norm(U - V)
        if H == 0:
            continue
        ru = eval_rates(m, U / N)
        rv = eval_rates(m, V / N)
        w = (U - V).astype(float)
        AH = 0.0
        for J, a, b in zip(jumps, ru, rv):
            if a >= b:
                AH += (cert.m_norm(w + J) - H) * N * (a - b)
            else:
                AH += (cert.m_norm(w - J) - H) * N * (b - a)
        rows.append((H, AH + cert.rho * H))
    rows.sort()
    cap = cap_factor * cert.JstarM
    if not rows:
        return cap
    slack = np.array([s for _, s in rows])
    hs = np.array([h for h, _ in rows])
    bad = slack > 0
    if not bad.any():
        return float(hs[0])
    last_bad = int(np.flatnonzero(bad)[-1])
    if last_bad + 1 >= len(rows):
        return cap
    return float(min(hs[last_bad + 1], cap))


def _scalar_rates_fn(model):
    """Plain-Python tuple-returning rate function (fast scalar path)."""
    from . import expr as ex

    parts = []
    for node in model.rate_exprs:
        parts.append(ex.codegen(node, model.params))
    args = ", ".join(f"y{i}" for i in range(model.d))
    src = f"def _r({args}):\n    return ({', '.join(parts)}{',' if len(parts) == 1 else ''})"
    ns = {}
    exec(src, ns)  # noqa: S102 - source generated from closed AST
    return ns["_r"]


def simulate_coupled(
    m,
    cert,
    opts,
    U0,
    V0,
    k2=None,
    nu=None,
    replicate=0,
    trace_states=False,
    run_past_coalescence=False,
):
    """One trajectory of the two-phase coupling of a pair of copies.

    Contractive phase: each jump fires jointly at rate N min(r_J(u), r_J(v))
    and unilaterally (larger-rate chain only) at rate N |r_J(u) - r_J(v)|,
    via max-rate thinning of a single clock.  The pair enters the
    independent phase when H <= K3 = max(K2, 8 JstarM); independent copies
    run until they are equal (coalesced, identical transitions thereafter)
    or H >= nu K3 (back to contractive).  With the partner marginalized out,
    each leg is a copy of the free chain.
    """
    from .lattice import classify_jumps

    N = opts.N
    U = np.asarray(U0, dtype=np.int64).copy()
    V = np.asarray(V0, dtype=np.int64).copy()
    for name, Z in (("U0", U), ("V0", V)):
        if not m.domain.contains(Z / N):
            raise DomainError(f"{name} outside domain")
    restr = opts.engine_restriction()
    if restr is not None:
        for name, Z in (("U0", U), ("V0", V)):
            w = Z - restr.center
            if w @ restr.M @ w > restr.radius**2:
                raise DomainError(f"{name} outside the restriction ball")

    if k2 is None:
        k2 = estimate_K2(m, cert, N, seed=opts.seed)
    if nu is None:
        analysis = classify_jumps(m.jumps, norm_matrix=cert.M)
        nu = max(analysis.nu, 1.0 + 1e-9)
    K3 = max(k2, 8.0 * cert.JstarM)
    nuK3 = nu * K3

    rates = _scalar_rates_fn(m)
    jumps = [tuple(int(v) for v in J) for J in m.jumps]
    njump = len(jumps)
    M = cert.M
    MJ = [tuple(float(x) for x in (M @ np.array(J, dtype=float))) for J in jumps]
    JMJ = [float(np.array(J) @ M @ np.array(J)) for J in jumps]
    d = m.d

    def ball_ok(Z, J):
        if restr is None:
            return True
        w = Z + np.array(J) - restr.center
        return w @ restr.M @ w <= restr.radius**2

    def Hnorm(w):
        return math.sqrt(max(0.0, float(w @ M @ w)))

    ub = _rng.UniformBlocks(opts.seed, replicate, _rng.COUPLED)
    rec_times = opts.record
    n_rec = len(rec_times)
    H_rec = np.zeros(n_rec)
    phase_rec = np.zeros(n_rec, dtype=np.int8)
    U_rec = np.zeros((n_rec, d), dtype=np.int64) if trace_states else None
    V_rec = np.zeros((n_rec, d), dtype=np.int64) if trace_states else None

    w = (U - V).astype(float)
    H = Hnorm(w)
    phase = COALESCED if H == 0.0 else (INDEPENDENT if H <= K3 else CONTRACTIVE)
    coalesce_time = 0.0 if phase == COALESCED else math.inf
    t = 0.0
    rec_idx = 0

    def flush_records(t_next):
        nonlocal rec_idx
        while rec_idx < n_rec and rec_times[rec_idx] < t_next:
            H_rec[rec_idx] = H
            phase_rec[rec_idx] = _PHASE_CODE[phase]
            if trace_states:
                U_rec[rec_idx] = U
                V_rec[rec_idx] = V
            rec_idx += 1

    while t < opts.horizon:
        if phase == COALESCED and not (trace_states or run_past_coalescence):
            flush_records(math.inf)
            break
        yu = tuple(U[i] / N for i in range(d))
        yv = tuple(V[i] / N for i in range(d))
        ru = rates(*yu)
        rv = rates(*yv)
        if restr is not None:
            ru = tuple(r if ball_ok(U, J) else 0.0 for r, J in zip(ru, jumps))
            rv = tuple(r if ball_ok(V, J) else 0.0 for r, J in zip(rv, jumps))
        for name, rr, Z in (("U", ru, U), ("V", rv, V)):
            for v in rr:
                if not (v >= 0.0) or math.isinf(v):
                    raise SimulationError(f"invalid rate {v} for chain {name} at {Z.tolist()}")

        if phase == COALESCED:
            tot = sum(ru)
            if tot <= 0.0:
                break
            u1, u2 = ub.next(), ub.next()
            dt = -math.log(u1) / (N * tot)
            t_next = t + dt
            flush_records(t_next)
            if t_next >= opts.horizon:
                t = opts.horizon
                break
            acc = u2 * tot
            j = 0
            run = ru[0]
            while run < acc and j < njump - 1:
                j += 1
                run += ru[j]
            U = U + np.array(jumps[j])
            V = U.copy()
            t = t_next
            continue

        if phase == CONTRACTIVE:
            mx = tuple(a if a >= b else b for a, b in zip(ru, rv))
            tot = sum(mx)
            if tot <= 0.0:
                flush_records(math.inf)
                break
            u1, u2, u3 = ub.next(), ub.next(), ub.next()
            dt = -math.log(u1) / (N * tot)
            t_next = t + dt
            flush_records(t_next)
            if t_next >= opts.horizon:
                t = opts.horizon
                break
            acc = u2 * tot
            j = 0
            run = mx[0]
            while run < acc and j < njump - 1:
                j += 1
                run += mx[j]
            a, b = ru[j], rv[j]
            lo = a if a < b else b
            if u3 * mx[j] < lo:
                U = U + np.array(jumps[j])
                V = V + np.array(jumps[j])
            elif a >= b:
                U = U + np.array(jumps[j])
                w = (U - V).astype(float)
                H = Hnorm(w)
            else:
                V = V + np.array(jumps[j])
                w = (U - V).astype(float)
                H = Hnorm(w)
            t = t_next
            if H <= K3:
                phase = COALESCED if H == 0.0 else INDEPENDENT
                if phase == COALESCED and not math.isfinite(coalesce_time):
                    coalesce_time = t
            continue

        # independent phase
        su, sv = sum(ru), sum(rv)
        tot = su + sv
        if tot <= 0.0:
            flush_records(math.inf)
            break
        u1, u2 = ub.next(), ub.next()
        dt = -math.log(u1) / (N * tot)
        t_next = t + dt
        flush_records(t_next)
        if t_next >= opts.horizon:
            t = opts.horizon
            break
        acc = u2 * tot
        if acc < su:
            j = 0
            run = ru[0]
            while run < acc and j < njump - 1:
                j += 1
                run += ru[j]
            U = U + np.array(jumps[j])
        else:
            acc -= su
            j = 0
            run = rv[0]
            while run < acc and j < njump - 1:
                j += 1
                run += rv[j]
            V = V + np.array(jumps[j])
        w = (U - V).astype(float)
        H = Hnorm(w)
        t = t_next
        if H == 0.0:
            phase = COALESCED
            if not math.isfinite(coalesce_time):
                coalesce_time = t
        elif H >= nuK3:
            phase = CONTRACTIVE

    flush_records(math.inf)
    return CoupledTrace(
        record_times=rec_times,
        H=H_rec,
        phases=phase_rec,
        coalesce_time=coalesce_time,
        K3=K3,
        nuK3=nuK3,
        U=U_rec,
        V=V_rec,
    )


def _coupled_chunk(args):
    (m, cert, opts, U0, V0, k2, nu, lo, hi, trace_states) = args
    H = np.zeros((hi - lo, len(opts.record)))
    coal = np.zeros(hi - lo)
    for i in range(lo, hi):
        tr = simulate_coupled(
            m, cert, opts, U0, V0, k2=k2, nu=nu, replicate=i, trace_states=trace_states
        )
        H[i - lo] = tr.H
        coal[i - lo] = tr.coalesce_time
    return H, coal


def coupled_ensemble(m, cert, opts, U0, V0, reps, k2=None, nu=None, workers=1, chunk=64):
    """H(t) samples and coalescence times over ``reps`` coupled pairs."""
    from .lattice import classify_jumps

    if k2 is None:
        k2 = estimate_K2(m, cert, opts.N, seed=opts.seed)
    if nu is None:
        nu = max(classify_jumps(m.jumps, norm_matrix=cert.M).nu, 1.0 + 1e-9)
    bounds = [(lo, min(lo + chunk, reps)) for lo in range(0, reps, chunk)]
    tasks = [(m, cert, opts, U0, V0, k2, nu, lo, hi, False) for lo, hi in bounds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_coupled_chunk, tasks))
    else:
        parts = [_coupled_chunk(t) for t in tasks]
    H = np.concatenate([p[0] for p in parts], axis=0)
    coal = np.concatenate([p[1] for p in parts], axis=0)
    return H, coal


# ---------------------------------------------------------------------------
# Martingale deviation bound
# ---------------------------------------------------------------------------


def zeta_bound(z, N, T, d, Rstar, Jstar):
    """Closed-form tail bound for sup_t |m(t)|:
    2 d exp(-(N z / 2 d J*) min(1, z / (d e T R* J*)))."""
    z = np.asarray(z, dtype=float)
    lin = N * z / (2.0 * d * Jstar)
    denom = d * math.e * T * Rstar * Jstar
    quad = z / denom if denom > 0 else np.full_like(z, np.inf)
    return 2.0 * d * np.exp(-lin * np.minimum(1.0, quad))


def _sup_total_rate(m, box, mesh=9):
    """Sampled sup of sum_J r_J over an axis box (exact at the corners for
    coordinate-monotone rates)."""
    lo, hi = box
    axes = [np.linspace(lo[i], hi[i], mesh) for i in range(m.d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m.d)
    rates_fn = engine.compile_rates(m)
    return float(rates_fn(grid).sum(axis=1).max())


def _default_box(m, N, X0, T, margin=0.25):
    """Compact box K around the drift path from X0/N, clipped to the domain."""
    y0 = np.asarray(X0, dtype=float) / N
    flow = integrate_ode(m, y0, T, h=min(1e-2, T / 10) if T > 0 else 1e-2)
    lo = flow.states.min(axis=0)
    hi = flow.states.max(axis=0)
    span = np.maximum(hi - lo, 1.0)
    lo = np.maximum(lo - margin * span, m.domain.lower)
    hi = np.minimum(hi + margin * span, m.domain.upper)
    return lo, hi


@dataclass(frozen=True)
class MartingaleReport:
    N: int
    T: int
    reps: int
    z_grid: np.ndarray
    tail: np.ndarray  # empirical P[sup |m| >= z]
    tail_lcb99: np.ndarray  # one-sided lower 99% confidence bound
    bound: np.ndarray  # zeta_{N,T,K}(z)
    violations: int  # grid points where lcb99 exceeds the bound
    mean_final: np.ndarray
    se_final: np.ndarray
    Rstar: float
    Jstar: float
    exited: int


def martingale_deviation(m, opts, X0, T, reps, z_grid, box=None, workers=1):
    """Empirical tail of sup_{t <= T ^ tau_K} |m(t)| against the closed-form
    bound, plus the componentwise mean of m(T) (zero for a martingale)."""
    X0 = _check_start(m, opts, X0)
    if T > opts.horizon:
        raise ValueError("T must not exceed the horizon")
    if box is None:
        box = _default_box(m, opts.N, X0, T)
    Rstar = _sup_total_rate(m, box)
    Jstar = float(np.max(np.linalg.norm(m.jump_array.astype(float), axis=1)))
    out = engine.run_paths(
        m,
        opts.N,
        X0,
        opts.seed,
        reps,
        workers=workers,
        mode=engine.MARTINGALE,
        horizon=T,
        stop_box=box,
    )
    sup_m = out["sup_m"]
    final = out["final_m"]
    z_grid = np.asarray(z_grid, dtype=float)
    counts = (sup_m[None, :] >= z_grid[:, None]).sum(axis=1)
    tail = counts / reps
    from scipy.stats import beta

    lcb = np.where(counts > 0, beta.ppf(0.01, np.maximum(counts, 1), reps - np.maximum(counts, 1) + 1), 0.0)
    bound = zeta_bound(z_grid, opts.N, T, m.d, Rstar, Jstar)
    violations = int((lcb > bound).sum())
    return MartingaleReport(
        N=opts.N,
        T=T,
        reps=reps,
        z_grid=z_grid,
        tail=tail,
        tail_lcb99=lcb,
        bound=bound,
        violations=violations,
        mean_final=final.mean(axis=0),
        se_final=final.std(axis=0, ddof=1) / math.sqrt(reps),
        Rstar=Rstar,
        Jstar=Jstar,
        exited=int(out["exited"].sum()),
    )


# ---------------------------------------------------------------------------
# Exit probability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExitReport:
    N: int
    delta_prime: float
    delta: float
    T: float
    reps: int
    estimate: float
    ci95: tuple
    bound: float
    eps_prime: float
    certified: bool  # delta within the certified radius


def _ball_sup_constants(m, cert, samples=512, seed=1):
    """Sampled sups of sum_J r_J and |DF| over B_M(c, delta0)."""
    from .dynamics import _sample_ball
    from .model import eval_jacobian

    rng = np.random.default_rng(seed)
    pts = _sample_ball(cert.c, cert.M, cert.delta0, samples, rng)
    rates_fn = engine.compile_rates(m)
    keep = np.array([m.domain.contains(p) for p in pts])
    pts = pts[keep]
    Rstar = float(rates_fn(pts).sum(axis=1).max())
    L = max(float(np.linalg.norm(eval_jacobian(m, p, check_domain=False), 2)) for p in pts[:128])
    return Rstar, L


def exit_probability(m, cert, N, delta_prime, delta, T, reps, seed, workers=1):
    """Empirical P[tau_1(delta) <= T] from lattice starts near the sphere of
    M-radius N delta_prime, reported alongside ceil(rho T) z_N(eps')."""
    if not (0 < delta_prime < delta):
        raise ValueError("need 0 < delta_prime < delta")
    d = m.d
    L = np.linalg.cholesky(cert.M)
    Linv_T = np.linalg.inv(L).T
    Nc = N * cert.c
    rad_p = N * delta_prime
    rng = _rng.substream(seed, 0, _rng.EXIT_START)
    starts = np.zeros((reps, d), dtype=np.int64)
    for i in range(reps):
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        x = Nc + rad_p * (Linv_T @ u)
        X = np.round(x).astype(np.int64)
        scale = 1.0
        while cert.m_norm(X - Nc) > rad_p and scale > 0.0:
            scale -= 0.05
            X = np.round(Nc + scale * rad_p * (Linv_T @ u)).astype(np.int64)
        starts[i] = X
    ball = engine.Restriction(M=cert.M, center=Nc, radius=N * delta)
    if T > 0:
        out = engine.run_paths(
            m,
            N,
            starts,
            seed,
            reps,
            workers=workers,
            mode=engine.EXIT,
            horizon=T,
            exit_ball=ball,
        )
        hits = (out["exited"]) & (out["exit_time"] <= T)
        p = float(hits.mean())
    else:
        p = 0.0
    se = math.sqrt(max(p * (1 - p), 1e-12) / reps)
    ci = (max(0.0, p - 1.96 * se), min(1.0, p + 1.96 * se))

    # bound from the exit proposition, with the stated eps' case split
    c1 = cert.c1
    if delta_prime >= delta / (3.0 - 2.0 * math.exp(-1)):
        eps_prime = (delta - delta_prime) / (2.0 * c1)
    else:
        eps_prime = delta * (1.0 - math.exp(-1)) / ((3.0 - 2.0 * math.exp(-1)) * c1)
    Rstar, Lip = _ball_sup_constants(m, cert)
    Jstar = float(np.max(np.linalg.norm(m.jump_array.astype(float), axis=1)))
    z_hat = float(
        zeta_bound(
            eps_prime * math.exp(-Lip / cert.rho), N, 1.0 / cert.rho, d, Rstar, Jstar
        )
    )
    bound = math.ceil(cert.rho * T) * z_hat if T > 0 else 0.0
    return ExitReport(
        N=N,
        delta_prime=delta_prime,
        delta=delta,
        T=T,
        reps=reps,
        estimate=p,
        ci95=ci,
        bound=min(bound, 1.0) if T > 0 else 0.0,
        eps_prime=eps_prime,
        certified=delta <= cert.delta0,
    )
