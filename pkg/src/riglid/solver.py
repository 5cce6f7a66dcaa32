"""Time integration of the full water-waves system in the rigid-lid scaling.

The rescaled system

    eps d_t zeta = G[eps zeta] psi / mu
    eps d_t psi  = -zeta - (eps/2) |psi_x|^2
                   + (eps/mu) (G psi + eps mu zeta_x psi_x)^2 / (2 (1 + eps^2 mu zeta_x^2))

is stiff through the 1/eps linear part.  Stepping works in the integrating
factor frame v(t) = e^{(t/eps) L} u(t), whose tendency is the nonlinear term
alone, so the oscillation is handled exactly by the linear propagator and the
classical RK4 error constant sees only the O(1) nonlinear envelope.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConfigError, ContextError, SolverError
from .linear import propagate_linear, propagator_entries
from .reports import DecayReport
from .spectral import (
    PhysicalParams,
    SurfaceState,
    apply_frac_p,
    apply_g0,
    dx,
    forward,
    hs_norm,
    inverse,
    l2_inner,
    l2_norm,
    make_grid,
)
from . import dn


@dataclass
class SolverConfig:
    dt: float = None
    T: float = 1.0
    dn_mode: str = "elliptic"
    n_z: int = 32
    dealias: bool = True
    monitor_every: int = 10
    tol: float = 1e-12
    energy_order: int = 3
    max_halvings: int = 6
    check_rayleigh: bool = True

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.dt is None:
            self.dt = 1e-3 * self.T
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.monitor_every < 1:
            raise ConfigError("monitor_every must be >= 1")
        if self.dn_mode not in ("elliptic", "expansion1"):
            raise ConfigError(f"dn_mode must be elliptic or expansion1, got {self.dn_mode}")


@dataclass
class Trajectory:
    grid: object
    params: PhysicalParams
    config: SolverConfig
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    hamiltonian_series: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""
    min_rayleigh_taylor: float = float("nan")

    def append(self, t, state, h_value):
        self.times.append(float(t))
        self.states.append(state)
        self.hamiltonian_series.append(float(h_value))

    def __len__(self):
        return len(self.times)


class DNSession:
    """DN applications with warm-started elliptic solves along a trajectory.

    The elliptic path works with the deviation G psi - G0 psi, assembled so
    that every term carries an explicit factor of eps: the 1/eps in the
    nonlinear source then never amplifies solver noise, and the gauge
    constant of psi (which drifts like t/eps) is stripped exactly before the
    solve (constants are harmonic with zero flux).
    """

    def __init__(self, grid, params, config):
        self.grid = grid
        self.params = params
        self.config = config
        self.chi = None
        if config.dn_mode == "elliptic":
            self.solver = dn.get_solver(grid, params.mu, config.n_z,
                                        config.dealias)

    def g_deviation(self, state):
        """G[eps zeta] psi - G0 psi, with zero mean enforced exactly."""
        if self.config.dn_mode == "expansion1":
            devi = self.params.epsilon * dn.g1_expansion(
                state.zeta, state.psi, self.grid, self.params)
            return devi - np.mean(devi)
        state.check_height(self.params)
        psi0 = state.psi - np.mean(state.psi)
        phi_flat, chi, _, _ = self.solver.solve_deviation(
            state.zeta, psi0, self.params.epsilon, tol=self.config.tol,
            initial=self.chi)
        self.chi = chi
        devi = self.solver.trace_deviation(phi_flat, chi, state.zeta,
                                           self.params.epsilon)
        # flat-trace closure: the discrete flat trace differs from the G0
        # multiplier by z-truncation; the deviation already subtracts the
        # discrete flat trace, so only the conormal-flux mean is removed.
        return devi - np.mean(devi)

    def g_psi(self, state):
        """Full G[eps zeta] psi = G0 psi + deviation."""
        return apply_g0(state.psi, self.grid, self.params) + self.g_deviation(state)


def nonlinear_term(state, params, g_dev, grid):
    """The nonlinear source F = (f, g) of the integrating-factor frame.

    g_dev is the DN deviation G psi - G0 psi; both components of F are O(1)
    as eps -> 0.
    """
    eps, mu = params.epsilon, params.mu
    f = g_dev / (eps * mu)
    g_psi = apply_g0(state.psi, grid, params) + g_dev
    zeta_x = dx(state.zeta, grid)
    psi_x = dx(state.psi, grid)
    num = g_psi + eps * mu * zeta_x * psi_x
    g = -0.5 * psi_x ** 2 + num ** 2 / (2.0 * mu * (1.0 + eps ** 2 * mu * zeta_x ** 2))
    return f, g


def rhs(state, params, config, grid=None, session=None):
    """Full tendency (d_t zeta, d_t psi) of the rescaled system."""
    grid = grid or state.grid
    session = session or DNSession(grid, params, config)
    state.check_height(params)
    eps, mu = params.epsilon, params.mu
    g_dev = session.g_deviation(state)
    g_psi = apply_g0(state.psi, grid, params) + g_dev
    zeta_x = dx(state.zeta, grid)
    psi_x = dx(state.psi, grid)
    num = g_psi + eps * mu * zeta_x * psi_x
    d_zeta = g_psi / (eps * mu)
    d_psi = (
        -state.zeta
        - (eps / 2.0) * psi_x ** 2
        + (eps / mu) * num ** 2 / (2.0 * (1.0 + eps ** 2 * mu * zeta_x ** 2))
    ) / eps
    return d_zeta, d_psi


class Stepper:
    """Integrating-factor RK4 with cached half/full-step propagator entries."""

    def __init__(self, grid, params, config):
        self.grid = grid
        self.params = params
        self.config = config
        self.session = DNSession(grid, params, config)
        self._cache_dt = None
        self._ent = {}

    def _entries(self, dt):
        if dt != self._cache_dt:
            tau_h = 0.5 * dt / self.params.epsilon
            tau_f = dt / self.params.epsilon
            self._ent = {
                0.5: propagator_entries(self.grid, self.params.mu, tau_h),
                1.0: propagator_entries(self.grid, self.params.mu, tau_f),
            }
            self._cache_dt = dt
        return self._ent

    def _propagate_pair(self, a, b, entries):
        c, w_sin, sin_over_w = entries
        ah = forward(a, self.grid)
        bh = forward(b, self.grid)
        return (
            inverse(c * ah + w_sin * bh, self.grid),
            inverse(-sin_over_w * ah + c * bh, self.grid),
        )

    def _force(self, zeta, psi):
        state = SurfaceState(self.grid, zeta, psi)
        state.check_height(self.params)
        g_dev = self.session.g_deviation(state)
        return nonlinear_term(state, self.params, g_dev, self.grid)

    def step(self, state, dt):
        """One integrating-factor RK4 step of size dt."""
        ent = self._entries(dt)
        e_half, e_full = ent[0.5], ent[1.0]
        z0, p0 = state.zeta, state.psi

        f1, g1 = self._force(z0, p0)
        za, pa = self._propagate_pair(z0 + 0.5 * dt * f1, p0 + 0.5 * dt * g1, e_half)
        f2, g2 = self._force(za, pa)
        zh, ph = self._propagate_pair(z0, p0, e_half)
        f3, g3 = self._force(zh + 0.5 * dt * f2, ph + 0.5 * dt * g2)
        f3h, g3h = f3, g3
        zf, pf = self._propagate_pair(z0, p0, e_full)
        k3z, k3p = self._propagate_pair(f3h, g3h, e_half)
        f4, g4 = self._force(zf + dt * k3z, pf + dt * k3p)

        k1z, k1p = self._propagate_pair(f1, g1, e_full)
        k2z, k2p = self._propagate_pair(f2 + f3, g2 + g3, e_half)
        z_new = zf + dt / 6.0 * (k1z + 2.0 * k2z + f4)
        p_new = pf + dt / 6.0 * (k1p + 2.0 * k2p + g4)
        return SurfaceState(self.grid, z_new, p_new)


def step(state, dt, params, config):
    """Single step entry point (fresh stepper; simulate() reuses one)."""
    return Stepper(state.grid, params, config).step(state, dt)


def hamiltonian(state, params, config=None, g_psi=None):
    """The energy functional as printed, (G psi, psi)/(2 mu) + (zeta, zeta)_2.

    Note the zeta term is not halved here; the conserved variant (with the
    1/2, matching the canonical structure and the linearized energy) is
    :func:`conserved_energy`.
    """
    grid = state.grid
    config = config or SolverConfig()
    if g_psi is None:
        g_psi = dn.dn_apply(state.zeta, state.psi, params, grid,
                            mode="elliptic", n_z=config.n_z)
    return 0.5 / params.mu * l2_inner(g_psi, state.psi, grid) + l2_norm(
        state.zeta, grid) ** 2


def conserved_energy(state, params, config=None, g_psi=None):
    """Invariant of the flow: (G psi, psi)/(2 mu) + |zeta|_2^2 / 2."""
    grid = state.grid
    config = config or SolverConfig()
    if g_psi is None:
        g_psi = dn.dn_apply(state.zeta, state.psi, params, grid,
                            mode="elliptic", n_z=config.n_z)
    return 0.5 / params.mu * l2_inner(g_psi, state.psi, grid) + 0.5 * l2_norm(
        state.zeta, grid) ** 2


def initial_rayleigh_taylor(state0, params, stepper, dt_probe):
    """Rayleigh-Taylor field at t = 0 from a pair of tiny probe steps."""
    plus = stepper.step(state0, dt_probe)
    minus = stepper.step(state0, -dt_probe)
    grid = state0.grid
    w0, v0 = dn.trace_velocities(state0.zeta, state0.psi, params, grid,
                                 mode=stepper.config.dn_mode,
                                 n_z=stepper.config.n_z)
    wp, _ = dn.trace_velocities(plus.zeta, plus.psi, params, grid,
                                mode=stepper.config.dn_mode,
                                n_z=stepper.config.n_z)
    wm, _ = dn.trace_velocities(minus.zeta, minus.psi, params, grid,
                                mode=stepper.config.dn_mode,
                                n_z=stepper.config.n_z)
    dw_dt = (wp - wm) / (2.0 * dt_probe)
    return 1.0 + params.epsilon ** 2 * (dw_dt + v0 * dx(w0, grid))


def simulate(state0, params, config):
    """Integrate over [0, T]; returns a Trajectory sampled every monitor_every steps.

    The initial state must be admissible in both senses (water height and
    Rayleigh-Taylor floor).  Admissibility loss along the way triggers step
    halving (up to config.max_halvings); if the state remains inadmissible
    the partial trajectory is returned with its aborted flag set.
    """
    grid = state0.grid
    state0.check_height(params)
    stepper = Stepper(grid, params, config)
    traj = Trajectory(grid=grid, params=params, config=config)
    if config.check_rayleigh:
        try:
            rt0 = initial_rayleigh_taylor(state0, params, stepper,
                                          config.dt / 16.0)
        except (AdmissibilityError, SolverError) as exc:
            traj.aborted = True
            traj.abort_reason = f"Rayleigh-Taylor probe failed at t=0: {exc}"
            traj.append(0.0, state0.copy(), float("nan"))
            return traj
        traj.min_rayleigh_taylor = float(np.min(rt0))
        if traj.min_rayleigh_taylor < params.a0:
            raise AdmissibilityError(
                f"initial Rayleigh-Taylor coefficient {traj.min_rayleigh_taylor:.4f} "
                f"below a0 = {params.a0}")

    def monitor(t, state):
        g_psi = stepper.session.g_psi(state)
        traj.append(t, state.copy(), conserved_energy(state, params, config,
                                                      g_psi=g_psi))

    monitor(0.0, state0)
    t = 0.0
    dt = config.dt
    state = state0.copy()
    halvings = 0
    steps_since_monitor = 0
    while t < config.T - 1e-14 * config.T:
        dt_eff = min(dt, config.T - t)
        try:
            state_new = stepper.step(state, dt_eff)
            state_new.check_height(params)
        except (AdmissibilityError, SolverError) as exc:
            halvings += 1
            if halvings > config.max_halvings:
                traj.aborted = True
                traj.abort_reason = f"admissibility lost at t={t:.6g}: {exc}"
                if steps_since_monitor:
                    monitor(t, state)
                return traj
            dt = dt / 2.0
            continue
        state = state_new
        t += dt_eff
        steps_since_monitor += 1
        if steps_since_monitor >= config.monitor_every or t >= config.T - 1e-14:
            monitor(t, state)
            steps_since_monitor = 0
    return traj


# ---------------------------------------------------------------------------
# diagnostics: good unknowns, energies, Rayleigh-Taylor
# ---------------------------------------------------------------------------

def good_unknowns(state, params, grid=None, order=3, w_surface=None,
                  dn_mode="elliptic", n_z=32):
    """Alinhac pairs (d^a zeta, d^a psi - eps w d^a zeta) for a = 0..order."""
    grid = grid or state.grid
    if w_surface is None:
        w_surface, _ = dn.trace_velocities(state.zeta, state.psi, params, grid,
                                           mode=dn_mode, n_z=n_z)
    pairs = []
    for a in range(order + 1):
        dz = dx(state.zeta, grid, order=a) if a else state.zeta
        dp = dx(state.psi, grid, order=a) if a else state.psi
        pairs.append((dz, dp - params.epsilon * w_surface * dz))
    return pairs


def energy_en(state, order, params, config=None):
    """Good-unknown energy |P psi|_{H^{t0+3/2}} + sum |zeta_a|_2 + |P psi_a|_2.

    t0 is fixed to 1 (the smallest admissible slot at d = 1).
    """
    grid = state.grid
    config = config or SolverConfig()
    total = hs_norm(apply_frac_p(state.psi, grid, params), grid, 2.5)
    for dz, dp in good_unknowns(state, params, grid, order,
                                dn_mode=config.dn_mode, n_z=config.n_z):
        total += l2_norm(dz, grid) + l2_norm(apply_frac_p(dp, grid, params), grid)
    return total


def _time_derivative_weights(times, index, order):
    if index < 1 or index > len(times) - 2:
        raise ContextError("centered time derivatives need an interior index")
    nodes = np.asarray(times[index - 1:index + 2])
    return dn.fd_weights(times[index], nodes, order)


def energy_en_time(traj, index, order, params):
    """Energy variant including time derivatives of zeta, psi up to order 2.

    Time derivatives come from centered differences of the stored
    trajectory, so index must be interior.
    """
    grid = traj.grid
    w = _time_derivative_weights(traj.times, index, 2)
    states = traj.states[index - 1:index + 2]
    config = traj.config
    state = states[1]
    w_surf, _ = dn.trace_velocities(state.zeta, state.psi, params, grid,
                                    mode=config.dn_mode, n_z=config.n_z)
    total = hs_norm(apply_frac_p(state.psi, grid, params), grid, 2.5)
    for k in range(3):
        if k == 0:
            zk = state.zeta
            pk = state.psi
        else:
            zk = sum(w[k][j] * states[j].zeta for j in range(3))
            pk = sum(w[k][j] * states[j].psi for j in range(3))
        for a in range(0, order + 1 - k):
            dz = dx(zk, grid, order=a) if a else zk
            dp = dx(pk, grid, order=a) if a else pk
            good = dp - params.epsilon * w_surf * dz
            total += l2_norm(dz, grid) + l2_norm(
                apply_frac_p(good, grid, params), grid)
    return total


def rayleigh_taylor(traj, index, params):
    """Coefficient a = 1 + eps(eps d_t + eps V d_x) w at an interior index."""
    grid = traj.grid
    config = traj.config
    w = _time_derivative_weights(traj.times, index, 1)
    traces = []
    for j in range(index - 1, index + 2):
        state = traj.states[j]
        wj, vj = dn.trace_velocities(state.zeta, state.psi, params, grid,
                                     mode=config.dn_mode, n_z=config.n_z)
        traces.append((wj, vj))
    dw_dt = sum(w[1][j] * traces[j][0] for j in range(3))
    w_mid, v_mid = traces[1]
    a_field = 1.0 + params.epsilon ** 2 * (dw_dt + v_mid * dx(w_mid, grid))
    return a_field


# ---------------------------------------------------------------------------
# the linear-vs-nonlinear experiment
# ---------------------------------------------------------------------------

def gap_norm(state_a, state_b, params, grid):
    """sqrt(|zeta_a - zeta_b|^2 + |P(psi_a - psi_b)|^2): the theorem's metric."""
    dz = state_a.zeta - state_b.zeta
    dp = apply_frac_p(state_a.psi - state_b.psi, grid, params)
    return float(np.sqrt(l2_norm(dz, grid) ** 2 + l2_norm(dp, grid) ** 2))


def lin_vs_nonlin_gap(state0, params, config):
    """sup over monitored t <= T of the gap between nonlinear and linear flow."""
    grid = state0.grid
    traj = simulate(state0, params, config)
    gap = 0.0
    for t, state in zip(traj.times, traj.states):
        lin = propagate_linear(state0, t, params)
        gap = max(gap, gap_norm(state, lin, params, grid))
    return gap, traj


def lin_vs_nonlin_experiment(state0, T, eps_list, mu, config=None):
    """Sweep the gap over decreasing eps against the theorem's envelope.

    The envelope (eps^{1/8}/mu^{3/16} + eps^{1/2} mu^{1/4}) C2 has its
    constant calibrated at the largest eps.
    """
    base = config or SolverConfig(T=T)
    gaps = []
    flags = {}
    for eps in eps_list:
        params = PhysicalParams(epsilon=eps, mu=mu)
        cfg = SolverConfig(dt=base.dt, T=T, dn_mode=base.dn_mode, n_z=base.n_z,
                           dealias=base.dealias, monitor_every=base.monitor_every,
                           tol=base.tol)
        gap, traj = lin_vs_nonlin_gap(state0, params, cfg)
        gaps.append(gap)
        if traj.aborted:
            flags[f"aborted_eps_{eps}"] = traj.abort_reason
    eps_arr = np.asarray(eps_list, dtype=float)
    gaps = np.asarray(gaps)
    shape = eps_arr ** 0.125 / mu ** 0.1875 + eps_arr ** 0.5 * mu ** 0.25
    c2 = gaps[0] / shape[0] if shape[0] > 0 else 0.0
    report = DecayReport(
        name="lin-vs-nonlin",
        abscissa_label="epsilon",
        abscissae=eps_arr,
        measured=gaps,
        reference=c2 * shape,
        extra_columns={"envelope_constant": np.full(len(gaps), c2)},
        flags=flags,
    )
    report.fit_slope()
    return report


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_state(path, state, params, time=0.0):
    """Raw little-endian float64 dump of (zeta, psi) behind a JSON header line."""
    header = {
        "grid": {"L": state.grid.L, "n": state.grid.n},
        "params": {
            "epsilon": params.epsilon, "mu": params.mu, "gamma": params.gamma,
            "h_min": params.h_min, "a0": params.a0,
        },
        "time": float(time),
        "arrays": ["zeta", "psi"],
        "dtype": "<f8",
    }
    with open(path, "wb") as handle:
        handle.write((json.dumps(header, sort_keys=True) + "\n").encode())
        handle.write(state.zeta.astype("<f8").tobytes())
        handle.write(state.psi.astype("<f8").tobytes())


def load_state(path):
    """Inverse of :func:`save_state`; returns (state, params, time)."""
    with open(path, "rb") as handle:
        header = json.loads(handle.readline().decode())
        n = int(header["grid"]["n"])
        zeta = np.frombuffer(handle.read(8 * n), dtype="<f8").copy()
        psi = np.frombuffer(handle.read(8 * n), dtype="<f8").copy()
    grid = make_grid(header["grid"]["L"], n)
    params = PhysicalParams(**header["params"])
    return SurfaceState(grid, zeta, psi), params, float(header["time"])
