"""Euler field reconstruction on a fixed strip and residual checks.

From a trajectory of surface states the velocity and pressure inside the
fluid are rebuilt: solve the strip potential, extend it past the interfaces,
compose with the inverse flattening map onto the fixed strip
S* = R x (-(k*+1), k*), and read the pressure off the Bernoulli identity

    P = -eps^2 d_t Phi - (eps^2 / 2mu) (V^2 + w^2) - z        (rescaled time)

whose surface trace vanishes (total-pressure convention).  The hydrodynamic
convention P + z (zero at rest, eps zeta at the surface) is carried
alongside; both appear in the reports.

The x- and z-derivatives of the potential are extended as fields of their
own rather than re-differentiated after extension, so interior residuals
never touch an interface and the bottom flux stays at solver accuracy.
"""

import json
from dataclasses import dataclass, field
from math import ceil

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ContextError, GeometryError
from .extension import ExtensionPlan, extend_strip
from .dn import StripField, fd_weights, get_solver, solve_potential, trace_velocities
from .reports import DecayReport
from .solver import SolverConfig, simulate
from .spectral import PhysicalParams, dx, l2_norm, make_grid


def strip_indices(sup_eps_zeta, margin=1.05):
    """Indices (k*, l) with the fluid inside S_{k*} and S_{k*} inside Sigma(S_l)."""
    a = margin * float(sup_eps_zeta)
    if a >= 1.0:
        raise GeometryError(f"surface excursion eps|zeta| = {a:.3f} >= 1")
    k_star = max(1, ceil(a))
    l = ceil((k_star + 1.0) / (1.0 - a)) - 1
    return k_star, l


def check_containment(zeta, epsilon, k_star, l, time_label=""):
    """Verify S_{k*} subset Sigma(S_l) column by column."""
    h = 1.0 + epsilon * zeta
    low = -(l + 1.0) * h + epsilon * zeta
    high = l * h + epsilon * zeta
    if np.any(low > -(k_star + 1.0)) or np.any(high < k_star):
        raise GeometryError(
            f"strip containment violated{' at ' + time_label if time_label else ''}: "
            f"S_{k_star} not inside Sigma(S_{l})")


@dataclass
class FluidFields:
    """Velocity, pressure and surface trace on the fixed strip S*.

    V = sqrt(mu) d_x Phi and w = d_z Phi (so divergence and curl in the
    anisotropic operators vanish identically for the continuous field);
    pressure is stored in the Bernoulli (total) convention with the
    hydrodynamic variant pressure + z alongside.
    """

    grid: object
    z: np.ndarray
    time: float
    V: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    pressure: np.ndarray = field(repr=False)
    pressure_hydro: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    zeta: np.ndarray = field(repr=False)
    k_star: int = 1

    def fluid_mask(self, epsilon, collar=2):
        """Nodes strictly inside the fluid, a collar below the free surface."""
        dz = float(self.z[1] - self.z[0])
        surface = epsilon * self.zeta[None, :]
        return (self.z[:, None] <= surface - collar * dz) & (
            self.z[:, None] >= -1.0)

    def bottom_index(self):
        return int(np.argmin(np.abs(self.z + 1.0)))


def _pull_columns(values, z_src, z_targets, spline_order=5):
    """Per-column spline evaluation of values(z_src) at column-wise z_targets."""
    out = np.empty_like(z_targets)
    for i in range(values.shape[1]):
        spline = make_interp_spline(z_src, values[:, i], k=spline_order)
        out[:, i] = spline(z_targets[:, i])
    return out


def reconstruct_fields(states, times, index, params, n_z=32, plan_k=4,
                       tol=1e-12):
    """FluidFields at states[index] with d_t Phi from centered differences.

    states/times are three or more consecutive trajectory samples; index
    must be interior so the time derivative is centered.
    """
    if len(states) < 3:
        raise ContextError("reconstruction needs at least 3 consecutive states")
    if index < 1 or index > len(states) - 2:
        raise ContextError("reconstruction index must be interior")
    grid = states[index].grid
    eps = params.epsilon
    sup = max(float(np.max(np.abs(eps * s.zeta))) for s in states)
    k_star, l = strip_indices(sup)
    plan = ExtensionPlan(k=plan_k, j_target=l)
    dz = 1.0 / n_z
    z_star = -(k_star + 1.0) + dz * np.arange((2 * k_star + 1) * n_z + 1)

    phis = {}
    for j in (index - 1, index, index + 1):
        state = states[j]
        check_containment(state.zeta, eps, k_star, l,
                          time_label=f"t={times[j]:.6g}")
        pot = solve_potential(state.zeta, state.psi, params, grid, n_z, tol=tol)
        solver = get_solver(grid, params.mu, n_z)
        phi_x, phi_z = solver.gradient(pot.values)
        ext = {
            "phi": extend_strip(pot, plan),
            "phi_x": extend_strip(StripField(grid, pot.z, phi_x), plan),
            "phi_z": extend_strip(StripField(grid, pot.z, phi_z), plan),
        }
        h = 1.0 + eps * state.zeta
        z_sigma = (z_star[:, None] - eps * state.zeta[None, :]) / h[None, :]
        pulled = {key: _pull_columns(f.values, f.z, z_sigma)
                  for key, f in ext.items()}
        zeta_x = dx(state.zeta, grid)
        dsigma_dx = -eps * zeta_x[None, :] * (1.0 + z_star[:, None]) / h[None, :] ** 2
        phis[j] = {
            "Phi": pulled["phi"],
            "Phi_x": pulled["phi_x"] + pulled["phi_z"] * dsigma_dx,
            "Phi_z": pulled["phi_z"] / h[None, :],
        }

    w_t = fd_weights(times[index], np.asarray(times[index - 1:index + 2]), 1)[1]
    dphi_dt = sum(w_t[m] * phis[index - 1 + m]["Phi"] for m in range(3))
    mid = phis[index]
    V = np.sqrt(params.mu) * mid["Phi_x"]
    w = mid["Phi_z"]
    pressure = (
        -eps ** 2 * dphi_dt
        - eps ** 2 / (2.0 * params.mu) * (V ** 2 + w ** 2)
        - z_star[:, None]
    )
    return FluidFields(
        grid=grid, z=z_star, time=float(times[index]), V=V, w=w,
        pressure=pressure, pressure_hydro=pressure + z_star[:, None],
        phi=mid["Phi"], zeta=states[index].zeta.copy(), k_star=k_star,
    )


# ---------------------------------------------------------------------------
# residuals of the free-surface Euler systems
# ---------------------------------------------------------------------------

def _level_dx(values, grid, order=1):
    return dx(values, grid, order=order)


def _z_derivative(values, z):
    from .dn import dz_matrices

    d1, _ = dz_matrices(len(z) - 1)
    return (d1 / (z[1] - z[0])) @ values


def _masked_norms(resid, mask, grid, z):
    vals = np.where(mask, resid, 0.0)
    sup = float(np.max(np.abs(vals)))
    dz = float(z[1] - z[0])
    l2 = float(np.sqrt(np.sum(vals ** 2) * grid.dx * dz))
    return sup, l2


def euler_residuals(fields, states, times, params, scaling="original",
                    dn_mode="elliptic", n_z=32, collar=2):
    """Interior residual norms of the (rescaled) free-surface Euler system.

    fields/states/times are three consecutive samples around a common middle
    time, fields on a common S* grid.  Time derivatives are centered in the
    stored (rescaled) time; the original scaling reintroduces the eps
    factors explicitly.
    """
    if scaling not in ("original", "rigid_lid"):
        raise ValueError(f"unknown scaling {scaling!r}")
    if len(fields) != 3 or len(states) != 3 or len(times) != 3:
        raise ContextError("residuals need three consecutive samples")
    grid = fields[1].grid
    eps, mu = params.epsilon, params.mu
    z = fields[1].z
    w_t = fd_weights(times[1], np.asarray(times), 1)[1]

    mid = fields[1]
    v = mid.V / np.sqrt(mu)
    w = mid.w
    dv_dt = sum(w_t[m] * fields[m].V for m in range(3)) / np.sqrt(mu)
    dw_dt = sum(w_t[m] * fields[m].w for m in range(3))
    v_x = _level_dx(v, grid)
    v_z = _z_derivative(v, z)
    w_x = _level_dx(w, grid)
    w_z = _z_derivative(w, z)
    p_x = _level_dx(mid.pressure, grid)
    ph_z = _z_derivative(mid.pressure_hydro, z)

    if scaling == "original":
        r_mx = eps * dv_dt + eps * (v * v_x + w * v_z / mu) + p_x / eps
        r_mz = eps * dw_dt + eps * (v * w_x + w * w_z / mu) + ph_z / eps
    else:
        p_prime_x = p_x / eps ** 2
        p_prime_z = ph_z / eps ** 2
        r_mx = dv_dt + v * v_x + w * v_z / mu + p_prime_x
        r_mz = dw_dt + v * w_x + w * w_z / mu + p_prime_z

    div = np.sqrt(mu) * _level_dx(mid.V, grid) + w_z
    curl = _z_derivative(mid.V, z) - np.sqrt(mu) * w_x

    state = states[1]
    w_tr, v_tr = trace_velocities(state.zeta, state.psi, params, grid,
                                  mode=dn_mode, n_z=n_z)
    dzeta_dt = sum(w_t[m] * states[m].zeta for m in range(3))
    zeta_x = dx(state.zeta, grid)
    if scaling == "original":
        kin = eps * dzeta_dt + eps * v_tr * zeta_x - w_tr / mu
    else:
        kin = dzeta_dt + v_tr * zeta_x - w_tr / (mu * eps)

    mask = mid.fluid_mask(eps, collar=collar)
    jb = mid.bottom_index()
    bottom_sup = float(np.max(np.abs(mid.w[jb])))
    surf_p = np.empty(grid.n)
    for i in range(grid.n):
        spline = make_interp_spline(z, mid.pressure[:, i], k=5)
        surf_p[i] = spline(eps * state.zeta[i])

    out = {}
    for name, resid in (("momentum_x", r_mx), ("momentum_z", r_mz),
                        ("divergence", div), ("curl", curl)):
        sup, l2 = _masked_norms(resid, mask, grid, z)
        out[name + "_sup"] = sup
        out[name + "_l2"] = l2
    out["kinematic_sup"] = float(np.max(np.abs(kin)))
    out["kinematic_l2"] = l2_norm(kin, grid)
    out["bottom_flux_sup"] = bottom_sup
    out["surface_pressure_sup"] = float(np.max(np.abs(surf_p)))
    out["surface_pressure_l2"] = l2_norm(surf_p, grid)
    return out


def reconstruct_and_residuals(traj, params, scaling="original", n_z=32,
                              plan_k=4, collar=2):
    """Reconstruct around the middle of a trajectory and report residuals."""
    if len(traj) < 5:
        raise ContextError("trajectory too short for a residual report")
    mid = len(traj) // 2
    fields = [
        reconstruct_fields(traj.states, traj.times, j, params, n_z=n_z,
                           plan_k=plan_k)
        for j in (mid - 1, mid, mid + 1)
    ]
    return euler_residuals(fields, traj.states[mid - 1:mid + 2],
                           traj.times[mid - 1:mid + 2], params,
                           scaling=scaling, dn_mode=traj.config.dn_mode,
                           n_z=n_z, collar=collar), fields


def residual_convergence(state0, params, T=0.2, dt=4e-3, n_z=16,
                         scaling="original", levels=2, monitor_every=4):
    """Residual norms under simultaneous (dt, dz) halving, with orders.

    The monitor cadence is a fixed step count, so the sample spacing that
    feeds the centered time differences halves along with dt.
    """
    rows = []
    for lev in range(levels):
        cfg = SolverConfig(dt=dt / 2 ** lev, T=T, n_z=n_z * 2 ** lev,
                           monitor_every=monitor_every)
        traj = simulate(state0, params, cfg)
        res, _ = reconstruct_and_residuals(traj, params, scaling=scaling,
                                           n_z=n_z * 2 ** lev)
        rows.append(res)
    orders = {}
    for key in rows[0]:
        if rows[-1][key] > 0 and rows[0][key] > 0:
            orders[key] = float(np.log2(rows[0][key] / rows[1][key]))
        else:
            orders[key] = float("inf")
    return rows, orders


# ---------------------------------------------------------------------------
# the rigid-lid scaling experiment
# ---------------------------------------------------------------------------

def rigid_lid_member(state0, eps, mu, config):
    """One sweep member: (sup |w| at t = T, kinematic-identity residual)."""
    params = PhysicalParams(epsilon=eps, mu=mu)
    cfg = SolverConfig(dt=config.dt, T=config.T, dn_mode=config.dn_mode,
                       n_z=config.n_z, dealias=config.dealias,
                       monitor_every=config.monitor_every, tol=config.tol)
    traj = simulate(state0, params, cfg)
    state = traj.states[-1]
    w_tr, _ = trace_velocities(state.zeta, state.psi, params, state0.grid,
                               mode=cfg.dn_mode, n_z=cfg.n_z)
    sup_w = float(np.max(np.abs(w_tr)))
    j = len(traj) - 2
    w_t = fd_weights(traj.times[j], np.asarray(traj.times[j - 1:j + 2]), 1)[1]
    dzeta = sum(w_t[m] * traj.states[j - 1 + m].zeta for m in range(3))
    s_j = traj.states[j]
    wj, vj = trace_velocities(s_j.zeta, s_j.psi, params, state0.grid,
                              mode=cfg.dn_mode, n_z=cfg.n_z)
    ident = wj - eps * mu * (dzeta + vj * dx(s_j.zeta, state0.grid))
    return sup_w, float(np.max(np.abs(ident)))


def rigid_lid_scaling_experiment(state0, eps_list, mu, config=None):
    """|w|_inf at the surface at rescaled t = 1 over a decreasing eps sweep.

    The report records the measured sup of the vertical surface velocity,
    the fitted log-log slope, and the residual of the rescaled kinematic
    identity w = eps mu (d_t zeta + V zeta_x) as a consistency column.
    """
    base = config or SolverConfig(T=1.0, dt=5e-3, n_z=24, monitor_every=5)
    rows = [rigid_lid_member(state0, eps, mu, base) for eps in eps_list]
    sups = [r[0] for r in rows]
    kin_resid = [r[1] for r in rows]
    eps_arr = np.asarray(eps_list, dtype=float)
    sups = np.asarray(sups)
    ref = sups[0] * (eps_arr / eps_arr[0]) ** 2
    report = DecayReport(
        name="rigid-lid-scaling",
        abscissa_label="epsilon",
        abscissae=eps_arr,
        measured=sups,
        reference=ref,
        extra_columns={"kinematic_identity_sup": np.asarray(kin_resid)},
    )
    report.fit_slope()
    return report


# ---------------------------------------------------------------------------
# field dumps
# ---------------------------------------------------------------------------

_FIELD_NAMES = ("V", "w", "pressure", "pressure_hydro", "phi", "zeta")


def save_fields(path, fields, params):
    """Binary dump of a FluidFields bundle behind a JSON header line."""
    header = {
        "grid": {"L": fields.grid.L, "n": fields.grid.n},
        "strip": {"k_star": fields.k_star, "levels": len(fields.z)},
        "time": fields.time,
        "params": {"epsilon": params.epsilon, "mu": params.mu,
                   "gamma": params.gamma, "h_min": params.h_min,
                   "a0": params.a0},
        "arrays": list(_FIELD_NAMES),
        "dtype": "<f8",
    }
    with open(path, "wb") as handle:
        handle.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for name in _FIELD_NAMES:
            handle.write(np.ascontiguousarray(
                getattr(fields, name), dtype="<f8").tobytes())


def load_fields(path):
    with open(path, "rb") as handle:
        header = json.loads(handle.readline().decode())
        n = int(header["grid"]["n"])
        levels = int(header["strip"]["levels"])
        arrays = {}
        for name in header["arrays"]:
            count = n if name == "zeta" else levels * n
            flat = np.frombuffer(handle.read(8 * count), dtype="<f8").copy()
            arrays[name] = flat if name == "zeta" else flat.reshape(levels, n)
    grid = make_grid(header["grid"]["L"], n)
    k_star = int(header["strip"]["k_star"])
    dz = (2.0 * k_star + 1.0) / (levels - 1)
    z = -(k_star + 1.0) + dz * np.arange(levels)
    return FluidFields(grid=grid, z=z, time=float(header["time"]),
                       k_star=k_star, **arrays)
