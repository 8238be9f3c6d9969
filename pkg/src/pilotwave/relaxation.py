"""Density evolution under guidance velocity fields.

Two routes: a conservative corner-transport-upwind (CTU) finite-volume
scheme with monotonised-central limited reconstruction and the prescribed
1/10 velocity cap, and the backtracking method (conserved f = rho/|psi|^2
pulled back along reverse trajectories).  Face velocities for oscillator
states come from the separable Hermite grid evaluation, so one step costs a
handful of small matrix products plus O(cells) arithmetic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import HAVE_NUMBA, ctu_step, phase_velocity_grid
from .errors import CFLViolated
from .entropy import CoarseGrain, coarse_grained_H
from .guidance import integrate_ensemble
from .integrate import IntegratorSettings, TWO_PI
from .states import (cartesian_matrix, default_domain, eval_psi_grid,
                     hermite_function_derivs, hermite_functions,
                     random_state, state_from_cartesian)


@dataclass
class DensityGrid:
    xs: np.ndarray            # cell-center coordinates
    ys: np.ndarray
    rho: np.ndarray           # (nx, ny) cell averages
    t: float = 0.0

    @property
    def dx(self):
        return float(self.xs[1] - self.xs[0])

    @property
    def dy(self):
        return float(self.ys[1] - self.ys[0])

    @property
    def cell_area(self):
        return self.dx * self.dy

    def mass(self):
        return float(np.sum(self.rho)) * self.cell_area

    def copy(self):
        return DensityGrid(self.xs, self.ys, self.rho.copy(), self.t)


def grid_axes(half_width, n):
    """Cell centers of an n-cell axis on [-half_width, half_width]."""
    d = 2.0 * half_width / n
    return -half_width + d * (np.arange(n) + 0.5)


def gaussian_density(xs, ys, sigma=(1.0, 1.0), center=(0.0, 0.0)):
    """Discretely normalized Gaussian cell averages."""
    sx, sy = (sigma, sigma) if np.isscalar(sigma) else sigma
    gx = np.exp(-((xs - center[0]) ** 2) / (2 * sx**2))
    gy = np.exp(-((ys - center[1]) ** 2) / (2 * sy**2))
    rho = np.outer(gx, gy)
    rho /= rho.sum() * (xs[1] - xs[0]) * (ys[1] - ys[0])
    return DensityGrid(xs=xs, ys=ys, rho=rho, t=0.0)


def born_density(state, xs, ys, t=0.0):
    rho = np.abs(eval_psi_grid(state, xs, ys, t)) ** 2
    return DensityGrid(xs=xs, ys=ys, rho=rho, t=t)


def state_velocity_field(state):
    """(t, xs, ys) -> (vx, vy) on the tensor grid; zero where psi vanishes.

    Axis tables depend only on the grid, so they are cached on the axis
    bytes; each call then costs a few small matrix products.  The returned
    callable accepts component="x"/"y" to skip the unused half when the FV
    stepper asks for one face set (flagged via .component_aware).
    """
    m = state.m
    D = cartesian_matrix(state)
    modes = np.arange(m + 1)
    tables = {}

    def axis_tables(axis):
        key = axis.tobytes()
        hit = tables.get(key)
        if hit is None:
            if len(tables) > 16:
                tables.clear()
            H = hermite_functions(axis, m)
            hit = tables[key] = (H, hermite_function_derivs(axis, m, H))
        return hit

    def ratio_grid(Ha, Ga, BT, CT):
        out = np.empty((Ha.shape[1], BT.shape[0]))
        if HAVE_NUMBA:
            phase_velocity_grid(Ha, Ga, BT, CT, out)
            return out
        psi = Ha.T @ BT.T
        grad = Ga.T @ CT.T
        den = psi.real * psi.real + psi.imag * psi.imag
        num = grad.imag * psi.real - grad.real * psi.imag
        out.fill(0.0)
        np.divide(num, den, out=out, where=den > 0.0)
        return out

    def vf(t, xs, ys, component="both"):
        xs = np.ascontiguousarray(xs, dtype=float)
        ys = np.ascontiguousarray(ys, dtype=float)
        Hx, dHx = axis_tables(xs)
        Hy, dHy = axis_tables(ys)
        ph = np.exp(-1j * modes * t)
        Dt = ph[:, None] * D * ph[None, :]
        BT = np.ascontiguousarray((Dt @ Hy).T)
        vx = vy = None
        if component != "y":
            vx = ratio_grid(Hx, dHx, BT, BT)
        if component != "x":
            dBT = np.ascontiguousarray((Dt @ dHy).T)
            vy = ratio_grid(Hx, Hx, BT, dBT)
        return vx, vy

    vf.component_aware = True
    return vf


def rotation_field(omega=1.0):
    def vf(t, xs, ys):
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return -omega * Y, omega * X
    return vf


def classical_field(dV):
    """Phase-space flow (q, p): q_dot = p, p_dot = -V'(q); x axis is q."""
    def vf(t, xs, ys):
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return Y.astype(float), -dV(X)
    return vf


# ---------------------------------------------------------------------------
# the CTU step
# ---------------------------------------------------------------------------

def _mc_slopes(a, axis):
    """Monotonised-central limited slopes for the cells a[1:-1] along axis."""
    d = np.diff(a, axis=axis)
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(None, -1)
    dm = d[tuple(sl)]
    sl[axis] = slice(1, None)
    dp = d[tuple(sl)]
    central = 0.5 * (dm + dp)
    lim = 2.0 * np.minimum(np.abs(dm), np.abs(dp))
    return np.where(dm * dp > 0.0,
                    np.sign(central) * np.minimum(np.abs(central), lim), 0.0)


def _ctu_fluxes(rhos, vx, vy, dt, dx, dy):
    """CTU fluxes F (k, nx+1, ny), G (k, nx, ny+1) for stacked densities.

    vx lives on x-faces x y-centers extended one ghost (nx+1, ny+2); vy on
    x-centers extended x y-faces (nx+2, ny+1); both broadcast over the stack.
    Ghost cells are zero-gradient.
    """
    k, nx, ny = rhos.shape
    rp = np.pad(rhos, ((0, 0), (2, 2), (2, 2)), mode="edge")

    # normal PLM predictor, x faces
    sx = _mc_slopes(rp, 1)                       # cells -1..nx, all padded y
    vxm = vx[None, :, 1:-1]
    nu = vxm * (dt / dx)
    left = rp[:, 1:nx + 2, 2:ny + 2] + (0.5 - 0.5 * nu) * sx[:, 0:nx + 1, 2:ny + 2]
    right = rp[:, 2:nx + 3, 2:ny + 2] - (0.5 + 0.5 * nu) * sx[:, 1:nx + 2, 2:ny + 2]

    # transverse donor correction from y fluxes
    ypos = vy > 0.0
    Gd = vy * np.where(ypos[None], rp[:, 1:nx + 3, 1:ny + 2],
                       rp[:, 1:nx + 3, 2:ny + 3])
    corr = (dt / (2.0 * dy)) * (Gd[:, :, 1:] - Gd[:, :, :-1])
    left -= corr[:, 0:nx + 1]
    right -= corr[:, 1:nx + 2]
    F = vxm * np.where(vxm > 0.0, left, right)

    # normal PLM predictor, y faces
    sy = _mc_slopes(rp, 2)
    vym = vy[None, 1:-1, :]
    mu = vym * (dt / dy)
    bot = rp[:, 2:nx + 2, 1:ny + 2] + (0.5 - 0.5 * mu) * sy[:, 2:nx + 2, 0:ny + 1]
    top = rp[:, 2:nx + 2, 2:ny + 3] - (0.5 + 0.5 * mu) * sy[:, 2:nx + 2, 1:ny + 2]

    # transverse donor correction from x fluxes
    xpos = vx > 0.0
    Fd = vx * np.where(xpos[None], rp[:, 1:nx + 2, 1:ny + 3],
                       rp[:, 2:nx + 3, 1:ny + 3])
    corr2 = (dt / (2.0 * dx)) * (Fd[:, 1:, :] - Fd[:, :-1, :])
    bot -= corr2[:, :, 0:ny + 1]
    top -= corr2[:, :, 1:ny + 2]
    G = vym * np.where(vym > 0.0, bot, top)

    return F, G


@dataclass
class FvStats:
    steps: int = 0
    dt: float = 0.0
    cap: float = 0.0
    cap_hits: int = 0
    outflux: float = 0.0
    mass_residual_max: float = 0.0   # |delta mass - boundary flux| worst step
    min_rho: float = 0.0             # most negative cell before the output clip


def _reference_speed(velocity_field, xs, ys, t0, t1, quantile=0.995, safety=1.3):
    xf = np.concatenate([xs - (xs[1] - xs[0]) / 2, [xs[-1] + (xs[1] - xs[0]) / 2]])
    speeds = []
    for t in np.linspace(t0, min(t1, t0 + TWO_PI), 5):
        vx, vy = velocity_field(t, xf, ys)
        speeds.append(np.abs(vx).ravel())
        speeds.append(np.abs(vy).ravel())
    v = np.quantile(np.concatenate(speeds), quantile)
    return float(max(v * safety, 1e-12))


def evolve_fv_multi(grids, velocity_field, t0, t1, cfl=0.5, dt=None,
                    kernel="auto"):
    """Advance several densities in lockstep through shared face velocities.

    kernel: "auto" takes the compiled step when numba is importable, else the
    numpy one; "numpy" / "jit" force a route (tests pin them against each
    other).
    """
    if cfl <= 0 or cfl > 0.9:
        raise CFLViolated(f"cfl={cfl} outside (0, 0.9]")
    if kernel not in ("auto", "numpy", "jit"):
        raise ValueError(f"unknown kernel {kernel!r}")
    use_jit = kernel == "jit" or (kernel == "auto" and HAVE_NUMBA)
    g0 = grids[0]
    xs, ys = g0.xs, g0.ys
    dx, dy = g0.dx, g0.dy
    if dt is None:
        vref = _reference_speed(velocity_field, xs, ys, t0, t1)
        dt = min(dx, dy) / (10.0 * vref)
    n_steps = max(1, math.ceil((t1 - t0) / dt))
    dt = (t1 - t0) / n_steps
    cap = (min(dx, dy) / dt) / 10.0
    if cap * dt / min(dx, dy) > cfl:
        raise CFLViolated("velocity cap exceeds the CFL bound")

    xf = np.concatenate([xs - dx / 2, [xs[-1] + dx / 2]])
    yf = np.concatenate([ys - dy / 2, [ys[-1] + dy / 2]])
    xc_ext = np.concatenate([[xs[0] - dx], xs, [xs[-1] + dx]])
    yc_ext = np.concatenate([[ys[0] - dy], ys, [ys[-1] + dy]])

    rhos = np.stack([g.rho for g in grids])
    new = np.empty_like(rhos)
    bflux = np.empty(len(grids))
    stats = FvStats(dt=dt, cap=cap)
    split = getattr(velocity_field, "component_aware", False)
    t = t0
    for _ in range(n_steps):
        tm = t + dt / 2
        if split:
            vx = velocity_field(tm, xf, yc_ext, component="x")[0]
            vy = velocity_field(tm, xc_ext, yf, component="y")[1]
        else:
            vx = velocity_field(tm, xf, yc_ext)[0]
            vy = velocity_field(tm, xc_ext, yf)[1]
        stats.cap_hits += int(np.sum(np.abs(vx) > cap) + np.sum(np.abs(vy) > cap))
        vx = np.clip(vx, -cap, cap)
        vy = np.clip(vy, -cap, cap)
        if max(np.max(np.abs(vx)), np.max(np.abs(vy))) * dt / min(dx, dy) > cfl:
            raise CFLViolated("capped face velocity exceeds the CFL bound")
        if use_jit:
            ctu_step(rhos, vx, vy, dt, dx, dy, new, bflux)
        else:
            F, G = _ctu_fluxes(rhos, vx, vy, dt, dx, dy)
            new[:] = rhos - (dt / dx) * np.diff(F, axis=1) \
                - (dt / dy) * np.diff(G, axis=2)
            bflux[:] = dt * dy * (F[:, -1].sum(axis=1) - F[:, 0].sum(axis=1)) \
                + dt * dx * (G[:, :, -1].sum(axis=1) - G[:, :, 0].sum(axis=1))
        resid = np.max(np.abs((new.sum(axis=(1, 2)) - rhos.sum(axis=(1, 2)))
                              * dx * dy + bflux))
        stats.mass_residual_max = max(stats.mass_residual_max, float(resid))
        stats.outflux += float(bflux[0])
        rhos, new = new, rhos
        t += dt
        stats.steps += 1
    stats.min_rho = float(rhos.min())
    out = []
    for i in range(len(grids)):
        # limiter undershoot sits at rounding scale; clip so densities stay
        # valid inputs for the entropy integrals
        rho_out = np.maximum(rhos[i], 0.0)
        out.append(DensityGrid(xs=xs, ys=ys, rho=rho_out, t=t1))
    return out, stats


def evolve_fv(rho0, velocity_field, t0, t1, cfl=0.5, dt=None, kernel="auto"):
    out, stats = evolve_fv_multi([rho0], velocity_field, t0, t1, cfl=cfl,
                                 dt=dt, kernel=kernel)
    return out[0], stats


# ---------------------------------------------------------------------------
# backtracking
# ---------------------------------------------------------------------------

BACKTRACK_SETTINGS = IntegratorSettings(max_step=TWO_PI / 100)


def evolve_backtrack(f0, state, t, grid, settings=BACKTRACK_SETTINGS):
    """rho(x, t) = f0(x_0(x)) |psi(x, t)|^2 with x_0 backtracked to time 0.

    Failed points (node encounters) get rho = 0 and are reported as a
    fraction; callers should treat > 1% as a failed build.
    """
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    starts = np.stack([X.ravel(), Y.ravel()], axis=1)
    res = integrate_ensemble(state, starts, t, 0.0, settings)
    f_vals = np.zeros(len(starts))
    ok = ~res.failed
    f_vals[ok] = f0(res.y[ok, 0], res.y[ok, 1])
    psi2 = np.abs(eval_psi_grid(state, grid.xs, grid.ys, t)) ** 2
    rho = f_vals.reshape(X.shape) * psi2
    out = DensityGrid(xs=grid.xs, ys=grid.ys, rho=rho, t=t)
    return out, float(np.mean(res.failed))


# ---------------------------------------------------------------------------
# the relaxation experiment
# ---------------------------------------------------------------------------

def nine_mode_state(seed=0):
    """Equal-weight superposition of the nine (nx, ny) in {0,1,2}^2 modes."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=9)
    cart = {}
    k = 0
    for nx in range(3):
        for ny in range(3):
            cart[(nx, ny)] = np.exp(1j * phases[k]) / 3.0
            k += 1
    return state_from_cartesian(cart, m=4)


@dataclass
class RelaxationResult:
    times: np.ndarray
    hbar: np.ndarray            # nonequilibrium H-bar per sample
    hbar_control: np.ndarray    # equilibrium control (empty if not run)
    final: DensityGrid
    final_control: DensityGrid
    stats: FvStats
    frames: list = field(default_factory=list)


def relaxation_run(state, sigma=(1.0, 1.0), periods=19, grid_n=256,
                   cg=None, half_width=None, with_control=True, cfl=0.5,
                   dt=None, keep_frames=False):
    """Evolve a Gaussian rho against the state's own flow; H-bar per period."""
    widths = np.atleast_1d(np.asarray(sigma, dtype=float))
    if not np.all(np.isfinite(widths)) or np.any(widths <= 0):
        raise ValueError(f"sigma must be finite and positive, got {sigma!r}")
    cg = cg or CoarseGrain(32, 32)
    L = default_domain(state.m) if half_width is None else float(half_width)
    xs = grid_axes(L, grid_n)
    ys = grid_axes(L, grid_n)
    vf = state_velocity_field(state)
    noneq = gaussian_density(xs, ys, sigma=sigma)
    ref = born_density(state, xs, ys, 0.0)
    grids = [noneq, ref.copy()] if with_control else [noneq]
    area = noneq.cell_area

    times = [0.0]
    hbar = [coarse_grained_H(noneq.rho, ref.rho, cg, area)]
    hctl = [0.0] if with_control else []
    frames = [noneq.copy()] if keep_frames else []
    stats_all = FvStats()
    for p in range(periods):
        t0, t1 = p * TWO_PI, (p + 1) * TWO_PI
        grids, stats = evolve_fv_multi(grids, vf, t0, t1, cfl=cfl, dt=dt)
        stats_all.steps += stats.steps
        stats_all.dt = stats.dt
        stats_all.cap = stats.cap
        stats_all.cap_hits += stats.cap_hits
        stats_all.outflux += stats.outflux
        stats_all.mass_residual_max = max(stats_all.mass_residual_max,
                                          stats.mass_residual_max)
        stats_all.min_rho = min(stats_all.min_rho, stats.min_rho)
        times.append(t1)
        hbar.append(coarse_grained_H(grids[0].rho, ref.rho, cg, area))
        if with_control:
            hctl.append(coarse_grained_H(grids[1].rho, ref.rho, cg, area))
        if keep_frames:
            frames.append(grids[0].copy())
    return RelaxationResult(
        times=np.array(times), hbar=np.array(hbar),
        hbar_control=np.array(hctl),
        final=grids[0], final_control=grids[1] if with_control else grids[0],
        stats=stats_all, frames=frames)
