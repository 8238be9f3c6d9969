"""Adaptive Cash-Karp Runge-Kutta 4(5) stepping, batched over many points.

Every point carries its own time and step size; the batch advances whichever
points are still active in lockstep rounds, so velocity evaluations stay
vectorized.  Non-finite stage values and near-node landings are treated as
step rejections with halving; a run of 60 such halvings marks the point as
failed (StepUnderflow when integrating a single trajectory).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StepUnderflow

TWO_PI = 2.0 * math.pi

# Cash-Karp tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([3 / 10, -9 / 10, 6 / 5]),
    np.array([-11 / 54, 5 / 2, -70 / 27, 35 / 27]),
    np.array([1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096]),
]
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_BE = _B5 - np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = TWO_PI / 1000
    node_guard_radius: float = 1e-12   # relative |P|^2 floor that rejects a landing
    max_halvings: int = 60
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0


DEFAULT_SETTINGS = IntegratorSettings()


@dataclass
class BatchResult:
    t: np.ndarray                  # per-point final time (< t1 where failed)
    y: np.ndarray                  # (n, d); last accepted position where failed
    failed: np.ndarray             # bool per point
    angle: np.ndarray | None       # accumulated (unwrapped) polar angle change
    steps: int
    rejects: int
    paths: list | None = None      # per-point [(t, y), ...] when recorded


def integrate_batch(velocity, y0, t0, t1, settings=DEFAULT_SETTINGS,
                    proximity=None, track_angle=False, record_paths=False):
    """Advance y' = velocity(t, y) from t0 to t1 for a batch of points.

    velocity(t_vec, y) must broadcast over per-point times.  proximity(t, y)
    returns a boolean array marking points whose proposed landing is too close
    to a node; such steps are halved rather than error-controlled.
    """
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim == 1:
        y = y[None, :]
    n, d = y.shape
    span = t1 - t0
    t = np.full(n, float(t0))
    failed = np.zeros(n, dtype=bool)
    angle = np.zeros(n) if track_angle else None
    paths = [[(float(t0), y[i].copy())] for i in range(n)] if record_paths else None
    if span == 0:
        return BatchResult(t, y, failed, angle, 0, 0, paths)

    sign = 1.0 if span > 0 else -1.0
    h = np.full(n, sign * min(settings.max_step, abs(span)))
    active = np.ones(n, dtype=bool)
    halvings = np.zeros(n, dtype=int)
    nsteps = 0
    nrej = 0
    h_floor = 1e-13 * max(1.0, abs(span))

    while np.any(active):
        idx = np.flatnonzero(active)
        ta = t[idx]
        ya = y[idx]
        # clamp the final step onto t1 exactly
        ha = np.clip(np.abs(h[idx]), None, np.abs(t1 - ta)) * sign

        with np.errstate(all="ignore"):
            k = np.empty((6, len(idx), d))
            k[0] = velocity(ta, ya)
            for i in range(1, 6):
                yi = ya + ha[:, None] * np.einsum("j,jnd->nd", _A[i], k[:i])
                k[i] = velocity(ta + _C[i] * ha, yi)
            ynew = ya + ha[:, None] * np.einsum("j,jnd->nd", _B5, k)
            errv = ha[:, None] * np.einsum("j,jnd->nd", _BE, k)
            scale = settings.atol + settings.rtol * np.maximum(np.abs(ya), np.abs(ynew))
            errnorm = np.sqrt(np.mean((errv / scale) ** 2, axis=1))

        finite = np.isfinite(errnorm) & np.all(np.isfinite(ynew), axis=1)
        too_close = np.zeros(len(idx), dtype=bool)
        if proximity is not None:
            with np.errstate(all="ignore"):
                pr = proximity(ta + ha, ynew)
            too_close = np.asarray(pr, dtype=bool) & finite
        guard_rej = ~finite | too_close
        err_rej = finite & ~too_close & (errnorm > 1.0)
        accept = finite & ~too_close & ~err_rej

        if np.any(accept):
            ai = idx[accept]
            if track_angle:
                xo, yo = y[ai, 0], y[ai, 1]
                xn, yn = ynew[accept, 0], ynew[accept, 1]
                angle[ai] += np.arctan2(xo * yn - yo * xn, xo * xn + yo * yn)
            t[ai] = ta[accept] + ha[accept]
            y[ai] = ynew[accept]
            halvings[ai] = 0
            with np.errstate(all="ignore"):
                grow = settings.safety * errnorm[accept] ** -0.2
            grow = np.where(np.isfinite(grow), grow, settings.max_factor)
            fac = np.clip(grow, 1.0, settings.max_factor)
            h[ai] = sign * np.minimum(np.abs(ha[accept]) * fac, settings.max_step)
            nsteps += int(np.sum(accept))
            if record_paths:
                for i in np.flatnonzero(accept):
                    paths[idx[i]].append((float(t[idx[i]]), y[idx[i]].copy()))
            done = np.abs(t[ai] - t1) <= 1e-12 * max(1.0, abs(t1))
            active[ai[done]] = False

        if np.any(err_rej):
            ei = idx[err_rej]
            shrink = settings.safety * errnorm[err_rej] ** -0.25
            h[ei] = ha[err_rej] * np.clip(shrink, settings.min_factor, 1.0)
            nrej += int(np.sum(err_rej))

        if np.any(guard_rej):
            gi = idx[guard_rej]
            h[gi] = ha[guard_rej] / 2.0
            halvings[gi] += 1
            nrej += int(np.sum(guard_rej))

        dead = active & ((halvings > settings.max_halvings) | (np.abs(h) < h_floor))
        if np.any(dead):
            failed |= dead
            active &= ~dead

    return BatchResult(t, y, failed, angle, nsteps, nrej, paths)


@dataclass
class Trajectory:
    """Samples of one integrated path plus integrator statistics."""

    ts: np.ndarray
    ys: np.ndarray
    steps: int
    rejects: int

    @property
    def start(self):
        return self.ys[0]

    @property
    def end(self):
        return self.ys[-1]


def integrate(velocity, y0, t0, t1, settings=DEFAULT_SETTINGS, proximity=None):
    """Single-trajectory convenience wrapper; raises StepUnderflow on failure."""
    res = integrate_batch(velocity, np.atleast_2d(np.asarray(y0, dtype=float)),
                          t0, t1, settings, proximity=proximity, record_paths=True)
    if res.failed[0]:
        last_t, last_y = res.paths[0][-1]
        raise StepUnderflow(
            f"step size underflow at t={last_t:.6g}, y={np.round(last_y, 6)}",
            location=last_y, time=last_t)
    ts = np.array([p[0] for p in res.paths[0]])
    ys = np.array([p[1] for p in res.paths[0]])
    return Trajectory(ts=ts, ys=ys, steps=res.steps, rejects=res.rejects)
