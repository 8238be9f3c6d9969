"""Nodes, winding integrals, and the total-vorticity count from coefficients.

Total vorticity comes from the top-energy-shell polynomial g(z): with z on
the unit circle the top shell dominates the far-field phase, and the winding
at large radius is 2 pi (2 * #roots inside the unit disk - m).  Everything
here works on the Gaussian-stripped polynomial part P, whose phase equals the
wave function's phase everywhere.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AtNode, ImpossibleCategory, IndeterminateVorticity,
                     TrackingLost)
from .states import (OscillatorState, angular_to_cartesian, default_domain,
                     envelope_bound, poly_parts, random_state)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# the coefficient-polynomial route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VorticityClass:
    winding: int          # total vorticity / 2 pi
    category: str         # maximal | zero | intermediate

    @property
    def total_vorticity(self):
        return TWO_PI * self.winding


def top_shell_poly(state):
    """Ascending coefficients a[nd] = C_{nd, m-nd} / sqrt(nd! (m-nd)!)."""
    a = np.zeros(state.m + 1, dtype=complex)
    sel = state.n_quanta == state.m
    for nd, c in zip(state.nd[sel], state.coeffs[sel]):
        nd = int(nd)
        a[nd] = c / math.sqrt(math.factorial(nd) * math.factorial(state.m - nd))
    return a


def _category(winding, m):
    if abs(winding) == m:
        return "maximal"
    if winding == 0:
        return "zero"
    return "intermediate"


def total_vorticity(state, circle_tol=1e-9):
    """Root-count vorticity; raises IndeterminateVorticity on-circle."""
    a = top_shell_poly(state)
    if not np.any(np.abs(a) > 0):
        raise ValueError("top energy shell is empty; reduce m first")
    roots = np.roots(a[::-1])
    r = np.abs(roots)
    if np.any(np.abs(r - 1.0) < circle_tol):
        raise IndeterminateVorticity("root of the shell polynomial on the unit circle")
    winding = 2 * int(np.sum(r < 1.0)) - state.m
    return VorticityClass(winding=winding, category=_category(winding, state.m))


def generate_classified_states(m, category, count, seed):
    """Rejection-sample random states until `count` match the category."""
    if category == "zero" and m % 2 == 1:
        raise ImpossibleCategory(f"zero total vorticity is impossible for odd m={m}")
    if category not in ("zero", "maximal", "intermediate"):
        raise ValueError(f"unknown category {category!r}")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        st = random_state(m, rng)
        try:
            vc = total_vorticity(st)
        except IndeterminateVorticity:
            continue
        if vc.category == category:
            out.append(st)
    return out


def census_one(m, seed_pair):
    st = random_state(m, np.random.default_rng(seed_pair))
    try:
        vc = total_vorticity(st)
    except IndeterminateVorticity:
        return (None, "indeterminate")
    return (vc.winding, vc.category)


def census(m, count, seed, workers=1):
    """Winding numbers/categories of `count` random states; rows (k, winding, category)."""
    jobs = [(m, (seed, k)) for k in range(count)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(census_one, *zip(*jobs), chunksize=256))
    else:
        results = [census_one(mm, sp) for mm, sp in jobs]
    return [(k, w, cat) for k, (w, cat) in enumerate(results)]


# ---------------------------------------------------------------------------
# winding integrals
# ---------------------------------------------------------------------------

def winding_integral(state, t, radius, center=(0.0, 0.0), samples=4096,
                     max_samples=2**20):
    """Accumulated phase of P around a circle, in radians.

    Doubles the sample count whenever consecutive phase steps exceed pi/2
    (under-resolution); raises IndeterminateVorticity if the loop itself runs
    through a node.
    """
    cx, cy = center
    while True:
        ang = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        xs = cx + radius * np.cos(ang)
        ys = cy + radius * np.sin(ang)
        P = poly_parts(state, xs, ys, t)
        B = envelope_bound(state, np.hypot(xs, ys))
        if np.any(np.abs(P) ** 2 / B**2 < 1e-24):
            raise IndeterminateVorticity("winding loop passes through a node")
        ph = np.angle(P)
        d = np.diff(np.concatenate([ph, ph[:1]]))
        d = (d + np.pi) % TWO_PI - np.pi
        if np.max(np.abs(d)) < np.pi / 2:
            return float(np.sum(d))
        if samples >= max_samples:
            raise IndeterminateVorticity(
                f"winding unresolved at {samples} samples (fine-tuned loop?)")
        samples *= 2


# ---------------------------------------------------------------------------
# node location
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    qx: float
    qy: float
    t: float
    vorticity: float      # winding in radians, normally +-2 pi


@dataclass
class PairEvent:
    t: float
    kind: str             # "creation" | "annihilation"
    positions: tuple


@dataclass
class NodeSet:
    nodes: list
    events: list = field(default_factory=list)

    def at(self, t, tol=1e-12):
        return [n for n in self.nodes if abs(n.t - t) <= tol]

    def positions(self):
        return np.array([[n.qx, n.qy] for n in self.nodes])


def _grad_P(state, x, y, t):
    """Cartesian gradient of P; finite differences within 1e-6 of the origin."""
    eta = math.hypot(x, y)
    if eta > 1e-6:
        P, dPe, dPp = poly_parts(state, x, y, t, derivatives=True)
        c, s = x / eta, y / eta
        dx = dPe * c - dPp * s / eta
        dy = dPe * s + dPp * c / eta
        return complex(P), complex(dx), complex(dy)
    h = 1e-7
    P = complex(poly_parts(state, x, y, t))
    dx = (complex(poly_parts(state, x + h, y, t)) - complex(poly_parts(state, x - h, y, t))) / (2 * h)
    dy = (complex(poly_parts(state, x, y + h, t)) - complex(poly_parts(state, x, y - h, t))) / (2 * h)
    return P, dx, dy


def _newton_node(state, t, x, y, box, max_iter=60):
    lo_x, hi_x, lo_y, hi_y = box
    span = max(hi_x - lo_x, hi_y - lo_y)
    for _ in range(max_iter):
        P, dx, dy = _grad_P(state, x, y, t)
        J = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
        rhs = np.array([P.real, P.imag])
        try:
            step = np.linalg.solve(J, -rhs)
        except np.linalg.LinAlgError:
            return None
        norm = math.hypot(*step)
        if norm > 0.1 * span:
            step *= 0.1 * span / norm
        x += step[0]
        y += step[1]
        if not (lo_x - 0.5 <= x <= hi_x + 0.5 and lo_y - 0.5 <= y <= hi_y + 0.5):
            return None
        if math.hypot(*step) < 1e-12:
            break
    P = complex(poly_parts(state, x, y, t))
    B = float(envelope_bound(state, math.hypot(x, y)))
    if abs(P) ** 2 / B**2 < 1e-20:
        return (x, y)
    return None


def find_nodes(state, t, search_box=None, grid_n=256, with_vorticity=True):
    """Newton root-finding seeded from sign-change cells of a grid scan."""
    if search_box is None:
        L = default_domain(state.m)
        search_box = (-L, L, -L, L)
    lo_x, hi_x, lo_y, hi_y = search_box
    xs = np.linspace(lo_x, hi_x, grid_n)
    ys = np.linspace(lo_y, hi_y, grid_n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = poly_parts(state, X, Y, t)
    re, im = P.real, P.imag

    def straddles(F):
        c = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
        return (c.min(axis=0) <= 0) & (c.max(axis=0) >= 0)

    cells = straddles(re) & straddles(im)
    found = []
    for i, j in zip(*np.nonzero(cells)):
        seed = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))
        hit = _newton_node(state, t, seed[0], seed[1], search_box)
        if hit is None:
            continue
        if not (lo_x - 1e-9 <= hit[0] <= hi_x + 1e-9
                and lo_y - 1e-9 <= hit[1] <= hi_y + 1e-9):
            continue
        if all(math.hypot(hit[0] - p[0], hit[1] - p[1]) > 1e-6 for p in found):
            found.append(hit)
    nodes = []
    for x, y in found:
        v = (winding_integral(state, t, 1e-3, center=(x, y))
             if with_vorticity else math.nan)
        nodes.append(Node(qx=x, qy=y, t=t, vorticity=v))
    return NodeSet(nodes=nodes)


def m1_node_position(state, t):
    """Closed-form single-node path of an m=1 state (all three modes present)."""
    if state.m != 1:
        raise ValueError("closed-form node path needs m = 1")
    cart = angular_to_cartesian(state)
    D00, D10, D01 = cart.get((0, 0), 0j), cart.get((1, 0), 0j), cart.get((0, 1), 0j)
    d00, d10, d01 = abs(D00), abs(D10), abs(D01)
    if min(d00, d10, d01) == 0:
        raise ValueError("degenerate m=1 state: a Cartesian amplitude vanishes")
    th00, th10, th01 = np.angle(D00), np.angle(D10), np.angle(D01)
    if abs(math.sin(th10 - th01)) < 1e-12:
        raise ValueError("degenerate m=1 state: node path unbounded")
    t = np.asarray(t, dtype=float)
    qx = (d00 / (math.sqrt(2) * d10)) * np.sin(th01 - th00 - t) / math.sin(th10 - th01)
    qy = (d00 / (math.sqrt(2) * d01)) * np.sin(th10 - th00 - t) / math.sin(th01 - th10)
    return qx, qy


# ---------------------------------------------------------------------------
# node tracking
# ---------------------------------------------------------------------------

def track_nodes(state, t0, t1, dt=TWO_PI / 2000, search_box=None, grid_n=256,
                match_radius=None):
    """Follow the node set by fresh scans plus nearest-neighbor matching."""
    if match_radius is None:
        match_radius = max(20 * dt, 0.05)
    times = np.arange(t0, t1 + dt / 2, dt)
    all_nodes = []
    events = []
    prev = None
    for t in times:
        cur = find_nodes(state, float(t), search_box, grid_n).nodes
        if prev is not None:
            unmatched_old = list(range(len(prev)))
            unmatched_new = list(range(len(cur)))
            pairs = sorted(
                ((math.hypot(prev[i].qx - cur[j].qx, prev[i].qy - cur[j].qy), i, j)
                 for i in unmatched_old for j in unmatched_new))
            for d, i, j in pairs:
                if i in unmatched_old and j in unmatched_new and d <= match_radius:
                    unmatched_old.remove(i)
                    unmatched_new.remove(j)
            if unmatched_old and unmatched_new:
                raise TrackingLost(
                    f"ambiguous continuation at T={t:.5f}: "
                    f"{len(unmatched_old)} lost and {len(unmatched_new)} new")
            if len(unmatched_new) % 2 or len(unmatched_old) % 2:
                raise TrackingLost(f"odd node-count change at T={t:.5f}")
            for j0, j1 in zip(unmatched_new[::2], unmatched_new[1::2]):
                events.append(PairEvent(t=float(t), kind="creation",
                                        positions=((cur[j0].qx, cur[j0].qy),
                                                   (cur[j1].qx, cur[j1].qy))))
            for i0, i1 in zip(unmatched_old[::2], unmatched_old[1::2]):
                events.append(PairEvent(t=float(t), kind="annihilation",
                                        positions=((prev[i0].qx, prev[i0].qy),
                                                   (prev[i1].qx, prev[i1].qy))))
        all_nodes.extend(cur)
        prev = cur
    return NodeSet(nodes=all_nodes, events=events), times
