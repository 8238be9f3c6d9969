"""States of the 2-D isotropic harmonic oscillator.

Dimensionless coordinates (Qx, Qy), eta = |Q|, phi anticlockwise from the Qx
axis, time T with wave-function period 2 pi.  States live in the circular
("angular") basis chi_{nd,ng} with chi_00 = exp(-eta^2/2)/sqrt(pi); the
Cartesian product basis is reachable through an exact per-shell unitary
generated from the creation-operator expansion.

The polynomial parts are kept separate from the Gaussian envelope throughout:
psi = P(eta, phi, T) exp(-eta^2/2)/sqrt(pi).  All velocity work downstream
uses P only, which stays well scaled at any radius.
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CutoffExceeded

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class Configuration:
    """A point (Qx, Qy) of the dimensionless configuration plane."""

    qx: float
    qy: float

    @property
    def eta(self):
        return math.hypot(self.qx, self.qy)

    @property
    def phi(self):
        return math.atan2(self.qy, self.qx)


def as_xy(config):
    """Accept Configuration, pair, or array; return (qx, qy) floats/arrays."""
    if isinstance(config, Configuration):
        return config.qx, config.qy
    arr = np.asarray(config, dtype=float)
    return arr[..., 0], arr[..., 1]


# ---------------------------------------------------------------------------
# radial polynomials
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def radial_poly_coeffs(nd, ng):
    """Ascending coefficients of the degree nd+ng radial polynomial f_{nd,ng}.

    Closed form: for nd >= ng the polynomial is
    (-1)^ng sqrt(ng!/nd!) eta^(nd-ng) L_ng^(nd-ng)(eta^2), symmetric under
    swapping the indices.  Only every other power appears.
    """
    lo, hi = sorted((int(nd), int(ng)))
    if lo < 0:
        raise ValueError("basis indices must be nonnegative")
    alpha = hi - lo
    pref = math.sqrt(math.factorial(lo) / math.factorial(hi))
    c = np.zeros(hi + lo + 1)
    for k in range(lo + 1):
        c[alpha + 2 * k] = (-1.0) ** (lo + k) * pref * math.comb(hi, lo - k) / math.factorial(k)
    c.setflags(write=False)
    return c


def eval_radial_poly(nd, ng, eta):
    """f_{nd,ng}(eta); total function, symmetric in (nd, ng)."""
    return npoly.polyval(np.asarray(eta, dtype=float), radial_poly_coeffs(nd, ng))


# ---------------------------------------------------------------------------
# per-shell basis transform
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def shell_transform(n):
    """Unitary U with chi_{nd, n-nd} = sum_nx U[nx, nd] psi^cart_{nx, n-nx}.

    Obtained by expanding the circular creation operators in the Cartesian
    ones: (a_x^+ +- i a_y^+)/sqrt(2) raised to the shell powers.
    """
    U = np.zeros((n + 1, n + 1), dtype=complex)
    for nd in range(n + 1):
        ng = n - nd
        base = 2.0 ** (-n / 2) / math.sqrt(math.factorial(nd) * math.factorial(ng))
        for nx in range(n + 1):
            ny = n - nx
            s = 0j
            for j in range(max(0, nx - ng), min(nd, nx) + 1):
                k = nx - j
                s += (math.comb(nd, j) * math.comb(ng, k)
                      * (1j) ** (nd - j) * (-1j) ** (ng - k))
            U[nx, nd] = base * math.sqrt(math.factorial(nx) * math.factorial(ny)) * s
    U.setflags(write=False)
    return U


# Closed-form transform entries for the low shells, kept as an independent
# check of the generated unitary (and to serve callers who ask for the
# tabulated path explicitly).  Rows keyed (nx, ny), columns (nd, ng).
_R = math.sqrt
_TABULATED = {
    0: {(0, 0): {(0, 0): 1.0}},
    1: {(1, 0): {(1, 0): _R(1 / 2), (0, 1): _R(1 / 2)},
        (0, 1): {(1, 0): 1j * _R(1 / 2), (0, 1): -1j * _R(1 / 2)}},
    2: {(2, 0): {(2, 0): _R(1 / 4), (1, 1): _R(2 / 4), (0, 2): _R(1 / 4)},
        (1, 1): {(2, 0): 1j * _R(1 / 2), (0, 2): -1j * _R(1 / 2)},
        (0, 2): {(2, 0): -_R(1 / 4), (1, 1): _R(2 / 4), (0, 2): -_R(1 / 4)}},
    3: {(3, 0): {(3, 0): _R(2 / 16), (2, 1): _R(6 / 16), (1, 2): _R(6 / 16), (0, 3): _R(2 / 16)},
        (2, 1): {(3, 0): 1j * _R(6 / 16), (2, 1): 1j * _R(2 / 16),
                 (1, 2): -1j * _R(2 / 16), (0, 3): -1j * _R(6 / 16)},
        (1, 2): {(3, 0): -_R(6 / 16), (2, 1): _R(2 / 16), (1, 2): _R(2 / 16), (0, 3): -_R(6 / 16)},
        (0, 3): {(3, 0): -1j * _R(2 / 16), (2, 1): 1j * _R(6 / 16),
                 (1, 2): -1j * _R(6 / 16), (0, 3): 1j * _R(2 / 16)}},
    4: {(4, 0): {(4, 0): _R(1 / 16), (3, 1): _R(4 / 16), (2, 2): _R(6 / 16),
                 (1, 3): _R(4 / 16), (0, 4): _R(1 / 16)},
        (3, 1): {(4, 0): 1j * _R(4 / 16), (3, 1): 1j * _R(4 / 16),
                 (1, 3): -1j * _R(4 / 16), (0, 4): -1j * _R(4 / 16)},
        (2, 2): {(4, 0): -_R(6 / 16), (2, 2): _R(4 / 16), (0, 4): -_R(6 / 16)},
        (1, 3): {(4, 0): -1j * _R(4 / 16), (3, 1): 1j * _R(4 / 16),
                 (1, 3): -1j * _R(4 / 16), (0, 4): 1j * _R(4 / 16)},
        (0, 4): {(4, 0): _R(1 / 16), (3, 1): -_R(4 / 16), (2, 2): _R(6 / 16),
                 (1, 3): -_R(4 / 16), (0, 4): _R(1 / 16)}},
}


def shell_transform_tabulated(n):
    if n not in _TABULATED:
        raise CutoffExceeded(f"tabulated transform only covers shells 0..4, got {n}")
    U = np.zeros((n + 1, n + 1), dtype=complex)
    for (nx, _), cols in _TABULATED[n].items():
        for (nd, _), val in cols.items():
            U[nx, nd] = val
    return U


# ---------------------------------------------------------------------------
# the state container
# ---------------------------------------------------------------------------

NORM_TOL = 1e-12


@dataclass(frozen=True)
class OscillatorState:
    """Superposition over the angular basis up to energy shell m.

    coeffs[k] multiplies chi_{nd[k], ng[k]}; all shells with nd+ng <= m are
    present in a fixed (n, nd) ordering, possibly with zero amplitude.
    """

    nd: np.ndarray
    ng: np.ndarray
    coeffs: np.ndarray
    m: int

    def __post_init__(self):
        norm2 = float(np.sum(np.abs(self.coeffs) ** 2))
        if abs(norm2 - 1.0) > 1e-9:
            raise ValueError(f"state norm^2 = {norm2}, expected 1")
        for arr in (self.nd, self.ng, self.coeffs):
            arr.setflags(write=False)

    @property
    def n_quanta(self):
        return self.nd + self.ng

    @property
    def ang_momentum(self):
        return self.nd - self.ng

    def coeff_dict(self):
        return {(int(a), int(b)): complex(c)
                for a, b, c in zip(self.nd, self.ng, self.coeffs) if c != 0}


def basis_indices(m):
    """Deterministic (nd, ng) ordering: by shell, then by nd."""
    pairs = [(nd, n - nd) for n in range(m + 1) for nd in range(n + 1)]
    nd = np.array([p[0] for p in pairs], dtype=int)
    ng = np.array([p[1] for p in pairs], dtype=int)
    return nd, ng


def make_state(coeff_dict, m=None, normalize=False):
    """Build a state from {(nd, ng): C}; validates (or restores) unit norm."""
    if not coeff_dict:
        raise ValueError("empty coefficient set")
    mm = max(a + b for a, b in coeff_dict) if m is None else int(m)
    if any(a + b > mm for a, b in coeff_dict):
        raise ValueError("coefficient beyond requested cutoff")
    nd, ng = basis_indices(mm)
    c = np.array([coeff_dict.get((int(a), int(b)), 0.0) for a, b in zip(nd, ng)],
                 dtype=complex)
    norm = math.sqrt(float(np.sum(np.abs(c) ** 2)))
    if normalize:
        if norm == 0:
            raise ValueError("cannot normalize the zero state")
        c = c / norm
    elif abs(norm - 1.0) > 1e-6:
        raise ValueError(f"coefficients have norm {norm}; pass normalize=True")
    else:
        c = c / norm  # remove residual rounding so the invariant holds exactly
    return OscillatorState(nd=nd, ng=ng, coeffs=c, m=mm)


def random_state(m, seed):
    """Magnitudes uniform on [0,1] (then normalized), phases uniform on [0, 2pi)."""
    if m < 1:
        raise ValueError("need m >= 1")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    nd, ng = basis_indices(m)
    mags = rng.uniform(size=len(nd))
    phases = rng.uniform(0.0, 2 * np.pi, size=len(nd))
    c = mags * np.exp(1j * phases)
    c /= math.sqrt(float(np.sum(mags**2)))
    return OscillatorState(nd=nd, ng=ng, coeffs=c, m=int(m))


def default_domain(m):
    """Half-width of the square evaluation domain (Born mass outside < 1e-10)."""
    return 8.0 if m <= 4 else 8.0 * math.sqrt((m + 1) / 5.0)


def fine_tuned(state, tol=1e-9):
    """Flag exact magnitude ties or phase gaps at multiples of pi/2.

    Advisory only; such coincidences can place winding integrals exactly on
    top of degenerate structures.
    """
    c = state.coeffs[np.abs(state.coeffs) > 0]
    mags = np.abs(c)
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            if abs(mags[i] - mags[j]) < tol:
                return True
            gap = np.angle(c[i] / c[j]) % (np.pi / 2)
            if min(gap, np.pi / 2 - gap) < tol:
                return True
    return False


# ---------------------------------------------------------------------------
# evaluation (polynomial part and full wave function)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _coeff_matrix(m):
    """F[k, j]: coefficient of eta^j in the k-th basis radial polynomial."""
    nd, ng = basis_indices(m)
    F = np.zeros((len(nd), m + 1))
    for k, (a, b) in enumerate(zip(nd, ng)):
        ck = radial_poly_coeffs(int(a), int(b))
        F[k, :len(ck)] = ck
    F.setflags(write=False)
    return F


@lru_cache(maxsize=None)
def _deriv_matrix(m):
    """Row-wise derivative coefficients of _coeff_matrix(m)."""
    F = _coeff_matrix(m)
    Fd = np.zeros((F.shape[0], max(1, m)))
    for k in range(F.shape[0]):
        d = npoly.polyder(F[k])
        Fd[k, :len(d)] = d
    Fd.setflags(write=False)
    return Fd


def poly_parts(state, qx, qy, t, derivatives=False):
    """P (and d P/d eta, d P/d phi) with psi = P exp(-eta^2/2)/sqrt(pi).

    Broadcasts over point arrays; t may be a scalar or an array matching the
    points (per-point times are what the batched integrator feeds in).  The
    mode sum runs as one (modes, points) block per call.
    """
    eta, phi, tt = np.broadcast_arrays(
        np.hypot(qx, qy), np.arctan2(qy, qx), np.asarray(t, dtype=float))
    shp = eta.shape
    eta, phi, tt = eta.ravel(), phi.ravel(), tt.ravel()

    live = np.abs(state.coeffs) > 0
    C = state.coeffs[live]
    nq = state.n_quanta[live].astype(float)
    lq = state.ang_momentum[live].astype(float)
    mode = C[:, None] * np.exp(1j * (lq[:, None] * phi - nq[:, None] * tt))
    fv = npoly.polyval(eta, _coeff_matrix(state.m)[live].T)
    P = np.sum(mode * fv, axis=0).reshape(shp)
    if not derivatives:
        return P
    fd = npoly.polyval(eta, _deriv_matrix(state.m)[live].T)
    dPe = np.sum(mode * fd, axis=0).reshape(shp)
    dPp = np.sum(1j * lq[:, None] * mode * fv, axis=0).reshape(shp)
    return P, dPe, dPp


def eval_psi(state, qx, qy, t):
    """psi(Qx, Qy, T), Gaussian envelope included."""
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    eta2 = qx**2 + qy**2
    return poly_parts(state, qx, qy, t) * np.exp(-eta2 / 2) / SQRT_PI


def eval_grad_psi(state, qx, qy, t):
    """Polar partials (d psi/d eta, d psi/d phi)."""
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    eta = np.hypot(qx, qy)
    P, dPe, dPp = poly_parts(state, qx, qy, t, derivatives=True)
    env = np.exp(-(eta**2) / 2) / SQRT_PI
    return (dPe - eta * P) * env, dPp * env


def envelope_bound(state, eta):
    """Upper bound on |P| at radius eta, used for scale-invariant node tests.

    sum_k |C_k| ||f_k||_1 max(1, eta)^deg_k dominates |P| pointwise and
    tracks its natural growth, so |P|^2 / bound^2 is a dimensionless
    proximity-to-node measure valid at any radius.
    """
    F = _coeff_matrix(state.m)
    l1 = np.sum(np.abs(F), axis=1)
    s = np.maximum(1.0, np.asarray(eta, dtype=float))
    out = np.zeros_like(s)
    for k, c in enumerate(state.coeffs):
        if c == 0:
            continue
        out += abs(c) * l1[k] * s ** int(state.n_quanta[k])
    return out


# ---------------------------------------------------------------------------
# Cartesian (Hermite) evaluation on tensor grids
# ---------------------------------------------------------------------------

def hermite_functions(xs, nmax):
    """Rows h_n(x) = H_n(x) e^{-x^2/2} / sqrt(2^n n! sqrt(pi)), n = 0..nmax."""
    xs = np.asarray(xs, dtype=float)
    H = np.empty((nmax + 1, xs.size))
    H[0] = np.pi ** -0.25 * np.exp(-xs**2 / 2)
    if nmax >= 1:
        H[1] = math.sqrt(2.0) * xs * H[0]
    for n in range(1, nmax):
        H[n + 1] = (math.sqrt(2.0 / (n + 1)) * xs * H[n]
                    - math.sqrt(n / (n + 1)) * H[n - 1])
    return H


def hermite_function_derivs(xs, nmax, H=None):
    """h_n'(x) = sqrt(2n) h_{n-1}(x) - x h_n(x)."""
    xs = np.asarray(xs, dtype=float)
    if H is None:
        H = hermite_functions(xs, nmax)
    D = np.empty_like(H)
    D[0] = -xs * H[0]
    for n in range(1, nmax + 1):
        D[n] = math.sqrt(2.0 * n) * H[n - 1] - xs * H[n]
    return D


def eval_psi_grid(state, xs, ys, t, derivatives=False):
    """psi (and optionally d psi/dx, d psi/dy) on the tensor grid xs x ys.

    Separable: psi = Hx^T (px D py) Hy with px, py the per-axis time phases,
    so the cost is a few (m+1) x n matrix products however fine the grid.
    """
    m = state.m
    D = cartesian_matrix(state)
    ph = np.exp(-1j * np.arange(m + 1) * t)
    Dt = ph[:, None] * D * ph[None, :]
    Hx = hermite_functions(xs, m)
    Hy = hermite_functions(ys, m)
    psi = Hx.T @ Dt @ Hy
    if not derivatives:
        return psi
    dHx = hermite_function_derivs(xs, m, Hx)
    dHy = hermite_function_derivs(ys, m, Hy)
    return psi, dHx.T @ Dt @ Hy, Hx.T @ Dt @ dHy


# ---------------------------------------------------------------------------
# basis translation
# ---------------------------------------------------------------------------

def angular_to_cartesian(state, method="generated"):
    """{(nx, ny): D} from the angular coefficients; norm preserved exactly."""
    pick = {"generated": shell_transform, "tabulated": shell_transform_tabulated}[method]
    out = {}
    for n in range(state.m + 1):
        sel = state.n_quanta == n
        if not np.any(np.abs(state.coeffs[sel]) > 0):
            continue
        c_vec = np.zeros(n + 1, dtype=complex)
        for a, cc in zip(state.nd[sel], state.coeffs[sel]):
            c_vec[int(a)] = cc
        d_vec = pick(n) @ c_vec
        for nx in range(n + 1):
            out[(nx, n - nx)] = d_vec[nx]
    return out


def cartesian_to_angular(cart, m=None, method="generated"):
    """{(nd, ng): C} from {(nx, ny): D} using the adjoint shell unitaries."""
    pick = {"generated": shell_transform, "tabulated": shell_transform_tabulated}[method]
    mm = max(a + b for a, b in cart) if m is None else int(m)
    out = {}
    for n in range(mm + 1):
        d_vec = np.array([cart.get((nx, n - nx), 0.0) for nx in range(n + 1)],
                         dtype=complex)
        if not np.any(d_vec):
            continue
        c_vec = pick(n).conj().T @ d_vec
        for nd in range(n + 1):
            out[(nd, n - nd)] = c_vec[nd]
    return out


def state_from_cartesian(cart, m=None, normalize=False):
    return make_state(cartesian_to_angular(cart, m), m=m, normalize=normalize)


def cartesian_matrix(state):
    """D as an (m+1) x (m+1) matrix, D[nx, ny], zero above the anti-diagonal."""
    D = np.zeros((state.m + 1, state.m + 1), dtype=complex)
    for (nx, ny), d in angular_to_cartesian(state).items():
        D[nx, ny] = d
    return D


# ---------------------------------------------------------------------------
# state files
# ---------------------------------------------------------------------------

def state_to_json(state, basis="angular"):
    if basis == "angular":
        coeffs = [[int(a), int(b), float(c.real), float(c.imag)]
                  for a, b, c in zip(state.nd, state.ng, state.coeffs)]
    elif basis == "cartesian":
        cart = angular_to_cartesian(state)
        coeffs = [[nx, ny, float(d.real), float(d.imag)]
                  for (nx, ny), d in sorted(cart.items())]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return {"basis": basis, "m": state.m, "coeffs": coeffs}


def state_from_json(doc):
    basis = doc.get("basis", "angular")
    m = int(doc["m"])
    pairs = {(int(r[0]), int(r[1])): complex(r[2], r[3]) for r in doc["coeffs"]}
    if basis == "angular":
        return make_state(pairs, m=m)
    if basis == "cartesian":
        return state_from_cartesian(pairs, m=m)
    raise ValueError(f"unknown basis {basis!r}")


def save_state(state, path, basis="angular"):
    with open(path, "w") as fh:
        json.dump(state_to_json(state, basis), fh, indent=1)
        fh.write("\n")


def load_state(path):
    with open(path) as fh:
        return state_from_json(json.load(fh))


def sample_born(state, n, rng, t=0.0, grid_n=512, half_width=None):
    """n draws from |psi|^2 at time t: categorical over a fine grid plus
    in-cell jitter.  Cell error is O(grid_n^-2) in distribution."""
    L = default_domain(state.m) if half_width is None else float(half_width)
    d = 2.0 * L / grid_n
    xs = -L + d * (np.arange(grid_n) + 0.5)
    w = np.abs(eval_psi_grid(state, xs, xs, t)) ** 2
    flat = w.ravel() / w.sum()
    cells = rng.choice(flat.size, size=n, p=flat)
    ix, iy = np.unravel_index(cells, w.shape)
    jit = rng.uniform(-0.5, 0.5, size=(2, n))
    return np.stack([xs[ix] + d * jit[0], xs[iy] + d * jit[1]], axis=1)
