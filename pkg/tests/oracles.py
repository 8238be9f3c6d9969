"""Independent oracle routes used by the test suite.

Everything in here is deliberately built by a different method than the
package: symbolic raising operators instead of cached coefficient tables,
Gauss-Hermite projection instead of algebraic transforms, finite differences
of unwrapped phases instead of analytic gradients. Nothing imports pilotwave.
"""

import math
from functools import lru_cache

import numpy as np
import sympy as sp


# ---------------------------------------------------------------------------
# 2-D oscillator basis via raising operators
#
# Work with the polynomial part g(w, wbar) defined by
#   chi(x, y) = g(w, wbar) * exp(-(x^2+y^2)/2) / sqrt(pi),  w = x + i y.
# On such g the circular raising operators act as
#   A_d : g -> w g - d g / d wbar
#   A_g : g -> wbar g - d g / d w
# and chi_{nd,ng} has g = A_d^nd A_g^ng [1] / sqrt(nd! ng!).
# ---------------------------------------------------------------------------

_w, _wb = sp.symbols("w wbar")


@lru_cache(maxsize=None)
def sym_poly_part(nd, ng):
    """Symbolic polynomial part of the angular basis function (nd, ng)."""
    g = sp.Integer(1)
    for _ in range(ng):
        g = sp.expand(_wb * g - sp.diff(g, _w))
    for _ in range(nd):
        g = sp.expand(_w * g - sp.diff(g, _wb))
    return sp.expand(g / sp.sqrt(sp.factorial(nd) * sp.factorial(ng)))


@lru_cache(maxsize=None)
def poly_part_coeffs(nd, ng):
    """{(a, b): complex} coefficients of w^a wbar^b in the polynomial part."""
    poly = sp.Poly(sym_poly_part(nd, ng), _w, _wb)
    out = {}
    for (a, b), c in zip(poly.monoms(), poly.coeffs()):
        out[(a, b)] = complex(c)
    return out


@lru_cache(maxsize=None)
def radial_coeffs_oracle(nd, ng):
    """Coefficients of f_{nd,ng}(eta) in ascending powers of eta.

    f is defined by  g(w, wbar) = f(eta) exp(i (nd-ng) phi)  with w = eta e^{i phi},
    so the (a, b) monomial w^a wbar^b contributes eta^{a+b} at a - b = nd - ng.
    """
    coeffs = np.zeros(nd + ng + 1)
    for (a, b), c in poly_part_coeffs(nd, ng).items():
        assert a - b == nd - ng
        assert abs(c.imag) < 1e-12
        coeffs[a + b] += c.real
    return coeffs


def eval_poly_part(coeff_dict, x, y):
    """Evaluate a {(a,b): c} polynomial at w = x + i y (array friendly)."""
    w = np.asarray(x, dtype=complex) + 1j * np.asarray(y, dtype=float)
    wb = np.conj(w)
    out = np.zeros_like(w)
    for (a, b), c in coeff_dict.items():
        out = out + c * w**a * wb**b
    return out


def psi_oracle(coeffs, x, y, t):
    """Wave function from angular coefficients {(nd, ng): C} the symbolic way."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    acc = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for (nd, ng), c in coeffs.items():
        if c == 0:
            continue
        val = eval_poly_part(poly_part_coeffs(nd, ng), x, y)
        acc = acc + c * np.exp(-1j * (nd + ng) * t) * val
    return acc * np.exp(-(x**2 + y**2) / 2) / math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Cartesian basis and the shell transform by numerical projection
# ---------------------------------------------------------------------------

def hermite_phys(n, x):
    """Physicists' Hermite polynomial by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    h0 = np.ones_like(x)
    if n == 0:
        return h0
    h1 = 2 * x
    for k in range(1, n):
        h0, h1 = h1, 2 * x * h1 - 2 * k * h0
    return h1


def h_1d(n, x):
    """Normalized 1-D oscillator eigenfunction H_n(x) e^{-x^2/2}/sqrt(2^n n! sqrt(pi))."""
    norm = math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
    return hermite_phys(n, x) * np.exp(-np.asarray(x, float) ** 2 / 2) / norm


@lru_cache(maxsize=None)
def shell_transform_oracle(n):
    """U[nx, nd] with chi_{nd, n-nd} = sum_nx U[nx, nd] psi_{nx, n-nx}.

    Computed by Gauss-Hermite projection of the symbolic angular functions
    onto Cartesian product eigenfunctions; exact up to quadrature roundoff.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(n + 8)
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    WXY = np.outer(weights, weights)
    U = np.zeros((n + 1, n + 1), dtype=complex)
    for nd in range(n + 1):
        ng = n - nd
        # integrand with the Gaussian weight split off: chi = g e^{-r^2/2}/sqrt(pi)
        gval = eval_poly_part(poly_part_coeffs(nd, ng), X, Y) / math.sqrt(math.pi)
        for nx in range(n + 1):
            ny = n - nx
            normxy = math.sqrt(
                2.0**n * math.factorial(nx) * math.factorial(ny) * math.pi
            )
            hval = hermite_phys(nx, X) * hermite_phys(ny, Y) / normxy
            U[nx, nd] = np.sum(WXY * hval * gval)
    return U


def cartesian_from_angular_oracle(coeffs, m):
    """{(nx, ny): D} from {(nd, ng): C} via the projection transform."""
    out = {}
    for n in range(m + 1):
        c_vec = np.array([coeffs.get((nd, n - nd), 0.0) for nd in range(n + 1)],
                         dtype=complex)
        if not np.any(c_vec):
            continue
        d_vec = shell_transform_oracle(n) @ c_vec
        for nx in range(n + 1):
            out[(nx, n - nx)] = out.get((nx, n - nx), 0.0) + d_vec[nx]
    return out


def psi_cartesian_oracle(coeffs, x, y, t):
    """Wave function evaluated through the Cartesian route (Hermite recurrence)."""
    cart = cartesian_from_angular_oracle(coeffs, max(a + b for a, b in coeffs))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    acc = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for (nx, ny), d in cart.items():
        acc = acc + d * np.exp(-1j * (nx + ny) * t) * h_1d(nx, x) * h_1d(ny, y)
    return acc


# ---------------------------------------------------------------------------
# Finite-difference velocity and winding oracles
# ---------------------------------------------------------------------------

def fd_velocity(psi_func, x, y, t, h=1e-5):
    """v = grad(Im log psi) by centred differences of the relative phase."""
    def rel_phase(p1, p0):
        return np.angle(p1 * np.conj(p0))

    vx = rel_phase(psi_func(x + h, y, t), psi_func(x - h, y, t)) / (2 * h)
    vy = rel_phase(psi_func(x, y + h, t), psi_func(x, y - h, t)) / (2 * h)
    return vx, vy


def winding_oracle(psi_func, t, radius, center=(0.0, 0.0), samples=8192):
    """Total phase change around a closed loop, in radians."""
    ang = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    xs = center[0] + radius * np.cos(ang)
    ys = center[1] + radius * np.sin(ang)
    ph = np.angle(psi_func(xs, ys, t))
    d = np.diff(np.concatenate([ph, ph[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return float(np.sum(d))


# ---------------------------------------------------------------------------
# m=1 closed-form node path (from the Cartesian coefficients d e^{i theta})
# ---------------------------------------------------------------------------

def node_path_m1(d00, d10, d01, T):
    """Position of the single node of a generic m=1 state at time T."""
    a00, th00 = abs(d00), np.angle(d00)
    a10, th10 = abs(d10), np.angle(d10)
    a01, th01 = abs(d01), np.angle(d01)
    qx = (a00 / a10) * np.sin(th01 - th00 - T) / np.sin(th10 - th01) / math.sqrt(2)
    qy = (a00 / a01) * np.sin(th10 - th00 - T) / np.sin(th01 - th10) / math.sqrt(2)
    return qx, qy


# ---------------------------------------------------------------------------
# Measurement model: mode-sum wave function and generic guidance by FD
# ---------------------------------------------------------------------------

def measurement_psi(c, Q, Y, T):
    """Pointer-coupled wave function for mode amplitudes c = [c0, c1, ...]."""
    Q = np.asarray(Q, dtype=float)
    Y = np.asarray(Y, dtype=float)
    acc = np.zeros(np.broadcast(Q, Y).shape, dtype=complex)
    for n, cn in enumerate(c):
        if cn == 0:
            continue
        norm = math.sqrt(math.pi * 2.0 ** (n + 0.5) * math.factorial(n))
        acc = acc + (cn / norm) * np.exp(-0.25 * (Y - (2 * n + 1) * T) ** 2) \
            * np.exp(-Q**2 / 2) * hermite_phys(n, Q)
    return acc


def measurement_velocity_fd(c, Q, Y, T, h=1e-5):
    """Generic pointer-model guidance from the wave function by differencing.

    dQ/dT = Re(-4/3 d_Q d_Y Psi / Psi + 2/3 d_Y Psi conj(d_Q Psi)/|Psi|^2)
    dY/dT = Re(-2/3 d_Q^2 Psi / Psi + 1/3 |d_Q Psi|^2 / |Psi|^2) + Q^2
    """
    p = measurement_psi(c, Q, Y, T)
    pq = (measurement_psi(c, Q + h, Y, T) - measurement_psi(c, Q - h, Y, T)) / (2 * h)
    py = (measurement_psi(c, Q, Y + h, T) - measurement_psi(c, Q, Y - h, T)) / (2 * h)
    pqq = (measurement_psi(c, Q + h, Y, T) - 2 * p
           + measurement_psi(c, Q - h, Y, T)) / h**2
    pqy = (measurement_psi(c, Q + h, Y + h, T) - measurement_psi(c, Q + h, Y - h, T)
           - measurement_psi(c, Q - h, Y + h, T)
           + measurement_psi(c, Q - h, Y - h, T)) / (4 * h**2)
    dens = np.abs(p) ** 2
    vq = np.real(-4.0 / 3.0 * pqy / p + 2.0 / 3.0 * py * np.conj(pq) / dens)
    vy = np.real(-2.0 / 3.0 * pqq / p + 1.0 / 3.0 * pq * np.conj(pq) / dens) + Q**2
    return vq, vy


# ---------------------------------------------------------------------------
# Two-field decay: explicit wave function and FD guidance with cross terms
# ---------------------------------------------------------------------------

def decay_psi(q1, q2, t, omega=1.0, g=1.0):
    c = math.cos(g * t / (2 * omega))
    s = math.sin(g * t / (2 * omega))
    pref = np.exp(-1j * omega * t) * (omega / math.pi) ** 0.5 * math.sqrt(2 * omega)
    gauss = np.exp(-omega * (np.asarray(q1, float) ** 2 + np.asarray(q2, float) ** 2) / 2)
    return pref * gauss * (c * np.asarray(q1, float) - 1j * s * np.asarray(q2, float))


def decay_velocity_fd(q1, q2, t, omega=1.0, g=1.0, h=1e-6):
    """qdot_i = d_i S + (g / 2 omega^2) d_j S with S the phase of the decay state."""
    def dS(dq1, dq2):
        p1 = decay_psi(q1 + dq1 * h, q2 + dq2 * h, t, omega, g)
        p0 = decay_psi(q1 - dq1 * h, q2 - dq2 * h, t, omega, g)
        return np.angle(p1 * np.conj(p0)) / (2 * h)

    s1, s2 = dS(1, 0), dS(0, 1)
    lam = g / (2 * omega**2)
    return s1 + lam * s2, s2 + lam * s1


# ---------------------------------------------------------------------------
# Misc closed forms
# ---------------------------------------------------------------------------

def kl_gauss(sig_rho, sig_psi):
    """KL(N(0, sig_rho^2) || N(0, sig_psi^2)), natural log."""
    r = sig_rho / sig_psi
    return math.log(1.0 / r) + r**2 / 2 - 0.5


def ks_statistic(samples, cdf):
    """Two-sided Kolmogorov-Smirnov distance of samples against a CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    f = cdf(x)
    up = np.max(np.arange(1, n + 1) / n - f)
    lo = np.max(f - np.arange(0, n) / n)
    return float(max(up, lo))


def one_particle_cdf(q):
    """CDF of the one-particle Born marginal 2 q^2 e^{-q^2} / sqrt(pi)."""
    from scipy.special import erf
    q = np.asarray(q, dtype=float)
    return 0.5 * (1 + erf(q)) - q * np.exp(-(q**2)) / math.sqrt(math.pi)


def rotated_gaussian(x, y, cx, cy, sig, angle):
    """Isotropic Gaussian blob initially at (cx, cy), rotated about the origin."""
    ca, sa = math.cos(angle), math.sin(angle)
    px, py = ca * cx - sa * cy, sa * cx + ca * cy
    r2 = (np.asarray(x, float) - px) ** 2 + (np.asarray(y, float) - py) ** 2
    return np.exp(-r2 / (2 * sig**2)) / (2 * math.pi * sig**2)


def orbit_constant_oracle(Q, devE):
    return devE**2 / 2 + Q**2 - np.log(np.abs(Q)) - np.log(np.abs(Q**2 - 1))


def vacuum_pointer_invariant(Q, Yp):
    return Yp**2 / 2 + Q**2 - np.log(np.abs(Q))
