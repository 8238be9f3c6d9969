"""Entropy functionals: discrete, Jaynes relative, and the coarse-grained H.

Natural logarithm throughout.  The discrete-transition theorem (entropy is
conserved for every distribution iff the transition matrix is a permutation)
is exposed as two independent checks whose agreement is a tested property.
"""

import numpy as np

from .errors import SupportMismatch

ENTROPY_TOL = 1e-9
PERMUTATION_TOL = 1e-12


def discrete_entropy(p):
    """-sum p ln p with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability distribution")
    pos = p[p > 0]
    return float(-np.sum(pos * np.log(pos)))


def random_distribution(n, rng):
    p = rng.uniform(size=n)
    return p / p.sum()


def validate_transition(T):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(T < -PERMUTATION_TOL) or np.any(T > 1 + PERMUTATION_TOL):
        raise ValueError("entries must lie in [0, 1]")
    if np.any(np.abs(T.sum(axis=0) - 1.0) > 1e-12):
        raise ValueError("columns must sum to 1")
    return T


def is_permutation_matrix(T, tol=PERMUTATION_TOL):
    T = np.asarray(T, dtype=float)
    near01 = np.minimum(np.abs(T), np.abs(T - 1.0)) <= tol
    return bool(near01.all()
                and np.all(np.abs(T.sum(axis=0) - 1.0) <= tol)
                and np.all(np.abs(T.sum(axis=1) - 1.0) <= tol))


def entropy_preserved_on_samples(T, trials=100, seed=0, tol=ENTROPY_TOL):
    """True when S(Tp) = S(p) for every sampled random distribution."""
    T = validate_transition(T)
    rng = np.random.default_rng(seed)
    n = T.shape[0]
    for _ in range(trials):
        p = random_distribution(n, rng)
        if abs(discrete_entropy(T @ p) - discrete_entropy(p)) > tol:
            return False
    return True


def is_entropy_conserving(T, trials=100, seed=0):
    """Sampled-conservation AND permutation structure (they must agree)."""
    return entropy_preserved_on_samples(T, trials, seed) and is_permutation_matrix(T)


# ---------------------------------------------------------------------------
# continuous functionals on grids
# ---------------------------------------------------------------------------

def jaynes_entropy(rho, m, cell_area):
    """-sum rho ln(rho/m) * cell_area over cells; m is the density of states."""
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any((rho > 1e-12) & (m < 1e-300)):
        raise SupportMismatch("rho has mass where the density of states vanishes")
    sel = rho > 0
    out = -np.sum(rho[sel] * np.log(rho[sel] / m[sel])) * cell_area
    return float(out)


class CoarseGrain:
    """Uniform block coarse-graining; fine cells per axis must divide evenly."""

    def __init__(self, n_cells_x=32, n_cells_y=32):
        self.n_cells_x = int(n_cells_x)
        self.n_cells_y = int(n_cells_y)

    def average(self, arr):
        nx, ny = arr.shape
        if nx % self.n_cells_x or ny % self.n_cells_y:
            raise ValueError(
                f"grid {nx}x{ny} not divisible by coarse cells "
                f"{self.n_cells_x}x{self.n_cells_y}")
        bx, by = nx // self.n_cells_x, ny // self.n_cells_y
        return arr.reshape(self.n_cells_x, bx, self.n_cells_y, by).mean(axis=(1, 3))


def coarse_grained_H(rho, psi2, cg, cell_area):
    """Hbar = sum rhobar ln(rhobar / psi2bar) over coarse cells (>= 0).

    cell_area is the fine-cell area; coarse cells are uniform blocks.  Cells
    where either average underflows to <= 0 contribute nothing.
    """
    rb = cg.average(np.asarray(rho, dtype=float))
    pb = cg.average(np.asarray(psi2, dtype=float))
    nx, ny = np.asarray(rho).shape
    block_area = cell_area * (nx // cg.n_cells_x) * (ny // cg.n_cells_y)
    sel = (rb > 0) & (pb > 0)
    return float(np.sum(rb[sel] * np.log(rb[sel] / pb[sel])) * block_area)
