"""Dense-matrix oracles for the one-dimensional operator layer.

Everything here is assembled from explicit DFT matrices and plain matrix
products, never from the package's FFT pipelines, so agreement with the
spectral implementations is a genuine cross-check. Inner products use the
uniform quadrature weight, under which the adjoint of a matrix is its
transpose.

Layout: a state (zeta, v) on an n-point grid is the stacked vector
[zeta; v] of length 2n.
"""

import numpy as np

from whitham_lab.operators import make_state
from whitham_lab.symbols import symbol_eval


def dft_pair(n: int):
    """Forward matrix matching fft(norm="forward") and its inverse."""
    k = np.arange(n)
    phase = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return phase / n, np.conj(phase)


def symbol_matrix(grid, values) -> np.ndarray:
    """Multiplier with the given per-mode values, as a real n x n matrix."""
    fwd, inv = dft_pair(grid.n)
    return (inv @ np.diag(values) @ fwd).real


def projection_matrix(grid) -> np.ndarray:
    return symbol_matrix(grid, grid.dealias_mask.astype(float))


def mult_matrix(grid, f_phys) -> np.ndarray:
    """Projected multiplication: project, multiply pointwise, project."""
    p = projection_matrix(grid)
    return p @ np.diag(f_phys) @ p


def derivative_matrix(grid) -> np.ndarray:
    fwd, inv = dft_pair(grid.n)
    return (inv @ np.diag(grid._ik[0]) @ fwd).real


def _pieces(frozen, params):
    grid = frozen.grid
    g1 = symbol_eval(params.pair.g1, grid.xi_abs)
    g2 = symbol_eval(params.pair.g2, grid.xi_abs)
    g1sq_m = symbol_matrix(grid, g1 * g1)
    g2_m = symbol_matrix(grid, g2)
    w = g2_m @ frozen.v.values[0]
    return g1sq_m, g2_m, mult_matrix(grid, w), \
        mult_matrix(grid, frozen.zeta.values)


def dense_coefficient(frozen, params) -> np.ndarray:
    """The quasi-linear coefficient matrix (the factor in front of the
    spatial derivative) as a 2n x 2n block matrix."""
    n = frozen.grid.n
    eps = params.epsilon
    g1sq_m, g2_m, mw, mz = _pieces(frozen, params)
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = eps * g2_m @ mw
    out[:n, n:] = g1sq_m + eps * g2_m @ mz @ g2_m
    out[n:, :n] = np.eye(n)
    out[n:, n:] = eps * mw @ g2_m
    return out


def dense_symmetrizer(frozen, params) -> np.ndarray:
    """Block diagonal: identity on the surface, the energy weight on v."""
    n = frozen.grid.n
    eps = params.epsilon
    g1sq_m, g2_m, _, mz = _pieces(frozen, params)
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = np.eye(n)
    out[n:, n:] = g1sq_m + eps * g2_m @ mz @ g2_m
    return out


def dense_weighted(frozen, params) -> np.ndarray:
    """Symmetrizer times coefficient, composed at the matrix level."""
    return dense_symmetrizer(frozen, params) @ dense_coefficient(frozen,
                                                                 params)


def dense_symmetric_part(frozen, params) -> np.ndarray:
    b = dense_weighted(frozen, params)
    return 0.5 * (b + b.T)


def dense_skew_remainder(frozen, params) -> np.ndarray:
    """-(W - W*)/(2 eps) straight from the transpose; needs eps > 0."""
    if params.epsilon == 0:
        raise ValueError("direct quotient undefined at eps = 0")
    b = dense_weighted(frozen, params)
    return -(b - b.T) / (2.0 * params.epsilon)


def stack(state) -> np.ndarray:
    return np.concatenate([state.zeta.values, state.v.values[0]])


def unstack(grid, vec):
    n = grid.n
    return make_state(grid, vec[:n], vec[n:][None])


def materialize(apply_fn, grid) -> np.ndarray:
    """Turn a state-to-state operator into its dense matrix by applying
    it to every basis vector."""
    n2 = 2 * grid.n
    cols = np.empty((n2, n2))
    for j in range(n2):
        e = np.zeros(n2)
        e[j] = 1.0
        cols[:, j] = stack(apply_fn(unstack(grid, e)))
    return cols
