"""Periodic pseudo-spectral foundation: grids, transforms, symbols, norms.

Conventions, fixed here once and relied on everywhere else:

* The forward transform divides by N^d (numpy's ``norm="forward"``), so the
  coefficient of a plain cosine is 1/2 at the two conjugate modes and the
  zero-mode coefficient is the mean of the field.
* Wavenumbers are xi_k = 2*pi*k/L with k in the standard signed FFT ordering;
  the mode at index N/2 carries k = -N/2 (numpy's fftfreq choice).
* Derivatives multiply by i*xi and zero the Nyquist mode, which keeps odd
  derivatives of real data exactly real.
* The dealias mask keeps a mode iff every |k_i| <= N/3. Since N is a power of
  two, floor(N/3) < N/3 strictly, so products of two mask-limited fields are
  exact (alias-free) on the kept band.
* Sobolev norms carry the L^d volume factor: |f|_{H^s}^2 = L^d * sum over
  modes of <xi>^{2s} |fhat|^2, with <xi> = (1+|xi|^2)^{1/2}. This matches the
  continuum integral for resolved fields and is grid-resolution independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

PHYSICAL = "physical"
SPECTRAL = "spectral"


class SpectralGrid:
    """Immutable discretization of the torus [0, L)^d, d in {1, 2}.

    Use :func:`make_grid`; the constructor does not validate.
    """

    def __init__(self, dim: int, n: int, length: float):
        self.dim = dim
        self.n = n
        self.length = float(length)
        self.shape = (n,) * dim
        self.dx = self.length / n
        self.volume = self.length**dim

        freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx)
        coords = np.arange(n) * self.dx
        if dim == 1:
            self.xi = (freqs.copy(),)
            self.x = (coords.copy(),)
        else:
            self.xi = tuple(np.meshgrid(freqs, freqs, indexing="ij"))
            self.x = tuple(np.meshgrid(coords, coords, indexing="ij"))

        self.xi_abs = np.sqrt(sum(c**2 for c in self.xi))
        self.bracket = np.sqrt(1.0 + self.xi_abs**2)

        # two-thirds rule: kill any mode with |k_i| > N/3
        k = np.abs(np.fft.fftfreq(n, d=1.0 / n))  # integer mode numbers
        keep = k <= n / 3.0
        if dim == 1:
            self.dealias_mask = keep.copy()
        else:
            self.dealias_mask = np.logical_and.outer(keep, keep)

        # i*xi with the Nyquist line zeroed, one array per axis
        nyq = np.abs(np.fft.fftfreq(n, d=1.0 / n)) == n // 2
        ik = []
        for axis in range(dim):
            a = 1j * self.xi[axis]
            if dim == 1:
                a[nyq] = 0.0
            else:
                a[(nyq, slice(None)) if axis == 0 else (slice(None), nyq)] = 0.0
            ik.append(a)
        self._ik = tuple(ik)

        for arr in (*self.xi, *self.x, self.xi_abs, self.bracket,
                    self.dealias_mask, *self._ik):
            arr.setflags(write=False)

    def fft(self, values: npt.NDArray) -> npt.NDArray:
        return np.fft.fftn(values, norm="forward")

    def ifft(self, coeffs: npt.NDArray) -> npt.NDArray:
        return np.fft.ifftn(coeffs, norm="forward").real

    def deriv(self, coeffs: npt.NDArray, axis: int) -> npt.NDArray:
        """d/dx_axis in coefficient space, Nyquist zeroed."""
        return self._ik[axis] * coeffs

    def __eq__(self, other) -> bool:
        return (isinstance(other, SpectralGrid)
                and (self.dim, self.n, self.length) == (other.dim, other.n, other.length))

    def __hash__(self):
        return hash((self.dim, self.n, self.length))

    def __repr__(self):
        return f"SpectralGrid(dim={self.dim}, n={self.n}, length={self.length})"


def make_grid(dim: int, n: int, length: float) -> SpectralGrid:
    """Validated grid constructor.

    dim must be 1 or 2, n a power of two >= 8, length > 0.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 8, got {n}")
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    return SpectralGrid(dim, int(n), float(length))


@dataclass
class ScalarField:
    """Samples of one real scalar on a grid, in physical or spectral form."""

    grid: SpectralGrid
    values: npt.NDArray
    rep: str = PHYSICAL

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match "
                             f"grid shape {self.grid.shape}")
        if self.rep == PHYSICAL:
            if np.iscomplexobj(self.values):
                raise ValueError("physical representation must be real")
            self.values = self.values.astype(np.float64, copy=False)
        elif self.rep == SPECTRAL:
            self.values = self.values.astype(np.complex128, copy=False)
        else:
            raise ValueError(f"unknown representation {self.rep!r}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.rep)


@dataclass
class VectorField:
    """d scalar components sharing one grid and one representation."""

    grid: SpectralGrid
    values: npt.NDArray  # shape (dim,) + grid.shape
    rep: str = PHYSICAL

    def __post_init__(self):
        self.values = np.asarray(self.values)
        want = (self.grid.dim,) + self.grid.shape
        if self.values.shape != want:
            raise ValueError(f"vector shape {self.values.shape}, expected {want}")
        if self.rep == PHYSICAL:
            if np.iscomplexobj(self.values):
                raise ValueError("physical representation must be real")
            self.values = self.values.astype(np.float64, copy=False)
        elif self.rep == SPECTRAL:
            self.values = self.values.astype(np.complex128, copy=False)
        else:
            raise ValueError(f"unknown representation {self.rep!r}")

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i], self.rep)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy(), self.rep)


Field = ScalarField | VectorField


def transform(f: Field) -> Field:
    """One round-trip-exact hop between representations.

    Physical -> spectral divides by N^d; spectral -> physical takes the real
    part, which is a no-op for Hermitian-symmetric data.
    """
    cls = type(f)
    if f.rep == PHYSICAL:
        if isinstance(f, VectorField):
            out = np.stack([f.grid.fft(c) for c in f.values])
        else:
            out = f.grid.fft(f.values)
        return cls(f.grid, out, SPECTRAL)
    if isinstance(f, VectorField):
        out = np.stack([f.grid.ifft(c) for c in f.values])
    else:
        out = f.grid.ifft(f.values)
    return cls(f.grid, out, PHYSICAL)


def _spectral_values(f: Field) -> npt.NDArray:
    if f.rep == SPECTRAL:
        return f.values
    if isinstance(f, VectorField):
        return np.stack([f.grid.fft(c) for c in f.values])
    return f.grid.fft(f.values)


def _symbol_values(symbol, grid: SpectralGrid) -> npt.NDArray:
    """Evaluate a symbol argument (array over modes, or callable of |xi|)."""
    vals = np.asarray(symbol(grid.xi_abs) if callable(symbol) else symbol,
                      dtype=np.float64)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("symbol evaluates to a non-finite value on a grid mode")
    return vals


def apply_symbol(symbol, f: Field) -> Field:
    """Multiply spectral coefficients pointwise by a real bounded symbol.

    ``symbol`` is either an ndarray of values over the grid's modes or a
    callable evaluated on |xi|. Vector fields are treated componentwise.
    Output representation matches the input.
    """
    vals = _symbol_values(symbol, f.grid)
    hat = _spectral_values(f)
    out = type(f)(f.grid, vals * hat, SPECTRAL)
    return out if f.rep == SPECTRAL else transform(out)


def spectral_derivative(f: Field, axis: int) -> Field:
    if axis >= f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {f.grid.dim}")
    hat = _spectral_values(f)
    if isinstance(f, VectorField):
        out = np.stack([f.grid.deriv(c, axis) for c in hat])
    else:
        out = f.grid.deriv(hat, axis)
    res = type(f)(f.grid, out, SPECTRAL)
    return res if f.rep == SPECTRAL else transform(res)


def dealias(f: Field) -> Field:
    hat = _spectral_values(f) * f.grid.dealias_mask
    res = type(f)(f.grid, hat, SPECTRAL)
    return res if f.rep == SPECTRAL else transform(res)


def dealias_product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product of two scalar fields, projected onto the kept band.

    For mask-limited inputs this equals the exact product of the underlying
    trigonometric polynomials on the kept modes.
    """
    if f.grid != g.grid:
        raise ValueError("operands live on different grids")
    a = f.values if f.rep == PHYSICAL else f.grid.ifft(f.values)
    b = g.values if g.rep == PHYSICAL else g.grid.ifft(g.values)
    hat = f.grid.fft(a * b) * f.grid.dealias_mask
    res = ScalarField(f.grid, hat, SPECTRAL)
    return res if f.rep == SPECTRAL else transform(res)


def sobolev_norm(f: Field, s: float) -> float:
    """H^s norm; for vector fields the euclidean norm of component norms."""
    hat = _spectral_values(f)
    w = f.grid.bracket ** (2.0 * s)
    total = np.sum(w * np.abs(hat) ** 2)
    return float(np.sqrt(f.grid.volume * total))


def inner_product(f: Field, g: Field) -> float:
    """L^2 quadrature pairing (f, g)_2 = (L^d/N^d) * sum f*g."""
    if f.grid != g.grid:
        raise ValueError("operands live on different grids")
    a = f.values if f.rep == PHYSICAL else transform(f).values
    b = g.values if g.rep == PHYSICAL else transform(g).values
    n_total = f.grid.n ** f.grid.dim
    return float(f.grid.volume / n_total * np.sum(a * b))
