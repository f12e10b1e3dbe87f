"""Pseudo-spectral field machinery on a periodic box.

Conventions
-----------
Scalar fields are real ``float64`` arrays of shape ``grid.shape``
(``points_per_axis`` repeated ``dim`` times).  Vector fields carry a leading
component axis of length ``grid.dim``.  Derivatives are exact derivatives of
the trigonometric interpolant; the Nyquist mode is dropped from first
derivatives so that ``div(grad(f))`` and ``laplacian(f)`` agree bit-for-bit.

Every public operation returns a fresh array and never mutates its inputs,
so grids and fields are safe to share across worker threads.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as _fft

__all__ = ["SpectralGrid", "save_field", "load_field"]

_MAGIC = b"SPECF1\n"


class SpectralGrid:
    """Uniform periodic grid with Fourier transforms and calculus.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    points_per_axis : int
        Even number of points per axis, at least 8.
    extent : float
        Period of the box along every axis (default ``2*pi``).
    dealias : bool
        If True (default), :meth:`mask` removes modes with any
        ``|k_i| > points_per_axis // 3`` (the 2/3 rule); nonlinear solver
        tendencies are filtered through this mask.
    """

    def __init__(self, dim: int = 2, points_per_axis: int = 64,
                 extent: float = 2.0 * np.pi, dealias: bool = True):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        n = int(points_per_axis)
        if n < 8 or n % 2 != 0:
            raise ValueError(f"points_per_axis must be even and >= 8, got {points_per_axis}")
        if extent <= 0:
            raise ValueError("extent must be positive")
        self.dim = dim
        self.n = n
        self.extent = float(extent)
        self.dealias = bool(dealias)
        self.shape = (n,) * dim
        self.dx = self.extent / n
        self.volume = self.extent ** dim

        # Integer mode numbers per axis in FFT layout; scaled to wavenumbers.
        ints = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., n/2-1, -n/2, ..., -1
        scale = 2.0 * np.pi / self.extent
        axes = np.meshgrid(*([ints] * dim), indexing="ij")
        self.k = np.stack([scale * a for a in axes])          # (dim, *shape)

        # First-derivative multipliers zero the Nyquist mode (odd derivative
        # of the symmetric interpolant); |k|^2 is built from the same vectors
        # so operator identities hold exactly.
        kd = self.k.copy()
        for ax in range(dim):
            idx = [slice(None)] * dim
            idx[ax] = n // 2
            kd[(ax, *idx)] = 0.0
        self.ik = 1j * kd
        self.ksq = np.sum(kd * kd, axis=0)
        # True |k|^2 including the Nyquist mode: used for norms and spectral
        # envelopes, where Nyquist content must count as high-frequency.
        self.ksq_full = np.sum(self.k * self.k, axis=0)

        cut = n // 3
        keep = np.ones(self.shape, dtype=bool)
        for a in axes:
            keep &= np.abs(a) <= cut
        self.dealias_mask = keep
        self._fft_axes = tuple(range(-dim, 0))

    # -- transforms -------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        """Forward transform over the spatial axes (component axes pass through)."""
        return _fft.fftn(f, axes=self._fft_axes)

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        """Inverse transform back to a real field."""
        return _fft.ifftn(fhat, axes=self._fft_axes).real

    def coeffs(self, f: np.ndarray) -> np.ndarray:
        """Trig-interpolant coefficients, i.e. ``fft(f)`` normalized by point count."""
        return self.fft(f) / float(self.n ** self.dim)

    def grid_points(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, *shape)``."""
        x1 = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    # -- calculus ---------------------------------------------------------

    def deriv(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Spectral partial derivative along ``axis`` (0-based spatial axis)."""
        return self.ifft(self.ik[axis] * self.fft(f))

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Gradient of a scalar field, shape ``(dim, *shape)``."""
        fhat = self.fft(f)
        return self.ifft(self.ik * fhat[np.newaxis])

    def div(self, v: np.ndarray) -> np.ndarray:
        """Divergence of a vector field."""
        vhat = self.fft(v)
        return self.ifft(np.sum(self.ik * vhat, axis=0))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Laplacian of a scalar or vector field."""
        return self.ifft(-self.ksq * self.fft(f))

    def grad_div(self, v: np.ndarray) -> np.ndarray:
        """Gradient of the divergence of a vector field."""
        dhat = np.sum(self.ik * self.fft(v), axis=0)
        return self.ifft(self.ik * dhat[np.newaxis])

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        """All first derivatives of a vector field; ``jac[i, j] = d v_i / d x_j``."""
        vhat = self.fft(v)
        return self.ifft(self.ik[np.newaxis, :] * vhat[:, np.newaxis])

    def hessian(self, f: np.ndarray) -> np.ndarray:
        """Second derivatives of a scalar field; ``hess[i, j] = d^2 f / dx_i dx_j``."""
        fhat = self.fft(f)
        return self.ifft(self.ik[:, np.newaxis] * self.ik[np.newaxis, :] * fhat)

    # -- norms and projections --------------------------------------------

    def integral(self, f: np.ndarray) -> float:
        """Exact quadrature of a band-limited field over the box.

        Component axes of a vector field are summed.
        """
        return float(np.sum(np.mean(f, axis=self._fft_axes)) * self.volume)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete L2 inner product (component axes summed over)."""
        return self.integral(f * g)

    def sobolev_norm(self, f: np.ndarray, order: int = 0) -> float:
        """Discrete Sobolev norm via the ``(1 + |k|^2)^order`` multiplier.

        Matches the continuum L2 norm at ``order=0`` (Parseval); vector
        fields contribute the sum of squared component norms.
        """
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        chat = self.coeffs(f)
        w = (1.0 + self.ksq_full) ** order
        total = np.sum(w * np.abs(chat) ** 2)
        return float(np.sqrt(self.volume * total))

    def leray_project(self, v: np.ndarray) -> np.ndarray:
        """Project a vector field onto its divergence-free part.

        Gradient parts are removed exactly in spectral space; the mean
        (k = 0) component is untouched.
        """
        if v.shape[0] != self.dim:
            raise ValueError("leray_project expects a vector field")
        vhat = self.fft(v)
        ksq = np.where(self.ksq == 0.0, 1.0, self.ksq)
        k = self.ik.imag  # zeroed-Nyquist wavenumbers
        proj = np.sum(k * vhat, axis=0) / ksq
        vhat = vhat - k * proj[np.newaxis]
        return self.ifft(vhat)

    def helmholtz_solve(self, a: float, b: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(a*I - b*Laplacian) x = rhs`` exactly in Fourier space."""
        if a <= 0:
            raise ValueError(f"helmholtz_solve requires a > 0, got a={a}")
        if b < 0:
            raise ValueError(f"helmholtz_solve requires b >= 0, got b={b}")
        return self.ifft(self.fft(rhs) / (a + b * self.ksq))

    def mask(self, f: np.ndarray) -> np.ndarray:
        """Apply the 2/3-rule filter (identity when ``dealias`` is off)."""
        if not self.dealias:
            return np.array(f, copy=True)
        return self.ifft(self.fft(f) * self.dealias_mask)

    def mask_spectral(self, fhat: np.ndarray) -> np.ndarray:
        """Spectral-space version of :meth:`mask`."""
        if not self.dealias:
            return fhat
        return fhat * self.dealias_mask

    def __repr__(self):
        return (f"SpectralGrid(dim={self.dim}, points_per_axis={self.n}, "
                f"extent={self.extent:.6g}, dealias={self.dealias})")


def save_field(path, field: np.ndarray, grid: SpectralGrid) -> None:
    """Write a field snapshot: ASCII header, then little-endian float64, C order.

    Header: ``SPECF1\\n`` magic followed by one line
    ``dim=<d> n=<n> ncomp=<c> extent=<e>\\n``.
    """
    arr = np.asarray(field, dtype=np.float64)
    ncomp = 1 if arr.ndim == grid.dim else arr.shape[0]
    header = f"dim={grid.dim} n={grid.n} ncomp={ncomp} extent={grid.extent!r}\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("ascii"))
        fh.write(arr.astype("<f8").tobytes(order="C"))


def load_field(path):
    """Read a snapshot written by :func:`save_field`.

    Returns ``(field, meta)`` where ``meta`` has keys dim, n, ncomp, extent.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field snapshot (bad magic)")
        header = fh.readline().decode("ascii").strip()
        meta = {}
        for item in header.split():
            key, val = item.split("=")
            meta[key] = float(val) if key == "extent" else int(val)
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = (meta["n"],) * meta["dim"]
    if meta["ncomp"] > 1:
        shape = (meta["ncomp"],) + shape
    return data.reshape(shape).copy(), meta
