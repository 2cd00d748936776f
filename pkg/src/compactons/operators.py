"""Periodic grid, compact-difference stencils, and cyclic banded linear algebra.

The spatial discretization is built from five circulant pentadiagonal
stencils on a uniform periodic grid: a weighted average ``mass`` that
multiplies the time derivative, and implicit approximations ``deriv1`` ..
``deriv4`` of the first four spatial derivatives (each understood as
``mass^-1 @ derivK``).  Stencil coefficients are exact rationals; the grid
spacing enters only through each operator's ``scale`` factor.

Linear systems with these matrices (optionally perturbed along the
diagonals, as in a Newton step) are cyclic pentadiagonal.  They are solved
in O(M) time by banded LU on the interior plus a rank-4 Woodbury
correction for the six periodic corner entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

_OFFSETS = (-2, -1, 0, 1, 2)


class NumericalError(RuntimeError):
    """A linear solve failed (singular or numerically singular matrix).

    Carries the offending pivot magnitude in ``pivot``.
    """

    def __init__(self, message: str, pivot: float | None = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic mesh of ``m`` nodes with spacing ``dx``.

    Node ``j`` sits at ``x0 + j*dx``; index arithmetic is modulo ``m``.
    """

    m: int
    dx: float
    x0: float = 0.0

    def __post_init__(self):
        if self.m < 5:
            raise ValueError(f"grid needs at least 5 nodes, got m={self.m}")
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}")

    @property
    def length(self) -> float:
        return self.m * self.dx

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.m)

    def wrap(self, x):
        """Reduce coordinate(s) into [x0, x0 + length)."""
        return self.x0 + np.mod(x - self.x0, self.length)

    def node_coordinate(self, j: int) -> float:
        return self.x0 + (j % self.m) * self.dx


@dataclass(frozen=True)
class CirculantPentaOperator:
    """Five-point circulant stencil: ``(op u)_j = scale * sum_s c_s u_{j+s}``.

    ``coeffs`` are the exact rational stencil weights for offsets -2..+2;
    ``scale`` carries the rational prefactor and the power of the grid
    spacing.  ``unit_weight`` is the exactly-rounded value of
    ``scale * sum(coeffs)`` (1.0 for the averaging stencil, 0.0 for the
    derivative stencils), used so that applying a derivative stencil to a
    constant field yields exactly zero.
    """

    coeffs: tuple[Fraction, Fraction, Fraction, Fraction, Fraction]
    scale: float
    unit_weight: float

    @cached_property
    def weights(self) -> np.ndarray:
        """Floating-point weights scale*c_s for offsets -2..+2."""
        return np.array([float(c) for c in self.coeffs]) * self.scale

    @cached_property
    def _off_weights(self) -> tuple[float, float, float, float]:
        w = self.weights
        return (w[0], w[1], w[3], w[4])

    def apply(self, u: np.ndarray, grid: PeriodicGrid | None = None) -> np.ndarray:
        """Apply the stencil with periodic wraparound.

        Computed in the telescoped form ``unit_weight*u + sum_s w_s*(u_{j+s} - u_j)``
        so that constant fields map to exactly ``unit_weight * u``.
        """
        u = np.asarray(u, dtype=float)
        if u.ndim != 1:
            raise ValueError(f"field must be one-dimensional, got shape {u.shape}")
        if grid is not None and u.shape[0] != grid.m:
            raise ValueError(
                f"field length {u.shape[0]} does not match grid with m={grid.m}"
            )
        if u.shape[0] < 5:
            raise ValueError("field must have at least 5 entries")
        return apply_stencil(self._off_weights, self.unit_weight, u)

    def symbol(self, k, dx: float):
        """Exact Fourier symbol ``scale * sum_s c_s exp(i s k dx)``.

        Trigonometric evaluation, valid for scalar or array ``k``.
        """
        k = np.asarray(k, dtype=float)
        acc = np.zeros(np.broadcast(k).shape, dtype=complex)
        for s, c in zip(_OFFSETS, self.coeffs):
            acc = acc + float(c) * np.exp(1j * s * k * dx)
        out = self.scale * acc
        return complex(out) if out.ndim == 0 else out


def apply_stencil(off_weights, unit_weight: float, u: np.ndarray) -> np.ndarray:
    """Pentadiagonal circulant stencil application via neighbor differences.

    ``off_weights`` are the weights at offsets (-2, -1, +1, +2).  Writing the
    stencil as ``unit_weight*u + sum w_s (u_{j+s} - u_j)`` makes every
    zero-sum stencil annihilate constants exactly in floating point.
    """
    m = u.shape[0]
    ext = np.concatenate((u[-2:], u, u[:2]))
    out = off_weights[0] * (ext[0:m] - u)
    out += off_weights[1] * (ext[1 : m + 1] - u)
    out += off_weights[2] * (ext[3 : m + 3] - u)
    out += off_weights[3] * (ext[4 : m + 4] - u)
    if unit_weight != 0.0:
        out += unit_weight * u
    return out


@dataclass(frozen=True)
class OperatorSet:
    """The five compact-difference stencils for one grid spacing."""

    mass: CirculantPentaOperator    # weighted average multiplying du/dt
    deriv1: CirculantPentaOperator  # first derivative (via mass^-1)
    deriv2: CirculantPentaOperator  # second derivative
    deriv3: CirculantPentaOperator  # third derivative
    deriv4: CirculantPentaOperator  # fourth derivative
    dx: float


def _make_operator(stencil, denominator, dx_power, dx) -> CirculantPentaOperator:
    coeffs = tuple(Fraction(c) for c in stencil)
    scale = 1.0 / (float(denominator) * dx**dx_power)
    unit_weight = float(Fraction(sum(stencil), denominator))
    return CirculantPentaOperator(coeffs=coeffs, scale=scale, unit_weight=unit_weight)


def build_operator_set(dx: float) -> OperatorSet:
    """Construct the five stencils for grid spacing ``dx``.

    mass   = (1, 26, 66, 26, 1) / 120
    deriv1 = (-1, -10, 0, 10, 1) / (24 dx)
    deriv2 = (1, 2, -6, 2, 1) / (6 dx^2)
    deriv3 = (-1, 2, 0, -2, 1) / (2 dx^3)
    deriv4 = (1, -4, 6, -4, 1) / dx^4
    """
    if not dx > 0:
        raise ValueError(f"grid spacing must be positive, got dx={dx}")
    return OperatorSet(
        mass=_make_operator((1, 26, 66, 26, 1), 120, 0, dx),
        deriv1=_make_operator((-1, -10, 0, 10, 1), 24, 1, dx),
        deriv2=_make_operator((1, 2, -6, 2, 1), 6, 2, dx),
        deriv3=_make_operator((-1, 2, 0, -2, 1), 2, 3, dx),
        deriv4=_make_operator((1, -4, 6, -4, 1), 1, 4, dx),
        dx=dx,
    )


class CyclicPentaMatrix:
    """Pentadiagonal matrix with periodic wraparound, stored by diagonals.

    ``bands`` has shape (5, m): ``bands[s + 2, j]`` multiplies ``x[(j + s) % m]``
    in row ``j``.  Constant bands give a circulant matrix; position-dependent
    bands cover Newton matrices where a stencil is composed with a pointwise
    factor.
    """

    __slots__ = ("bands", "m")

    def __init__(self, bands: np.ndarray):
        bands = np.ascontiguousarray(bands, dtype=float)
        if bands.ndim != 2 or bands.shape[0] != 5:
            raise ValueError(f"bands must have shape (5, m), got {bands.shape}")
        if bands.shape[1] < 5:
            raise ValueError("matrix dimension must be at least 5")
        self.bands = bands
        self.m = bands.shape[1]

    @classmethod
    def from_operator(
        cls,
        op: CirculantPentaOperator,
        m: int,
        diag: np.ndarray | None = None,
    ) -> "CyclicPentaMatrix":
        """Circulant matrix of ``op`` plus an optional extra main diagonal."""
        bands = np.repeat(op.weights[:, None], m, axis=1)
        if diag is not None:
            diag = np.asarray(diag, dtype=float)
            if diag.shape != (m,):
                raise ValueError(f"diagonal perturbation must have shape ({m},)")
            bands[2] += diag
        return cls(bands)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise ValueError(f"vector must have shape ({self.m},), got {x.shape}")
        ext = np.concatenate((x[-2:], x, x[:2]))
        out = self.bands[0] * ext[0 : self.m]
        for i in range(1, 5):
            out += self.bands[i] * ext[i : i + self.m]
        return out

    def dense(self) -> np.ndarray:
        """Dense matrix, for small-m testing only."""
        a = np.zeros((self.m, self.m))
        for s in _OFFSETS:
            for j in range(self.m):
                a[j, (j + s) % self.m] += self.bands[s + 2, j]
        return a

    def factor(self, pivot_rtol: float = 1e-13) -> "CyclicPentaFactorization":
        return CyclicPentaFactorization(self, pivot_rtol=pivot_rtol)


class CyclicPentaFactorization:
    """LU factorization of a CyclicPentaMatrix.

    Banded LU (LAPACK gbtrf) of the matrix with the six periodic corner
    entries removed, plus a rank-4 Woodbury correction restoring those
    corners.  Reusable for repeated solves; single-owner, not thread-safe.
    """

    _KL = _KU = 2

    def __init__(self, matrix: CyclicPentaMatrix, pivot_rtol: float = 1e-13):
        bands = matrix.bands
        m = matrix.m
        self.m = m

        # Band storage for gbtrf: entry (j, j+s) -> ab[kl + ku - s, j + s],
        # first kl rows are fill-in workspace.  Wrapped entries excluded.
        ab = np.zeros((2 * self._KL + self._KU + 1, m), order="F")
        base = self._KL + self._KU
        for s in _OFFSETS:
            if s >= 0:
                ab[base - s, s:m] = bands[s + 2, 0 : m - s]
            else:
                ab[base - s, 0 : m + s] = bands[s + 2, -s:m]

        lu, ipiv, info = lapack.dgbtrf(ab, self._KL, self._KU, overwrite_ab=1)
        if info > 0:
            raise NumericalError(
                f"cyclic banded factorization hit an exactly zero pivot at row {info - 1}",
                pivot=0.0,
            )
        if info < 0:
            raise NumericalError(f"gbtrf failed with illegal argument {-info}")
        diag = np.abs(lu[base, :])
        pivot_min = float(diag.min())
        pivot_floor = pivot_rtol * float(diag.max())
        if pivot_min <= pivot_floor:
            raise NumericalError(
                f"cyclic banded factorization is numerically singular "
                f"(pivot {pivot_min:.3e} below threshold {pivot_floor:.3e})",
                pivot=pivot_min,
            )
        self._lu = lu
        self._ipiv = ipiv

        # Rank-4 update A_full = A_band + U V: U has unit columns at the four
        # corner rows, V holds the removed corner entries (nonzero only in
        # the four corner columns).
        rows = (0, 1, m - 2, m - 1)
        cols = (0, 1, m - 2, m - 1)
        vc = np.zeros((4, 4))
        vc[0, 2] = bands[0, 0]      # (0, m-2), offset -2
        vc[0, 3] = bands[1, 0]      # (0, m-1), offset -1
        vc[1, 3] = bands[0, 1]      # (1, m-1), offset -2
        vc[2, 0] = bands[4, m - 2]  # (m-2, 0), offset +2
        vc[3, 0] = bands[3, m - 1]  # (m-1, 0), offset +1
        vc[3, 1] = bands[4, m - 1]  # (m-1, 1), offset +2
        self._corner_cols = np.array(cols)
        self._vc = vc

        uu = np.zeros((m, 4), order="F")
        for col, r in enumerate(rows):
            uu[r, col] = 1.0
        z, info = lapack.dgbtrs(self._lu, self._KL, self._KU, uu, self._ipiv, overwrite_b=1)
        if info != 0:
            raise NumericalError(f"gbtrs failed with info={info}")
        self._z = z

        cap = np.eye(4) + vc @ z[self._corner_cols, :]
        try:
            self._cap_lu = lu_factor(cap)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalError(f"corner correction is singular: {exc}", pivot=0.0)
        cap_diag = np.abs(np.diag(self._cap_lu[0]))
        if cap_diag.min() <= pivot_rtol * max(1.0, cap_diag.max()):
            raise NumericalError(
                "corner correction is numerically singular "
                f"(pivot {cap_diag.min():.3e})",
                pivot=float(cap_diag.min()),
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        squeeze = rhs.ndim == 1
        b = np.asfortranarray(rhs.reshape(self.m, -1))
        y, info = lapack.dgbtrs(self._lu, self._KL, self._KU, b, self._ipiv)
        if info != 0:
            raise NumericalError(f"gbtrs failed with info={info}")
        t = self._vc @ y[self._corner_cols, :]
        x = y - self._z @ lu_solve(self._cap_lu, t)
        return x[:, 0] if squeeze else x


def solve_circulant_banded(
    op: CirculantPentaOperator | CyclicPentaMatrix,
    rhs: np.ndarray,
    diag: np.ndarray | None = None,
) -> np.ndarray:
    """Solve ``(op + diag(diag)) x = rhs`` on the periodic grid.

    ``op`` may be a stencil (expanded to its circulant matrix) or an
    already-built CyclicPentaMatrix.  Linear cost in the field length.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim != 1:
        raise ValueError(f"rhs must be one-dimensional, got shape {rhs.shape}")
    if isinstance(op, CyclicPentaMatrix):
        if diag is not None:
            bands = op.bands.copy()
            bands[2] += diag
            op = CyclicPentaMatrix(bands)
        matrix = op
    else:
        matrix = CyclicPentaMatrix.from_operator(op, rhs.shape[0], diag=diag)
    if matrix.m != rhs.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match matrix size {matrix.m}")
    return matrix.factor().solve(rhs)
