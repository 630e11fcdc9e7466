"""Truncated Fourier fields on a periodic box.

Fields are stored as full complex coefficient arrays with the lattice axes
last: a scalar has shape ``(N1, N2, N3)``, a vector ``(3, N1, N2, N3)`` and a
tensor ``(3, 3, N1, N2, N3)``.  Coefficients are normalised so that

    f(x) = sum_k fhat[k] exp(i k.x),

the Nyquist plane is always zero and fields are real (conjugate symmetric).

Nonlinear terms go through :meth:`Grid.evaluate`, which zero-pads the inputs
to a physical grid large enough that the projection of a degree-``p``
polynomial product back onto the resolved band is exact (the dealiasing
theorem behind the 2/3 rule).
"""

from __future__ import annotations

import os
import struct
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

SpectralScalarField = np.ndarray
SpectralVectorField = np.ndarray
SpectralTensorField = np.ndarray

AXES = (-3, -2, -1)


class RankError(ValueError):
    """Operator applied to a field of the wrong tensor rank."""


class GridMismatchError(ValueError):
    """Fields from different grids were combined."""


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SMECTIC_THREADS", "1")))
    except ValueError:
        return 1


def rank_of(f: np.ndarray) -> int:
    return f.ndim - 3


class Grid:
    """Periodic box ``[0, L1) x [0, L2) x [0, L3)`` with ``N_i`` modes per axis."""

    def __init__(self, n: int | Sequence[int] = 16, lengths: float | Sequence[float] = 2 * np.pi):
        shape = (n,) * 3 if np.isscalar(n) else tuple(int(x) for x in n)
        lengths = (float(lengths),) * 3 if np.isscalar(lengths) else tuple(float(x) for x in lengths)
        if len(shape) != 3 or len(lengths) != 3:
            raise ValueError("grid needs three axes")
        for N in shape:
            if N < 4 or N % 2:
                raise ValueError(f"modes per axis must be even and >= 4, got {N}")
        if min(lengths) <= 0:
            raise ValueError("box lengths must be positive")
        self.shape = shape
        self.lengths = lengths
        self.volume = float(np.prod(lengths))
        ms = [np.fft.fftfreq(N, 1.0 / N).astype(int) for N in shape]
        self.m = [ms[0][:, None, None], ms[1][None, :, None], ms[2][None, None, :]]
        self.k = np.array(
            np.broadcast_arrays(*[2 * np.pi * m / L for m, L in zip(self.m, lengths)])
        )
        self.k2 = np.sum(self.k**2, axis=0)
        self.band = self.modes(max(shape))

    def __eq__(self, other):
        return isinstance(other, Grid) and self.shape == other.shape and self.lengths == other.lengths

    def __hash__(self):
        return hash((self.shape, self.lengths))

    def __repr__(self):
        return f"Grid(n={self.shape}, lengths={self.lengths})"

    def modes(self, n: int) -> np.ndarray:
        """Boolean mask of modes kept by a truncation to ``n`` modes per axis."""
        mask = np.ones(self.shape, dtype=bool)
        for m, N in zip(self.m, self.shape):
            mask = mask & (np.abs(m) < min(n, N) / 2)
        return mask

    def zeros(self, rank: int = 0) -> np.ndarray:
        return np.zeros((3,) * rank + self.shape, dtype=complex)

    def coordinates(self, shape: Sequence[int] | None = None) -> list[np.ndarray]:
        shape = self.shape if shape is None else shape
        return np.meshgrid(
            *[np.arange(M) * L / M for M, L in zip(shape, self.lengths)], indexing="ij"
        )

    # -- transforms ----------------------------------------------------

    def pad_shape(self, degree: int = 2) -> tuple[int, ...]:
        """Physical grid on which a product of ``degree`` resolved fields is alias-free."""
        out = []
        for N in self.shape:
            B = N // 2 - 1
            out.append(max(N, sfft.next_fast_len((max(degree, 1) + 1) * B + 1, real=True)))
        return tuple(out)

    def to_physical(self, f: np.ndarray, shape: Sequence[int] | None = None) -> np.ndarray:
        """Real values of ``f`` on a uniform grid (zero-padded if ``shape`` is larger)."""
        shape = self.shape if shape is None else tuple(shape)
        src, dst = _pad_index(self.shape, shape)
        half = np.zeros(f.shape[:-3] + (shape[0], shape[1], shape[2] // 2 + 1), dtype=complex)
        half[(...,) + dst] = f[(...,) + src]
        return sfft.irfftn(half, s=shape, axes=AXES, norm="forward", workers=_workers())

    def from_physical(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of real grid values, projected onto the resolved band."""
        shape = values.shape[-3:]
        half = sfft.rfftn(values, axes=AXES, norm="forward", workers=_workers())
        src, dst = _pad_index(self.shape, shape)
        out = np.zeros(values.shape[:-3] + self.shape, dtype=complex)
        out[(...,) + src] = half[(...,) + dst]
        return _mirror(out, self.shape)

    def evaluate(self, fn: Callable[..., np.ndarray], *fields: np.ndarray, degree: int = 2) -> np.ndarray:
        """Project the pointwise expression ``fn(*fields)`` onto the resolved band.

        ``degree`` is the polynomial degree of ``fn`` in its arguments; the
        padded grid is chosen so that the result is the exact L2 projection.
        Non-polynomial ``fn`` are evaluated on the degree-2 grid.
        """
        shape = self.pad_shape(degree)
        values = fn(*[self.to_physical(f, shape) for f in fields])
        return self.from_physical(np.asarray(values))

    def check(self, f: np.ndarray) -> None:
        if f.shape[-3:] != self.shape:
            raise GridMismatchError(f"field of shape {f.shape[-3:]} on grid {self.shape}")


@lru_cache(maxsize=64)
def _pad_index(shape: tuple[int, ...], big: tuple[int, ...]):
    """Index maps from the resolved half-spectrum of ``shape`` into the rfft layout of ``big``."""
    src, dst = [], []
    for ax, (N, M) in enumerate(zip(shape, big)):
        B = N // 2 - 1
        if ax < 2:
            m = np.arange(-B, B + 1)
        else:
            m = np.arange(0, B + 1)
        src.append(m % N)
        dst.append(m % M)
    return np.ix_(*src), np.ix_(*dst)


@lru_cache(maxsize=64)
def _mirror_index(shape: tuple[int, ...]):
    neg = [(-np.arange(N)) % N for N in shape]
    return np.ix_(*neg)


def _mirror(f: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Fill the m3 < 0 half from the m3 >= 0 half by conjugate symmetry."""
    N3 = shape[2]
    idx = _mirror_index(shape)
    conj = np.conj(f[(...,) + idx])
    lower = slice(N3 // 2 + 1, N3)
    f[..., lower] = conj[..., lower]
    return f


# -- linear operators ---------------------------------------------------


def _need(f: np.ndarray, *ranks: int, op: str) -> None:
    if rank_of(f) not in ranks:
        raise RankError(f"{op} expects rank {ranks}, got rank {rank_of(f)}")


def grad(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Gradient; for a vector returns ``G[i, j] = d_j f_i``."""
    grid.check(f)
    return 1j * grid.k * f[..., None, :, :, :]


def div(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence over the last tensor index."""
    _need(f, 1, 2, op="div")
    grid.check(f)
    return np.sum(1j * grid.k * f, axis=rank_of(f) - 1)


def curl(f: np.ndarray, grid: Grid) -> np.ndarray:
    _need(f, 1, op="curl")
    grid.check(f)
    k = grid.k
    return 1j * np.array(
        [k[1] * f[2] - k[2] * f[1], k[2] * f[0] - k[0] * f[2], k[0] * f[1] - k[1] * f[0]]
    )


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    grid.check(f)
    return -grid.k2 * f


def bilaplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    grid.check(f)
    return grid.k2**2 * f


def sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, 0, 1))


def skw(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A - np.swapaxes(A, 0, 1))


def grad_vec(f: np.ndarray, grid: Grid) -> np.ndarray:
    _need(f, 1, op="grad_vec")
    return grad(f, grid)


def sym_grad(f: np.ndarray, grid: Grid) -> np.ndarray:
    return sym(grad_vec(f, grid))


def skw_grad(f: np.ndarray, grid: Grid) -> np.ndarray:
    return skw(grad_vec(f, grid))


OPERATORS = {
    "grad": grad,
    "div": div,
    "curl": curl,
    "laplacian": laplacian,
    "bilaplacian": bilaplacian,
    "grad_vec": grad_vec,
    "sym_grad": sym_grad,
    "skw_grad": skw_grad,
}


def apply_operator(kind: str, f: np.ndarray, grid: Grid) -> np.ndarray:
    try:
        op = OPERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown operator {kind!r}") from None
    if kind in ("grad", "laplacian", "bilaplacian"):
        _need(f, 0, 1, 2, op=kind)
    return op(f, grid)


def prolong(f: np.ndarray, grid: Grid, fine: Grid) -> np.ndarray:
    """Coefficients of ``f`` on a finer grid of the same box (exact zero-padding)."""
    if fine.lengths != grid.lengths or any(M < N for M, N in zip(fine.shape, grid.shape)):
        raise GridMismatchError(f"cannot prolong from {grid} to {fine}")
    return fine.from_physical(grid.to_physical(f, fine.shape))


def leray_project(v: np.ndarray, grid: Grid) -> np.ndarray:
    """L2-orthogonal projection onto solenoidal fields; the mean mode is untouched."""
    _need(v, 1, op="leray_project")
    grid.check(v)
    k2 = np.where(grid.k2 == 0, 1.0, grid.k2)
    kv = np.sum(grid.k * v, axis=0)
    return v - grid.k * kv / k2


def truncate(f: np.ndarray, n: int, grid: Grid) -> np.ndarray:
    """Zero every coefficient with some ``|m_i| >= n/2``."""
    if n > max(grid.shape):
        raise ValueError(f"truncation level {n} exceeds grid modes {grid.shape}")
    grid.check(f)
    return np.where(grid.modes(n), f, 0)


def inner_product(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """L2(box) inner product; vector and tensor ranks sum over components."""
    if f.shape != g.shape:
        if f.shape[-3:] != g.shape[-3:]:
            raise GridMismatchError("fields live on different grids")
        raise RankError(f"rank mismatch {rank_of(f)} vs {rank_of(g)}")
    grid.check(f)
    return grid.volume * float(np.vdot(g, f).real)


def norm(f: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(max(inner_product(f, f, grid), 0.0)))


# -- pointwise products ---------------------------------------------------

_CONTRACTIONS = {
    "scalar": (lambda f, g: f * g, None),
    "dot": (lambda f, g: np.einsum("i...,i...->...", f, g), (1, 1)),
    "outer": (lambda f, g: np.einsum("i...,j...->ij...", f, g), (1, 1)),
    "frobenius": (lambda f, g: np.einsum("ij...,ij...->...", f, g), (2, 2)),
    "matvec": (lambda f, g: np.einsum("ij...,j...->i...", f, g), (2, 1)),
    "matmul": (lambda f, g: np.einsum("ij...,jk...->ik...", f, g), (2, 2)),
    "cross": (lambda f, g: np.cross(f, g, axis=0), (1, 1)),
}


def pointwise_product(f: np.ndarray, g: np.ndarray, grid: Grid, contraction: str = "scalar") -> np.ndarray:
    """Dealiased product of two fields under the named contraction."""
    try:
        fn, ranks = _CONTRACTIONS[contraction]
    except KeyError:
        raise ValueError(f"unknown contraction {contraction!r}") from None
    if ranks is None:
        if rank_of(f) != 0 and rank_of(g) != 0:
            raise RankError("scalar product needs at least one scalar factor")
        if rank_of(f) != 0:
            f, g = g, f
        fn = lambda a, b: a * b  # noqa: E731
    elif (rank_of(f), rank_of(g)) != ranks:
        raise RankError(f"{contraction} expects ranks {ranks}, got {(rank_of(f), rank_of(g))}")
    grid.check(f)
    grid.check(g)
    return grid.evaluate(fn, f, g, degree=2)


def constant(value, grid: Grid) -> np.ndarray:
    """Spatially constant field (scalar or vector) as coefficients."""
    value = np.asarray(value, dtype=float)
    out = grid.zeros(value.ndim)
    out[(...,) + (0, 0, 0)] = value
    return out


def random_field(grid: Grid, rng: np.random.Generator, rank: int = 0, band: int = 2,
                 amplitude: float = 1.0, decay: float = 0.0) -> np.ndarray:
    """Random real field with modes ``|m_i| <= band``, zero mean, unit-ish size."""
    values = rng.standard_normal((3,) * rank + grid.shape)
    f = grid.from_physical(values)
    f = np.where(grid.modes(2 * band + 2), f, 0)
    f[(...,) + (0, 0, 0)] = 0
    if decay:
        f = f * np.exp(-decay * grid.k2)
    scale = norm(f, grid) / np.sqrt(grid.volume * 3**rank)
    return amplitude * f / scale if scale > 0 else f


# -- raw field dumps ----------------------------------------------------

MAGIC = b"SMAFLD01"
_HEADER = struct.Struct("<8sII3Ii3dd")
assert _HEADER.size == 64


class DumpFormatError(ValueError):
    pass


def write_field(path: str | Path, f: np.ndarray, grid: Grid, t: float = 0.0) -> None:
    """64-byte header then physical values as little-endian float64."""
    rank = rank_of(f)
    header = _HEADER.pack(MAGIC, rank, 3**rank, *grid.shape, 0, *grid.lengths, float(t))
    data = np.ascontiguousarray(grid.to_physical(f), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_field(path: str | Path) -> tuple[np.ndarray, Grid, float]:
    raw = Path(path).read_bytes()
    if len(raw) < 64:
        raise DumpFormatError(f"{path}: truncated header")
    magic, rank, ncomp, n1, n2, n3, _, l1, l2, l3, t = _HEADER.unpack(raw[:64])
    if magic != MAGIC:
        raise DumpFormatError(f"{path}: bad magic {magic!r}")
    if rank > 2 or ncomp != 3**rank:
        raise DumpFormatError(f"{path}: bad rank {rank}")
    try:
        grid = Grid((n1, n2, n3), (l1, l2, l3))
    except ValueError as exc:
        raise DumpFormatError(f"{path}: {exc}") from None
    expected = 8 * ncomp * n1 * n2 * n3
    if len(raw) - 64 != expected:
        raise DumpFormatError(f"{path}: expected {expected} data bytes, found {len(raw) - 64}")
    values = np.frombuffer(raw[64:], dtype="<f8").reshape((3,) * rank + grid.shape)
    return grid.from_physical(values.astype(float)), grid, t
