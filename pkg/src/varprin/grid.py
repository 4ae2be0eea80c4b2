"""Staggered rectangular grid with summation-by-parts operators.

Layout
------
* cells ``c = j*nx + i`` (row-major, ``i`` along x);
* x-faces ``f = j*(nx+1) + i`` for ``i = 0..nx``, then y-faces
  ``f = nxf + j*nx + i`` for ``j = 0..ny``;
* boundary faces in ascending global face order.

A potential vector holds one value per cell followed by one trace per
boundary face. Gradients live on faces: interior faces take the centred
difference of the two cells, boundary faces the one-sided difference between
the trace and the adjacent cell over half a cell. Quadrature weights are the
cell area on cells and interior faces and half of it on boundary faces, which
makes ``u . P^T W G`` split exactly into a volume term and a boundary term.

Complex vectors exported to flat real arrays use interleaving
``(re0, im0, re1, im1, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryUnderspecifiedError, DimensionError, ValidationError

__all__ = [
    "StaggeredGrid",
    "FieldVector",
    "SourceField",
    "interleave",
    "deinterleave",
    "SIDES",
]

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class StaggeredGrid:
    """Uniform ``nx`` by ``ny`` grid of ``hx`` by ``hy`` cells anchored at the origin."""

    nx: int
    ny: int
    hx: float = 1.0
    hy: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise DimensionError(f"grid needs positive integer cell counts, got {self.nx}x{self.ny}")
        if not (self.hx > 0 and self.hy > 0 and np.isfinite(self.hx) and np.isfinite(self.hy)):
            raise DimensionError("cell sizes must be positive and finite")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "hx", float(self.hx))
        object.__setattr__(self, "hy", float(self.hy))

    def __eq__(self, other):
        if not isinstance(other, StaggeredGrid):
            return NotImplemented
        return (self.nx, self.ny, self.hx, self.hy) == (other.nx, other.ny, other.hx, other.hy)

    def __hash__(self):
        return hash((self.nx, self.ny, self.hx, self.hy))

    # -- counts ---------------------------------------------------------
    @property
    def ncell(self) -> int:
        return self.nx * self.ny

    @property
    def nxface(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def nyface(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def nface(self) -> int:
        return self.nxface + self.nyface

    @property
    def nbface(self) -> int:
        return 2 * (self.nx + self.ny)

    @property
    def npot(self) -> int:
        """Length of a potential vector (cells then boundary traces)."""
        return self.ncell + self.nbface

    @property
    def nsite(self) -> int:
        """Quadrature sites: faces (gradient slot) then cells (value slot)."""
        return self.nface + self.ncell

    @property
    def volume(self) -> float:
        return self.hx * self.hy

    # -- geometry -------------------------------------------------------
    def cell_index(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    @cached_property
    def cell_centers(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return np.column_stack([((i.ravel() + 0.5) * self.hx), ((j.ravel() + 0.5) * self.hy)])

    @cached_property
    def face_centers(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny))
        fx = np.column_stack([i.ravel() * self.hx, (j.ravel() + 0.5) * self.hy])
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny + 1))
        fy = np.column_stack([(i.ravel() + 0.5) * self.hx, j.ravel() * self.hy])
        return np.vstack([fx, fy])

    @cached_property
    def face_axis(self) -> np.ndarray:
        """0 for x-faces (normal along x), 1 for y-faces."""
        return np.r_[np.zeros(self.nxface, dtype=int), np.ones(self.nyface, dtype=int)]

    @cached_property
    def face_area(self) -> np.ndarray:
        """Face length ``|f|``."""
        return np.where(self.face_axis == 0, self.hy, self.hx)

    @cached_property
    def face_spacing(self) -> np.ndarray:
        """Cell spacing normal to each face."""
        return np.where(self.face_axis == 0, self.hx, self.hy)

    @cached_property
    def face_cells(self) -> np.ndarray:
        """``(nface, 2)`` array of (minus-side, plus-side) cells, ``-1`` outside."""
        nx, ny = self.nx, self.ny
        out = np.full((self.nface, 2), -1, dtype=int)
        j, i = np.divmod(np.arange(self.nxface), nx + 1)
        out[: self.nxface, 0] = np.where(i > 0, j * nx + i - 1, -1)
        out[: self.nxface, 1] = np.where(i < nx, j * nx + i, -1)
        j, i = np.divmod(np.arange(self.nyface), nx)
        out[self.nxface :, 0] = np.where(j > 0, (j - 1) * nx + i, -1)
        out[self.nxface :, 1] = np.where(j < ny, j * nx + i, -1)
        return out

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero((self.face_cells < 0).any(axis=1))

    @cached_property
    def boundary_normal(self) -> np.ndarray:
        """Outward normal sign (+1/-1) of each boundary face along its axis."""
        fc = self.face_cells[self.boundary_faces]
        return np.where(fc[:, 1] < 0, 1, -1)

    @cached_property
    def boundary_cell(self) -> np.ndarray:
        fc = self.face_cells[self.boundary_faces]
        return np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])

    @cached_property
    def boundary_side(self) -> np.ndarray:
        ax = self.face_axis[self.boundary_faces]
        n = self.boundary_normal
        names = np.empty(self.nbface, dtype=object)
        names[(ax == 0) & (n < 0)] = "left"
        names[(ax == 0) & (n > 0)] = "right"
        names[(ax == 1) & (n < 0)] = "bottom"
        names[(ax == 1) & (n > 0)] = "top"
        return names

    @cached_property
    def boundary_position(self) -> np.ndarray:
        """Global face index -> position in the boundary list (``-1`` if interior)."""
        pos = np.full(self.nface, -1, dtype=int)
        pos[self.boundary_faces] = np.arange(self.nbface)
        return pos

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero((self.face_cells >= 0).all(axis=1))

    @cached_property
    def cell_faces(self) -> np.ndarray:
        """``(ncell, 4)`` faces of each cell: left, right, bottom, top."""
        nx = self.nx
        j, i = np.divmod(np.arange(self.ncell), nx)
        left = j * (nx + 1) + i
        bottom = self.nxface + j * nx + i
        return np.column_stack([left, left + 1, bottom, bottom + nx])

    # -- weights --------------------------------------------------------
    @cached_property
    def face_weight(self) -> np.ndarray:
        w = np.full(self.nface, self.volume)
        w[self.boundary_faces] *= 0.5
        return w

    @cached_property
    def site_weight(self) -> np.ndarray:
        return np.r_[self.face_weight, np.full(self.ncell, self.volume)]

    # -- operators ------------------------------------------------------
    @cached_property
    def grad_matrix(self) -> sp.csr_matrix:
        """Face gradient acting on a full potential vector (cells then traces)."""
        rows, cols, vals = [], [], []
        fc = self.face_cells
        h = self.face_spacing
        inner = self.interior_faces
        rows += [inner, inner]
        cols += [fc[inner, 1], fc[inner, 0]]
        vals += [1.0 / h[inner], -1.0 / h[inner]]
        bf = self.boundary_faces
        n = self.boundary_normal
        trace = self.ncell + np.arange(self.nbface)
        half = 0.5 * h[bf]
        rows += [bf, bf]
        cols += [trace, self.boundary_cell]
        vals += [n / half, -n / half]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.nface, self.npot),
        )

    @cached_property
    def div_matrix(self) -> sp.csr_matrix:
        """Cell divergence of a face flux: ``(1/V) sum of outward |f| G_f``."""
        cf = self.cell_faces
        c = np.repeat(np.arange(self.ncell), 4)
        sign = np.tile([-1.0, 1.0, -1.0, 1.0], self.ncell)
        area = self.face_area[cf.ravel()]
        return sp.csr_matrix(
            (sign * area / self.volume, (c, cf.ravel())), shape=(self.ncell, self.nface)
        )

    @cached_property
    def P(self) -> sp.csr_matrix:
        """Discrete ``⊓``: potential vector -> site field (face gradients, cell values)."""
        ident = sp.eye(self.ncell, self.npot, format="csr")
        return sp.vstack([self.grad_matrix, ident], format="csr")

    @cached_property
    def T(self) -> sp.csr_matrix:
        """Face flux -> site flux ``(G; div G)``."""
        return sp.vstack([sp.eye(self.nface, format="csr"), self.div_matrix], format="csr")

    @cached_property
    def W(self) -> sp.dia_matrix:
        return sp.diags(self.site_weight)

    # -- field operations -----------------------------------------------
    def full_potential(self, u, traces=None) -> np.ndarray:
        u = np.asarray(u)
        if u.shape == (self.npot,):
            return u
        if u.shape != (self.ncell,):
            raise DimensionError(f"potential has length {u.size}, expected {self.ncell} or {self.npot}")
        if traces is None:
            raise BoundaryUnderspecifiedError(
                "boundary traces are required to take a gradient next to the boundary"
            )
        traces = np.asarray(traces)
        if traces.shape != (self.nbface,):
            raise DimensionError(f"expected {self.nbface} boundary traces, got {traces.shape}")
        return np.concatenate([u, traces])

    def d_grad(self, u, traces=None) -> np.ndarray:
        """Face gradient of a cell potential with boundary traces."""
        return self.grad_matrix @ self.full_potential(u, traces)

    def d_div(self, G) -> np.ndarray:
        G = np.asarray(G)
        if G.shape != (self.nface,):
            raise DimensionError(f"flux has length {G.size}, expected {self.nface}")
        return self.div_matrix @ G

    def normal_flux(self, G) -> np.ndarray:
        """``G . n`` on boundary faces."""
        return np.asarray(G)[self.boundary_faces] * self.boundary_normal

    def cap(self, u, traces=None) -> np.ndarray:
        """Site field ``⊓u``."""
        return self.P @ self.full_potential(u, traces)

    def cup(self, G, g) -> np.ndarray:
        """``⊔(G, g) = -div G + g`` per cell."""
        return -self.d_div(G) + np.asarray(g)

    def boundary_pairing(self, q, t) -> complex:
        """``sum |f| q t`` over boundary faces (bilinear, no conjugation)."""
        return np.sum(self.face_area[self.boundary_faces] * np.asarray(q) * np.asarray(t))

    def key_property_residual(self, G, g, u, h, traces=None) -> float:
        """Defect of the discrete integration-by-parts identity.

        Returns ``|sum w (G,g).⊓u + sum V h u - boundary term - sum V (h + ⊔(G,g)) u|``
        where the boundary term is ``sum |f| (G.n) u_b`` over boundary faces.
        """
        uf = self.full_potential(u, traces)
        G = np.asarray(G)
        g = np.asarray(g)
        h = np.asarray(h)
        site = np.concatenate([G, g])
        volume = np.sum(self.site_weight * site * (self.P @ uf)) + self.volume * np.sum(h * uf[: self.ncell])
        boundary = self.boundary_pairing(self.normal_flux(G), uf[self.ncell :])
        correction = self.volume * np.sum((h + self.cup(G, g)) * uf[: self.ncell])
        return float(abs(volume - boundary - correction))

    def side_faces(self, side: str) -> np.ndarray:
        """Positions (in the boundary list) of the faces on one side."""
        if side not in SIDES:
            raise ValidationError(f"unknown side {side!r}; expected one of {SIDES}")
        return np.flatnonzero(self.boundary_side == side)

    # -- nodes (bilinear element path) ----------------------------------
    @property
    def nnode(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @cached_property
    def node_coords(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1))
        return np.column_stack([i.ravel() * self.hx, j.ravel() * self.hy])

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """Counter-clockwise nodes of each cell: (i,j), (i+1,j), (i+1,j+1), (i,j+1)."""
        j, i = np.divmod(np.arange(self.ncell), self.nx)
        n0 = j * (self.nx + 1) + i
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def boundary_face_nodes(self) -> np.ndarray:
        """The two end nodes of each boundary face."""
        out = np.empty((self.nbface, 2), dtype=int)
        for k, f in enumerate(self.boundary_faces):
            if f < self.nxface:
                j, i = divmod(int(f), self.nx + 1)
                out[k] = (j * (self.nx + 1) + i, (j + 1) * (self.nx + 1) + i)
            else:
                j, i = divmod(int(f - self.nxface), self.nx)
                out[k] = (j * (self.nx + 1) + i, j * (self.nx + 1) + i + 1)
        return out


@dataclass(frozen=True)
class FieldVector:
    """Values tagged with the grid entity they live on."""

    kind: str
    values: np.ndarray
    grid: StaggeredGrid = field(repr=False)

    def __post_init__(self):
        expected = {
            "potential": self.grid.npot,
            "cell": self.grid.ncell,
            "flux": self.grid.nface,
            "combined": self.grid.nsite,
        }
        if self.kind not in expected:
            raise ValidationError(f"unknown field kind {self.kind!r}")
        v = np.asarray(self.values)
        if v.shape[0] != expected[self.kind]:
            raise DimensionError(f"{self.kind} field needs {expected[self.kind]} values, got {v.shape[0]}")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SourceField:
    """Complex source ``h`` per cell (``m`` components)."""

    h: np.ndarray
    grid: StaggeredGrid = field(repr=False)
    m: int = 1

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.size != self.grid.ncell * self.m:
            raise DimensionError(f"source needs {self.grid.ncell * self.m} values, got {h.size}")
        object.__setattr__(self, "h", h.reshape(self.grid.ncell, self.m) if self.m > 1 else h.ravel())


def interleave(z) -> np.ndarray:
    """Complex vector -> ``(re0, im0, re1, im1, ...)``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.size)
    out[0::2] = z.real.ravel()
    out[1::2] = z.imag.ravel()
    return out


def deinterleave(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size % 2:
        raise DimensionError("interleaved vector must have even length")
    return x[0::2] + 1j * x[1::2]
