"""Quadratic functionals over real degree-of-freedom vectors.

Every functional is returned as a :class:`QuadraticForm` ``x.Ax + 2b.x + c``
over a full real vector together with the boundary pinning and any hard
linear constraints. Constraints (from lossless sites, where the convex
matrix does not exist) are eliminated into an affine parameterisation
``x = E z + e0`` of the admissible set; ``reduced()`` gives the form in the
free independent unknowns.

Variable layouts
----------------
``Q``      ``[u' (npot), u'' (npot)]``
``R``      ``[G' (nface), G'' (nface)]``
``Y``      ``[u' (npot), G' (nface)]``
``Y_dual`` ``[u'' (npot), G'' (nface)]``
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .constitutive import build_calL, calL_inverse
from .errors import (
    CoercivityError,
    ConstraintError,
    DegeneratePrincipleError,
    DimensionError,
    IncompatibleDataError,
    InversionError,
    ValidationError,
)
from .grid import StaggeredGrid
from .scene import Scene, SiteData, rotated_sites

__all__ = [
    "QuadraticForm",
    "LosslessRegion",
    "assemble_Q",
    "assemble_R",
    "assemble_Y",
    "assemble_Y_dual",
    "assemble_Y_lossless",
    "cauchy_data",
    "site_cell",
]


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``x.Ax + 2b.x + c`` with pinned entries and hard linear constraints.

    Attributes
    ----------
    A : csr_matrix
        Symmetric matrix on the full vector.
    free_mask : ndarray of bool
        ``False`` for entries pinned by boundary data.
    pinned_values : ndarray
        Values of the pinned entries (ignored where ``free_mask``).
    E, e0, indep :
        Affine parameterisation ``x = E z + e0`` of the constraint set in
        terms of the independent entries ``x[indep] = z``.
    C, d :
        All hard constraints as ``C x + d = 0``.
    consistency :
        Constraint rows left after elimination; they involve pinned data only
        and must vanish for the data to be admissible.
    """

    A: sp.csr_matrix
    b: np.ndarray
    c: float
    free_mask: np.ndarray
    pinned_values: np.ndarray
    E: sp.csr_matrix | None = None
    e0: np.ndarray | None = None
    indep: np.ndarray | None = None
    C: sp.csr_matrix | None = None
    d: np.ndarray | None = None
    consistency: tuple = ()
    layout: dict = field(default_factory=dict)
    kind: str = ""

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.b.shape != (n,):
            raise DimensionError("inconsistent quadratic form shapes")
        if self.E is None:
            object.__setattr__(self, "E", sp.eye(n, format="csr"))
            object.__setattr__(self, "e0", np.zeros(n))
            object.__setattr__(self, "indep", np.arange(n))
        if self.C is None:
            object.__setattr__(self, "C", sp.csr_matrix((0, n)))
            object.__setattr__(self, "d", np.zeros(0))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.A @ x) + 2 * self.b @ x + self.c)

    def block(self, x, name):
        return np.asarray(x)[self.layout[name]]

    # -- elimination ----------------------------------------------------
    @cached_property
    def _cols(self):
        fm = self.free_mask[self.indep]
        return np.flatnonzero(fm), np.flatnonzero(~fm)

    @cached_property
    def E_free(self) -> sp.csr_matrix:
        return self.E[:, self._cols[0]].tocsr()

    @property
    def nfree(self) -> int:
        return self._cols[0].size

    @cached_property
    def x0(self) -> np.ndarray:
        """Admissible vector with every free independent entry zero."""
        pcols = self._cols[1]
        zp = self.pinned_values[self.indep[pcols]]
        x0 = self.E[:, pcols] @ zp + self.e0
        self._check_consistency()
        return x0

    def _check_consistency(self):
        for coefs, const in self.consistency:
            vals = np.array([a * self.pinned_values[v] for v, a in coefs.items()] + [const])
            scale = max(np.abs(vals).max(initial=0.0), 1.0)
            res = vals.sum()
            if abs(res) > 1e-8 * scale:
                raise IncompatibleDataError(
                    f"boundary data violate a compatibility condition of the hard constraints (defect {res:.3e})"
                )

    def reduced(self):
        """``(A_r, b_r, c_r)`` over the free independent unknowns."""
        Ef = self.E_free
        x0 = self.x0
        Ar = (Ef.T @ self.A @ Ef).tocsr()
        Ar = ((Ar + Ar.T) * 0.5).tocsr()
        br = Ef.T @ (self.A @ x0 + self.b)
        return Ar, np.asarray(br).ravel(), self.evaluate(x0)

    def embed(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.nfree,):
            raise DimensionError(f"expected {self.nfree} free unknowns, got {z.shape}")
        return self.E_free @ z + self.x0

    def free_part(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.indep[self._cols[0]]]

    def project(self, x) -> np.ndarray:
        """Admissible vector sharing the free independent entries of ``x``."""
        return self.embed(self.free_part(x))

    def admissibility_defect(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}")
        scale = max(np.abs(x).max(initial=0.0), np.abs(self.pinned_values[~self.free_mask]).max(initial=0.0), 1.0)
        pin = np.abs(x[~self.free_mask] - self.pinned_values[~self.free_mask]).max(initial=0.0)
        con = np.abs(self.C @ x + self.d).max(initial=0.0)
        return max(pin, con) / scale

    def check_admissible(self, x, tol=1e-9):
        defect = self.admissibility_defect(x)
        if defect > tol:
            raise ConstraintError(f"trial field violates boundary pinning or constraints (defect {defect:.3e})")

    def with_pinned(self, values) -> "QuadraticForm":
        """Same functional with new pinned data (full-length vector)."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n,):
            raise DimensionError(f"expected pinned vector of length {self.n}")
        pv = np.where(self.free_mask, 0.0, values)
        new = QuadraticForm(
            A=self.A, b=self.b, c=self.c, free_mask=self.free_mask, pinned_values=pv,
            E=self.E, e0=self.e0, indep=self.indep, C=self.C, d=self.d,
            consistency=self.consistency, layout=self.layout, kind=self.kind,
        )
        if "E_free" in self.__dict__:
            object.__setattr__(new, "E_free", self.E_free)
        return new

    def rescaled(self, s, layout=None, kind=None) -> "QuadraticForm":
        """Same functional in new variables ``x_new = x / s`` (entrywise)."""
        s = np.asarray(s, dtype=float)
        S = sp.diags(s)
        Si = sp.diags(1.0 / s)
        A = (S @ self.A @ S).tocsr()
        return QuadraticForm(
            A=((A + A.T) * 0.5).tocsr(), b=s * self.b, c=self.c, free_mask=self.free_mask,
            pinned_values=self.pinned_values / s,
            E=(Si @ self.E @ sp.diags(s[self.indep])).tocsr(), e0=self.e0 / s, indep=self.indep,
            C=(self.C @ S).tocsr(), d=self.d,
            consistency=tuple(({v: a * s[v] for v, a in co.items()}, k) for co, k in self.consistency),
            layout=self.layout if layout is None else layout, kind=self.kind if kind is None else kind,
        )

    def without_linear(self) -> "QuadraticForm":
        """Homogeneous part (``b = 0``, ``c = 0``, zero constraint constants)."""
        return QuadraticForm(
            A=self.A, b=np.zeros(self.n), c=0.0, free_mask=self.free_mask,
            pinned_values=self.pinned_values, E=self.E, e0=np.zeros(self.n), indep=self.indep,
            C=self.C, d=np.zeros_like(self.d),
            consistency=tuple((co, 0.0) for co, _ in self.consistency), layout=self.layout, kind=self.kind,
        )


class _Eliminator:
    """Incremental sparse Gaussian elimination of linear equality constraints.

    Equations are ``sum_k a_k x_k + const = 0``. Each accepted equation
    expresses one free variable (the pivot) in terms of the remaining
    independent variables; earlier expressions are updated on the fly.
    """

    def __init__(self, n, pinned):
        self.n = n
        self.pinned = pinned
        self.expr = {}
        self.uses = defaultdict(set)
        self.rows = []
        self.consistency = []

    def _substitute(self, coefs, const):
        out = defaultdict(float)
        c = const
        for v, a in coefs.items():
            if v in self.expr:
                e, ec = self.expr[v]
                c += a * ec
                for w, b in e.items():
                    out[w] += a * b
            else:
                out[v] += a
        return dict(out), c

    def add(self, coefs, const=0.0, prefer=None):
        self.rows.append((coefs, const))
        s, c = self._substitute(coefs, const)
        scale = max((abs(a) for a in s.values()), default=0.0)
        cand = [v for v, a in s.items() if not self.pinned[v] and abs(a) > 1e-12 * scale]
        if not cand:
            self.consistency.append(({v: a for v, a in s.items() if self.pinned[v]}, c))
            return None
        if prefer in cand:
            p = prefer
        else:
            p = max(cand, key=lambda v: (abs(s[v]), -v))
        a = s.pop(p)
        e = {v: -b / a for v, b in s.items() if b != 0}
        ec = -c / a
        for q in self.uses.pop(p, ()):
            eq, qc = self.expr[q]
            bq = eq.pop(p)
            for w, dw in e.items():
                eq[w] = eq.get(w, 0.0) + bq * dw
                self.uses[w].add(q)
            self.expr[q] = (eq, qc + bq * ec)
        self.expr[p] = (e, ec)
        for w in e:
            self.uses[w].add(p)
        return p

    def finish(self):
        n = self.n
        indep = np.array([v for v in range(n) if v not in self.expr], dtype=int)
        col = np.full(n, -1)
        col[indep] = np.arange(indep.size)
        rows, cols, vals = list(indep), list(range(indep.size)), [1.0] * indep.size
        e0 = np.zeros(n)
        for p, (e, ec) in self.expr.items():
            e0[p] = ec
            for w, a in e.items():
                if a != 0:
                    rows.append(p)
                    cols.append(col[w])
                    vals.append(a)
        E = sp.csr_matrix((vals, (rows, cols)), shape=(n, indep.size))
        r, cc, vv = [], [], []
        d = np.zeros(len(self.rows))
        for k, (co, const) in enumerate(self.rows):
            for v, a in co.items():
                r.append(k)
                cc.append(v)
                vv.append(a)
            d[k] = const
        C = sp.csr_matrix((vv, (r, cc)), shape=(len(self.rows), n))
        return E, e0, indep, C, d, tuple(self.consistency)


@dataclass(frozen=True)
class LosslessRegion:
    """Sites where the constitutive law is imposed exactly instead of via ``calL``.

    ``sites`` is a boolean mask over quadrature sites (faces then cells).
    """

    sites: np.ndarray

    @classmethod
    def from_cells(cls, grid: StaggeredGrid, cells) -> "LosslessRegion":
        """Cell sites of ``cells`` plus faces whose neighbouring cells all lie in the set."""
        inside = np.zeros(grid.ncell, dtype=bool)
        inside[np.asarray(cells, dtype=int)] = True
        fc = grid.face_cells
        face_in = np.where(fc >= 0, inside[np.maximum(fc, 0)], True).all(axis=1)
        return cls(np.r_[face_in, inside])

    @classmethod
    def momentum(cls, grid: StaggeredGrid) -> "LosslessRegion":
        """Every face (gradient) site: the real-density marking."""
        return cls(np.r_[np.ones(grid.nface, dtype=bool), np.zeros(grid.ncell, dtype=bool)])

    @classmethod
    def value(cls, grid: StaggeredGrid) -> "LosslessRegion":
        """Every cell (value) site: the real-modulus marking."""
        return cls(np.r_[np.zeros(grid.nface, dtype=bool), np.ones(grid.ncell, dtype=bool)])

    @classmethod
    def empty(cls, grid: StaggeredGrid) -> "LosslessRegion":
        return cls(np.zeros(grid.nsite, dtype=bool))


def site_cell(grid: StaggeredGrid, s: int) -> int:
    """A cell associated with site ``s`` (for error messages)."""
    if s >= grid.nface:
        return int(s - grid.nface)
    fc = grid.face_cells[s]
    return int(fc[fc >= 0][0])


def _rotated(scene: Scene, boundary, need_full):
    if scene.physics == "elastic":
        raise ValidationError("this functional is implemented for the staggered (m = 1) path only")
    if need_full and boundary is None:
        boundary = cauchy_data(scene)
    return rotated_sites(scene, boundary)


def cauchy_data(scene: Scene):
    """Full physical boundary data ``(u0, q0)`` on every boundary face.

    Faces carrying only one datum get the other from a direct solve.
    """
    from .solvers import solve_direct

    d = scene.dirichlet
    res = solve_direct(scene)
    u0 = np.where(d, scene.bc_value, res.traces)
    q0 = np.where(~d, scene.bc_value, res.q0)
    return u0, q0


def _check_sites(grid, z, lossless, alpha=None):
    zi = z.imag
    if alpha is None:
        alpha = 1e-10 * max(np.abs(z).max(initial=0.0), np.finfo(float).tiny)
    bad = np.flatnonzero(~lossless & (zi < alpha))
    if bad.size:
        s = int(bad[np.argmin(zi[bad])])
        cell = site_cell(grid, s)
        raise CoercivityError(
            f"imaginary part of the rotated constitutive coefficient is {zi[s]:.3e} < {alpha:.3e} "
            f"at {'face ' + str(s) if s < grid.nface else 'cell ' + str(cell)} (cell {cell}); "
            "try another rotation angle",
            cell=cell,
            min_eig=float(zi[s]),
        )


def _tree_order(grid, cells, free_face):
    """Leaf-first ordering of lossless cells with a preferred face pivot each.

    Edges are free faces. A face leading out of the set connects to a
    virtual root; components not reachable from it get their own root cell
    with no preferred face.
    """
    inset = np.zeros(grid.ncell, dtype=bool)
    inset[cells] = True
    fc = grid.face_cells
    parent = {}
    order = []
    seen = np.zeros(grid.ncell, dtype=bool)
    queue = deque()
    for c in cells:
        for f in grid.cell_faces[c]:
            if not free_face[f]:
                continue
            other = fc[f, 0] if fc[f, 1] == c else fc[f, 1]
            if other >= 0 and not inset[other]:
                if not seen[c]:
                    seen[c] = True
                    parent[c] = int(f)
                    queue.append(c)
                break

    def bfs():
        while queue:
            c = queue.popleft()
            order.append(c)
            for f in grid.cell_faces[c]:
                if not free_face[f]:
                    continue
                other = fc[f, 0] if fc[f, 1] == c else fc[f, 1]
                if other >= 0 and inset[other] and not seen[other]:
                    seen[other] = True
                    parent[other] = int(f)
                    queue.append(other)

    bfs()
    reached = list(order)
    groups = [reached[::-1]]
    for c in cells:
        if not seen[c]:
            seen[c] = True
            parent[c] = None
            order.clear()
            queue.append(c)
            bfs()
            # the root goes last so that every other cell of the component is eliminated first
            groups.append(order[::-1])
    seq = [c for g in groups for c in g]
    return seq, parent


def _eliminate_lossless(grid, z, lossless, h_slot, pinned, n):
    """Constraints ``calG' = z' calF'`` at lossless sites, as an affine map.

    Variables are ``[u (npot), G (nface)]``; ``h_slot`` is the source entering
    the value slot of ``calG``.
    """
    el = _Eliminator(n, pinned)
    nf, nc, npot = grid.nface, grid.ncell, grid.npot
    Pg = grid.grad_matrix.tocsr()
    Dv = grid.div_matrix.tocsr()
    V = grid.volume
    zr = z.real
    lf = lossless[:nf]
    lc = lossless[nf:]
    bpos = grid.boundary_position

    def face_eq(f):
        row = Pg.getrow(f)
        coefs = {int(k): -zr[f] * a for k, a in zip(row.indices, row.data)}
        coefs[npot + f] = coefs.get(npot + f, 0.0) + 1.0
        return coefs

    def cell_eq(c):
        row = Dv.getrow(c)
        coefs = {npot + int(k): V * a for k, a in zip(row.indices, row.data)}
        if zr[nf + c] != 0:
            coefs[c] = -V * zr[nf + c]
        return coefs, -V * h_slot[c]

    bfaces = [f for f in np.flatnonzero(lf) if bpos[f] >= 0]
    ifaces = [f for f in np.flatnonzero(lf) if bpos[f] < 0]
    for f in bfaces:
        el.add(face_eq(f), 0.0, prefer=int(grid.boundary_cell[bpos[f]]))
    for f in ifaces:
        el.add(face_eq(f), 0.0, prefer=npot + int(f))
    cells = np.flatnonzero(lc)
    tree_cells = [int(c) for c in cells if zr[nf + c] == 0]
    rest = [int(c) for c in cells if zr[nf + c] != 0]
    if tree_cells:
        free_face = np.array([not pinned[npot + f] and (npot + f) not in el.expr for f in range(nf)])
        seq, parent = _tree_order(grid, tree_cells, free_face)
        for c in seq:
            coefs, const = cell_eq(c)
            pf = parent[c]
            el.add(coefs, const, prefer=None if pf is None else npot + pf)
    for c in rest:
        coefs, const = cell_eq(c)
        el.add(coefs, const, prefer=c)
    return el.finish()


def _convex_form(scene, sd: SiteData, lossless, site_mats, h_slot, h_lin, u_pin, G_pin, kind):
    grid = scene.grid
    nf, nc, npot, ns = grid.nface, grid.ncell, grid.npot, grid.nsite
    n = npot + nf
    if lossless.all():
        raise DegeneratePrincipleError("every site is lossless: the convex functional carries no information")
    z = sd.z
    _check_sites(grid, z, lossless)
    w = grid.site_weight
    a = np.zeros(ns)
    b = np.zeros(ns)
    c = np.zeros(ns)
    act = np.flatnonzero(~lossless)
    aa, bb, cc = site_mats(z[act])
    a[act], b[act], c[act] = aa, bb, cc
    Wc = sp.bmat([[sp.diags(w * a), sp.diags(w * b)], [sp.diags(w * b), sp.diags(w * c)]], format="csr")
    B = sp.bmat([[grid.P, None], [None, -grid.T]], format="csr")
    e = np.r_[np.zeros(ns + nf), h_slot]
    A = (B.T @ Wc @ B).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    beta = np.zeros(n)
    beta[:nc] = grid.volume * h_lin
    bvec = B.T @ (Wc @ e) + beta
    cval = float(e @ (Wc @ e))
    free = np.ones(n, dtype=bool)
    free[nc:npot] = False
    free[npot + grid.boundary_faces] = False
    pv = np.zeros(n)
    pv[nc:npot] = u_pin
    pv[npot + grid.boundary_faces] = G_pin
    E, e0, indep, C, d, cons = _eliminate_lossless(grid, z, lossless, h_slot, ~free, n)
    return QuadraticForm(
        A=A, b=np.asarray(bvec).ravel(), c=cval, free_mask=free, pinned_values=pv,
        E=E, e0=e0, indep=indep, C=C, d=d, consistency=cons,
        layout={"u": slice(0, npot), "G": slice(npot, n)}, kind=kind,
    )


def _calL_entries(z):
    L = build_calL(z.reshape(-1, 1, 1)).calL
    return L[:, 0, 0], L[:, 0, 1], L[:, 1, 1]


def _calL_inv_entries(z):
    # the dual form pairs (calG'', calF'') with calL^-1; rewritten on (calF'', -calG'')
    Li = calL_inverse(z.reshape(-1, 1, 1))
    return Li[:, 1, 1], -Li[:, 0, 1], Li[:, 0, 0]


def _structural(scene, z):
    # sites whose coefficient vanishes identically (value slot of quasistatic problems)
    return z == 0


def assemble_Y(scene: Scene, boundary=None) -> QuadraticForm:
    """Convex functional ``Y(u', G')`` of the rotated scene.

    Both the trace ``u'`` and the normal flux ``G'.n`` are pinned on every
    boundary face. ``boundary = (u0, q0)`` gives physical Cauchy data; when
    omitted the missing half is taken from a direct solve.
    """
    return assemble_Y_lossless(scene, None, boundary=boundary)


def assemble_Y_lossless(scene: Scene, psi: LosslessRegion | None, boundary=None) -> QuadraticForm:
    """``Y`` with the constitutive law imposed exactly on the sites of ``psi``.

    Sites whose coefficient vanishes identically (the value slot of
    quasistatic problems) are always treated this way.
    """
    sd = _rotated(scene, boundary, need_full=True)
    grid = scene.grid
    lossless = _structural(scene, sd.z).copy()
    if psi is not None:
        mask = np.asarray(psi.sites, dtype=bool)
        if mask.shape != (grid.nsite,):
            raise DimensionError("lossless region mask has the wrong length")
        if mask[grid.nface :].all() and mask[: grid.nface].all():
            raise DegeneratePrincipleError("the lossless region covers the whole body")
        lossless |= mask
    return _convex_form(
        scene, sd, lossless, _calL_entries, sd.h.real, sd.h.imag,
        sd.u0.real, (sd.q0 * grid.boundary_normal).real, "Y",
    )


def assemble_Y_dual(scene: Scene, boundary=None, psi: LosslessRegion | None = None) -> QuadraticForm:
    """Dual convex functional ``Y~(u'', G'')`` built from ``calL^-1``."""
    sd = _rotated(scene, boundary, need_full=True)
    grid = scene.grid
    lossless = _structural(scene, sd.z).copy()
    if psi is not None:
        lossless |= np.asarray(psi.sites, dtype=bool)
    return _convex_form(
        scene, sd, lossless, _calL_inv_entries, sd.h.imag, -sd.h.real,
        sd.u0.imag, (sd.q0 * grid.boundary_normal).imag, "Y_dual",
    )


def assemble_Q(scene: Scene, boundary=None) -> QuadraticForm:
    """Saddle functional ``Q(u', u'')`` (minimum in ``u'``, maximum in ``u''``).

    Dirichlet traces are pinned; flux faces contribute the natural boundary
    term ``-2 Im sum |f| q0 u``.
    """
    if scene.physics == "elastic":
        from .physics.elastic import elastic_assemble_Q

        return elastic_assemble_Q(scene)
    sd = _rotated(scene, boundary, need_full=False)
    grid = scene.grid
    z = sd.z
    alpha = 1e-10 * max(np.abs(z).max(initial=0.0), np.finfo(float).tiny)
    _check_sites(grid, z, z.imag >= 0)
    if np.any(z.imag < -alpha):
        _check_sites(grid, z, np.zeros_like(z, dtype=bool), alpha=-alpha)
    npot, nc = grid.npot, grid.ncell
    P = grid.P
    W = grid.site_weight
    Kr = (P.T @ sp.diags(W * z.real) @ P).tocsr()
    Ki = (P.T @ sp.diags(W * z.imag) @ P).tocsr()
    A = sp.bmat([[Ki, Kr], [Kr, -Ki]], format="csr")
    A = ((A + A.T) * 0.5).tocsr()
    b = np.zeros(2 * npot)
    b[:nc] = grid.volume * sd.h.imag
    b[npot : npot + nc] = grid.volume * sd.h.real
    d = sd.dirichlet
    area = grid.face_area[grid.boundary_faces]
    q = np.where(d, 0, sd.q0)
    b[nc:npot] = -area * q.imag
    b[npot + nc :] = -area * q.real
    free = np.ones(2 * npot, dtype=bool)
    free[nc:npot] = ~d
    free[npot + nc :] = ~d
    pv = np.zeros(2 * npot)
    u0 = np.where(d, sd.u0, 0)
    pv[nc:npot] = u0.real
    pv[npot + nc :] = u0.imag
    return QuadraticForm(
        A=A, b=b, c=0.0, free_mask=free, pinned_values=pv,
        layout={"u_re": slice(0, npot), "u_im": slice(npot, 2 * npot)}, kind="Q",
    )


def assemble_R(scene: Scene, boundary=None) -> QuadraticForm:
    """Dual saddle functional ``R(G', G'')`` with ``K = Z^-1`` per site.

    The normal flux is pinned on every boundary face.
    """
    sd = _rotated(scene, boundary, need_full=True)
    grid = scene.grid
    z = sd.z
    zero = np.flatnonzero(z == 0)
    if zero.size:
        s = int(zero[0])
        raise InversionError(
            f"constitutive coefficient vanishes at {'face' if s < grid.nface else 'cell'} site {s} "
            f"(cell {site_cell(grid, s)}); its inverse does not exist"
        )
    K = 1.0 / z
    nf, nc, ns = grid.nface, grid.ncell, grid.nsite
    w = grid.site_weight
    Mk = sp.bmat(
        [[sp.diags(w * K.imag), sp.diags(w * K.real)], [sp.diags(w * K.real), sp.diags(-w * K.imag)]],
        format="csr",
    )
    Bt = sp.block_diag([grid.T, grid.T], format="csr")
    s_shift = np.zeros(2 * ns)
    s_shift[nf:ns] = -sd.h.real
    s_shift[ns + nf :] = -sd.h.imag
    A = (Bt.T @ Mk @ Bt).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    bvec = Bt.T @ (Mk @ s_shift)
    cval = float(s_shift @ (Mk @ s_shift))
    free = np.ones(2 * nf, dtype=bool)
    bf = grid.boundary_faces
    free[bf] = False
    free[nf + bf] = False
    pv = np.zeros(2 * nf)
    G = sd.q0 * grid.boundary_normal
    pv[bf] = G.real
    pv[nf + bf] = G.imag
    return QuadraticForm(
        A=A, b=np.asarray(bvec).ravel(), c=cval, free_mask=free, pinned_values=pv,
        layout={"G_re": slice(0, nf), "G_im": slice(nf, 2 * nf)}, kind="R",
    )
