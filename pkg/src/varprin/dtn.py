"""Dirichlet-to-Neumann maps, their real block form and variational bounds.

Boundary degrees of freedom are the traces on the Dirichlet faces of a
scene; flux faces are held at zero normal flux. ``N`` maps traces to outward
normal flux densities, and boundary pairings are face-length weighted,
``<p, q> = sum |f| p q``. The weighted matrix ``diag(|f|) N`` is the
symmetric one.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import QuadraticForm, _eliminate_lossless, assemble_Y
from .errors import NearLosslessBoundaryError, ValidationError
from .scene import Scene, physical_sites
from .solvers import DirectSolver, minimize_convex, solve_direct

__all__ = [
    "DtNMap",
    "CalN",
    "dtn_assemble",
    "dtn_blocks",
    "bound_upper",
    "electrostatic_pair",
    "dirichlet_energy",
    "thompson_energy",
]


@dataclass(frozen=True)
class DtNMap:
    """Dense complex DtN matrix over the Dirichlet faces.

    Attributes
    ----------
    N : ndarray (nd, nd)
        ``q0 = N u0`` in flux density per face.
    faces : ndarray of int
        Positions of the boundary DoFs in the grid's boundary-face list.
    weights : ndarray
        Face lengths used in the boundary pairing.
    """

    N: np.ndarray
    faces: np.ndarray
    weights: np.ndarray

    @property
    def form(self) -> np.ndarray:
        """Weighted matrix ``diag(|f|) N`` (the bilinear form ``<N a, b>``)."""
        return self.weights[:, None] * self.N

    def symmetry_defect(self) -> float:
        F = self.form
        return float(np.linalg.norm(F - F.T) / max(np.linalg.norm(F), np.finfo(float).tiny))

    def imag_min_eig(self) -> float:
        Fi = self.form.imag
        return float(np.linalg.eigvalsh(0.5 * (Fi + Fi.T))[0])

    def pairing(self, a, b) -> complex:
        return np.sum(self.weights * (self.N @ a) * b)

    def to_rows(self):
        n = self.N.shape[0]
        return [(r, c, self.N[r, c].real, self.N[r, c].imag) for r in range(n) for c in range(n)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            for r, c, re, im in self.to_rows():
                w.writerow([r, c, f"{re:.17g}", f"{im:.17g}"])


@dataclass(frozen=True)
class CalN:
    """Real block form ``(q0''; u0'') = calN (u0'; -q0')`` of a DtN map."""

    matrix: np.ndarray
    weights: np.ndarray

    def relation(self, u0_re, q0_re):
        n = self.weights.size
        y = self.matrix @ np.r_[u0_re, -np.asarray(q0_re)]
        return y[:n], y[n:]

    def quadratic(self, u0_re, q0_re) -> float:
        """``<(u0'; -q0'), calN (u0'; -q0')>`` with face-weighted pairing."""
        v = np.r_[u0_re, -np.asarray(q0_re)]
        return float(np.r_[self.weights, self.weights] * v @ (self.matrix @ v))

    @property
    def weighted(self) -> np.ndarray:
        w = np.r_[self.weights, self.weights]
        return w[:, None] * self.matrix


def dtn_assemble(scene: Scene, threads: int | None = None) -> DtNMap:
    """Assemble ``N`` column by column from direct solves.

    Requires a zero source. Columns are independent and may be computed
    concurrently (``threads``).
    """
    if scene.physics == "elastic":
        raise ValidationError("DtN maps are implemented for scalar (staggered) scenes")
    if np.any(scene.source != 0):
        raise ValidationError("the DtN map is defined for a zero source")
    d = np.flatnonzero(scene.dirichlet)
    if d.size == 0:
        raise ValidationError("scene has no Dirichlet faces to carry boundary DoFs")
    solver = DirectSolver(scene)
    nb = scene.grid.nbface

    def column(k):
        bc = np.zeros(nb, dtype=complex)
        bc[d[k]] = 1.0
        return solver.solve(bc_value=bc, source=np.zeros_like(scene.source)).q0[d]

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            cols = list(ex.map(column, range(d.size)))
    else:
        cols = [column(k) for k in range(d.size)]
    N = np.column_stack(cols)
    return DtNMap(N=N, faces=d, weights=scene.grid.face_area[scene.grid.boundary_faces[d]].astype(float))


def dtn_blocks(dtn: DtNMap, cond_max: float = 1e12) -> CalN:
    """``calN = [[N'' + N' N''^-1 N', N' N''^-1], [N''^-1 N', N''^-1]]``."""
    N = np.asarray(dtn.N)
    Nr, Ni = N.real, N.imag
    c = np.linalg.cond(Ni)
    if not np.isfinite(c) or c > cond_max:
        raise NearLosslessBoundaryError(
            f"imaginary part of the DtN map is singular or ill-conditioned (condition {c:.2e})"
        )
    Ninv = np.linalg.inv(Ni)
    top = np.hstack([Ni + Nr @ Ninv @ Nr, Nr @ Ninv])
    bot = np.hstack([Ninv @ Nr, Ninv])
    return CalN(matrix=np.vstack([top, bot]), weights=dtn.weights)


def bound_upper(scene: Scene, trial_u, trial_G, boundary=None, form: QuadraticForm | None = None) -> float:
    """Upper bound ``Y(trial) >= Y_min`` from an admissible trial ``(u', G')``.

    ``trial_u`` covers cells and boundary traces, ``trial_G`` every face.
    """
    Y = assemble_Y(scene, boundary=boundary) if form is None else form
    x = np.r_[np.asarray(trial_u, dtype=float), np.asarray(trial_G, dtype=float)]
    Y.check_admissible(x)
    return Y.evaluate(x)


def _real_eps(scene: Scene):
    if scene.physics != "quasistatic":
        raise ValidationError("the electrostatic principles need a quasistatic scene")
    eps = scene.moduli["eps"]
    if eps.ndim != 1:
        eps = np.concatenate([eps[:, 0, 0], eps[:, 1, 1]])
    if np.any(eps.imag != 0):
        raise ValidationError("the classical principles need a real permittivity")
    if np.any(scene.source != 0):
        raise ValidationError("the classical principles are set up for a zero source")
    from .errors import CoercivityError

    if np.any(eps.real <= 0):
        raise CoercivityError("permittivity must be positive in every cell")


def dirichlet_energy(scene: Scene, V0=None):
    """Dirichlet minimum ``min 1/2 sum w eps |grad V|^2`` with traces pinned on Dirichlet faces.

    Flux faces carry the natural zero-flux condition. Returns ``(value, result)``.
    """
    _real_eps(scene)
    g = scene.grid
    d = scene.dirichlet
    if np.any(scene.bc_value[~d] != 0):
        raise ValidationError("flux faces must carry zero flux in the classical principles")
    V0 = scene.bc_value if V0 is None else np.asarray(V0, dtype=complex)
    if np.any(V0[d].imag != 0):
        raise ValidationError("Dirichlet data must be real")
    z = physical_sites(scene).z.real[: g.nface]
    Gm = g.grad_matrix
    A = 0.5 * (Gm.T @ sp.diags(g.face_weight * z) @ Gm).tocsr()
    free = np.ones(g.npot, dtype=bool)
    free[g.ncell :] = ~d
    pv = np.zeros(g.npot)
    pv[g.ncell :][d] = V0[d].real
    form = QuadraticForm(A=A, b=np.zeros(g.npot), c=0.0, free_mask=free, pinned_values=pv, kind="W")
    res = minimize_convex(form)
    return res.functional_value, res


def thompson_energy(scene: Scene, q0):
    """Thompson minimum ``min 1/2 sum w |G|^2 / eps`` over divergence-free ``G`` with ``G.n = q0``.

    Returns ``(value, result)``.
    """
    _real_eps(scene)
    g = scene.grid
    q0 = np.asarray(q0, dtype=float)
    z = physical_sites(scene).z.real
    nf, npot = g.nface, g.npot
    n = npot + nf
    A = sp.block_diag([sp.csr_matrix((npot, npot)), 0.5 * sp.diags(g.face_weight / z[:nf])], format="csr")
    free = np.ones(n, dtype=bool)
    free[:npot] = False
    free[npot + g.boundary_faces] = False
    pv = np.zeros(n)
    pv[npot + g.boundary_faces] = q0 * g.boundary_normal
    lossless = np.r_[np.zeros(nf, dtype=bool), np.ones(g.ncell, dtype=bool)]
    zs = np.r_[z[:nf], np.zeros(g.ncell)]
    E, e0, indep, C, dvec, cons = _eliminate_lossless(g, zs, lossless, np.zeros(g.ncell), ~free, n)
    form = QuadraticForm(
        A=A, b=np.zeros(n), c=0.0, free_mask=free, pinned_values=pv, E=E, e0=e0, indep=indep,
        C=C, d=dvec, consistency=cons, layout={"u": slice(0, npot), "G": slice(npot, n)}, kind="W~",
    )
    res = minimize_convex(form)
    return res.functional_value, res


def electrostatic_pair(scene: Scene):
    """Dirichlet and Thompson minima for a real positive permittivity.

    Both equal ``1/2 <q0, V0>`` at the solution. The Thompson side uses the
    boundary flux of the direct solution.
    """
    w, _ = dirichlet_energy(scene)
    q0 = solve_direct(scene).q0.real
    wt, _ = thompson_energy(scene, q0)
    return w, wt
