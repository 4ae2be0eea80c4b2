"""Plane-strain elastodynamics ``div(C grad u) + omega^2 rho u + b = 0``.

The field is ``(grad u, u)`` and ``Z = e^{i theta} diag(-C, omega^2 rho)``.
Only the symmetric part of ``grad u`` enters, so discrete fields are the
Mandel strain ``(e_xx, e_yy, sqrt(2) e_xy)`` plus the displacement at the
2x2 Gauss points of bilinear (Q4) elements on the grid's nodes. Nodal
unknowns are interleaved ``(u_x, u_y)`` per node. Traction-free sides are
natural; Dirichlet sides pin nodal displacements.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..assembly import QuadraticForm
from ..constitutive import BlockZ, check_coercivity, default_alpha
from ..errors import (
    CoercivityError,
    OracleTooLargeError,
    SingularSystemError,
    ValidationError,
)
from ..grid import StaggeredGrid

__all__ = [
    "ElasticMedium",
    "mandel_from_lame",
    "elastic_cell_Z",
    "symmetric_projector",
    "gauss_Z",
    "strain_operator",
    "elastic_assemble_Q",
    "elastic_solve_direct",
    "elastic_dense_oracle",
    "elastic_residual",
    "elastic_fields",
    "dirichlet_nodes",
]

_R2 = np.sqrt(2.0)
_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def mandel_from_lame(lam, mu) -> np.ndarray:
    """Isotropic stiffness in Mandel form, shape ``(ncell, 3, 3)``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    mu = np.atleast_1d(np.asarray(mu, dtype=complex))
    lam, mu = np.broadcast_arrays(lam, mu)
    C = np.zeros(lam.shape + (3, 3), dtype=complex)
    C[:, 0, 0] = C[:, 1, 1] = lam + 2 * mu
    C[:, 0, 1] = C[:, 1, 0] = lam
    C[:, 2, 2] = 2 * mu
    return C


@dataclass(frozen=True)
class ElasticMedium:
    """Stiffness (Mandel ``(ncell, 3, 3)``), density ``(ncell, 2, 2)``, body force ``(ncell, 2)``."""

    C: np.ndarray
    rho: np.ndarray
    b: np.ndarray
    omega: float

    def __post_init__(self):
        C = np.asarray(self.C, dtype=complex)
        if C.ndim != 3 or C.shape[1:] != (3, 3):
            raise ValidationError("stiffness must be given in Mandel form, shape (ncell, 3, 3)")
        if np.abs(C - np.swapaxes(C, 1, 2)).max() > 1e-12 * max(np.abs(C).max(), 1.0):
            raise ValidationError("stiffness lacks the major symmetry C_ijkl = C_klij")

    @classmethod
    def from_scene(cls, scene) -> "ElasticMedium":
        m = scene.moduli
        rho = np.asarray(m["rho"], dtype=complex)[:, None, None] * np.eye(2)
        return cls(C=mandel_from_lame(m["lam"], m["mu"]), rho=rho, b=scene.source, omega=scene.omega)


def _full_stiffness(CM):
    """Mandel ``(n,3,3)`` to the 4x4 gradient form (order xx, xy, yx, yy)."""
    Qs = _sym_basis()
    return np.einsum("ia,nab,jb->nij", Qs, CM, Qs)


@lru_cache(maxsize=1)
def _sym_basis():
    Qs = np.zeros((4, 3))
    Qs[0, 0] = 1.0
    Qs[3, 1] = 1.0
    Qs[1, 2] = Qs[2, 2] = 1.0 / _R2
    return Qs


def symmetric_projector() -> np.ndarray:
    """``(6, 5)`` isometry from (Mandel strain, displacement) into (grad u, u)."""
    Q = np.zeros((6, 5))
    Q[:4, :3] = _sym_basis()
    Q[4:, 3:] = np.eye(2)
    return Q


def elastic_cell_Z(lam, mu, rho, omega) -> BlockZ:
    """Unrotated ``Z = diag(-C, omega^2 rho)`` over ``(grad u, u)``, ``m = d = 2``."""
    CM = mandel_from_lame(lam, mu)
    rho = np.atleast_1d(np.asarray(rho, dtype=complex))
    nc = CM.shape[0]
    Z = np.zeros((nc, 6, 6), dtype=complex)
    Z[:, :4, :4] = -_full_stiffness(CM)
    Z[:, 4:, 4:] = omega**2 * np.broadcast_to(rho, (nc,))[:, None, None] * np.eye(2)
    return BlockZ(Z, 2, 2)


def gauss_Z(medium: ElasticMedium, theta=0.0) -> np.ndarray:
    """Rotated ``(ncell, 5, 5)`` matrices on the symmetric subspace."""
    nc = medium.C.shape[0]
    Z = np.zeros((nc, 5, 5), dtype=complex)
    Z[:, :3, :3] = -medium.C
    Z[:, 3:, 3:] = medium.omega**2 * medium.rho
    return np.exp(1j * theta) * Z


def _shape(xi, eta):
    N = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
    dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return N, dxi, deta


def _element_B(hx, hy):
    """``(4, 5, 8)``: per Gauss point, element DoFs to (Mandel strain, u)."""
    out = []
    for eta in _GP:
        for xi in _GP:
            N, dxi, deta = _shape(xi, eta)
            dx, dy = 2 * dxi / hx, 2 * deta / hy
            B = np.zeros((5, 8))
            B[0, 0::2] = dx
            B[1, 1::2] = dy
            B[2, 0::2] = dy / _R2
            B[2, 1::2] = dx / _R2
            B[3, 0::2] = N
            B[4, 1::2] = N
            out.append(B)
    return np.array(out)


def strain_operator(grid: StaggeredGrid) -> sp.csr_matrix:
    """Sparse ``P`` from interleaved nodal DoFs to Gauss-point fields.

    Rows are ordered cell, Gauss point, component (5 per point).
    """
    Be = _element_B(grid.hx, grid.hy)
    cn = grid.cell_nodes
    nc = grid.ncell
    dofs = np.empty((nc, 8), dtype=int)
    dofs[:, 0::2] = 2 * cn
    dofs[:, 1::2] = 2 * cn + 1
    rows = np.arange(nc * 20).reshape(nc, 4, 5)
    R = np.broadcast_to(rows[:, :, :, None], (nc, 4, 5, 8))
    Cc = np.broadcast_to(dofs[:, None, None, :], (nc, 4, 5, 8))
    V = np.broadcast_to(Be[None], (nc, 4, 5, 8))
    P = sp.csr_matrix((V.ravel(), (R.ravel(), Cc.ravel())), shape=(nc * 20, 2 * grid.nnode))
    P.eliminate_zeros()
    return P


def dirichlet_nodes(scene):
    """Pinned nodes and their displacement (lowest-index Dirichlet face wins)."""
    g = scene.grid
    vals = {}
    for k in range(g.nbface):
        if scene.bc_kind[k] != "dirichlet":
            continue
        for nd in g.boundary_face_nodes[k]:
            vals.setdefault(int(nd), scene.bc_value[k])
    nodes = np.array(sorted(vals), dtype=int)
    values = np.array([vals[n] for n in nodes], dtype=complex).reshape(-1, 2)
    return nodes, values


def _pinned_dofs(scene):
    nodes, values = dirichlet_nodes(scene)
    dofs = np.r_[2 * nodes, 2 * nodes + 1].astype(int)
    v = np.r_[values[:, 0], values[:, 1]] if nodes.size else np.zeros(0, dtype=complex)
    order = np.argsort(dofs)
    return dofs[order], v[order]


def _operators(scene, theta):
    g = scene.grid
    med = ElasticMedium.from_scene(scene)
    Zg = np.repeat(gauss_Z(med, theta), 4, axis=0)
    P = strain_operator(g)
    w = g.hx * g.hy / 4
    Zs = sp.block_diag(list(w * Zg), format="csr")
    K = (P.T @ Zs @ P).tocsr()
    hg = np.zeros((g.ncell * 4, 5), dtype=complex)
    hg[:, 3:] = np.repeat(med.b, 4, axis=0)
    f = P.T @ (w * hg.ravel())
    return K, f, P


def _check_rotated(scene, theta):
    Z5 = gauss_Z(ElasticMedium.from_scene(scene), theta)
    rep = check_coercivity(Z5.imag, default_alpha(Z5))
    if not rep.passing:
        raise CoercivityError(
            f"rotated elastic operator is not coercive on symmetric fields at theta = {theta:.6g}: "
            f"min eigenvalue {rep.min_eig:.3e} in cell {rep.worst_cell}; use select_theta "
            "(for real density and lossy stiffness the admissible angles are positive and small)",
            cell=rep.worst_cell,
            min_eig=rep.min_eig,
        )


def elastic_assemble_Q(scene) -> QuadraticForm:
    """Saddle functional ``Q(u', u'')`` over interleaved nodal displacements.

    ``Q = x.Ax + 2b.x`` with ``A = [[K'', K'], [K', -K'']]`` for the rotated
    stiffness ``K = P^T W Z P``; stationarity gives ``K u + f = 0``.
    """
    theta = scene.resolved_theta()
    _check_rotated(scene, theta)
    tau = scene.tau
    K, f, _ = _operators(scene, theta)
    f = np.exp(1j * (theta + tau)) * f
    n = K.shape[0]
    A = sp.bmat([[K.imag, K.real], [K.real, -K.imag]], format="csr")
    A = ((A + A.T) * 0.5).tocsr()
    b = np.r_[f.imag, f.real]
    dofs, vals = _pinned_dofs(scene)
    vals = np.exp(1j * tau) * vals
    free = np.ones(2 * n, dtype=bool)
    free[dofs] = False
    free[n + dofs] = False
    pv = np.zeros(2 * n)
    pv[dofs] = vals.real
    pv[n + dofs] = vals.imag
    return QuadraticForm(
        A=A, b=b, c=0.0, free_mask=free, pinned_values=pv,
        layout={"u_re": slice(0, n), "u_im": slice(n, 2 * n)}, kind="Q_elastic",
    )


def elastic_residual(scene, u) -> float:
    """Relative residual of the discrete elastodynamic equation at free DoFs."""
    K, f, _ = _operators(scene, 0.0)
    u = np.asarray(u, dtype=complex).ravel()
    dofs, _ = _pinned_dofs(scene)
    free = np.ones(K.shape[0], dtype=bool)
    free[dofs] = False
    r = (K @ u + f)[free]
    scale = float(abs(K).sum(axis=1).max()) * np.abs(u).max(initial=0.0) + np.abs(f).max(initial=0.0)
    return float(np.abs(r).max(initial=0.0) / scale) if scale > 0 else 0.0


def _result(scene, u, res):
    from ..solvers import SolveResult

    fields = elastic_fields(scene, u)
    return SolveResult(
        u=u.reshape(-1, 2), G=fields["stress"], g=fields["momentum"], residual=res, iterations=1, grid=scene.grid
    )


def elastic_solve_direct(scene):
    """Sparse complex LU solve of ``K u + f = 0`` with pinned Dirichlet nodes."""
    K, f, _ = _operators(scene, 0.0)
    n = K.shape[0]
    dofs, vals = _pinned_dofs(scene)
    free = np.ones(n, dtype=bool)
    free[dofs] = False
    fi = np.flatnonzero(free)
    u = np.zeros(n, dtype=complex)
    u[dofs] = vals
    Kff = K[fi][:, fi].tocsc()
    rhs = -f[fi] - K[fi][:, dofs] @ vals
    try:
        u[fi] = spla.splu(Kff).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"elastic operator is singular: {exc}") from None
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("elastic solve produced non-finite values")
    res = elastic_residual(scene, u)
    if res > 1e-10:
        raise SingularSystemError(f"elastic solve residual {res:.2e} too large (near-singular operator)")
    return _result(scene, u, res)


def elastic_fields(scene, u) -> dict:
    """Strain, stress ``C grad u`` and momentum ``-i omega rho u`` at Gauss points.

    Strain and stress are Mandel 3-vectors, shape ``(ncell, 4, 3)``.
    """
    g = scene.grid
    med = ElasticMedium.from_scene(scene)
    F = (strain_operator(g) @ np.asarray(u, dtype=complex).ravel()).reshape(g.ncell, 4, 5)
    eps = F[..., :3]
    disp = F[..., 3:]
    stress = np.einsum("nab,ngb->nga", med.C, eps)
    mom = -1j * med.omega * np.einsum("nab,ngb->nga", med.rho, disp)
    return {"strain": eps, "stress": stress, "displacement": disp, "momentum": mom}


def elastic_dense_oracle(scene):
    """Dense loop-based Q4 assembly in Voigt notation and a dense LU solve."""
    from ..solvers import ORACLE_MAX_DOFS

    g = scene.grid
    n = 2 * g.nnode
    if n > ORACLE_MAX_DOFS:
        raise OracleTooLargeError(f"dense oracle limited to {ORACLE_MAX_DOFS} unknowns, scene has {n}")
    lam, mu, rho = (scene.moduli[k] for k in ("lam", "mu", "rho"))
    Kd = np.zeros((n, n), dtype=complex)
    fd = np.zeros(n, dtype=complex)
    w = g.hx * g.hy / 4
    for c in range(g.ncell):
        D = np.array([[lam[c] + 2 * mu[c], lam[c], 0], [lam[c], lam[c] + 2 * mu[c], 0], [0, 0, mu[c]]])
        nodes = g.cell_nodes[c]
        dof = [2 * nodes[a] + k for a in range(4) for k in range(2)]
        for eta in _GP:
            for xi in _GP:
                N, dxi, deta = _shape(xi, eta)
                B = np.zeros((3, 8))
                Nm = np.zeros((2, 8))
                for a in range(4):
                    dx, dy = 2 * dxi[a] / g.hx, 2 * deta[a] / g.hy
                    B[0, 2 * a] = dx
                    B[1, 2 * a + 1] = dy
                    B[2, 2 * a] = dy
                    B[2, 2 * a + 1] = dx
                    Nm[0, 2 * a] = N[a]
                    Nm[1, 2 * a + 1] = N[a]
                ke = w * (B.T @ D @ B - scene.omega**2 * rho[c] * Nm.T @ Nm)
                fe = w * Nm.T @ scene.source[c]
                for i in range(8):
                    fd[dof[i]] += fe[i]
                    for j in range(8):
                        Kd[dof[i], dof[j]] += ke[i, j]
    dofs, vals = _pinned_dofs(scene)
    for k, v in zip(dofs, vals):
        Kd[k, :] = 0
        Kd[k, k] = 1
        fd[k] = v
    try:
        lu, piv = sla.lu_factor(Kd)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularSystemError(f"dense oracle matrix is singular: {exc}") from None
    u = sla.lu_solve((lu, piv), fd)
    res = float(np.abs(Kd @ u - fd).max() / max(np.abs(Kd).max() * np.abs(u).max() + np.abs(fd).max(), 1e-300))
    return _result(scene, u, res)
