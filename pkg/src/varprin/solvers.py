"""Direct, convex and saddle solvers plus a dense verification oracle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import QuadraticForm
from .errors import (
    ConvergenceError,
    NotConvexError,
    OracleTooLargeError,
    SingularSystemError,
)
from .grid import StaggeredGrid
from .scene import Scene, physical_sites

__all__ = [
    "SolveResult",
    "DirectSolver",
    "solve_direct",
    "minimize_convex",
    "solve_saddle",
    "dense_oracle",
    "pcg",
    "ORACLE_MAX_DOFS",
]

ORACLE_MAX_DOFS = 4000


@dataclass
class SolveResult:
    """Solver output.

    ``u`` is the complex potential (cells then boundary traces) for staggered
    problems or the nodal displacement for elastic ones; ``G`` the face flux;
    ``x`` the real unknown vector of a quadratic form.
    """

    u: np.ndarray | None = None
    G: np.ndarray | None = None
    g: np.ndarray | None = None
    residual: float = 0.0
    iterations: int = 0
    functional_value: float | None = None
    x: np.ndarray | None = None
    grid: StaggeredGrid | None = field(default=None, repr=False)

    @property
    def cells(self) -> np.ndarray:
        return self.u[: self.grid.ncell]

    @property
    def traces(self) -> np.ndarray:
        return self.u[self.grid.ncell :]

    @property
    def q0(self) -> np.ndarray:
        """Outward normal flux on boundary faces."""
        return self.grid.normal_flux(self.G)

    def face_potential(self, pair) -> np.ndarray:
        """Potential on interior faces reconstructed from flux continuity.

        ``u_f = (z_a u_a + z_b u_b) / (z_a + z_b)`` with the adjacent cell
        coefficients ``pair`` (``(ncell, 2)``, see
        :func:`varprin.scene.directional_coefficients`); boundary faces
        return their traces.
        """
        z_sites = np.asarray(pair)
        g = self.grid
        fc = g.face_cells
        out = np.empty(g.nface, dtype=complex)
        out[g.boundary_faces] = self.traces
        inner = g.interior_faces
        za, zb = z_sites[fc[inner, 0], g.face_axis[inner]], z_sites[fc[inner, 1], g.face_axis[inner]]
        ua, ub = self.u[fc[inner, 0]], self.u[fc[inner, 1]]
        out[inner] = (za * ua + zb * ub) / (za + zb)
        return out


class DirectSolver:
    """Factorised complex operator ``P^T W Z P`` with the scene's boundary split.

    Reused for many right-hand sides (boundary bases, experiments).
    """

    def __init__(self, scene: Scene):
        if scene.physics == "elastic":
            raise ValueError("use physics.elastic for elastic scenes")
        self.scene = scene
        g = scene.grid
        self.grid = g
        sd = physical_sites(scene)
        self.z = sd.z
        P = g.P
        self.K = (P.T @ sp.diags(g.site_weight * sd.z) @ P).tocsc()
        d = scene.dirichlet
        self.known = np.r_[np.zeros(g.ncell, dtype=bool), d]
        self.unknown = np.flatnonzero(~self.known)
        self.kidx = np.flatnonzero(self.known)
        Kuu = self.K[self.unknown][:, self.unknown].tocsc()
        self.Kuk = self.K[self.unknown][:, self.kidx].tocsr()
        self.Kuu = Kuu
        try:
            self.lu = spla.splu(Kuu)
        except RuntimeError as exc:
            raise SingularSystemError(f"discrete operator is singular: {exc}") from None
        self.norm = float(abs(Kuu).sum(axis=1).max()) if Kuu.nnz else 0.0

    def solve(self, bc_value=None, source=None) -> SolveResult:
        g = self.grid
        scene = self.scene
        bc = scene.bc_value if bc_value is None else np.asarray(bc_value, dtype=complex)
        h = scene.source if source is None else np.asarray(source, dtype=complex)
        d = scene.dirichlet
        f = np.zeros(g.npot, dtype=complex)
        f[: g.ncell] = -g.volume * h
        area = g.face_area[g.boundary_faces]
        f[g.ncell :] = np.where(d, 0, area * bc)
        uk = bc[d]
        rhs = f[self.unknown] - self.Kuk @ uk
        x = self.lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("direct solve produced non-finite values (singular operator)")
        r = self.Kuu @ x - rhs
        scale = self.norm * np.abs(x).max(initial=0.0) + np.abs(rhs).max(initial=0.0)
        res = float(np.abs(r).max(initial=0.0) / scale) if scale > 0 else 0.0
        if res > 1e-10:
            raise SingularSystemError(f"direct solve residual {res:.2e} too large (near-singular operator)")
        rn = np.abs(rhs).max(initial=0.0)
        if rn > 0 and self.norm * np.abs(x).max() / rn > 1e14:
            raise SingularSystemError("direct solve is ill-conditioned (operator at or near a resonance)")
        u = np.zeros(g.npot, dtype=complex)
        u[self.unknown] = x
        u[self.kidx] = uk
        F = g.P @ u
        flux = self.z * F
        return SolveResult(
            u=u, G=flux[: g.nface], g=flux[g.nface :], residual=res, iterations=1, grid=g,
        )


def solve_direct(scene: Scene) -> SolveResult:
    """Complex sparse LU solve of the discrete equation ``P^T W Z P u = f``.

    Cell rows carry ``-V h``; flux faces carry ``|f| q0``; Dirichlet traces
    are eliminated.
    """
    if scene.physics == "elastic":
        from .physics.elastic import elastic_solve_direct

        return elastic_solve_direct(scene)
    return DirectSolver(scene).solve()


def pcg(A, b, rtol=1e-12, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Returns ``(x, iterations, relative_residual)``. Raises
    :class:`NotConvexError` on a non-positive curvature direction and
    :class:`ConvergenceError` when the iteration cap is reached.
    """
    n = b.size
    if maxiter is None:
        maxiter = max(int(np.ceil(50 * np.sqrt(n))), 1)
    diag = A.diagonal()
    if np.any(diag <= 0):
        k = int(np.flatnonzero(diag <= 0)[0])
        raise NotConvexError(f"diagonal entry {k} is {diag[k]:.3e}; the form is not positive definite")
    Minv = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    z = Minv * r
    p = z.copy()
    rz = r @ z
    anorm = float(np.abs(diag).max())
    for it in range(1, maxiter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 1e-15 * anorm * (p @ p):
            raise NotConvexError(f"non-positive curvature {curv:.3e} found at iteration {it}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= rtol:
            return x, it, rel
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach relative residual {rtol:g} in {maxiter} iterations (last {rel:.2e})")


def minimize_convex(form: QuadraticForm, rtol=1e-13, maxiter=None) -> SolveResult:
    """Minimise a convex form over its admissible set by preconditioned CG.

    The default tolerance leaves room for condition numbers up to about 1e5
    while keeping minimisers within 1e-8 of the exact ones.
    """
    Ar, br, _ = form.reduced()
    if form.nfree == 0:
        x = form.x0.copy()
        return SolveResult(x=x, functional_value=form.evaluate(x), residual=0.0, iterations=0)
    z, it, rel = pcg(Ar, -br, rtol=rtol, maxiter=maxiter)
    x = form.embed(z)
    true_res = np.linalg.norm(Ar @ z + br) / max(np.linalg.norm(br), np.finfo(float).tiny)
    return SolveResult(x=x, functional_value=form.evaluate(x), residual=float(true_res), iterations=it)


def solve_saddle(form: QuadraticForm) -> SolveResult:
    """Stationary point of an indefinite form (sparse LU on the reduced system)."""
    Ar, br, _ = form.reduced()
    if form.nfree == 0:
        x = form.x0.copy()
        return SolveResult(x=x, functional_value=form.evaluate(x), iterations=0)
    try:
        lu = spla.splu(Ar.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"stationarity system is singular: {exc}") from None
    z = lu.solve(-br)
    if not np.all(np.isfinite(z)):
        raise SingularSystemError("stationarity solve produced non-finite values")
    res = np.linalg.norm(Ar @ z + br) / max(np.linalg.norm(br), np.finfo(float).tiny)
    if res > 1e-8:
        raise SingularSystemError(f"stationarity system is near-singular (residual {res:.2e})")
    x = form.embed(z)
    return SolveResult(x=x, functional_value=form.evaluate(x), residual=float(res), iterations=1)


def _directional(scene: Scene, c: int, axis: int) -> complex:
    if scene.physics == "quasistatic":
        e = scene.moduli["eps"][c]
        return complex(e if np.ndim(e) == 0 else e[axis, axis])
    r = scene.moduli["rho"][c]
    return complex(-1.0 / (r if np.ndim(r) == 0 else r[axis, axis]))


def dense_oracle(scene: Scene) -> SolveResult:
    """Independent dense finite-volume assembly and LU solve (small problems only)."""
    if scene.physics == "elastic":
        from .physics.elastic import elastic_dense_oracle

        return elastic_dense_oracle(scene)
    g = scene.grid
    n = g.npot
    if n > ORACLE_MAX_DOFS:
        raise OracleTooLargeError(f"dense oracle limited to {ORACLE_MAX_DOFS} unknowns, scene has {n}")
    nx, ny, hx, hy = g.nx, g.ny, g.hx, g.hy
    V = hx * hy
    K = np.zeros((n, n), dtype=complex)
    f = np.zeros(n, dtype=complex)
    bpos = {int(fc): k for k, fc in enumerate(g.boundary_faces)}
    coef = {}
    for j in range(ny):
        for i in range(nx):
            c = j * nx + i
            neighbours = [
                (i - 1, j, 0, hx, hy, j * (nx + 1) + i),
                (i + 1, j, 0, hx, hy, j * (nx + 1) + i + 1),
                (i, j - 1, 1, hy, hx, (nx + 1) * ny + j * nx + i),
                (i, j + 1, 1, hy, hx, (nx + 1) * ny + (j + 1) * nx + i),
            ]
            for ii, jj, axis, h, area, face in neighbours:
                za = _directional(scene, c, axis)
                if 0 <= ii < nx and 0 <= jj < ny:
                    nb = jj * nx + ii
                    zb = _directional(scene, nb, axis)
                    zf = 0j if za == 0 or zb == 0 else 2 * za * zb / (za + zb)
                    K[c, c] += area * zf / h
                    K[c, nb] -= area * zf / h
                else:
                    t = g.ncell + bpos[face]
                    K[c, c] += area * za / (h / 2)
                    K[c, t] -= area * za / (h / 2)
                    coef[t] = (c, area * za / (h / 2))
            if scene.physics == "acoustic":
                K[c, c] += V * scene.omega**2 / scene.moduli["kappa"][c]
            f[c] = -V * scene.source[c]
    for k in range(g.nbface):
        t = g.ncell + k
        c, a = coef[t]
        if scene.bc_kind[k] == "dirichlet":
            K[t, t] = 1.0
            f[t] = scene.bc_value[k]
        else:
            K[t, t] = a
            K[t, c] = -a
            f[t] = g.face_area[g.boundary_faces[k]] * scene.bc_value[k]
    try:
        lu, piv = sla.lu_factor(K, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularSystemError(f"dense oracle matrix is singular: {exc}") from None
    if np.any(np.abs(np.diag(lu)) < 1e-14 * np.abs(K).max()):
        raise SingularSystemError("dense oracle matrix is singular")
    u = sla.lu_solve((lu, piv), f)
    res = float(np.abs(K @ u - f).max() / max(np.abs(K).max() * np.abs(u).max() + np.abs(f).max(), 1e-300))
    # flux on faces from the same stencil
    G = np.zeros(g.nface, dtype=complex)
    fcell = g.face_cells
    for fidx in range(g.nface):
        a, b = fcell[fidx]
        axis = int(g.face_axis[fidx])
        h = hx if axis == 0 else hy
        if a >= 0 and b >= 0:
            za, zb = _directional(scene, a, axis), _directional(scene, b, axis)
            zf = 0j if za == 0 or zb == 0 else 2 * za * zb / (za + zb)
            G[fidx] = zf * (u[b] - u[a]) / h
        else:
            t = g.ncell + bpos[fidx]
            c = a if a >= 0 else b
            sgn = 1.0 if b < 0 else -1.0
            G[fidx] = _directional(scene, c, axis) * sgn * (u[t] - u[c]) / (h / 2)
    gval = np.zeros(g.ncell, dtype=complex)
    if scene.physics == "acoustic":
        gval = scene.omega**2 / scene.moduli["kappa"] * u[: g.ncell]
    return SolveResult(u=u, G=G, g=gval, residual=res, iterations=1, grid=g)
