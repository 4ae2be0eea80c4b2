"""Inverse use of the convex principle: dissipation bounds from boundary measurements.

Each experiment supplies full Cauchy data ``(u0, q0)`` on every boundary
face. For complex weights ``lambda`` the combined data have measured
dissipation

    W(lambda) = Im sum_jk lambda_j conj(lambda_k) C_jk,
    C_jk = sum |f| q0^(j) conj(u0^(k)),

which must not exceed ``Y`` of any admissible trial built for a candidate
medium. With ``W = Im C`` and ``S = Re C`` this reads
``sum (lj' lk' + lj'' lk'') W_jk + (lj'' lk' - lk'' lj') S_jk``. Because the
trials depend linearly on ``lambda``, the bound over all ``lambda`` is a
positive semidefiniteness condition on a ``2n x 2n`` real matrix.

Trials are forward solutions of the candidate under the measured boundary
data, with the measured values pinned on every boundary face.
"""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import QuadraticForm, assemble_Y
from .errors import DimensionError, NumericalError, ValidationError
from .grid import StaggeredGrid
from .scene import Scene, parse_complex
from .solvers import DirectSolver

__all__ = [
    "ExperimentSet",
    "CrossMatrices",
    "PsdResult",
    "FeasibilityResult",
    "ScanParameter",
    "ScanSpec",
    "measured_W",
    "combination_W",
    "forward_trials",
    "trial_basis",
    "psd_constraint",
    "feasibility_residual",
    "parameter_scan",
    "synthesize_experiments",
    "default_boundary_data",
    "load_experiments",
    "write_scan_csv",
    "FEASIBILITY_RTOL",
]

FEASIBILITY_RTOL = 1e-8


@dataclass(frozen=True)
class ExperimentSet:
    """Boundary measurements of ``n`` experiments on a common face layout.

    Attributes
    ----------
    u0, q0 : ndarray (n, nbface)
        Complex traces and outward normal flux densities.
    omega : ndarray (n,)
        Frequency of each experiment.
    weights : ndarray (nbface,)
        Face lengths of the boundary pairing.
    """

    u0: np.ndarray
    q0: np.ndarray
    omega: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        u0 = np.atleast_2d(np.asarray(self.u0, dtype=complex))
        q0 = np.atleast_2d(np.asarray(self.q0, dtype=complex))
        w = np.asarray(self.weights, dtype=float)
        om = np.broadcast_to(np.asarray(self.omega, dtype=float), (u0.shape[0],)).copy()
        if u0.shape != q0.shape or u0.shape[1] != w.size:
            raise DimensionError(
                f"experiment layout mismatch: u0 {u0.shape}, q0 {q0.shape}, {w.size} boundary faces"
            )
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(q0))):
            raise ValidationError("experiment data must be finite")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.u0.shape[0]

    def subset(self, idx) -> "ExperimentSet":
        idx = np.asarray(idx, dtype=int)
        return ExperimentSet(self.u0[idx], self.q0[idx], self.omega[idx], self.weights)

    def groups(self):
        """Experiment indices per distinct frequency, in first-appearance order."""
        out = {}
        for k, w in enumerate(self.omega):
            out.setdefault(float(w), []).append(k)
        return [(w, np.array(ix)) for w, ix in out.items()]

    def check_grid(self, grid: StaggeredGrid):
        if self.weights.size != grid.nbface:
            raise DimensionError(f"experiments have {self.weights.size} boundary entries, grid has {grid.nbface}")

    def to_dict(self) -> dict:
        return {
            "nbface": int(self.weights.size),
            "experiments": [
                {
                    "omega": float(self.omega[k]),
                    "u0": [[z.real, z.imag] for z in self.u0[k]],
                    "q0": [[z.real, z.imag] for z in self.q0[k]],
                }
                for k in range(self.n)
            ],
        }

    @classmethod
    def from_dict(cls, data, grid: StaggeredGrid) -> "ExperimentSet":
        if not isinstance(data, dict) or not isinstance(data.get("experiments"), list):
            raise ValidationError("experiments: expected {'experiments': [...]}")
        exps = data["experiments"]
        if not exps:
            raise ValidationError("experiments: at least one experiment is required")
        nb = grid.nbface
        u0, q0, om = [], [], []
        for k, e in enumerate(exps):
            if not isinstance(e, dict) or not {"u0", "q0"} <= set(e):
                raise ValidationError(f"experiments[{k}]: needs 'u0' and 'q0'")
            for key in ("u0", "q0"):
                if not isinstance(e[key], list) or len(e[key]) != nb:
                    raise DimensionError(f"experiments[{k}].{key}: expected {nb} entries (one per boundary face)")
            u0.append([parse_complex(v, f"experiments[{k}].u0") for v in e["u0"]])
            q0.append([parse_complex(v, f"experiments[{k}].q0") for v in e["q0"]])
            om.append(float(e.get("omega", data.get("omega", 1.0))))
        return cls(np.array(u0), np.array(q0), np.array(om), grid.face_area[grid.boundary_faces])


def load_experiments(path, grid: StaggeredGrid) -> ExperimentSet:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return ExperimentSet.from_dict(data, grid)


@dataclass(frozen=True)
class CrossMatrices:
    """``W = Im C`` (dissipation pairings) and ``S = Re C`` (cross pairings)."""

    W: np.ndarray
    S: np.ndarray

    @property
    def C(self) -> np.ndarray:
        return self.S + 1j * self.W

    def rotated(self, theta: float) -> "CrossMatrices":
        """Pairings of the rotated principle, ``e^{i theta} C``."""
        C = np.exp(1j * theta) * self.C
        return CrossMatrices(W=C.imag, S=C.real)


def measured_W(experiments: ExperimentSet) -> CrossMatrices:
    """Boundary pairings ``C_jk = sum |f| q0^(j) conj(u0^(k))``."""
    e = experiments
    C = (e.q0 * e.weights) @ e.u0.conj().T
    return CrossMatrices(W=C.imag, S=C.real)


def combination_W(cross: CrossMatrices, lambdas) -> float:
    """Dissipation of the ``lambda``-combined data."""
    lam = np.asarray(lambdas, dtype=complex)
    if lam.shape != (cross.W.shape[0],):
        raise DimensionError(f"expected {cross.W.shape[0]} weights, got {lam.shape}")
    lr, li = lam.real, lam.imag
    return float(
        np.sum((np.outer(lr, lr) + np.outer(li, li)) * cross.W + (np.outer(li, lr) - np.outer(lr, li)) * cross.S)
    )


def _real_weights(n):
    """``L`` with ``lambda = L mu`` for ``mu = (l1', l1'', ..., ln', ln'')``."""
    L = np.zeros((n, 2 * n), dtype=complex)
    L[np.arange(n), 2 * np.arange(n)] = 1.0
    L[np.arange(n), 2 * np.arange(n) + 1] = 1j
    return L


def _check_candidate(scene: Scene, experiments: ExperimentSet):
    if scene.physics == "elastic":
        raise ValidationError("tomography is implemented for scalar (staggered) scenes")
    if np.any(scene.source != 0):
        raise ValidationError("tomography assumes a zero interior source")
    experiments.check_grid(scene.grid)


def forward_trials(scene: Scene, experiments: ExperimentSet):
    """Complex ``(u, G)`` of the candidate driven by each experiment's data.

    Dirichlet faces of the candidate take the measured trace, flux faces the
    measured flux.
    """
    solver = DirectSolver(scene)
    d = scene.dirichlet
    out = []
    for k in range(experiments.n):
        bc = np.where(d, experiments.u0[k], experiments.q0[k])
        r = solver.solve(bc_value=bc, source=np.zeros(scene.grid.ncell, dtype=complex))
        out.append((r.u, r.G))
    return out


def trial_basis(scene: Scene, experiments: ExperimentSet, form: QuadraticForm, trials):
    """Columns ``X[:, 2j]`` (``lambda = e_j``) and ``X[:, 2j+1]`` (``lambda = i e_j``).

    Each column carries the measured data on pinned entries and the trial's
    free entries, projected onto the hard constraints.
    """
    g = scene.grid
    th, tau = scene.resolved_theta(), scene.tau
    a, b = np.exp(1j * tau), np.exp(1j * (tau + th))
    npot, nc = g.npot, g.ncell
    bf = npot + g.boundary_faces
    cols = []
    for k, (u, G) in enumerate(trials):
        for s in (1.0, 1j):
            x = np.r_[(s * a * u).real, (s * b * G).real]
            x[nc:npot] = (s * a * experiments.u0[k]).real
            x[bf] = (s * b * experiments.q0[k] * g.boundary_normal).real
            cols.append(form.with_pinned(x).project(x))
    return np.column_stack(cols)


@dataclass(frozen=True)
class PsdResult:
    """``M = M_Y - M_W`` over ``(l1', l1'', ...)``, block diagonal per frequency."""

    matrix: np.ndarray
    M_Y: np.ndarray
    M_W: np.ndarray
    min_eig: float
    norm: float
    tol: float
    feasible: bool


def _group_matrices(scene: Scene, experiments: ExperimentSet, trial_policy):
    _check_candidate(scene, experiments)
    n = experiments.n
    MY = np.zeros((2 * n, 2 * n))
    MW = np.zeros((2 * n, 2 * n))
    per_group = []
    for w, idx in experiments.groups():
        sc = scene if w == scene.omega else scene.with_omega(w)
        sc = sc.resolve()
        sub = experiments.subset(idx)
        form = assemble_Y(sc, boundary=(sub.u0[0], sub.q0[0]))
        X = trial_basis(sc, sub, form, trial_policy(sc, sub))
        my = X.T @ (form.A @ X)
        L = _real_weights(sub.n)
        cross = measured_W(sub).rotated(sc.resolved_theta())
        mw = np.imag(L.T @ cross.C @ L.conj())
        pos = np.ravel(np.column_stack([2 * idx, 2 * idx + 1]))
        MY[np.ix_(pos, pos)] = my
        MW[np.ix_(pos, pos)] = mw
        per_group.append((sc, sub, form, X, cross))
    MY = 0.5 * (MY + MY.T)
    MW = 0.5 * (MW + MW.T)
    return MY, MW, per_group


def psd_constraint(scene: Scene, experiments: ExperimentSet, trial_policy=forward_trials, rtol=FEASIBILITY_RTOL):
    """Feasibility matrix and its smallest eigenvalue.

    The candidate is feasible when ``min_eig >= -rtol * ||M_Y||``.
    """
    MY, MW, _ = _group_matrices(scene, experiments, trial_policy)
    M = MY - MW
    M = 0.5 * (M + M.T)
    lam = float(np.linalg.eigvalsh(M)[0])
    nrm = float(np.linalg.norm(MY, 2))
    tol = rtol * nrm
    return PsdResult(matrix=M, M_Y=MY, M_W=MW, min_eig=lam, norm=nrm, tol=tol, feasible=lam >= -tol)


@dataclass(frozen=True)
class FeasibilityResult:
    lambdas: np.ndarray
    residuals: np.ndarray

    @property
    def min_residual(self) -> float:
        return float(self.residuals.min())


def feasibility_residual(
    scene: Scene, experiments: ExperimentSet, lambdas=None, trial_policy=forward_trials, seed=0, samples=32
) -> FeasibilityResult:
    """``Y(trial(lambda)) - W(lambda)`` over a set of unit weight vectors.

    Without ``lambdas`` the set holds ``e_j``, ``i e_j`` and ``samples``
    random unit vectors. Experiments at different frequencies are never
    combined: each ``lambda`` is restricted to one frequency group.
    """
    _, _, groups = _group_matrices(scene, experiments, trial_policy)
    n = experiments.n
    if lambdas is None:
        rng = np.random.default_rng(seed)
        eye = np.eye(n, dtype=complex)
        rnd = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
        rnd /= np.linalg.norm(rnd, axis=1, keepdims=True)
        lambdas = np.vstack([eye, 1j * eye, rnd])
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=complex))
    if lambdas.shape[1] != n:
        raise DimensionError(f"lambda vectors need {n} entries")
    res = []
    for lam in lambdas:
        total = 0.0
        for w, idx in experiments.groups():
            sc, sub, form, X, cross = next(gr for gr in groups if gr[1].omega[0] == w)
            lg = lam[idx]
            mu = np.ravel(np.column_stack([lg.real, lg.imag]))
            total += form.evaluate(X @ mu) - combination_W(cross, lg)
        res.append(total)
    return FeasibilityResult(lambdas=lambdas, residuals=np.array(res))


def default_boundary_data(grid: StaggeredGrid, n: int) -> np.ndarray:
    """``n`` smooth Dirichlet patterns (``x``, ``y``, ``xy``, ``x^2 - y^2``, ...)."""
    xy = grid.face_centers[grid.boundary_faces]
    x, y = xy[:, 0], xy[:, 1]
    pats = [x, y, x * y, x * x - y * y]
    k = 1
    while len(pats) < n:
        pats.append(np.cos(np.pi * k * x) * np.cosh(np.pi * k * y) / np.cosh(np.pi * k))
        pats.append(np.sin(np.pi * k * y) * np.cosh(np.pi * k * x) / np.cosh(np.pi * k))
        k += 1
    return np.array(pats[:n], dtype=complex)


def synthesize_experiments(scene: Scene, data=None, n: int = 2, omegas=None) -> ExperimentSet:
    """Full Cauchy data of forward solves on ``scene`` (the "truth").

    ``data`` rows are boundary values in the scene's own Dirichlet/flux
    layout; by default ``n`` rows of :func:`default_boundary_data`.
    """
    g = scene.grid
    data = default_boundary_data(g, n) if data is None else np.atleast_2d(np.asarray(data, dtype=complex))
    omegas = np.full(data.shape[0], scene.omega) if omegas is None else np.asarray(omegas, dtype=float)
    d = scene.dirichlet
    u0, q0 = [], []
    solvers = {}
    for row, w in zip(data, omegas):
        if w not in solvers:
            solvers[w] = DirectSolver(scene if w == scene.omega else scene.with_omega(w))
        r = solvers[w].solve(bc_value=row)
        u0.append(np.where(d, row, r.traces))
        q0.append(np.where(d, r.q0, row))
    return ExperimentSet(np.array(u0), np.array(q0), omegas, g.face_area[g.boundary_faces])


# ---------------------------------------------------------------------------
# parameter scans
# ---------------------------------------------------------------------------

_PARTS = ("real", "imag", "complex")
_MODES = ("set", "scale")


@dataclass(frozen=True)
class ScanParameter:
    """One scanned modulus component, optionally restricted to a box ``[x0, x1, y0, y1]``."""

    name: str
    modulus: str
    values: tuple
    part: str = "imag"
    mode: str = "set"
    region: tuple | None = None

    def __post_init__(self):
        if self.part not in _PARTS:
            raise ValidationError(f"scan parameter {self.name!r}: part must be one of {_PARTS}")
        if self.mode not in _MODES:
            raise ValidationError(f"scan parameter {self.name!r}: mode must be one of {_MODES}")
        if len(self.values) == 0:
            raise ValidationError(f"scan parameter {self.name!r} has no values")

    def apply(self, scene: Scene, value) -> Scene:
        g = scene.grid
        fm = scene.frequency_model
        target = fm if fm is not None and self.modulus in fm else scene.moduli
        if self.modulus not in target:
            raise ValidationError(f"scan parameter {self.name!r}: scene has no modulus {self.modulus!r}")
        arr = np.array(target[self.modulus], dtype=complex)
        mask = np.ones(g.ncell, dtype=bool)
        if self.region is not None:
            x0, x1, y0, y1 = self.region
            c = g.cell_centers
            mask = (c[:, 0] >= x0) & (c[:, 0] <= x1) & (c[:, 1] >= y0) & (c[:, 1] <= y1)
        sel = arr[mask]
        v = complex(value)
        if self.part == "complex":
            sel = v * sel if self.mode == "scale" else np.full_like(sel, v)
        elif self.part == "real":
            new = v.real * sel.real if self.mode == "scale" else np.full(sel.shape, v.real)
            sel = new + 1j * sel.imag
        else:
            new = v.real * sel.imag if self.mode == "scale" else np.full(sel.shape, v.real)
            sel = sel.real + 1j * new
        arr[mask] = sel
        if target is scene.moduli:
            return replace(scene, moduli={**scene.moduli, self.modulus: arr})
        fm = {**fm, self.modulus: arr}
        return replace(scene, frequency_model=fm, moduli={})

    @classmethod
    def from_dict(cls, d, k=0) -> "ScanParameter":
        where = f"scan.parameters[{k}]"
        if not isinstance(d, dict) or not {"modulus", "values"} <= set(d):
            raise ValidationError(f"{where}: needs 'modulus' and 'values'")
        extra = set(d) - {"name", "modulus", "values", "part", "mode", "region"}
        if extra:
            raise ValidationError(f"{where}: unknown keys {sorted(extra)}")
        vals = d["values"]
        if not isinstance(vals, list):
            raise ValidationError(f"{where}.values: expected a list")
        region = d.get("region")
        if region is not None and not (isinstance(region, list) and len(region) == 4):
            raise ValidationError(f"{where}.region: expected [x0, x1, y0, y1]")
        return cls(
            name=str(d.get("name", d["modulus"])),
            modulus=d["modulus"],
            values=tuple(parse_complex(v, f"{where}.values") if isinstance(v, list) else float(v) for v in vals),
            part=d.get("part", "imag"),
            mode=d.get("mode", "set"),
            region=None if region is None else tuple(float(x) for x in region),
        )


@dataclass(frozen=True)
class ScanSpec:
    """A one- or two-parameter family of candidate scenes around ``base``."""

    base: Scene
    parameters: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 1 <= len(self.parameters) <= 2:
            raise ValidationError("a scan needs one or two parameters")

    @classmethod
    def from_scene(cls, scene: Scene) -> "ScanSpec":
        spec = scene.meta.get("scan")
        if not spec:
            raise ValidationError("scene has no 'scan' block")
        params = spec.get("parameters") if isinstance(spec, dict) else None
        if not isinstance(params, list) or not params:
            raise ValidationError("scan.parameters: expected a non-empty list")
        return cls(base=scene, parameters=tuple(ScanParameter.from_dict(p, k) for k, p in enumerate(params)))

    def candidates(self):
        for combo in itertools.product(*(p.values for p in self.parameters)):
            sc = self.base
            for p, v in zip(self.parameters, combo):
                sc = p.apply(sc, v)
            yield combo, sc


def _scan_row(names, combo, scene, experiments, rtol):
    row = {nm: v for nm, v in zip(names, combo)}
    try:
        r = psd_constraint(scene, experiments, rtol=rtol)
    except (NumericalError, ValidationError) as exc:
        row.update(min_eig=None, tol=None, feasible=False, status=f"error: {exc.name}", message=str(exc))
        return row
    row.update(
        min_eig=r.min_eig, tol=r.tol, feasible=bool(r.feasible),
        status="feasible" if r.feasible else "infeasible", message="",
    )
    return row


def parameter_scan(spec: ScanSpec, experiments: ExperimentSet, threads: int | None = None, rtol=FEASIBILITY_RTOL):
    """Feasibility table over the candidates of ``spec``.

    Candidates whose principle cannot be set up (for instance no coercive
    rotation) are reported with ``status = 'error: <name>'``.
    """
    names = [p.name for p in spec.parameters]
    cands = list(spec.candidates())
    if not cands:
        raise ValidationError("scan has no candidates")

    def run(item):
        combo, sc = item
        return _scan_row(names, combo, sc, experiments, rtol)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(run, cands))
    return [run(c) for c in cands]


def write_scan_csv(rows, path):
    if not rows:
        raise ValidationError("no rows to write")
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            out = []
            for k in keys:
                v = r[k]
                if isinstance(v, complex):
                    v = f"{v.real:.17g}{v.imag:+.17g}j"
                elif isinstance(v, float):
                    v = f"{v:.17g}"
                elif v is None:
                    v = ""
                out.append(v)
            w.writerow(out)
