"""Scene description: medium, sources, boundary data and rotation parameters.

Moduli are stored unrotated (physical). The rotation ``(theta, tau)`` of the
variational principle is applied on demand by :func:`rotated_sites`::

    Z -> e^{i theta} Z,   h -> e^{i(tau+theta)} h,
    u0 -> e^{i tau} u0,   q0 -> e^{i(tau+theta)} q0.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import BlockZ, select_theta
from .errors import (
    DimensionError,
    UnsupportedCouplingError,
    ValidationError,
)
from .grid import SIDES, StaggeredGrid

__all__ = [
    "Scene",
    "SiteData",
    "PHYSICS",
    "physical_sites",
    "directional_coefficients",
    "rotated_sites",
    "parse_scene",
    "load_scene",
    "scene_to_dict",
    "dumps",
    "parse_complex",
]

PHYSICS = ("quasistatic", "acoustic", "elastic")
_MODULI = {
    "quasistatic": ("eps",),
    "acoustic": ("rho", "kappa"),
    "elastic": ("lam", "mu", "rho"),
}
_TENSOR_OK = {"eps", "rho"}
_BC_KINDS = ("dirichlet", "flux")


class KappaSignWarning(UserWarning):
    pass


def _as_cellwise(name, value, ncell, physics):
    a = np.asarray(value, dtype=complex)
    tensor = name in _TENSOR_OK and physics != "elastic"
    if a.ndim == 0:
        a = np.full(ncell, complex(a))
    if a.ndim == 1 and a.shape == (ncell,):
        return a
    if tensor and a.shape == (2, 2):
        a = np.broadcast_to(a, (ncell, 2, 2)).copy()
    if tensor and a.shape == (ncell, 2, 2):
        return a
    raise DimensionError(f"modulus {name!r} has shape {np.shape(value)}; expected scalar or ({ncell},)")


def _diag_pair(a):
    """Diagonal (xx, yy) entries of a scalar or 2x2 per-cell modulus."""
    if a.ndim == 1:
        return np.column_stack([a, a])
    off = np.abs(a[:, 0, 1]) + np.abs(a[:, 1, 0])
    if np.any(off > 0):
        c = int(np.flatnonzero(off > 0)[0])
        raise UnsupportedCouplingError(
            f"off-diagonal tensor entries (cell {c}) couple x- and y-faces; the staggered path needs diagonal tensors"
        )
    return np.column_stack([a[:, 0, 0], a[:, 1, 1]])


@dataclass(eq=False)
class Scene:
    """Medium, source, boundary data and rotation for one forward problem.

    Parameters
    ----------
    physics : {'quasistatic', 'acoustic', 'elastic'}
    grid : StaggeredGrid
    moduli : dict
        ``eps`` (quasistatic); ``rho``, ``kappa`` (acoustic); ``lam``, ``mu``,
        ``rho`` (elastic). Scalars broadcast to every cell; ``eps`` and
        acoustic ``rho`` may be 2x2 tensors per cell.
    omega : float
        Angular frequency (ignored for quasistatic).
    theta, tau : float or 'auto'
        Rotation of the principle. ``theta='auto'`` picks the angle that
        maximises the coercivity margin.
    source : array, optional
        ``h`` per cell (``(ncell,)``), or body force ``(ncell, 2)`` for
        elastic scenes.
    bc_kind : array of str
        ``'dirichlet'`` or ``'flux'`` per boundary face.
    bc_value : array
        Trace value (Dirichlet) or outward normal flux ``G.n`` (flux); for
        elastic scenes a displacement 2-vector per face.
    """

    physics: str
    grid: StaggeredGrid
    moduli: dict
    bc_kind: np.ndarray
    bc_value: np.ndarray
    omega: float = 1.0
    theta: float | str = 0.0
    tau: float = 0.0
    source: np.ndarray | None = None
    frequency_model: dict | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.physics not in PHYSICS:
            raise ValidationError(f"unknown physics {self.physics!r}; expected one of {PHYSICS}")
        g = self.grid
        nc, nb = g.ncell, g.nbface
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValidationError(f"omega must be positive, got {self.omega}")
        if self.frequency_model is not None:
            if self.physics != "quasistatic":
                raise ValidationError("frequency model eps0 + i sigma0/omega applies to quasistatic scenes only")
            fm = {k: _as_cellwise("eps", self.frequency_model[k], nc, self.physics) for k in ("eps0", "sigma0")}
            self.frequency_model = fm
            self.moduli = dict(self.moduli)
            self.moduli["eps"] = fm["eps0"] + 1j * fm["sigma0"] / self.omega
        need = _MODULI[self.physics]
        extra = set(self.moduli) - set(need)
        missing = [k for k in need if k not in self.moduli]
        if missing:
            raise ValidationError(f"{self.physics} scene is missing moduli {missing}")
        if extra:
            raise ValidationError(f"moduli {sorted(extra)} do not belong to a {self.physics} scene")
        self.moduli = {k: _as_cellwise(k, self.moduli[k], nc, self.physics) for k in need}
        if self.physics == "acoustic":
            kappa = self.moduli["kappa"]
            if np.any(kappa == 0):
                raise ValidationError("kappa must be nonzero in every cell")
            if np.any(kappa.imag > 0):
                warnings.warn(
                    "kappa has a positive imaginary part; loss usually gives a negative one",
                    KappaSignWarning,
                    stacklevel=2,
                )
        vec = self.physics == "elastic"
        if self.source is None:
            self.source = np.zeros((nc, 2) if vec else nc, dtype=complex)
        src = np.asarray(self.source, dtype=complex)
        if src.ndim == 0 or (vec and src.shape == (2,)):
            src = np.broadcast_to(src, (nc, 2) if vec else (nc,)).copy()
        if src.shape != ((nc, 2) if vec else (nc,)):
            raise DimensionError(f"source has shape {src.shape}")
        self.source = src
        kind = np.asarray(self.bc_kind, dtype=object)
        if kind.shape != (nb,):
            raise ValidationError(f"boundary needs one entry per boundary face ({nb}), got {kind.shape}")
        for k, v in enumerate(kind):
            if v not in _BC_KINDS:
                raise ValidationError(
                    f"boundary face {int(g.boundary_faces[k])} ({g.boundary_side[k]}) has kind {v!r}"
                )
        self.bc_kind = kind
        val = np.asarray(self.bc_value, dtype=complex)
        if val.shape != ((nb, 2) if vec else (nb,)):
            raise DimensionError(f"boundary values have shape {val.shape}")
        if vec and np.any(val[kind == "flux"] != 0):
            raise ValidationError("elastic traction data must be zero (traction-free sides only)")
        self.bc_value = val
        if not isinstance(self.theta, str):
            self.theta = float(self.theta)
        elif self.theta != "auto":
            raise ValidationError(f"theta must be a number or 'auto', got {self.theta!r}")
        self.tau = float(self.tau)
        if not math.isfinite(self.tau) or (not isinstance(self.theta, str) and not math.isfinite(self.theta)):
            raise ValidationError("rotation parameters must be finite")

    # -- derived quantities ---------------------------------------------
    @property
    def dirichlet(self) -> np.ndarray:
        return self.bc_kind == "dirichlet"

    def cell_Z(self) -> BlockZ:
        """Unrotated per-cell constitutive matrices."""
        nc = self.grid.ncell
        if self.physics == "quasistatic":
            eps = self.moduli["eps"]
            Z = np.zeros((nc, 3, 3), dtype=complex)
            Z[:, :2, :2] = eps[:, None, None] * np.eye(2) if eps.ndim == 1 else eps
            return BlockZ(Z, 1, 2)
        if self.physics == "acoustic":
            rho = self.moduli["rho"]
            Z = np.zeros((nc, 3, 3), dtype=complex)
            if rho.ndim == 1:
                Z[:, :2, :2] = -(1.0 / rho)[:, None, None] * np.eye(2)
            else:
                Z[:, :2, :2] = -np.linalg.inv(rho)
            Z[:, 2, 2] = self.omega**2 / self.moduli["kappa"]
            return BlockZ(Z, 1, 2)
        from .physics.elastic import elastic_cell_Z

        return elastic_cell_Z(self.moduli["lam"], self.moduli["mu"], self.moduli["rho"], self.omega)

    def active_components(self):
        """Components on which coercivity is required."""
        if self.physics == "quasistatic":
            return [0, 1]
        if self.physics == "elastic":
            raise ValidationError("elastic coercivity lives on the symmetric subspace; use active_Z")
        return list(range(self.cell_Z().size))

    def active_Z(self) -> np.ndarray:
        """Constitutive matrices on the subspace where coercivity is required.

        Elastic fields only carry the symmetric part of the gradient, so the
        matrices are projected onto (Mandel strain, displacement).
        """
        if self.physics == "elastic":
            from .physics.elastic import symmetric_projector

            Q = symmetric_projector()
            return np.einsum("ia,nij,jb->nab", Q, self.cell_Z().Z, Q)
        return self.cell_Z().restrict(self.active_components())

    def resolved_theta(self) -> float:
        if isinstance(self.theta, str):
            return select_theta(self.active_Z())
        return float(self.theta)

    def with_theta(self, theta=None, tau=None) -> "Scene":
        """Copy with new rotation parameters; 'auto' is resolved immediately."""
        th = self.theta if theta is None else theta
        if isinstance(th, str):
            th = replace(self, theta=th).resolved_theta()
        return replace(self, theta=th, tau=self.tau if tau is None else tau)

    def resolve(self) -> "Scene":
        return self.with_theta(self.resolved_theta())

    def with_boundary(self, kind=None, value=None) -> "Scene":
        return replace(
            self,
            bc_kind=self.bc_kind if kind is None else kind,
            bc_value=self.bc_value if value is None else value,
        )

    def with_omega(self, omega: float) -> "Scene":
        if self.frequency_model is not None:
            moduli = {}
        else:
            moduli = self.moduli
        return replace(self, omega=float(omega), moduli=moduli)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return dumps(scene_to_dict(self)) == dumps(scene_to_dict(other))


@dataclass(frozen=True)
class SiteData:
    """Scalar constitutive coefficient per quadrature site (faces then cells)."""

    z: np.ndarray
    h: np.ndarray
    u0: np.ndarray
    q0: np.ndarray
    dirichlet: np.ndarray
    theta: float
    tau: float


def _harmonic(a, b):
    out = np.zeros(np.broadcast(a, b).shape, dtype=complex)
    ok = (a != 0) & (b != 0)
    s = a + b
    if np.any(ok & (s == 0)):
        raise ValidationError("face coefficient undefined: adjacent cell moduli sum to zero")
    out[ok] = 2 * a[ok] * b[ok] / s[ok]
    return out


def directional_coefficients(scene: Scene) -> np.ndarray:
    """``(ncell, 2)`` gradient-block coefficients along x and y."""
    if scene.physics == "elastic":
        raise ValidationError("elastic scenes use the nodal element path, not staggered sites")
    if scene.physics == "quasistatic":
        return _diag_pair(scene.moduli["eps"])
    return -1.0 / _diag_pair(scene.moduli["rho"])


def _face_and_cell_values(scene: Scene):
    g = scene.grid
    pair = directional_coefficients(scene)
    Zc = scene.cell_Z()
    fc = g.face_cells
    ax = g.face_axis
    a = np.where(fc[:, 0] >= 0, pair[np.maximum(fc[:, 0], 0), ax], 0)
    b = np.where(fc[:, 1] >= 0, pair[np.maximum(fc[:, 1], 0), ax], 0)
    inner = (fc >= 0).all(axis=1)
    zf = np.where(inner, 0, a + b).astype(complex)
    zf[inner] = _harmonic(a[inner], b[inner])
    zc = Zc.M[:, 0, 0].copy()
    return np.concatenate([zf, zc])


def physical_sites(scene: Scene, boundary=None) -> SiteData:
    """Unrotated site coefficients, source and boundary data.

    ``boundary`` may supply full Cauchy data ``(u0, q0)``; otherwise the
    scene's data are used, with NaN in the complementary slot.
    """
    z = _face_and_cell_values(scene)
    nb = scene.grid.nbface
    if boundary is None:
        d = scene.dirichlet
        u0 = np.where(d, scene.bc_value, np.nan + 0j)
        q0 = np.where(~d, scene.bc_value, np.nan + 0j)
    else:
        u0, q0 = (np.asarray(x, dtype=complex) for x in boundary)
        if u0.shape != (nb,) or q0.shape != (nb,):
            raise DimensionError("boundary data need one value per boundary face")
    return SiteData(z=z, h=scene.source.copy(), u0=u0, q0=q0, dirichlet=scene.dirichlet.copy(), theta=0.0, tau=0.0)


def rotated_sites(scene: Scene, boundary=None) -> SiteData:
    """Site data of the rotated principle."""
    s = physical_sites(scene, boundary)
    th = scene.resolved_theta()
    tau = scene.tau
    a = np.exp(1j * th)
    b = np.exp(1j * (tau + th))
    return SiteData(
        z=a * s.z,
        h=b * s.h,
        u0=np.exp(1j * tau) * s.u0,
        q0=b * s.q0,
        dirichlet=s.dirichlet,
        theta=th,
        tau=tau,
    )


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------


def parse_complex(v, where="value") -> complex:
    """Number or ``[re, im]`` pair -> complex."""
    if isinstance(v, bool):
        raise ValidationError(f"{where}: expected a number or [re, im], got {v!r}")
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if (
        isinstance(v, (list, tuple))
        and len(v) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
    ):
        return complex(float(v[0]), float(v[1]))
    raise ValidationError(f"{where}: expected a number or [re, im], got {v!r}")


def _cplx_json(z):
    z = complex(z)
    return [z.real, z.imag]


def _parse_modspec(spec, grid: StaggeredGrid, where, vector=False):
    """Uniform, per-cell or region-based modulus specification."""
    nc = grid.ncell
    conv = (lambda v, w: _parse_vec(v, w)) if vector else parse_complex
    if not isinstance(spec, dict):
        return np.array([conv(spec, where)] * nc) if not vector else np.tile(conv(spec, where), (nc, 1))
    keys = set(spec)
    if keys == {"uniform"}:
        val = conv(spec["uniform"], f"{where}.uniform")
        return np.tile(val, (nc, 1)) if vector else np.full(nc, val)
    if keys == {"cells"}:
        cells = spec["cells"]
        if not isinstance(cells, list) or len(cells) != nc:
            raise ValidationError(f"{where}.cells: expected {nc} entries")
        return np.array([conv(c, f"{where}.cells[{k}]") for k, c in enumerate(cells)])
    if keys <= {"background", "regions"} and "regions" in keys:
        bg = conv(spec.get("background", 0.0), f"{where}.background")
        out = np.tile(bg, (nc, 1)) if vector else np.full(nc, bg)
        xy = grid.cell_centers
        for k, reg in enumerate(spec["regions"]):
            if not isinstance(reg, dict) or set(reg) != {"box", "value"}:
                raise ValidationError(f"{where}.regions[{k}]: needs exactly 'box' and 'value'")
            box = reg["box"]
            if not (isinstance(box, list) and len(box) == 4):
                raise ValidationError(f"{where}.regions[{k}].box: expected [x0, x1, y0, y1]")
            x0, x1, y0, y1 = map(float, box)
            sel = (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & (xy[:, 1] >= y0) & (xy[:, 1] <= y1)
            out[sel] = conv(reg["value"], f"{where}.regions[{k}].value")
        return out
    raise ValidationError(f"{where}: expected one of 'uniform', 'cells' or 'regions', got keys {sorted(keys)}")


def _parse_vec(v, where):
    if not isinstance(v, list) or len(v) != 2:
        raise ValidationError(f"{where}: expected a 2-vector of complex entries")
    return np.array([parse_complex(v[0], f"{where}[0]"), parse_complex(v[1], f"{where}[1]")])


def _parse_boundary(spec, grid: StaggeredGrid, vector: bool):
    if not isinstance(spec, dict) or not set(spec) <= {"sides", "faces"}:
        raise ValidationError("boundary: expected an object with 'sides' and/or 'faces'")
    nb = grid.nbface
    kind = np.full(nb, None, dtype=object)
    value = np.zeros((nb, 2) if vector else nb, dtype=complex)
    conv = _parse_vec if vector else parse_complex
    count = np.zeros(nb, dtype=int)

    def assign(pos, entry, where, k=None):
        if not isinstance(entry, dict) or "type" not in entry:
            raise ValidationError(f"{where}: expected an object with 'type'")
        t = entry["type"]
        if t == "traction":
            t = "flux"
        if t not in _BC_KINDS:
            raise ValidationError(f"{where}.type: unknown boundary type {entry['type']!r}")
        if not set(entry) <= {"type", "value", "values"}:
            raise ValidationError(f"{where}: unexpected keys {sorted(set(entry) - {'type', 'value', 'values'})}")
        kind[pos] = t
        count[pos] += 1
        if "values" in entry:
            vals = entry["values"]
            if not isinstance(vals, list) or len(vals) != len(pos):
                raise ValidationError(f"{where}.values: expected {len(pos)} entries")
            for p, v in zip(pos, vals):
                value[p] = conv(v, f"{where}.values")
        else:
            value[pos] = conv(entry.get("value", 0.0), f"{where}.value")

    for side, entry in (spec.get("sides") or {}).items():
        if side not in SIDES:
            raise ValidationError(f"boundary.sides: unknown side {side!r}")
        assign(grid.side_faces(side), entry, f"boundary.sides.{side}")
    for k, entry in enumerate(spec.get("faces") or []):
        if not isinstance(entry, dict) or "face" not in entry:
            raise ValidationError(f"boundary.faces[{k}]: expected an object with 'face'")
        f = entry["face"]
        if not isinstance(f, int) or not (0 <= f < grid.nface) or grid.boundary_position[f] < 0:
            raise ValidationError(f"boundary.faces[{k}]: {f!r} is not a boundary face index")
        e = dict(entry)
        del e["face"]
        assign(np.array([grid.boundary_position[f]]), e, f"boundary.faces[{k}]")
    if np.any(count > 1):
        p = int(np.flatnonzero(count > 1)[0])
        raise ValidationError(
            f"boundary face {int(grid.boundary_faces[p])} ({grid.boundary_side[p]} side) is specified more than once"
        )
    if np.any(count == 0):
        p = int(np.flatnonzero(count == 0)[0])
        raise ValidationError(
            f"boundary face {int(grid.boundary_faces[p])} ({grid.boundary_side[p]} side) has no boundary datum"
        )
    return kind, value


_TOP_KEYS = {
    "physics", "grid", "omega", "theta", "tau", "moduli", "source", "boundary",
    "frequency_model", "label", "inclusions", "scan",
}


def parse_scene(data, resolve_theta=True) -> Scene:
    """Build a validated :class:`Scene` from a JSON-like dictionary."""
    if not isinstance(data, dict):
        raise ValidationError("scene: expected a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"scene: unknown keys {sorted(unknown)}")
    if data.get("inclusions"):
        raise ValidationError("inclusions: interior boundaries are not supported")
    physics = data.get("physics")
    if physics not in PHYSICS:
        raise ValidationError(f"physics: expected one of {PHYSICS}, got {physics!r}")
    gs = data.get("grid")
    if not isinstance(gs, dict) or not {"nx", "ny"} <= set(gs) or not set(gs) <= {"nx", "ny", "hx", "hy"}:
        raise ValidationError("grid: expected {nx, ny[, hx, hy]}")
    grid = StaggeredGrid(gs["nx"], gs["ny"], gs.get("hx", 1.0), gs.get("hy", 1.0))
    vector = physics == "elastic"
    ms = data.get("moduli", {})
    if not isinstance(ms, dict):
        raise ValidationError("moduli: expected an object")
    fm = data.get("frequency_model")
    moduli = {k: _parse_modspec(v, grid, f"moduli.{k}") for k, v in ms.items()}
    if fm is not None:
        if not isinstance(fm, dict) or set(fm) != {"eps0", "sigma0"}:
            raise ValidationError("frequency_model: expected {eps0, sigma0}")
        fm = {k: _parse_modspec(v, grid, f"frequency_model.{k}") for k, v in fm.items()}
    source = None
    if data.get("source") is not None:
        source = _parse_modspec(data["source"], grid, "source", vector=vector)
    if "boundary" not in data:
        raise ValidationError("boundary: missing")
    kind, value = _parse_boundary(data["boundary"], grid, vector)
    theta = data.get("theta", "auto")
    if not isinstance(theta, str):
        theta = float(theta)
    try:
        scene = Scene(
            physics=physics,
            grid=grid,
            moduli=moduli,
            bc_kind=kind,
            bc_value=value,
            omega=float(data.get("omega", 1.0)),
            theta=theta,
            tau=float(data.get("tau", 0.0)),
            source=source,
            frequency_model=fm,
            label=str(data.get("label", "")),
            meta={"scan": data["scan"]} if "scan" in data else {},
        )
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"scene: {exc}") from None
    if resolve_theta and isinstance(scene.theta, str):
        scene = scene.resolve()
    return scene


def load_scene(path, resolve_theta=True) -> Scene:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return parse_scene(data, resolve_theta=resolve_theta)


def scene_to_dict(scene: Scene) -> dict:
    """Canonical JSON form (per-cell arrays, per-face boundary entries)."""
    g = scene.grid
    vector = scene.physics == "elastic"

    def cells(a):
        if a.ndim != 1:
            raise ValidationError("tensor moduli cannot be serialized; use scalar moduli in scene files")
        return {"cells": [_cplx_json(x) for x in a]}

    out = {
        "physics": scene.physics,
        "grid": {"nx": g.nx, "ny": g.ny, "hx": g.hx, "hy": g.hy},
        "omega": scene.omega,
        "theta": scene.theta,
        "tau": scene.tau,
    }
    if scene.frequency_model is not None:
        out["frequency_model"] = {k: cells(v) for k, v in scene.frequency_model.items()}
        out["moduli"] = {}
    else:
        out["moduli"] = {k: cells(v) for k, v in scene.moduli.items()}
    if vector:
        out["source"] = {"cells": [[_cplx_json(x) for x in row] for row in scene.source]}
    else:
        out["source"] = cells(scene.source)
    faces = []
    for p, f in enumerate(g.boundary_faces):
        v = scene.bc_value[p]
        faces.append(
            {
                "face": int(f),
                "type": scene.bc_kind[p],
                "value": [_cplx_json(x) for x in v] if vector else _cplx_json(v),
            }
        )
    out["boundary"] = {"faces": faces}
    if scene.label:
        out["label"] = scene.label
    if scene.meta.get("scan") is not None:
        out["scan"] = scene.meta["scan"]
    return out


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0.0"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent=2, _level=0) -> str:
    """Deterministic JSON with floats printed to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, int, float, np.integer, np.floating)):
        return _fmt(obj)
    if isinstance(obj, complex):
        return dumps(_cplx_json(obj), indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.integer, np.floating)) or v is None for v in obj):
            return "[" + ", ".join(_fmt(v) if v is not None else "null" for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
