"""Command-line entry point ``varprin``.

Every command reads a scene JSON file, prints a deterministic JSON result and
optionally writes artifacts into ``--out-dir``. Exit status is 0 on success,
2 for invalid input and 3 for numerical failures; failures print a JSON error
object carrying the error name.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .assembly import assemble_Q, assemble_Y, cauchy_data
from .dtn import dtn_assemble, electrostatic_pair
from .errors import NumericalError, ValidationError
from .physics.dissipation import boundary_dissipation, dissipation
from .scene import Scene, directional_coefficients, dumps, load_scene
from .solvers import minimize_convex, solve_direct, solve_saddle
from .tomography import (
    ScanSpec,
    load_experiments,
    measured_W,
    parameter_scan,
    synthesize_experiments,
    write_scan_csv,
)

COMMANDS = ("solve", "minimize", "saddle", "dtn", "bound", "dissipation", "scan")


def _c(a):
    """Complex array -> nested ``[re, im]`` lists."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _rel(a, b, scale=None) -> float:
    a, b = np.asarray(a), np.asarray(b)
    s = np.abs(b).max(initial=0.0) if scale is None else scale
    return float(np.abs(a - b).max(initial=0.0) / max(s, np.finfo(float).tiny))


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(x if isinstance(x, str) else f"{x:.17g}" for x in r) + "\n")


def _field_csv(out_dir, scene: Scene, res):
    if scene.physics == "elastic":
        xy = scene.grid.node_coords
        rows = [(*xy[k], *np.ravel(_c(res.u[k]))) for k in range(xy.shape[0])]
        _write_csv(os.path.join(out_dir, "fields.csv"), ["x", "y", "ux_re", "ux_im", "uy_re", "uy_im"], rows)
        return
    g = scene.grid
    cc = g.cell_centers
    _write_csv(
        os.path.join(out_dir, "cells.csv"), ["cell", "x", "y", "u_re", "u_im"],
        [(str(k), cc[k, 0], cc[k, 1], res.u[k].real, res.u[k].imag) for k in range(g.ncell)],
    )
    fc = g.face_centers
    _write_csv(
        os.path.join(out_dir, "faces.csv"), ["face", "x", "y", "G_re", "G_im"],
        [(str(k), fc[k, 0], fc[k, 1], res.G[k].real, res.G[k].imag) for k in range(g.nface)],
    )


def cmd_solve(scene: Scene, args) -> dict:
    res = solve_direct(scene)
    out = {"residual": res.residual}
    if scene.physics == "elastic":
        out["displacement"] = _c(res.u)
        out["stress_mandel"] = _c(res.G)
    else:
        out["potential_cells"] = _c(res.cells)
        out["potential_traces"] = _c(res.traces)
        out["face_potential"] = _c(res.face_potential(directional_coefficients(scene)))
        out["flux"] = _c(res.G)
        out["boundary_flux"] = _c(res.q0)
    if args.out_dir:
        _field_csv(args.out_dir, scene, res)
    return out


def _check_staggered(scene, what):
    if scene.physics == "elastic":
        raise ValidationError(f"'{what}' is available for scalar scenes only; elastic scenes use 'saddle'")


def cmd_minimize(scene: Scene, args) -> dict:
    _check_staggered(scene, "minimize")
    direct = solve_direct(scene)
    form = assemble_Y(scene, boundary=cauchy_data(scene))
    res = minimize_convex(form)
    g = scene.grid
    th, tau = scene.resolved_theta(), scene.tau
    u_ref = (np.exp(1j * tau) * direct.u).real
    G_ref = (np.exp(1j * (tau + th)) * direct.G).real
    return {
        "Y_min": res.functional_value,
        "boundary_form": boundary_dissipation(scene, direct, th),
        "iterations": res.iterations,
        "cg_residual": res.residual,
        "u_re_rotated": res.x[: g.npot].tolist(),
        "G_re_rotated": res.x[g.npot :].tolist(),
        "rel_diff_u_vs_direct": _rel(res.x[: g.npot], u_ref, np.abs(direct.u).max()),
        "rel_diff_G_vs_direct": _rel(res.x[g.npot :], G_ref, np.abs(direct.G).max()),
    }


def cmd_saddle(scene: Scene, args) -> dict:
    form = assemble_Q(scene)
    res = solve_saddle(form)
    n = form.n // 2
    u = np.exp(-1j * scene.tau) * (res.x[:n] + 1j * res.x[n:])
    direct = solve_direct(scene)
    ref = np.ravel(direct.u)
    if scene.physics == "elastic":
        u = u.reshape(-1, 2)
    return {
        "Q_stationary": res.functional_value,
        "stationarity_residual": res.residual,
        "u": _c(u),
        "rel_diff_vs_direct": _rel(np.ravel(u), ref),
    }


def cmd_dtn(scene: Scene, args) -> dict:
    _check_staggered(scene, "dtn")
    d = dtn_assemble(scene, threads=args.threads)
    if args.out_dir:
        d.write_csv(os.path.join(args.out_dir, "dtn.csv"))
        with open(os.path.join(args.out_dir, "dtn.json"), "w") as fh:
            fh.write(dumps({"faces": d.faces.tolist(), "weights": d.weights.tolist(), "N": _c(d.N)}) + "\n")
    return {
        "size": int(d.N.shape[0]),
        "faces": d.faces.tolist(),
        "symmetry": {
            "weighted_symmetry_defect": d.symmetry_defect(),
            "imag_min_eig": d.imag_min_eig(),
            "norm": float(np.linalg.norm(d.form)),
        },
        "N": _c(d.N),
    }


def cmd_bound(scene: Scene, args) -> dict:
    _check_staggered(scene, "bound")
    form = assemble_Y(scene, boundary=cauchy_data(scene))
    res = minimize_convex(form)
    x0 = form.x0
    out = {
        "Y_min": res.functional_value,
        "upper_bound_zero_trial": form.evaluate(x0),
    }
    eps = scene.moduli.get("eps")
    if (
        scene.physics == "quasistatic"
        and np.all(np.asarray(eps).imag == 0)
        and np.all(scene.source == 0)
        and np.all(scene.bc_value[~scene.dirichlet] == 0)
    ):
        w, wt = electrostatic_pair(scene)
        out["dirichlet_energy"] = w
        out["thompson_energy"] = wt
    return out


def cmd_dissipation(scene: Scene, args) -> dict:
    res = solve_direct(scene)
    out = {"volume": dissipation(scene, res), "boundary": boundary_dissipation(scene, res)}
    if args.experiments:
        ex = load_experiments(args.experiments, scene.grid)
        cr = measured_W(ex)
        out["measured"] = {"W": cr.W.tolist(), "S": cr.S.tolist()}
    return out


def cmd_scan(scene: Scene, args) -> dict:
    spec = ScanSpec.from_scene(scene)
    if args.experiments:
        ex = load_experiments(args.experiments, scene.grid)
        source = "file"
    else:
        ex = synthesize_experiments(scene.resolve(), n=2)
        source = "synthesized from the base scene"
    rows = parameter_scan(spec, ex, threads=args.threads)
    if args.out_dir:
        write_scan_csv(rows, os.path.join(args.out_dir, "scan.csv"))
    return {"experiments": {"n": ex.n, "source": source}, "rows": rows}


_HANDLERS = {
    "solve": cmd_solve,
    "minimize": cmd_minimize,
    "saddle": cmd_saddle,
    "dtn": cmd_dtn,
    "bound": cmd_bound,
    "dissipation": cmd_dissipation,
    "scan": cmd_scan,
}


def _parse_theta(text):
    if text is None or text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"--theta: expected 'auto' or a number in radians, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varprin", description="Variational principles for lossy media.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("scene", help="scene JSON file")
    p.add_argument("--experiments", help="experiments JSON file (dissipation, scan)")
    p.add_argument("--out-dir", help="directory for JSON and CSV artifacts")
    p.add_argument("--threads", type=int, default=None, help="cap on concurrent solves")
    p.add_argument("--theta", default=None, help="'auto' or rotation angle in radians")
    return p


def run(argv=None):
    """Execute one command; returns ``(exit_code, result_dict)``."""
    args = build_parser().parse_args(argv)
    out = {"command": args.command, "scene": args.scene}
    try:
        theta = _parse_theta(args.theta)
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
        scene = load_scene(args.scene, resolve_theta=False)
        if theta is not None:
            scene = replace(scene, theta=theta)
        if args.command != "scan" and isinstance(scene.theta, str):
            scene = scene.resolve()
        out["physics"] = scene.physics
        out["theta"] = scene.theta
        out["tau"] = scene.tau
        out["status"] = "ok"
        out["result"] = _HANDLERS[args.command](scene, args)
        code = 0
    except ValidationError as exc:
        out["status"] = "error"
        out["error"] = {"name": exc.name, "type": type(exc).__name__, "message": str(exc)}
        code = 2
    except NumericalError as exc:
        out["status"] = "error"
        out["error"] = {"name": exc.name, "type": type(exc).__name__, "message": str(exc)}
        code = 3
    if args.out_dir:
        with open(os.path.join(args.out_dir, f"{args.command}.json"), "w") as fh:
            fh.write(dumps(out) + "\n")
    return code, out


def main(argv=None) -> int:
    code, out = run(argv)
    sys.stdout.write(dumps(out) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
