import json
import os
import warnings

import numpy as np
import pytest

from conftest import all_kind, series_scene
from varprin.errors import DimensionError, UnsupportedCouplingError, ValidationError
from varprin.grid import StaggeredGrid
from varprin.scene import (
    KappaSignWarning,
    Scene,
    directional_coefficients,
    dumps,
    load_scene,
    parse_complex,
    parse_scene,
    physical_sites,
    rotated_sites,
    scene_to_dict,
)

SCENES = os.path.join(os.path.dirname(__file__), os.pardir, "scenes")


def minimal(**over):
    d = {
        "physics": "quasistatic",
        "grid": {"nx": 2, "ny": 2},
        "moduli": {"eps": [1.0, 1.0]},
        "boundary": {"sides": {s: {"type": "dirichlet", "value": 0.0} for s in ("left", "right", "bottom", "top")}},
    }
    d.update(over)
    return d


class TestParse:
    def test_minimal_scene_picks_theta(self):
        sc = parse_scene(minimal())
        # eps = 1 + i is best rotated to i |eps|
        assert sc.theta == pytest.approx(np.pi / 4, abs=1e-6)

    def test_deferred_theta(self):
        assert parse_scene(minimal(), resolve_theta=False).theta == "auto"

    def test_complex_literals(self):
        assert parse_complex(2) == 2 + 0j and parse_complex([1, -2]) == 1 - 2j
        with pytest.raises(ValidationError):
            parse_complex("1+2j")
        with pytest.raises(ValidationError):
            parse_complex(True)

    def test_missing_face_is_named(self):
        d = minimal()
        del d["boundary"]["sides"]["top"]
        with pytest.raises(ValidationError, match=r"boundary face \d+ \(top side\) has no boundary datum"):
            parse_scene(d)

    def test_face_override_conflicts(self):
        d = minimal()
        d["boundary"]["faces"] = [{"face": 0, "type": "flux", "value": 0.0}]
        with pytest.raises(ValidationError, match="more than once"):
            parse_scene(d)

    def test_inclusions_rejected(self):
        with pytest.raises(ValidationError, match="inclusions"):
            parse_scene(minimal(inclusions=[{"box": [0, 1, 0, 1]}]))

    def test_unknown_keys(self):
        with pytest.raises(ValidationError, match="unknown keys"):
            parse_scene(minimal(colour="red"))

    def test_regions(self):
        d = minimal(moduli={"eps": {"background": [1, 1], "regions": [{"box": [0, 1, 0, 1], "value": [5, 1]}]}})
        sc = parse_scene(d)
        assert sc.moduli["eps"][0] == 5 + 1j and sc.moduli["eps"][3] == 1 + 1j

    def test_wrong_cell_count(self):
        with pytest.raises(ValidationError, match="expected 4 entries"):
            parse_scene(minimal(moduli={"eps": {"cells": [1, 1, 1]}}))

    def test_missing_modulus(self):
        with pytest.raises(ValidationError, match="missing moduli"):
            parse_scene(minimal(physics="acoustic", moduli={"rho": 1.0}))

    def test_json_errors_report_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "physics": "quasistatic",\n  "grid": {nx: 2}\n}')
        with pytest.raises(ValidationError, match="line 3 column 12"):
            load_scene(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_scene(tmp_path / "nope.json")

    @pytest.mark.parametrize("name", ["series_2cell", "acoustic_8x8", "elastic_4x4", "scan_eps"])
    def test_bundled_scenes(self, name):
        sc = load_scene(os.path.join(SCENES, name + ".json"))
        assert not isinstance(sc.theta, str)


class TestScene:
    def test_frequency_model(self):
        d = minimal(frequency_model={"eps0": 2.0, "sigma0": 3.0}, omega=1.5)
        del d["moduli"]
        sc = parse_scene(d)
        assert np.allclose(sc.moduli["eps"], 2 + 2j)
        assert np.allclose(sc.with_omega(3.0).moduli["eps"], 2 + 1j)

    def test_kappa_sign_warning(self):
        g = StaggeredGrid(2, 2, 0.5, 0.5)
        with pytest.warns(KappaSignWarning):
            Scene("acoustic", g, {"rho": 1 + 1j, "kappa": 1 + 0.1j}, all_kind(g), np.zeros(g.nbface))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            Scene("acoustic", g, {"rho": 1 + 1j, "kappa": 1 - 0.1j}, all_kind(g), np.zeros(g.nbface))

    def test_bad_boundary_kind(self):
        g = StaggeredGrid(2, 2, 0.5, 0.5)
        kind = all_kind(g)
        kind[3] = "robin"
        with pytest.raises(ValidationError, match="robin"):
            Scene("quasistatic", g, {"eps": 1 + 1j}, kind, np.zeros(g.nbface))

    def test_dimension_checks(self):
        g = StaggeredGrid(2, 2, 0.5, 0.5)
        with pytest.raises(DimensionError):
            Scene("quasistatic", g, {"eps": np.ones(3)}, all_kind(g), np.zeros(g.nbface))
        with pytest.raises(DimensionError):
            Scene("quasistatic", g, {"eps": 1.0}, all_kind(g), np.zeros(3))

    def test_off_diagonal_tensor_rejected(self):
        g = StaggeredGrid(2, 2, 0.5, 0.5)
        eps = np.array([[1 + 1j, 0.2], [0.2, 1 + 1j]])
        sc = Scene("quasistatic", g, {"eps": eps}, all_kind(g), np.zeros(g.nbface))
        with pytest.raises(UnsupportedCouplingError):
            directional_coefficients(sc)

    def test_rotated_sites(self):
        sc = series_scene(theta=0.3, tau=0.2)
        p, r = physical_sites(sc), rotated_sites(sc)
        assert np.allclose(r.z, np.exp(0.3j) * p.z)
        # sites without a prescribed value carry NaN
        assert np.allclose(r.u0, np.exp(0.2j) * p.u0, equal_nan=True)
        assert np.allclose(r.q0, np.exp(0.5j) * p.q0, equal_nan=True)

    def test_elastic_traction_must_vanish(self):
        g = StaggeredGrid(2, 2, 0.5, 0.5)
        val = np.zeros((g.nbface, 2))
        val[0] = [1.0, 0.0]
        with pytest.raises(ValidationError, match="traction"):
            Scene("elastic", g, {"lam": 1.0, "mu": 1.0, "rho": 1.0}, all_kind(g, "flux"), val)


class TestSerialization:
    @pytest.mark.parametrize("name", ["series_2cell", "acoustic_8x8", "elastic_4x4", "scan_eps"])
    def test_round_trip(self, name):
        sc = load_scene(os.path.join(SCENES, name + ".json"))
        again = parse_scene(json.loads(dumps(scene_to_dict(sc))))
        assert again == sc
        assert np.array_equal(again.bc_value, sc.bc_value)
        for k in sc.moduli:
            assert np.array_equal(again.moduli[k], sc.moduli[k])

    def test_dumps_is_deterministic(self):
        obj = {"b": [0.1, 1 / 3, 2], "a": {"z": 1 + 2j, "flag": True, "none": None}}
        s = dumps(obj)
        assert s == dumps(obj)
        assert "0.33333333333333331" in s and '"b"' in s.splitlines()[1]
        assert json.loads(s)["a"]["z"] == [1.0, 2.0]

    def test_non_finite(self):
        assert dumps([float("nan")]) == "[null]"
