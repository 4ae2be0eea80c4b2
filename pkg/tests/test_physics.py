import numpy as np
import pytest

from conftest import all_kind, crandn, elastic_scene, mixed_kind, random_acoustic, random_quasistatic, series_scene
from varprin.assembly import LosslessRegion, assemble_Y, assemble_Y_lossless, cauchy_data
from varprin.constitutive import min_imag_eig, select_theta
from varprin.dtn import dtn_assemble
from varprin.errors import (
    CoercivityError,
    InversionError,
    ValidationError,
    WrongPrincipleError,
)
from varprin.grid import StaggeredGrid
from varprin.physics import (
    AcousticMedium,
    ElasticMedium,
    acoustic_assemble_Y,
    acoustic_kappa_real_Y,
    acoustic_pde_residual,
    acoustic_rho_real_Y,
    acoustic_to_Z,
    boundary_dissipation,
    dissipation,
    dtn_dissipation,
    elastic_assemble_Q,
    elastic_dense_oracle,
    elastic_fields,
    elastic_residual,
    elastic_solve_direct,
    em_scene,
    em_to_acoustic,
    mandel_from_lame,
    rho_real_pressure,
)
from varprin.physics.elastic import strain_operator
from varprin.scene import Scene
from varprin.solvers import dense_oracle, minimize_convex, solve_direct, solve_saddle


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max() / np.abs(b).max()


def acoustic8(rho, kappa, omega=1.0, seed=0, mixed=True):
    rng = np.random.default_rng(seed)
    g = StaggeredGrid(8, 8, 1 / 8, 1 / 8)
    kind = mixed_kind(g) if mixed else all_kind(g)
    return Scene("acoustic", g, {"rho": rho, "kappa": kappa}, kind, crandn(rng, g.nbface), omega=omega)


class TestAcousticZ:
    def test_quarter_turn_with_real_moduli_fails(self):
        az = acoustic_to_Z(AcousticMedium(1.0, np.array([1.0]), 1.0), theta=-np.pi / 2)
        assert np.allclose(np.diag(az.Z.Z[0]), [1j, 1j, -1j])
        assert min_imag_eig(az.Z.Z) < 0

    def test_min_eig_at_rotation(self):
        theta = -0.0997
        az = acoustic_to_Z(AcousticMedium(1.0, np.array([1 - 0.2j]), 1.0), theta=theta)
        expected = min(-np.sin(theta), abs(1 / (1 - 0.2j)) * np.sin(np.arctan(0.2) + theta))
        assert min_imag_eig(az.Z.Z) == pytest.approx(expected, abs=1e-12)
        assert select_theta(acoustic_to_Z(AcousticMedium(1.0, np.array([1 - 0.2j]), 1.0)).Z.Z) == pytest.approx(
            -0.097727, abs=1e-5
        )

    def test_lossy_blocks_at_zero_rotation(self):
        rho, kappa, om = 0.5 + 1j, 1 - 0.5j, 2.0
        Z = acoustic_to_Z(AcousticMedium(rho, np.array([kappa]), om)).Z.Z[0]
        assert np.allclose(Z[:2, :2], -np.eye(2) / rho) and Z[2, 2] == pytest.approx(om**2 / kappa)
        assert np.all(np.linalg.eigvalsh(Z.imag) > 0)

    def test_velocity_flux_round_trip(self, rng):
        az = acoustic_to_Z(AcousticMedium(1.0, np.array([1 - 0.2j]), 2.0), theta=0.3)
        v = crandn(rng, 5)
        assert np.allclose(az.velocity(az.flux(v)), v)

    def test_singular_density(self):
        with pytest.raises(InversionError):
            acoustic_to_Z(AcousticMedium(np.zeros((1, 2, 2)), np.array([1.0]), 1.0))


class TestAcousticY:
    def test_zero_fields(self):
        sc = acoustic8(0.5 + 1j, 1 - 0.5j, 2.0)
        nb = sc.grid.nbface
        form = acoustic_assemble_Y(sc, boundary=(np.zeros(nb, complex), np.zeros(nb, complex)))
        assert form.evaluate(np.zeros(form.n)) == 0.0

    def test_unit_cell_value_block(self):
        # rho = i, kappa = -i: both diagonal calL blocks reduce to the identity
        g = StaggeredGrid(1, 1, 1.0, 1.0)
        sc = Scene("acoustic", g, {"rho": 1j, "kappa": -1j}, all_kind(g), np.ones(4), omega=1.0)
        form = acoustic_assemble_Y(sc, boundary=(np.ones(4, complex), np.zeros(4, complex)))
        x = np.r_[2.0, np.ones(4), np.zeros(4)]
        # grad P' from cell 2 to traces 1 over half cells, plus P'^2
        assert form.evaluate(x) == pytest.approx(4 * 0.5 * 4 + 4.0, rel=1e-14)

    def test_minimiser_matches_oracle(self):
        sc = acoustic8(0.5 + 1j, 1 - 0.5j, 2.0)
        o = dense_oracle(sc)
        res = minimize_convex(acoustic_assemble_Y(sc))
        g = sc.grid
        form = acoustic_assemble_Y(sc)
        v = form.block(res.x, "v")
        # G = -i omega v, so G' = omega v''
        assert rel(form.block(res.x, "P"), o.u.real) < 1e-8
        assert rel(v, solve_direct(sc).G.real / sc.omega) < 1e-8
        assert g.npot + g.nface == form.n

    def test_wrong_regime(self):
        with pytest.raises(CoercivityError, match="select_theta"):
            acoustic_assemble_Y(acoustic8(1.0, 1 - 0.5j))


class TestRhoReal:
    def test_matches_lossless_momentum_reduction(self, rng):
        g = StaggeredGrid(8, 8, 1 / 8, 1 / 8)
        sc = Scene(
            "acoustic", g, {"rho": 1 + rng.random(g.ncell), "kappa": (1 + rng.random(g.ncell)) * (1 - 0.3j)},
            mixed_kind(g), crandn(rng, g.nbface), omega=1.5,
        )
        A1, b1, c1 = acoustic_rho_real_Y(sc).reduced()
        A2, b2, c2 = assemble_Y_lossless(sc, LosslessRegion.momentum(g)).reduced()
        assert abs(A1 - A2).max() <= 1e-12 * abs(A1).max()
        assert np.abs(b1 - b2).max() <= 1e-12 * np.abs(b1).max()
        assert c1 == pytest.approx(c2, rel=1e-12)

    def test_pressure_matches_oracle(self):
        sc = acoustic8(1.0, 1 - 0.3j)
        o = dense_oracle(sc)
        res = minimize_convex(acoustic_rho_real_Y(sc))
        g = sc.grid
        assert rel(res.x[: g.ncell], o.cells.real) < 1e-8
        P = rho_real_pressure(sc, res.x)
        assert rel(P, o.cells) < 1e-8
        assert acoustic_pde_residual(sc, P, o.traces) < 1e-8

    def test_constant_pressure(self):
        # the source balances omega^2 P / kappa, so P = 1 with zero flux is exact
        g = StaggeredGrid(6, 6, 1 / 6, 1 / 6)
        kappa = 1 - 0.3j
        sc = Scene("acoustic", g, {"rho": 1.0, "kappa": kappa}, all_kind(g, "flux"), np.zeros(g.nbface),
                   source=-1.0 / kappa)
        res = minimize_convex(acoustic_rho_real_Y(sc, boundary=(np.ones(g.nbface, complex), np.zeros(g.nbface, complex))))
        assert np.abs(res.x[: g.ncell] - 1.0).max() < 1e-10
        # dissipation Im(1/kappa) on the unit square plus the linear term 2 V h'' P'
        diss = (1 / kappa).imag
        assert diss > 0
        assert res.functional_value == pytest.approx(diss + 2 * (-1 / kappa).imag, rel=1e-10)

    def test_requires_real_density(self):
        with pytest.raises(WrongPrincipleError):
            acoustic_rho_real_Y(acoustic8(1 + 1j, 1 - 0.3j))

    def test_positive_density(self):
        with pytest.raises(ValidationError):
            acoustic_rho_real_Y(acoustic8(-1.0, 1 - 0.3j))


class TestKappaReal:
    def test_matches_oracle(self):
        sc = acoustic8(1 + 1j, 1.0)
        res = minimize_convex(acoustic_kappa_real_Y(sc))
        form = acoustic_kappa_real_Y(sc)
        v = form.block(res.x, "v")
        assert rel(v, solve_direct(sc).G.real / sc.omega) < 1e-8

    def test_zero_field(self):
        sc = acoustic8(1 + 1j, 1.0)
        nb = sc.grid.nbface
        form = acoustic_kappa_real_Y(sc, boundary=(np.zeros(nb, complex), np.zeros(nb, complex)))
        assert form.evaluate(np.zeros(form.n)) == 0.0

    def test_requires_real_kappa(self):
        with pytest.raises(WrongPrincipleError):
            acoustic_kappa_real_Y(acoustic8(1 + 1j, 1 - 0.2j))


class TestElectromagnetic:
    def test_te_tm_moduli(self):
        assert em_to_acoustic("TE", 2.0, 3.0) == (3.0, 0.5)
        assert em_to_acoustic("tm", 2.0, 3.0) == (2.0, 1 / 3)
        with pytest.raises(ValidationError):
            em_to_acoustic("TEM", 1.0, 1.0)

    def test_relabelling_gives_identical_matrices(self, rng):
        g = StaggeredGrid(6, 6, 1 / 6, 1 / 6)
        eps = (1 + rng.random(g.ncell)) * (1 + 0.5j)
        mu = 1 + rng.random(g.ncell) + 1j * (0.5 + rng.random(g.ncell))
        kind, val = all_kind(g), crandn(rng, g.nbface)
        te = em_scene(g, "TE", eps, mu, 1.3, kind, val)
        tm = em_scene(g, "TM", mu, eps, 1.3, kind, val)
        ac = AcousticMedium(mu, 1 / eps, 1.3).to_scene(g, kind, val)
        a, b, c = (acoustic_assemble_Y(s) for s in (te, tm, ac))
        assert te.label == "TE" and tm.label == "TM"
        assert abs(a.A - c.A).max() == 0 and abs(b.A - c.A).max() == 0
        assert np.array_equal(a.b, c.b) and np.array_equal(b.b, c.b)


class TestElastic:
    def test_mandel_isotropic(self):
        C = mandel_from_lame(1.0, 0.5)[0]
        assert np.allclose(C, [[2, 1, 0], [1, 2, 0], [0, 0, 1]])

    def test_major_symmetry_required(self):
        C = np.zeros((1, 3, 3))
        C[0, 0, 1] = 1.0
        with pytest.raises(ValidationError):
            ElasticMedium(C, np.eye(2)[None], np.zeros((1, 2)), 1.0)

    def test_rotation_has_zero_strain(self):
        sc = elastic_scene()
        g = sc.grid
        xy = g.node_coords
        u = np.column_stack([-xy[:, 1], xy[:, 0]]).ravel()
        F = (strain_operator(g) @ u).reshape(g.ncell, 4, 5)
        assert np.abs(F[..., :3]).max() < 1e-14
        stress = elastic_fields(sc, u)["stress"]
        assert np.abs(stress).max() < 1e-14

    def test_translation_only_sees_mass(self):
        sc = elastic_scene().resolve()
        form = elastic_assemble_Q(sc)
        n = form.n // 2
        u = np.tile([1.0, 0.0], n // 2)
        # unit area, unit density and frequency: Im(e^{i theta})
        assert form.evaluate(np.r_[u, 0 * u]) == pytest.approx(np.sin(sc.theta), rel=1e-12)

    def test_zero_data(self):
        sc = elastic_scene().resolve()
        sc = sc.with_boundary(value=np.zeros_like(sc.bc_value))
        assert np.all(elastic_solve_direct(sc).u == 0)
        assert np.all(solve_saddle(elastic_assemble_Q(sc)).x == 0)

    def test_large_rotation_is_infeasible(self):
        with pytest.raises(CoercivityError, match="select_theta"):
            elastic_assemble_Q(elastic_scene(theta=0.1))

    def test_selected_rotation(self):
        th = elastic_scene().resolved_theta()
        assert 0 < th < np.arctan(0.05)
        assert th == pytest.approx(0.025, abs=1e-3)

    @pytest.mark.parametrize("tau", [0.0, 0.9])
    def test_saddle_matches_oracle(self, tau):
        sc = elastic_scene(source=np.array([0.1, -0.2j])).resolve()
        sc = sc.with_theta(tau=tau)
        res = solve_saddle(elastic_assemble_Q(sc))
        n = res.x.size // 2
        u = np.exp(-1j * tau) * (res.x[:n] + 1j * res.x[n:])
        o = elastic_dense_oracle(sc)
        assert rel(u, np.ravel(o.u)) < 1e-8
        assert elastic_residual(sc, u) < 1e-8

    def test_direct_matches_oracle(self):
        sc = elastic_scene().resolve()
        assert rel(solve_direct(sc).u, elastic_dense_oracle(sc).u) < 1e-10


class TestDissipation:
    def test_lossless_is_zero(self, rng):
        g = StaggeredGrid(4, 4, 0.25, 0.25)
        sc = Scene("quasistatic", g, {"eps": 1 + rng.random(g.ncell)}, all_kind(g), crandn(rng, g.nbface))
        assert dissipation(sc, solve_direct(sc)) == pytest.approx(0.0, abs=1e-14)

    def test_series_matches_dtn_form(self):
        sc = series_scene()
        d = dtn_assemble(sc)
        vol = dissipation(sc, solve_direct(sc))
        assert vol == pytest.approx(dtn_dissipation(d, sc.bc_value[d.faces]), rel=1e-12)
        # eps'' = (1, 2) in series over the unit length with unit drop
        assert vol == pytest.approx(0.5 * 4 / 3, rel=1e-12)

    @pytest.mark.parametrize("lam", [2.0, 0.5j, 1 - 3j])
    def test_quadratic_homogeneity(self, lam, rng):
        sc = random_acoustic(rng, 5, 5, source=True)
        base = dissipation(sc, solve_direct(sc))
        scaled = sc.with_boundary(value=lam * sc.bc_value)
        scaled = Scene(scaled.physics, scaled.grid, scaled.moduli, scaled.bc_kind, scaled.bc_value,
                       omega=scaled.omega, source=lam * sc.source)
        assert dissipation(scaled, solve_direct(scaled)) == pytest.approx(abs(lam) ** 2 * base, rel=1e-10)

    @pytest.mark.parametrize("maker", [random_quasistatic, random_acoustic])
    def test_volume_equals_boundary(self, maker, rng):
        sc = maker(rng, source=True)
        res = solve_direct(sc)
        assert dissipation(sc, res) == pytest.approx(boundary_dissipation(sc, res), rel=1e-10)
        assert dissipation(sc, res, theta=0.4) == pytest.approx(boundary_dissipation(sc, res, theta=0.4), rel=1e-10)

    def test_elastic_volume_equals_boundary(self):
        sc = elastic_scene(source=np.array([0.1, 0.05j])).resolve()
        res = solve_direct(sc)
        assert dissipation(sc, res) == pytest.approx(boundary_dissipation(sc, res), rel=1e-10)
