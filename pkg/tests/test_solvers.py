import numpy as np
import pytest
import scipy.sparse as sp

from conftest import all_kind, random_acoustic, random_quasistatic, series_scene
from varprin.assembly import assemble_Q, assemble_Y, cauchy_data
from varprin.errors import ConvergenceError, NotConvexError, OracleTooLargeError
from varprin.grid import StaggeredGrid
from varprin.scene import Scene, directional_coefficients
from varprin.solvers import dense_oracle, minimize_convex, pcg, solve_direct, solve_saddle


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max() / np.abs(b).max()


class TestDirect:
    def test_constant_solution(self):
        g = StaggeredGrid(4, 4, 0.25, 0.25)
        sc = Scene("quasistatic", g, {"eps": 2 + 1j}, all_kind(g), np.full(g.nbface, 0.7))
        res = solve_direct(sc)
        assert np.abs(res.u - 0.7).max() < 1e-13 and np.abs(res.G).max() < 1e-13

    def test_series_closed_form(self):
        res = solve_direct(series_scene())
        fp = res.face_potential(directional_coefficients(series_scene()))
        # x-face 1 is the interface between the two cells
        assert abs(fp[1] - 2 / 3) < 1e-12
        assert np.abs(res.G[:3] - (4 + 4j) / 3).max() < 1e-12

    def test_acoustic_matches_dense_oracle(self, rng):
        g = StaggeredGrid(8, 8, 0.125, 0.125)
        P = rng.standard_normal(g.nbface) + 1j * rng.standard_normal(g.nbface)
        sc = Scene("acoustic", g, {"rho": 1.0, "kappa": 1 - 0.1j}, all_kind(g), P, omega=1.0)
        assert rel(solve_direct(sc).u, dense_oracle(sc).u) < 1e-10

    def test_key_property_holds_at_solution(self, rng):
        sc = random_acoustic(rng, source=True)
        res = solve_direct(sc)
        g = sc.grid
        r = g.key_property_residual(res.G, res.g, res.cells, sc.source, res.traces)
        assert r < 1e-12 * np.abs(res.u).max() * np.abs(res.G).max()


class TestOracle:
    def test_single_cell_closed_form(self):
        g = StaggeredGrid(1, 1, 1.0, 1.0)
        kind = all_kind(g, "flux")
        kind[0] = "dirichlet"
        val = np.array([1.0, 0.0, 0.0, 0.0])
        # one Dirichlet face; the other three carry zero flux
        sc = Scene("acoustic", g, {"rho": 1 + 1j, "kappa": 1 - 1j}, kind, val, omega=0.5)
        res = dense_oracle(sc)
        # face coefficient -1/rho over the half cell, cell term V omega^2 / kappa
        k = -2 / (1 + 1j)
        m = 0.25 / (1 - 1j)
        assert res.cells[0] == pytest.approx(k / (k + m), abs=1e-14)
        assert rel(solve_direct(sc).u, res.u) < 1e-13

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_direct_and_minimiser(self, seed):
        rng = np.random.default_rng(100 + seed)
        sc = (random_acoustic if seed % 2 else random_quasistatic)(rng, 6, 5, source=True)
        o = dense_oracle(sc)
        d = solve_direct(sc)
        assert rel(d.u, o.u) < 1e-10
        y = minimize_convex(assemble_Y(sc))
        assert rel(y.x[: sc.grid.npot], o.u.real) < 1e-8

    def test_size_limit(self):
        g = StaggeredGrid(64, 64, 1 / 64, 1 / 64)
        sc = Scene("quasistatic", g, {"eps": 1 + 1j}, all_kind(g), np.zeros(g.nbface))
        with pytest.raises(OracleTooLargeError):
            dense_oracle(sc)


class TestPCG:
    def test_identity(self):
        x, it, r = pcg(sp.eye(5, format="csr"), np.ones(5))
        assert np.allclose(x, 1.0) and it == 1

    def test_identity_minimisation(self):
        from varprin.assembly import QuadraticForm

        n = 6
        form = QuadraticForm(A=sp.eye(n, format="csr"), b=-np.ones(n), c=0.0,
                             free_mask=np.ones(n, dtype=bool), pinned_values=np.zeros(n))
        res = minimize_convex(form)
        assert np.allclose(res.x, 1.0, atol=1e-14) and res.functional_value == pytest.approx(-n)

    def test_zero_rhs(self):
        x, it, r = pcg(sp.eye(3, format="csr"), np.zeros(3))
        assert it == 0 and np.all(x == 0)

    def test_indefinite(self):
        A = sp.diags([1.0, 1.0, -1.0]).tocsr()
        with pytest.raises(NotConvexError):
            pcg(A, np.ones(3))

    def test_indefinite_with_positive_diagonal(self):
        A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(NotConvexError):
            pcg(A, np.array([1.0, -1.0]))

    def test_iteration_cap(self, rng):
        M = rng.standard_normal((40, 40))
        A = sp.csr_matrix(M @ M.T + 1e-6 * np.eye(40))
        with pytest.raises(ConvergenceError):
            pcg(A, rng.standard_normal(40), maxiter=2)


class TestMinimise:
    def test_series_matches_direct(self):
        sc = series_scene()
        d = solve_direct(sc)
        res = minimize_convex(assemble_Y(sc, boundary=cauchy_data(sc)))
        g = sc.grid
        assert rel(res.x[: g.npot], d.u.real) < 1e-8
        assert rel(res.x[g.npot :], d.G.real) < 1e-8

    def test_monotone_bound(self, rng):
        sc = random_acoustic(rng, 5, 5, source=True)
        form = assemble_Y(sc)
        res = minimize_convex(form)
        for _ in range(100):
            trial = res.x + form.E_free @ (1e-3 * rng.standard_normal(form.nfree))
            assert form.evaluate(trial) > res.functional_value
        assert form.evaluate(res.x) == res.functional_value

    def test_rayleigh_quotients_positive(self, rng):
        Ar, _, _ = assemble_Y(random_quasistatic(rng, 5, 5)).reduced()
        for _ in range(20):
            v = rng.standard_normal(Ar.shape[0])
            assert v @ (Ar @ v) > 0


class TestSaddle:
    def test_zero_data(self):
        g = StaggeredGrid(3, 3, 1 / 3, 1 / 3)
        sc = Scene("quasistatic", g, {"eps": 1 + 1j}, all_kind(g), np.zeros(g.nbface))
        res = solve_saddle(assemble_Q(sc))
        assert np.all(res.x == 0)

    def test_series_interface_is_real(self):
        sc = series_scene()
        res = solve_saddle(assemble_Q(sc))
        g = sc.grid
        u_im = res.x[g.npot :]
        assert np.abs(u_im).max() < 1e-12
        assert rel(res.x[: g.npot], solve_direct(sc).u.real) < 1e-12

    @pytest.mark.parametrize("maker", [random_quasistatic, random_acoustic])
    def test_random_scene_matches_direct(self, maker, rng):
        sc = maker(rng, source=True, tau=0.3)
        res = solve_saddle(assemble_Q(sc))
        n = sc.grid.npot
        u = np.exp(-1j * sc.tau) * (res.x[:n] + 1j * res.x[n:])
        assert rel(u, solve_direct(sc).u) < 1e-10


class TestCrossMethod:
    @pytest.mark.parametrize("seed", range(6))
    def test_three_solvers_agree(self, seed):
        rng = np.random.default_rng(200 + seed)
        maker = random_acoustic if seed % 2 else random_quasistatic
        sc = maker(rng, source=bool(seed % 3), theta=0.0, tau=0.5 * seed)
        d = solve_direct(sc)
        n = sc.grid.npot
        q = solve_saddle(assemble_Q(sc)).x
        y = minimize_convex(assemble_Y(sc)).x
        rot = np.exp(1j * sc.tau) * d.u
        assert rel(q[:n] + 1j * q[n:], rot) < 1e-8
        assert rel(y[:n], rot.real) < 1e-8
        assert rel(y[n:], (np.exp(1j * sc.tau) * d.G).real) < 1e-8
