import numpy as np
import pytest

from conftest import crandn
from varprin.errors import BoundaryUnderspecifiedError, DimensionError, ValidationError
from varprin.grid import FieldVector, SourceField, StaggeredGrid, deinterleave, interleave


def linear_traces(g, fn):
    xy = g.face_centers[g.boundary_faces]
    return fn(xy[:, 0], xy[:, 1])


def dense_grad(g):
    """Loop-built face gradient (cells then traces), independent of the sparse build."""
    G = np.zeros((g.nface, g.npot))
    bpos = {int(f): k for k, f in enumerate(g.boundary_faces)}
    for j in range(g.ny):
        for i in range(g.nx + 1):
            f = j * (g.nx + 1) + i
            if 0 < i < g.nx:
                G[f, j * g.nx + i] += 1 / g.hx
                G[f, j * g.nx + i - 1] -= 1 / g.hx
            elif i == 0:
                G[f, g.ncell + bpos[f]] -= 2 / g.hx
                G[f, j * g.nx] += 2 / g.hx
            else:
                G[f, g.ncell + bpos[f]] += 2 / g.hx
                G[f, j * g.nx + g.nx - 1] -= 2 / g.hx
    for j in range(g.ny + 1):
        for i in range(g.nx):
            f = g.nxface + j * g.nx + i
            if 0 < j < g.ny:
                G[f, j * g.nx + i] += 1 / g.hy
                G[f, (j - 1) * g.nx + i] -= 1 / g.hy
            elif j == 0:
                G[f, g.ncell + bpos[f]] -= 2 / g.hy
                G[f, i] += 2 / g.hy
            else:
                G[f, g.ncell + bpos[f]] += 2 / g.hy
                G[f, (g.ny - 1) * g.nx + i] -= 2 / g.hy
    return G


def dense_div(g):
    D = np.zeros((g.ncell, g.nface))
    for j in range(g.ny):
        for i in range(g.nx):
            c = j * g.nx + i
            D[c, j * (g.nx + 1) + i] -= 1 / g.hx
            D[c, j * (g.nx + 1) + i + 1] += 1 / g.hx
            D[c, g.nxface + j * g.nx + i] -= 1 / g.hy
            D[c, g.nxface + (j + 1) * g.nx + i] += 1 / g.hy
    return D


class TestLayout:
    def test_counts(self):
        g = StaggeredGrid(3, 5, 0.1, 0.2)
        assert g.nxface == 4 * 5 and g.nyface == 3 * 6 and g.ncell == 15
        assert g.nbface == 2 * (3 + 5)

    def test_boundary_faces_listed_once(self):
        g = StaggeredGrid(4, 3, 1.0, 1.0)
        assert len(set(g.boundary_faces.tolist())) == g.nbface
        assert np.all((g.face_cells[g.boundary_faces] < 0).any(axis=1))
        assert np.all((g.face_cells[g.interior_faces] >= 0).all(axis=1))

    def test_invalid_grid(self):
        with pytest.raises(ValidationError):
            StaggeredGrid(0, 2, 1.0, 1.0)

    def test_field_vector_length(self):
        g = StaggeredGrid(2, 2, 1.0, 1.0)
        FieldVector("flux", np.zeros(g.nface), g)
        with pytest.raises(DimensionError):
            FieldVector("cell", np.zeros(g.nface), g)

    def test_source_field(self):
        g = StaggeredGrid(2, 2, 1.0, 1.0)
        assert SourceField(np.zeros(8), g, m=2).h.shape == (4, 2)
        with pytest.raises(DimensionError):
            SourceField(np.zeros(3), g)

    def test_interleave_round_trip(self, rng):
        z = crandn(rng, 7)
        x = interleave(z)
        assert x[0] == z[0].real and x[1] == z[0].imag
        assert np.array_equal(deinterleave(x), z)


class TestGradient:
    def test_constant_field(self):
        g = StaggeredGrid(4, 4, 0.25, 0.25)
        assert np.abs(g.d_grad(np.full(g.ncell, 3.0), np.full(g.nbface, 3.0))).max() < 1e-13

    def test_linear_field(self):
        g = StaggeredGrid(4, 4, 1.0, 1.0)
        u = g.cell_centers[:, 0]
        grad = g.d_grad(u, linear_traces(g, lambda x, y: x))
        assert np.allclose(grad[: g.nxface], 1.0) and np.allclose(grad[g.nxface :], 0.0)

    def test_matches_dense_stencil(self, rng):
        g = StaggeredGrid(4, 4, 0.3, 0.2)
        u = rng.standard_normal(g.npot)
        assert np.abs(g.d_grad(u) - dense_grad(g) @ u).max() <= 1e-14 * np.abs(u).max() / min(g.hx, g.hy)

    def test_missing_traces(self):
        g = StaggeredGrid(2, 2, 1.0, 1.0)
        with pytest.raises(BoundaryUnderspecifiedError):
            g.d_grad(np.zeros(g.ncell))

    def test_null_space_is_constants(self):
        g = StaggeredGrid(3, 4, 1.0, 1.0)
        s = np.linalg.svd(dense_grad(g), compute_uv=False)
        assert np.sum(s < 1e-10 * s.max()) == 1


class TestDivergence:
    def test_constant_flux(self):
        g = StaggeredGrid(4, 3, 1.0, 1.0)
        assert np.abs(g.d_div(np.full(g.nface, 2.5))).max() < 1e-13

    def test_linear_flux(self):
        g = StaggeredGrid(4, 3, 1.0, 1.0)
        G = np.where(g.face_axis == 0, g.face_centers[:, 0], 0.0)
        assert np.allclose(g.d_div(G), 1.0)

    def test_matches_dense_stencil(self, rng):
        g = StaggeredGrid(4, 4, 0.3, 0.2)
        G = rng.standard_normal(g.nface)
        assert np.abs(g.d_div(G) - dense_div(g) @ G).max() <= 1e-15 * np.abs(G).max() / min(g.hx, g.hy)

    def test_summation_by_parts_on_interior(self):
        g = StaggeredGrid(5, 4, 0.3, 0.2)
        inner = g.interior_faces
        Wg = (g.face_weight[:, None] * dense_grad(g))[inner][:, : g.ncell]
        Dv = g.volume * dense_div(g)[:, inner]
        assert np.abs(Dv + Wg.T).max() == 0.0


class TestKeyProperty:
    def test_zero_fields(self):
        g = StaggeredGrid(3, 3, 1.0, 1.0)
        z = np.zeros(g.ncell)
        assert g.key_property_residual(np.zeros(g.nface), z, z, z, np.zeros(g.nbface)) == 0.0

    def test_g_cancels_h(self, rng):
        g = StaggeredGrid(3, 3, 1.0, 1.0)
        h = rng.standard_normal(g.ncell)
        r = g.key_property_residual(np.zeros(g.nface), -h, np.ones(g.ncell), h, np.ones(g.nbface))
        assert r < 1e-14

    def test_random_complex_fields(self, rng):
        g = StaggeredGrid(8, 8, 0.125, 0.125)
        G, gg, u, h, t = crandn(rng, g.nface), crandn(rng, g.ncell), crandn(rng, g.ncell), crandn(rng, g.ncell), crandn(rng, g.nbface)
        scale = (np.abs(G).max() + np.abs(gg).max() + np.abs(h).max()) * max(np.abs(u).max(), np.abs(t).max()) * g.ncell
        assert g.key_property_residual(G, gg, u, h, t) < 1e-13 * scale
