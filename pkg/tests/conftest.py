import numpy as np
import pytest

from varprin.grid import StaggeredGrid
from varprin.scene import Scene


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def all_kind(grid, kind="dirichlet"):
    return np.array([kind] * grid.nbface, dtype=object)


def mixed_kind(grid, rng=None):
    """Dirichlet on left/right, flux on bottom/top (or a random mix with Dirichlet left)."""
    kind = all_kind(grid, "flux")
    if rng is None:
        kind[np.isin(grid.boundary_side, ["left", "right"])] = "dirichlet"
    else:
        kind[rng.random(grid.nbface) < 0.5] = "dirichlet"
        kind[grid.boundary_side == "left"] = "dirichlet"
    return kind


def series_scene(theta=0.0, tau=0.0):
    g = StaggeredGrid(2, 1, 0.5, 0.5)
    kind = all_kind(g, "flux")
    val = np.zeros(g.nbface, dtype=complex)
    kind[g.boundary_side == "left"] = "dirichlet"
    kind[g.boundary_side == "right"] = "dirichlet"
    val[g.boundary_side == "right"] = 1.0
    return Scene("quasistatic", g, {"eps": np.array([1 + 1j, 2 + 2j])}, kind, val, theta=theta, tau=tau)


def random_quasistatic(rng, nx=8, ny=8, source=False, theta=0.0, tau=0.0, mixed=True):
    g = StaggeredGrid(nx, ny, 1.0 / nx, 1.0 / ny)
    eps = (0.5 + rng.random(g.ncell)) + 1j * (0.5 + rng.random(g.ncell))
    kind = mixed_kind(g, rng) if mixed else all_kind(g)
    val = crandn(rng, g.nbface)
    h = crandn(rng, g.ncell) if source else None
    return Scene("quasistatic", g, {"eps": eps}, kind, val, theta=theta, tau=tau, source=h)


def random_acoustic(rng, nx=8, ny=8, source=False, theta=0.0, tau=0.0, mixed=True, omega=None):
    g = StaggeredGrid(nx, ny, 1.0 / nx, 1.0 / ny)
    rho = (0.5 + rng.random(g.ncell)) + 1j * (0.3 + rng.random(g.ncell))
    kappa = (1.0 + rng.random(g.ncell)) * (1 - 1j * (0.2 + 0.5 * rng.random(g.ncell)))
    kind = mixed_kind(g, rng) if mixed else all_kind(g)
    val = crandn(rng, g.nbface)
    h = crandn(rng, g.ncell) if source else None
    om = 1.0 + 2 * rng.random() if omega is None else omega
    return Scene("acoustic", g, {"rho": rho, "kappa": kappa}, kind, val, omega=om, theta=theta, tau=tau, source=h)


def elastic_scene(nx=4, ny=4, theta="auto", source=None):
    g = StaggeredGrid(nx, ny, 1.0 / nx, 1.0 / ny)
    kind = all_kind(g, "flux")
    kind[np.isin(g.boundary_side, ["left", "right"])] = "dirichlet"
    val = np.zeros((g.nbface, 2), dtype=complex)
    val[g.boundary_side == "right"] = [0.01, 0.004j]
    mods = {"lam": 1.0 * (1 - 0.05j), "mu": 0.5 * (1 - 0.05j), "rho": 1.0}
    return Scene("elastic", g, mods, kind, val, omega=1.0, theta=theta, source=source)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
