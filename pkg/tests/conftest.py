import pytest

from gpe.hermite import build_basis, spectral_field


@pytest.fixture(scope="session")
def basis64():
    return build_basis(1, 64, 2)


@pytest.fixture(scope="session")
def basis32():
    return build_basis(1, 32, 2)


@pytest.fixture(scope="session")
def basis3d():
    return build_basis(3, 8, 2)


def random_spectral(basis, rng, decay=0.0):
    """Random complex field; decay > 0 damps high modes like lam^-decay."""
    shape = (basis.n_modes,) * basis.dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if decay > 0.0:
        from gpe.operators import eigenvalues

        c = c * eigenvalues(basis.dim, basis.n_modes) ** -decay
    return spectral_field(basis, c)
