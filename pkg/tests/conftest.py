import numpy as np
import pytest

from contourgas.numkit import ComplexPolynomial
from contourgas import equilibrium as eq


@pytest.fixture(scope="session")
def quad_sol():
    """V = z^2: endpoints -+1, constant prefactor 2, affine arc."""
    return eq.solve_one_cut(ComplexPolynomial([0, 0, 1.0]), seeds=(-1.2, 1.2))


@pytest.fixture(scope="session")
def quartic_sol():
    """V = z^4/4 on the real line (homotopy-seeded)."""
    return eq.solve_one_cut(ComplexPolynomial([0, 0, 0, 0, 0.25]))


@pytest.fixture(scope="session")
def rot_sol():
    """Rotated quartic V = z^4/4 + c z^2/2 with complex c: the standard
    genuinely complex one-cut test case."""
    c = 0.5 * np.exp(1j * np.pi / 4)
    return eq.solve_one_cut(ComplexPolynomial([0, 0, c / 2, 0, 0.25]),
                            seeds=(-1.2 + 0.1j, 1.2 - 0.1j))


@pytest.fixture(scope="session")
def cubic_sol():
    """Rotated cubic V = z^3/3 + i z/2 (homotopy-seeded): the support arc
    connects two non-conjugate endpoints off the real line."""
    return eq.solve_one_cut(ComplexPolynomial([0, 0.5j, 0, 1 / 3]))


@pytest.fixture(scope="session")
def rot_data_t1(rot_sol):
    return eq.interpolation_data(rot_sol, 1.0)


@pytest.fixture(scope="session")
def rot_data_t0(rot_sol):
    return eq.interpolation_data(rot_sol, 0.0)


@pytest.fixture(scope="session")
def quad_data_t0(quad_sol):
    return eq.interpolation_data(quad_sol, 0.0)
