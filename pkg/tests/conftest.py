import numpy as np
import pytest

import dipolarbus as db

FIG2 = dict(delta0=2.3, c_p=100.0, p=3)


@pytest.fixture(scope="session")
def fig2_params():
    """Reference constants: p=3, C_3 = 100, Delta_0 = 2.3, in drive units."""
    return db.DriveParams(omega0=1.0, t0=20.0, **FIG2)


@pytest.fixture(scope="session")
def chain8():
    geo = db.make_equidistant(8, 3.0)
    return geo, db.build_basis(geo)


@pytest.fixture(scope="session")
def chain6():
    geo = db.make_equidistant(6, 3.0)
    return geo, db.build_basis(geo)


def dense_lowest_two(h):
    """Dense-diagonalization oracle for the sparse eigensolver."""
    w = np.linalg.eigvalsh(h.to_dense())
    return float(w[0]), float(w[1])
