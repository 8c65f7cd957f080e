import numpy as np
import pytest

from amoebalab.gen_amoeba import AmoebaData
from amoebalab.laurent import LaurentPolynomial
from amoebalab.riemann import PuncturedCurve

LINE_TEXT = "1 : 0 0\n1 : 1 0\n1 : 0 1"


@pytest.fixture(scope="session")
def line():
    return LaurentPolynomial.from_text(LINE_TEXT)


@pytest.fixture(scope="session")
def standard_data():
    """Punctures 0, 1, inf with rows (1, 0, -1), (0, 1, -1): chi(z) = (log|z|, log|z - 1|) + const."""
    curve = PuncturedCurve(0, (0j, 1 + 0j, None), m_curve=True)
    return AmoebaData.from_residues(curve, [[1, 0, -1], [0, 1, -1]])


@pytest.fixture(scope="session")
def harnack_genus1():
    curve = PuncturedCurve(1, (0.1 + 0j, 0.4 + 0j, 0.7 + 0j), tau=1j, m_curve=True)
    return AmoebaData.from_residues(curve, [[1, 0, -1], [0, 1, -1]])


@pytest.fixture(scope="session")
def misordered_genus1():
    curve = PuncturedCurve(1, (0.1 + 0j, 0.3 + 0j, 0.5 + 0j, 0.7 + 0j), tau=1j, m_curve=True)
    return AmoebaData.from_residues(curve, [[1, -1, 0, 0], [0, 0, 1, -1]])


@pytest.fixture(scope="session")
def generic_genus0():
    curve = PuncturedCurve(0, (0j, 1 + 0j, -1 + 0.5j, 0.3 - 0.8j))
    return AmoebaData.from_residues(curve, [[1, -0.4, 0.7, -1.3], [0.6, 1, -0.9, -0.7]])


def random_residue_rows(rng, n, nonzero=True):
    while True:
        A = rng.normal(size=(2, n))
        A[:, -1] = -A[:, :-1].sum(axis=1)
        if not nonzero or np.min(np.abs(A)) > 0.1:
            if np.linalg.svd(A, compute_uv=False)[1] > 0.2:
                return A
