import numpy as np
import pytest

from gfn_lab.testfunc import build_mollifier


@pytest.fixture(scope="session")
def moll0():
    return build_mollifier(0)


@pytest.fixture(scope="session")
def moll2():
    return build_mollifier(2)


@pytest.fixture(scope="session")
def moll2_offset():
    # center-offset member: asymmetric, first unconstrained moment nonzero
    return build_mollifier(2, center=0.15)


_np_trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2


def oracle_trapezoid(fn, a: float, b: float, n: int = 8192) -> float:
    """Independent quadrature oracle (numpy trapezoid, not the library's)."""
    x = np.linspace(a, b, n + 1)
    return float(_np_trapezoid(fn(x), x))
