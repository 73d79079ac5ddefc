"""Distributions as linear pairings against test functions.

Variants: smooth densities, Dirac derivatives, the Heaviside step, the
principal value of 1/x, and linear combinations.  The classical pullback
under a diffeomorphism is provided so embedding consistency can be checked
against it.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import numdiff
from .testfunc import (DEFAULT_NODES, Box, DomainError, TestFunction,
                       from_evaluator, support_grid)

#: maximum Dirac-derivative order handled by the Richardson stencils
K_MAX = 4


class Distribution:
    """Base: a linear functional on test functions, optionally on an open set."""

    kind = "abstract"

    def __init__(self, omega: Optional[Box] = None, name: str = ""):
        self.omega = omega
        self.name = name

    def __repr__(self):
        return f"{type(self).__name__}({self.name or self.kind})"


class SmoothDensity(Distribution):
    """Pairing by integration against a smooth density f.

    ``fns`` is the evaluator or a chain (f, f', f'', ...); a chain makes
    distributional derivatives exact instead of adjoint-numerical.
    """

    kind = "smooth"

    def __init__(self, fns, omega=None, name=""):
        super().__init__(omega, name)
        if callable(fns):
            fns = (fns,)
        self.fns = tuple(fns)

    @property
    def f(self) -> Callable:
        return self.fns[0]


class DiracDerivative(Distribution):
    """delta^(k) at ``position``; pairs to (-1)^k psi^(k)(position)."""

    kind = "dirac"

    def __init__(self, order: int = 0, position: float = 0.0, omega=None, name=""):
        if not 0 <= order <= K_MAX:
            raise ValueError(f"Dirac derivative order must be in 0..{K_MAX}")
        super().__init__(omega, name or f"delta^({order})")
        self.order = int(order)
        self.position = float(position)


class Heaviside(Distribution):
    """Unit step at 0 (one-dimensional)."""

    kind = "heaviside"


class PrincipalValue(Distribution):
    """vp(1/x) (one-dimensional)."""

    kind = "pv"


class LinearCombination(Distribution):
    kind = "lincomb"

    def __init__(self, terms: Sequence[tuple[complex, Distribution]],
                 omega=None, name=""):
        super().__init__(omega, name)
        self.terms = [(complex(c), w) for c, w in terms]


class AdjointDerivative(Distribution):
    """Derivative defined through the pairing: <w', psi> = -<w, psi'>."""

    kind = "adjoint"

    def __init__(self, base: Distribution, axis: int = 0):
        super().__init__(base.omega, f"d{axis}[{base.name or base.kind}]")
        self.base = base
        self.axis = axis


class PullbackDistribution(Distribution):
    """mu* u, the classical pullback acting through the diffeomorphism."""

    kind = "pullback"

    def __init__(self, mu, base: Distribution, omega=None, name=""):
        super().__init__(omega, name or f"{mu.name}*[{base.name or base.kind}]")
        self.mu = mu
        self.base = base


def _simpson(vals: np.ndarray, h: float) -> float:
    n = len(vals) - 1
    if n % 2:
        raise ValueError("Simpson rule needs an even panel count")
    return h / 3.0 * (vals[0] + vals[-1]
                      + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum())


def _psi_derivative_at(psi: TestFunction, a: float, order: int) -> float:
    if order == 0:
        return psi(a)
    # walk down exact derivative closures while they exist; the remaining
    # numeric step then has the lowest possible stencil order
    if order > 1 and psi.dfn is not None:
        return _psi_derivative_at(psi.derivative(), a, order - 1)
    step = numdiff.DEFAULT_STEP[order] * psi.radius
    return float(numdiff.richardson_derivative(
        lambda t: psi(t), a, order=order, base_step=step, levels=2))


def _check_domain(w: Distribution, psi: TestFunction):
    if w.omega is not None and not w.omega.contains_ball(psi.center, psi.radius):
        raise DomainError(
            f"support ball B({psi.center}, {psi.radius:g}) escapes the open set")


def pair(w: Distribution, psi: TestFunction, n: Optional[int] = None):
    """The pairing <w, psi>.

    Smooth densities integrate over the support box (trapezoid); Dirac
    derivatives use Richardson-extrapolated central differences on the exact
    evaluator; the half-line integrals for Heaviside and vp(1/x) use
    composite Simpson, since their integrands are not flat at the cut point.
    """
    _check_domain(w, psi)
    if n is None:
        n = DEFAULT_NODES[psi.s]

    if w.kind == "smooth":
        pts, wt = support_grid(psi, n)
        vals = w.f(pts) * psi.fn(pts)
        out = np.dot(wt, vals)
        return complex(out) if np.iscomplexobj(vals) else float(out)

    if w.kind == "dirac":
        sign = -1.0 if w.order % 2 else 1.0
        return sign * _psi_derivative_at(psi, w.position, w.order)

    if w.kind == "heaviside":
        if psi.s != 1:
            raise ValueError("Heaviside is one-dimensional")
        lo, hi = psi.box
        b = float(hi[0])
        if b <= 0.0:
            return 0.0
        a = max(0.0, float(lo[0]))
        t = np.linspace(a, b, n + 1)
        return _simpson(psi.fn(t), (b - a) / n)

    if w.kind == "pv":
        if psi.s != 1:
            raise ValueError("vp(1/x) is one-dimensional")
        lo, hi = psi.box
        b = max(abs(float(lo[0])), abs(float(hi[0])))
        if b == 0.0:
            return 0.0
        t = np.linspace(0.0, b, n + 1)
        vals = np.empty(n + 1)
        vals[1:] = (psi.fn(t[1:]) - psi.fn(-t[1:])) / t[1:]
        vals[0] = 2.0 * _psi_derivative_at(psi, 0.0, 1)  # smooth limit at 0
        return _simpson(vals, b / n)

    if w.kind == "lincomb":
        acc = 0.0
        for c, term in w.terms:
            acc = acc + c * pair(term, psi, n)
        if isinstance(acc, complex) and acc.imag == 0.0:
            return acc.real
        return acc

    if w.kind == "adjoint":
        return -pair(w.base, psi.derivative(w.axis), n)

    if w.kind == "pullback":
        return classical_pullback(w.mu, w.base, psi, n)

    raise TypeError(f"unknown distribution kind {w.kind!r}")


def derivative(w: Distribution, axis: int = 0) -> Distribution:
    """Distributional derivative; closed forms where the variant has one."""
    if w.kind == "dirac":
        return DiracDerivative(w.order + 1, w.position, omega=w.omega)
    if w.kind == "heaviside":
        return DiracDerivative(0, 0.0, omega=w.omega)
    if w.kind == "smooth" and len(w.fns) > 1:
        return SmoothDensity(w.fns[1:], omega=w.omega,
                             name=f"d[{w.name}]" if w.name else "")
    if w.kind == "lincomb":
        return LinearCombination([(c, derivative(t, axis)) for c, t in w.terms],
                                 omega=w.omega)
    return AdjointDerivative(w, axis)


def pullback_test_function(mu, psi: TestFunction) -> TestFunction:
    """(psi o mu^{-1}) |det D mu^{-1}| as an opaque test function.

    The support radius bound comes from a sampled Lipschitz estimate of the
    forward map over the support of psi, inflated by a safety factor.
    """
    if getattr(mu, "is_identity", False):
        return psi
    lo, hi = psi.box
    lip = mu.lipschitz_forward(lo, hi)
    center = np.atleast_1d(np.asarray(mu.forward(psi.center)))
    radius = lip * psi.radius

    def fn(xi):
        pre = mu.inverse(xi)
        return psi.fn(pre) * np.abs(mu.det_d_inverse(xi))

    return from_evaluator(fn, psi.s, center, radius,
                          label=f"{mu.name}#[{psi.label}]")


def classical_pullback(mu, u: Distribution, psi: TestFunction,
                       n: Optional[int] = None):
    """<u, (psi o mu^{-1}) |det D mu^{-1}|>, the classical pullback pairing."""
    src = getattr(mu, "omega_src", None)
    if src is not None and not src.contains_ball(psi.center, psi.radius):
        raise DomainError("test function support leaves the source chart")
    chi = pullback_test_function(mu, psi)
    dst = getattr(mu, "omega_dst", None)
    if dst is not None and chi is not psi and not dst.contains_ball(
            chi.center, chi.radius):
        raise DomainError("transformed support leaves the target chart")
    return pair(u, chi, n)


# ---------------------------------------------------------------------------
# a small catalog of smooth functions with exact derivative chains


def _poly_chain(coeffs: Sequence[float]) -> tuple:
    """Derivative chain for a polynomial given by ascending coefficients."""
    chain = []
    c = np.asarray(coeffs, dtype=float)
    while True:
        chain.append((lambda cc: (lambda x: np.polynomial.polynomial.polyval(x, cc)))(c))
        if len(c) <= 1:
            break
        c = c[1:] * np.arange(1, len(c))
    chain.append(lambda x: np.zeros_like(np.asarray(x, dtype=float)))
    return tuple(chain)


def _neg(f):
    return lambda x: -f(x)


SMOOTH_CHAINS = {
    "sin": (np.sin, np.cos, _neg(np.sin), _neg(np.cos), np.sin),
    "cos": (np.cos, _neg(np.sin), _neg(np.cos), np.sin, np.cos),
    "one": _poly_chain([1.0]),
    "x": _poly_chain([0.0, 1.0]),
    "x2": _poly_chain([0.0, 0.0, 1.0]),
    "x4": _poly_chain([0.0, 0.0, 0.0, 0.0, 1.0]),
}


def smooth_density(name: str, omega: Optional[Box] = None) -> SmoothDensity:
    return SmoothDensity(SMOOTH_CHAINS[name], omega=omega, name=name)
