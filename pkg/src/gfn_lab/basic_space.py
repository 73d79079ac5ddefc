"""Representatives of generalized functions and the embeddings into them.

A representative is a smooth map (test function, point) -> value on the set
of admissible pairs U(Omega) = {(phi, x) : supp phi subset Omega - x}.  Two
equivalent conventions are supported and tagged on each representative:

* C-formalism: distributions embed by anticonvolution, <w, phi(. - x)>;
* J-formalism: distributions act on the test function directly, <w, phi>.

The two are exchanged by ``translate_formalism``.  Whether a representative
is moderate or negligible is never decided here; the asymptotics module
probes it with scaled test objects.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import numdiff
from .distributions import Distribution, pair, pullback_test_function
from .testfunc import (TAU_M, Box, DomainError, TestFunction, scale,
                       tf_lincomb, translate)


class FormalismError(ValueError):
    """Mixed C/J operands where a single formalism is required."""


class PreconditionError(ValueError):
    """A directional derivative was requested outside the zero-mass tangent."""


class Representative:
    """Element of the basic space: evaluator (phi, x) -> complex.

    ``linear`` marks evaluators that are linear in the test-function slot
    (every embedded distribution is); the directional derivative exploits it.
    ``omega`` is the ambient open set realizing the domain predicate.
    """

    has_log_channel = False

    def __init__(self, eval_fn: Callable[[TestFunction, float], complex],
                 formalism: str = "C", linear: bool = False,
                 omega: Optional[Box] = None, name: str = ""):
        if formalism not in ("C", "J"):
            raise ValueError("formalism must be 'C' or 'J'")
        self.eval_fn = eval_fn
        self.formalism = formalism
        self.linear = bool(linear)
        self.omega = omega
        self.name = name

    def __call__(self, phi: TestFunction, x):
        if self.omega is not None:
            self.check_domain(phi, x)
        return self.eval_fn(phi, x)

    def in_domain(self, phi: TestFunction, x) -> bool:
        if self.omega is None:
            return True
        if self.formalism == "C":
            xv = np.atleast_1d(np.asarray(x, dtype=float))
            return self.omega.contains_ball(phi.center + xv, phi.radius)
        return (self.omega.contains_ball(phi.center, phi.radius)
                and self.omega.contains_point(x))

    def check_domain(self, phi: TestFunction, x):
        if not self.in_domain(phi, x):
            raise DomainError(
                f"(phi, x) with x={x!r}, support B({phi.center}, "
                f"{phi.radius:g}) is outside U(Omega)")

    def compose_pullback(self, transform, omega_src: Optional[Box],
                         name: str = "") -> "Representative":
        """Representative (phi~, x~) -> self(transform(phi~, x~))."""

        def ev(phi_t, x_t):
            chi, y = transform(phi_t, x_t)
            return self(chi, y)  # re-check the base domain at (chi, y)

        return Representative(ev, formalism=self.formalism, linear=self.linear,
                              omega=omega_src, name=name or f"pb[{self.name}]")

    def __repr__(self):
        return f"Representative({self.name or self.eval_fn}, {self.formalism})"


class ExpExpRepresentative(Representative):
    """R(phi, x) = exp(i exp(I(phi, x))) for a real inner functional I.

    The plain value overflows the moment I exceeds ~700, so all asymptotic
    work runs through the log-magnitude channel: |R| = 1 identically, and
    the magnitudes of x- or phi-derivatives are I + log |dI|.
    """

    has_log_channel = True

    def __init__(self, inner: Callable[[TestFunction, float], float],
                 formalism: str = "C", omega: Optional[Box] = None,
                 name: str = "exp-i-exp"):
        self.inner = inner

        def ev(phi, x):
            ival = inner(phi, x)
            if ival > 700.0:
                return complex(np.nan, np.nan)
            return complex(np.exp(1j * np.exp(ival)))

        super().__init__(ev, formalism=formalism, linear=False, omega=omega,
                         name=name)

    def log_abs(self, phi: TestFunction, x) -> float:
        return 0.0

    def log_abs_dx(self, inner_section: Callable[[float], float], x: float,
                   h: float) -> float:
        """log |d/dx R| = I(x) + log |I'(x)|, I' by central differences.

        A difference below the rounding noise of the inner evaluations is
        indistinguishable from zero; reporting it would multiply noise by
        exp(I).  Such points count as exact zeros (-inf)."""
        ival = inner_section(x)
        up = inner_section(x + h)
        dn = inner_section(x - h)
        di = (up - dn) / (2.0 * h)
        noise = 8.0 * np.finfo(float).eps * max(abs(up), abs(dn), 1.0) / (2.0 * h)
        if abs(di) <= noise:
            return -np.inf
        return ival + float(np.log(abs(di)))

    def log_abs_d1(self, phi: TestFunction, x, directions,
                   rel_step: float = 1e-4) -> float:
        """log |d_1^k R(phi,x)(psi_1..psi_k)| ~ k I + sum log |d_1 I(psi_j)|.

        Exact up to O(e^{-I}) corrections, which is the regime of interest.
        """
        ival = self.inner(phi, x)
        acc = len(directions) * ival
        for psi in directions:
            t = rel_step * max(phi.sup_abs(), 1e-30) / max(psi.sup_abs(), 1e-30)
            up = self.inner(tf_lincomb([1.0, t], [phi, psi]), x)
            dn = self.inner(tf_lincomb([1.0, -t], [phi, psi]), x)
            di = (up - dn) / (2.0 * t)
            if di == 0.0:
                return -np.inf
            acc += float(np.log(abs(di)))
        return acc

    def compose_pullback(self, transform, omega_src, name: str = ""):
        base_inner = self.inner

        def inner2(phi_t, x_t):
            chi, y = transform(phi_t, x_t)
            return base_inner(chi, y)

        return ExpExpRepresentative(inner2, formalism=self.formalism,
                                    omega=omega_src,
                                    name=name or f"pb[{self.name}]")


# ---------------------------------------------------------------------------
# embeddings


def embed_C(w: Distribution, omega: Optional[Box] = None,
            n: Optional[int] = None) -> Representative:
    """iota in the C-formalism: (phi, x) -> <w, phi(. - x)>."""

    def ev(phi, x):
        return pair(w, translate(phi, x), n)

    return Representative(ev, formalism="C", linear=True, omega=omega,
                          name=f"iota_C[{w.name or w.kind}]")


def embed_J(w: Distribution, omega: Optional[Box] = None,
            n: Optional[int] = None) -> Representative:
    """iota in the J-formalism: (phi, x) -> <w, phi>, independent of x."""

    def ev(phi, x):
        return pair(w, phi, n)

    return Representative(ev, formalism="J", linear=True, omega=omega,
                          name=f"iota_J[{w.name or w.kind}]")


def embed_sigma(f: Callable[[float], complex], formalism: str = "C",
                omega: Optional[Box] = None, name: str = "") -> Representative:
    """The constant embedding of a smooth function: (phi, x) -> f(x)."""

    def ev(phi, x):
        return f(x)

    return Representative(ev, formalism=formalism, linear=False, omega=omega,
                          name=name or "sigma")


def translate_formalism(rep: Representative) -> Representative:
    """Toggle between the C- and J-formalism presentations.

    J -> C composes with (phi, x) -> (phi(. - x), x); C -> J with its
    inverse.  A round trip reproduces the original evaluator outputs
    bit for bit because opposite translations cancel structurally.
    """
    base = rep.eval_fn
    if rep.formalism == "J":
        def ev(phi, x):
            return base(translate(phi, x), x)

        return Representative(ev, formalism="C", linear=rep.linear,
                              omega=rep.omega, name=f"T*[{rep.name}]")

    def ev(phi, x):
        return base(translate(phi, -np.asarray(x, dtype=float)), x)

    return Representative(ev, formalism="J", linear=rep.linear,
                          omega=rep.omega, name=f"T-*[{rep.name}]")


def pullback_pair_transform(mu):
    """The test-function/point transform induced by a diffeomorphism.

    Maps (phi~, x~) on the source side to (chi, mu(x~)) with

        chi(xi) = phi~(mu^{-1}(xi + mu x~) - x~) * |det D mu^{-1}(xi + mu x~)|,

    assembled from the classical pullback of the translated test function.
    The identity map reproduces (phi~, x~) bit for bit because the two
    opposite translations cancel structurally.
    """

    def transform(phi_t: TestFunction, x_t):
        y = mu.forward(x_t)
        shifted = translate(phi_t, x_t)
        chi = translate(pullback_test_function(mu, shifted),
                        -np.asarray(y, dtype=float))
        return chi, y

    return transform


# ---------------------------------------------------------------------------
# algebra operations (pointwise on U(Omega))


def _merge_omega(r1: Representative, r2: Representative):
    return r1.omega if r1.omega is not None else r2.omega


def add(r1: Representative, r2: Representative) -> Representative:
    if r1.formalism != r2.formalism:
        raise FormalismError("cannot add across formalisms")
    return Representative(lambda phi, x: r1(phi, x) + r2(phi, x),
                          formalism=r1.formalism,
                          linear=r1.linear and r2.linear,
                          omega=_merge_omega(r1, r2),
                          name=f"({r1.name}+{r2.name})")


def sub(r1: Representative, r2: Representative) -> Representative:
    if r1.formalism != r2.formalism:
        raise FormalismError("cannot subtract across formalisms")
    return Representative(lambda phi, x: r1(phi, x) - r2(phi, x),
                          formalism=r1.formalism,
                          linear=r1.linear and r2.linear,
                          omega=_merge_omega(r1, r2),
                          name=f"({r1.name}-{r2.name})")


def mul(r1: Representative, r2: Representative) -> Representative:
    if r1.formalism != r2.formalism:
        raise FormalismError("cannot multiply across formalisms")
    return Representative(lambda phi, x: r1(phi, x) * r2(phi, x),
                          formalism=r1.formalism, linear=False,
                          omega=_merge_omega(r1, r2),
                          name=f"({r1.name}*{r2.name})")


def scalar_mul(c: complex, rep: Representative) -> Representative:
    return Representative(lambda phi, x: c * rep(phi, x),
                          formalism=rep.formalism, linear=rep.linear,
                          omega=rep.omega, name=f"({c}*{rep.name})")


class GeneralizedFunction:
    """An algebra element, presented by one representative.

    Two presentations define the same element when their difference is
    negligible; that verdict is rendered by the asymptotics engine against
    test-object batteries and is never decided here, so ``==`` compares
    presentations only.  ``difference`` hands the probe representative to
    whoever runs the test.
    """

    def __init__(self, representative: Representative):
        self.representative = representative

    def difference(self, other: "GeneralizedFunction") -> Representative:
        return sub(self.representative, other.representative)

    def __repr__(self):
        return f"GeneralizedFunction({self.representative.name})"


# ---------------------------------------------------------------------------
# derivatives


def partial_x(rep: Representative, alpha: int, phi: Optional[TestFunction],
              x: float, path=None, eps: Optional[float] = None,
              h: Optional[float] = None, refine: bool = True):
    """d^alpha/dx^alpha of x -> rep(slot(x), x) by central differences.

    With a test-object ``path`` the slot is the scaled member S_eps
    path(eps, x), so the total derivative includes the path's own
    x-dependence.  The step tracks the scale of the inserted object
    (eps * 2^-7) and shrinks symmetrically near the boundary of Omega.
    """
    if alpha < 0 or alpha > numdiff.MAX_ORDER:
        raise ValueError(f"derivative order {alpha} unsupported")

    if path is not None:
        if eps is None:
            raise ValueError("eps is required when differentiating along a path")

        def section(y):
            return rep(scale(path(eps, y), eps), y)
    else:
        def section(y):
            return rep(phi, y)

    if alpha == 0:
        return section(x)

    if h is None:
        h = eps * 2.0**-7 if eps is not None else 1e-5
    hw = numdiff.stencil_halfwidth(alpha)
    if rep.omega is not None:
        dist = rep.omega.distance_to_boundary(x)
        if dist <= 0:
            raise DomainError(f"derivative point x={x} outside Omega")
        if hw * h >= dist:
            h = 0.5 * dist / hw
    if refine:
        return numdiff.richardson_derivative(section, x, order=alpha,
                                             base_step=h, levels=1)
    return numdiff.central_difference(section, x, alpha, h)


def d1_derivative(rep: Representative, phi: TestFunction, x, directions,
                  rel_step: float = 1e-4, mass_tol: float = TAU_M):
    """Iterated directional derivative in the test-function slot.

    Directions must have vanishing integral (the tangent space of the
    unit-mass constraint).  Linear representatives take the exact path:
    first order returns rep(psi, x), second and higher vanish.
    """
    k = len(directions)
    if k == 0:
        return rep(phi, x)
    if k > 2:
        raise ValueError("directional derivatives implemented up to order 2")
    for psi in directions:
        if abs(psi.mass()) > mass_tol:
            raise PreconditionError(
                f"direction has mass {psi.mass():.3e}, not in the zero-mass tangent")

    if rep.linear:
        if k == 1:
            return rep(directions[0], x)
        return 0.0

    sup_phi = max(phi.sup_abs(), 1e-30)
    steps = [rel_step * sup_phi / max(psi.sup_abs(), 1e-30)
             for psi in directions]
    if k == 1:
        t = steps[0]
        psi = directions[0]
        up = rep(tf_lincomb([1.0, t], [phi, psi]), x)
        dn = rep(tf_lincomb([1.0, -t], [phi, psi]), x)
        return (up - dn) / (2.0 * t)

    t1, t2 = steps
    p1, p2 = directions

    def at(s1, s2):
        return rep(tf_lincomb([1.0, s1, s2], [phi, p1, p2]), x)

    return (at(t1, t2) - at(t1, -t2) - at(-t1, t2) + at(-t1, -t2)) / (4 * t1 * t2)


def Dj_derivative(rep: Representative, axis: int, phi: TestFunction, x):
    """Derivative in the J-formalism:

        (D_j R)(phi, x) = -(d_1 R(phi, x))(d_axis phi) + (d_x R)(phi, x).

    For the embedded image of a distribution the second term vanishes by
    x-independence and the first is exactly the embedded derivative.
    """
    if rep.formalism != "J":
        raise FormalismError("D_j derivative acts on J-formalism representatives")
    dphi = phi.derivative(axis)
    term1 = -d1_derivative(rep, phi, x, [dphi])
    term2 = partial_x(rep, 1, phi, x, h=1e-5)
    return term1 + term2
