"""Diffeomorphisms of open subsets of R and their action on the theory.

Provides the pullback of representatives, the transformed-test-object
construction (whose members are in general only defined on a partial
domain D of (0,1] x Omega), the admissibility bookkeeping for partial
domains, and a small catalog of one-dimensional maps used by scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basic_space import FormalismError, Representative, pullback_pair_transform
from .test_objects import TestObjectPath
from .testfunc import Box, DomainError, from_evaluator

EPS0_CAP = 2.0**-20


def _scalarized(fn):
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        out = fn(arr)
        return float(out) if arr.ndim == 0 else out

    return wrapped


@dataclass
class Diffeomorphism:
    """One-dimensional diffeomorphism with explicitly supplied inverse data.

    ``forward`` maps the source open set onto the target; ``d_inverse`` and
    ``det_d_inverse`` evaluate the derivative of the inverse at points of
    the target.  No symbolic inversion is attempted: catalog entries supply
    closed forms or a deterministic Newton iteration.
    """

    name: str
    forward: Callable
    inverse: Callable
    d_inverse: Callable
    det_d_inverse: Callable
    omega_src: Optional[Box] = None
    omega_dst: Optional[Box] = None
    is_identity: bool = False
    s: int = 1

    def __call__(self, x):
        return self.forward(x)

    def inverted(self) -> "Diffeomorphism":
        """The inverse map as a diffeomorphism in its own right."""
        fwd, inv = self.inverse, self.forward

        def dinv(y):
            return 1.0 / self.d_inverse(self.forward(y))

        def detdinv(y):
            return 1.0 / self.det_d_inverse(self.forward(y))

        return Diffeomorphism(f"{self.name}-inverse", fwd, inv,
                              _scalarized(dinv), _scalarized(detdinv),
                              omega_src=self.omega_dst,
                              omega_dst=self.omega_src,
                              is_identity=self.is_identity, s=self.s)

    def lipschitz_forward(self, lo, hi, n: int = 256, safety: float = 1.1) -> float:
        """Sampled bound on sup |mu'| over [lo, hi].

        |mu'(x)| = 1/|D mu^{-1}(mu(x))|, so the derivative of the inverse is
        sampled on the image interval and the reciprocal of its smallest
        magnitude is inflated by the safety factor.
        """
        if self.is_identity:
            return 1.0
        a = float(np.atleast_1d(np.asarray(self.forward(float(np.atleast_1d(lo)[0]))))[0])
        b = float(np.atleast_1d(np.asarray(self.forward(float(np.atleast_1d(hi)[0]))))[0])
        ys = np.linspace(min(a, b), max(a, b), n)
        dinv = np.abs(np.asarray(self.det_d_inverse(ys), dtype=float))
        m = float(np.min(dinv))
        if m <= 0.0 or not np.isfinite(m):
            raise ValueError(f"{self.name}: inverse derivative vanishes on the region")
        return safety / m


def sanity_check(mu: Diffeomorphism, lo: float, hi: float, count: int = 64,
                 seed: int = 0, round_tol: float = 1e-10,
                 jac_tol: float = 1e-6) -> None:
    """Spot-check inverse consistency and the supplied inverse derivative."""
    rng = np.random.default_rng(seed)
    xs = lo + (hi - lo) * rng.random(count)
    back = mu.inverse(mu.forward(xs))
    worst = float(np.max(np.abs(back - xs)))
    if worst > round_tol:
        raise ValueError(f"{mu.name}: inverse round trip error {worst:.3e}")
    ys = mu.forward(xs)
    h = 1e-6 * max(1.0, float(np.max(np.abs(ys))))
    fd = (mu.inverse(ys + h) - mu.inverse(ys - h)) / (2.0 * h)
    rel = np.max(np.abs(fd - mu.d_inverse(ys)) / np.maximum(np.abs(fd), 1e-12))
    if rel > jac_tol:
        raise ValueError(f"{mu.name}: inverse derivative off by {rel:.3e} relative")


# ---------------------------------------------------------------------------
# catalog


def identity_map(omega: Optional[Box] = None) -> Diffeomorphism:
    f = _scalarized(lambda x: x)
    one = _scalarized(lambda x: np.ones_like(x))
    return Diffeomorphism("identity", f, f, one, one,
                          omega_src=omega, omega_dst=omega, is_identity=True)


def affine_map(a: float, b: float = 0.0,
               omega_dst: Optional[Box] = None) -> Diffeomorphism:
    if a == 0.0:
        raise ValueError("affine map needs a != 0")
    fwd = _scalarized(lambda x: a * x + b)
    inv = _scalarized(lambda y: (y - b) / a)
    dinv = _scalarized(lambda y: np.full_like(np.asarray(y, dtype=float), 1.0 / a))
    src = None
    if omega_dst is not None:
        ends = sorted(((omega_dst.lo[0] - b) / a, (omega_dst.hi[0] - b) / a))
        src = Box.interval(ends[0], ends[1])
    return Diffeomorphism(f"affine({a:g},{b:g})", fwd, inv, dinv, dinv,
                          omega_src=src, omega_dst=omega_dst)


def sin_bend_map(amplitude: float = 0.25,
                 omega_dst: Optional[Box] = None) -> Diffeomorphism:
    """x -> x + amplitude*sin(x); global diffeomorphism for |amplitude| < 1."""
    if not abs(amplitude) < 1.0:
        raise ValueError("amplitude must satisfy |a| < 1")

    def fwd_arr(x):
        return x + amplitude * np.sin(x)

    def inv_arr(y):
        x = np.array(y, dtype=float, copy=True)
        for _ in range(60):
            f = x + amplitude * np.sin(x) - y
            x = x - f / (1.0 + amplitude * np.cos(x))
            if np.max(np.abs(f)) < 1e-16 * (1.0 + np.max(np.abs(y))):
                break
        return x

    def dinv_arr(y):
        return 1.0 / (1.0 + amplitude * np.cos(inv_arr(np.asarray(y, dtype=float))))

    fwd, inv, dinv = _scalarized(fwd_arr), _scalarized(inv_arr), _scalarized(dinv_arr)
    src = None
    if omega_dst is not None:
        src = Box.interval(inv(float(omega_dst.lo[0])), inv(float(omega_dst.hi[0])))
    return Diffeomorphism(f"sin-bend({amplitude:g})", fwd, inv, dinv, dinv,
                          omega_src=src, omega_dst=omega_dst)


def cubic_map(omega_dst: Optional[Box] = None) -> Diffeomorphism:
    """x -> x^3 + x; globally invertible, inverse by Cardano plus polish."""

    def fwd_arr(x):
        return x**3 + x

    def inv_arr(y):
        y = np.asarray(y, dtype=float)
        disc = np.sqrt(0.25 * y * y + 1.0 / 27.0)
        x = np.cbrt(0.5 * y + disc) + np.cbrt(0.5 * y - disc)
        for _ in range(2):  # Newton polish to machine precision
            x = x - (x**3 + x - y) / (3.0 * x * x + 1.0)
        return x

    def dinv_arr(y):
        x = inv_arr(np.asarray(y, dtype=float))
        return 1.0 / (3.0 * x * x + 1.0)

    fwd, inv, dinv = _scalarized(fwd_arr), _scalarized(inv_arr), _scalarized(dinv_arr)
    src = None
    if omega_dst is not None:
        src = Box.interval(inv(float(omega_dst.lo[0])), inv(float(omega_dst.hi[0])))
    return Diffeomorphism("cubic", fwd, inv, dinv, dinv,
                          omega_src=src, omega_dst=omega_dst)


def catalog(omega_dst: Optional[Box] = None) -> dict:
    return {
        "identity": identity_map(omega_dst),
        "affine-2x": affine_map(2.0, 0.0, omega_dst),
        "shift-1": affine_map(1.0, 1.0, omega_dst),
        "sin-bend": sin_bend_map(0.25, omega_dst),
        "cubic": cubic_map(omega_dst),
    }


def get_diffeo(name: str, omega_dst: Optional[Box] = None) -> Diffeomorphism:
    cat = catalog(omega_dst)
    if name not in cat:
        raise KeyError(f"unknown diffeomorphism {name!r}; "
                       f"catalog: {sorted(cat)}")
    return cat[name]


def compose(mu: Diffeomorphism, nu: Diffeomorphism) -> Diffeomorphism:
    """mu o nu (apply nu first)."""

    fwd = _scalarized(lambda x: mu.forward(nu.forward(x)))
    inv = _scalarized(lambda y: nu.inverse(mu.inverse(y)))

    def dinv_arr(y):
        my = mu.inverse(np.asarray(y, dtype=float))
        return nu.d_inverse(my) * mu.d_inverse(y)

    dinv = _scalarized(dinv_arr)
    src = None
    if mu.omega_src is not None:
        ends = sorted((float(nu.inverse(float(mu.omega_src.lo[0]))),
                       float(nu.inverse(float(mu.omega_src.hi[0])))))
        src = Box.interval(ends[0], ends[1])
    return Diffeomorphism(f"{mu.name}.{nu.name}", fwd, inv, dinv, dinv,
                          omega_src=src, omega_dst=mu.omega_dst,
                          is_identity=mu.is_identity and nu.is_identity)


# ---------------------------------------------------------------------------
# action on representatives and on test objects


def pullback_rep(mu: Diffeomorphism, rep: Representative,
                 name: str = "") -> Representative:
    """The action on a representative:

        (mu^ R)(phi~, x~) = R(phi~(mu^{-1}(. + mu x~) - x~)|det D mu^{-1}(. + mu x~)|, mu x~).

    The transformed slot function is opaque, with a support radius bound
    from the sampled Lipschitz constant; a log-magnitude channel on R is
    transported along.
    """
    if rep.formalism != "C":
        raise FormalismError("pullback acts on C-formalism representatives")
    return rep.compose_pullback(pullback_pair_transform(mu), mu.omega_src,
                                name=name or f"{mu.name}^[{rep.name}]")


class PartialDomain:
    """Admissible subset D of (0,1] x Omega with per-compact eps0 records.

    Admissibility is monotone downward in eps (supports shrink), which the
    registration search relies on and spot-checks.
    """

    def __init__(self, contains_fn: Callable[[float, float], bool],
                 label: str = ""):
        self._contains = contains_fn
        self.label = label
        self.eps0_records: dict = {}

    @staticmethod
    def everywhere() -> "PartialDomain":
        return PartialDomain(lambda eps, x: True, label="full")

    def contains(self, eps: float, x: float) -> bool:
        if not 0.0 < eps <= 1.0:
            return False
        return bool(self._contains(float(eps), float(x)))

    def register_compact(self, grid, key: Optional[str] = None,
                         cap: float = EPS0_CAP) -> float:
        """Largest eps0 = 2^-m such that (0, eps0] x grid is admissible."""
        grid = np.asarray(grid, dtype=float)
        key = key or f"L[{grid.min():g},{grid.max():g}]#{len(grid)}"
        eps = 1.0
        while eps >= cap:
            if all(self.contains(eps, float(x)) for x in grid):
                # spot-check monotonicity at two smaller scales
                for sub in (0.5 * eps, 0.25 * eps):
                    if not all(self.contains(sub, float(x)) for x in grid):
                        raise DomainError(
                            f"admissibility not monotone below eps={eps:g}")
                self.eps0_records[key] = (grid, eps)
                return eps
            eps *= 0.5
        raise DomainError(f"no admissible eps0 above {cap:g} for {key}")


def transform_test_object(mu: Diffeomorphism, path: TestObjectPath,
                          compacts: Sequence = (), safety: float = 1.1,
                          lip_region: Optional[tuple] = None):
    """Transformed test object of a source path, with its partial domain.

        phi(eps, x)(xi) = phi~(eps, mu^{-1} x)((mu^{-1}(eps xi + x) - mu^{-1} x)/eps)
                          * |det D mu^{-1}(eps xi + x)|

    Returns (path, domain); each requested compact grid gets an eps0
    registered by geometric halving.  The identity map returns the source
    path itself on a full domain.
    """
    if mu.is_identity:
        dom = PartialDomain.everywhere()
        for L in compacts:
            dom.register_compact(L)
        return path, dom

    if lip_region is not None:
        lo, hi = lip_region
    elif mu.omega_src is not None:
        lo, hi = float(mu.omega_src.lo[0]), float(mu.omega_src.hi[0])
    else:
        lo, hi = -3.0, 3.0
    lip = mu.lipschitz_forward(np.array([lo]), np.array([hi]), safety=safety)
    rb = lip * path.radius_bound  # encloses support and its offset about 0

    def member(eps, x):
        xt = mu.inverse(x)
        src = path(eps, xt)

        def fn(xi):
            z = eps * xi + x
            u = (mu.inverse(z) - xt) / eps
            return src.fn(u) * np.abs(mu.det_d_inverse(z))

        return from_evaluator(fn, 1, 0.0, rb,
                              label=f"tto[{src.label}|{mu.name}]")

    src_bound = path.radius_bound
    omega_src, omega_dst = mu.omega_src, mu.omega_dst

    def admissible(eps, x):
        if omega_dst is not None:
            if not omega_dst.contains_point(x):
                return False
            if not omega_dst.contains_ball(np.array([x]), eps * rb):
                return False
        xt = mu.inverse(x)
        if omega_src is not None and not omega_src.contains_ball(
                np.array([xt]), eps * src_bound):
            return False
        return True

    dom = PartialDomain(admissible, label=f"D[{mu.name}]")
    out = TestObjectPath("full_path", member, path.q, rb,
                         member_id=f"{path.member_id}|{mu.name}", domain=dom,
                         meta={"lipschitz": lip, "source": path.member_id})
    for L in compacts:
        dom.register_compact(L)
    return out, dom


@dataclass
class ZReport:
    """Numerical check of the partial-domain test-object requirements."""

    membership_ok: bool
    radius_ok: bool
    radius_bound: float
    radius_observed: float
    deriv_bounds: dict = field(default_factory=dict)
    passed: bool = False


def check_Z_requirements(path: TestObjectPath, L, eps0: float,
                         beta_max: int = 4, n_eps: int = 6,
                         n_xi: int = 161) -> ZReport:
    """Verify, on (0, eps0] x L: membership in the domain, a finite uniform
    support radius bound, and finite sup bounds on xi-derivatives up to
    beta_max (recorded; derivatives by repeated central differences)."""
    L = np.asarray(L, dtype=float)
    eps_grid = eps0 * 2.0 ** -np.arange(n_eps, dtype=float)
    dom = path.domain
    membership_ok = True
    radius_obs = 0.0
    deriv_bounds = {b: 0.0 for b in range(beta_max + 1)}
    for e in eps_grid:
        for x in L:
            if dom is not None and not dom.contains(float(e), float(x)):
                membership_ok = False
                continue
            tf = path(float(e), float(x))
            radius_obs = max(radius_obs, float(np.max(np.abs(tf.center))
                                               + tf.radius))
            lo, hi = tf.box
            xi = np.linspace(float(lo[0]), float(hi[0]), n_xi)
            h = xi[1] - xi[0]
            vals = tf.fn(xi)
            deriv_bounds[0] = max(deriv_bounds[0], float(np.max(np.abs(vals))))
            cur = vals
            for b in range(1, beta_max + 1):
                cur = (cur[2:] - cur[:-2]) / (2.0 * h)
                if len(cur) < 3:
                    break
                deriv_bounds[b] = max(deriv_bounds[b], float(np.max(np.abs(cur))))
    radius_ok = (np.isfinite(path.radius_bound)
                 and radius_obs <= path.radius_bound * (1.0 + 1e-12))
    bounded = all(np.isfinite(v) for v in deriv_bounds.values())
    return ZReport(membership_ok, radius_ok, float(path.radius_bound),
                   radius_obs, deriv_bounds,
                   passed=membership_ok and radius_ok and bounded)
