"""Field-expansion potential polynomials and their equilibrium solutions.

The equilibrium state is rewritten as a power of a field value and each
order's vanishing condition becomes a polynomial in the field. This
module evaluates those polynomials with explicit power conventions,
solves every closed-form family (exact, weak-field, strong-field,
extremum-shifted, and the two-field cases and regimes), and classifies
the information-flow / symmetry-breaking status of a parameter point.

Power conventions: 0^0 = 1, and a term whose coefficient is exactly zero
never evaluates its power (so order n = 1 skips its inverse-power term
instead of failing). A nonzero coefficient multiplying a negative power
of a zero field value is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import MarketParams, MGParams, mg_y_drift

FLAG_TOL = 1e-12

REGIME_EXACT = "exact"
REGIME_WEAK = "weak-field"
REGIME_STRONG = "strong-field"
REGIME_EXTREMUM = "extremum"
REGIME_STRONG_STRONG = "strong-strong"
REGIME_WEAK_WEAK = "weak-weak"
REGIME_STRONG_X_WEAK_Y = "strong-x-weak-y"
REGIME_WEAK_X_STRONG_Y = "weak-x-strong-y"

_REGIME_ALIASES = {
    "strongstrong": REGIME_STRONG_STRONG,
    "strong-strong": REGIME_STRONG_STRONG,
    "weakweak": REGIME_WEAK_WEAK,
    "weak-weak": REGIME_WEAK_WEAK,
    "strongxweaky": REGIME_STRONG_X_WEAK_Y,
    "strong-x-weak-y": REGIME_STRONG_X_WEAK_Y,
    "weakxstrongy": REGIME_WEAK_X_STRONG_Y,
    "weak-x-strong-y": REGIME_WEAK_X_STRONG_Y,
}


class SingularRegimeError(ArithmeticError):
    """A regime formula has no finite value at these parameters."""


@dataclass(frozen=True)
class FieldPoint:
    """One field configuration. A value of None marks a direction the
    solution leaves unconstrained (any value solves the equation)."""

    phi_x: float | None
    phi_y: float | None = None
    n: int = 0
    m: int | None = None

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"order n must be >= 0, got {self.n}")
        if self.m is not None and self.m < 0:
            raise ValueError(f"order m must be >= 0, got {self.m}")


@dataclass(frozen=True)
class VacuumSolution:
    """Solution set of one potential polynomial.

    ``degeneracy`` counts distinct nontrivial (nonzero) roots.
    ``divided_out_trivial`` records a zero root removed by the exact
    solver's division step; ``approximate`` marks regime truncations.
    Curve-valued solutions carry ``relation``/``curve_coeffs`` and a
    ``product_value`` when the symmetric parameter conditions collapse
    the curve to a product constraint. Symmetry verdicts are None when
    the corresponding generator does not apply.
    """

    roots: tuple[FieldPoint, ...]
    regime: str
    n: int | None = None
    m: int | None = None
    degeneracy: int = 0
    price_translation_broken: bool | None = None
    volatility_translation_broken: bool | None = None
    approximate: bool = False
    no_real_solution: bool = False
    divided_out_trivial: float | None = None
    relation: str | None = None
    curve_coeffs: dict | None = None
    product_value: float | None = None
    limit_value: float | None = None
    notes: tuple[str, ...] = ()

    def to_record(self) -> str:
        """Flat key-value serialization."""
        lines = [f"regime = {self.regime}"]
        if self.n is not None:
            lines.append(f"n = {self.n}")
        if self.m is not None:
            lines.append(f"m = {self.m}")
        lines.append(f"degeneracy = {self.degeneracy}")
        lines.append(f"approximate = {self.approximate}")
        if self.no_real_solution:
            lines.append("no_real_solution = True")
        if self.divided_out_trivial is not None:
            lines.append(f"divided_out_trivial = {float(self.divided_out_trivial)!r}")
        if self.relation is not None:
            lines.append(f"relation = {self.relation}")
        if self.product_value is not None:
            lines.append(f"product_value = {float(self.product_value)!r}")
        if self.limit_value is not None:
            lines.append(f"limit_value = {float(self.limit_value)!r}")
        if self.price_translation_broken is not None:
            lines.append(f"price_translation_broken = {self.price_translation_broken}")
        if self.volatility_translation_broken is not None:
            lines.append(
                f"volatility_translation_broken = {self.volatility_translation_broken}"
            )
        for k, pt in enumerate(self.roots):
            px = "free" if pt.phi_x is None else repr(float(pt.phi_x))
            py = "free" if pt.phi_y is None else repr(float(pt.phi_y))
            lines.append(f"root_{k} = {px}, {py}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        """One root per row for sweep plotting."""
        lines = ["index,phi_x,phi_y"]
        for k, pt in enumerate(self.roots):
            px = "free" if pt.phi_x is None else repr(float(pt.phi_x))
            py = "" if pt.phi_y is None and self.m is None else (
                "free" if pt.phi_y is None else repr(float(pt.phi_y))
            )
            lines.append(f"{k},{px},{py}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RegimeReport:
    """Hermiticity flags of a parameter point and the resulting
    information-flow verdict (preserved iff all applicable flags hold)."""

    flags: dict
    values: dict
    preserved: bool
    y: float | None = None

    @property
    def verdict(self) -> str:
        return "preserved" if self.preserved else "leaking"

    def to_record(self) -> str:
        lines = []
        if self.y is not None:
            lines.append(f"y = {float(self.y)!r}")
        for name, ok in self.flags.items():
            lines.append(f"flag_{name} = {ok}")
        for name, val in self.values.items():
            lines.append(f"value_{name} = {float(val)!r}")
        lines.append(f"information_flow = {self.verdict}")
        return "\n".join(lines) + "\n"


def _term(coeff: float, base: float | None, exponent: int, label: str) -> float:
    """One polynomial term under the module's power conventions."""
    if coeff == 0.0:
        return 0.0
    if exponent == 0:
        return coeff
    if base is None:
        raise ValueError(f"term {label}: unconstrained field value exercised")
    if base == 0.0:
        if exponent < 0:
            raise ValueError(
                f"term {label}: nonzero coefficient multiplies a negative power "
                "of a zero field value"
            )
        return 0.0
    return coeff * base**exponent


def bs_potential_residual(p: MarketParams, n: int, phi: float) -> float:
    """Order-n potential polynomial at field value phi:

    -(sigma_sq/2) n(n-1) phi^{n-2} + (sigma_sq/2 - r) n phi^{n-1} + r phi^n
    """
    if n < 0:
        raise ValueError(f"order n must be >= 0, got {n}")
    half = 0.5 * p.sigma_sq
    t1 = _term(-half * n * (n - 1), phi, n - 2, "diffusion")
    t2 = _term((half - p.r) * n, phi, n - 1, "drift")
    t3 = _term(p.r, phi, n, "rate")
    return t1 + t2 + t3


def _quadratic_real_roots(a: float, b: float, c: float) -> tuple[list[float], bool]:
    """Real roots of a x^2 + b x + c, with a no-real-solution flag."""
    if a == 0.0:
        if b == 0.0:
            return ([], c != 0.0)
        return ([-c / b], False)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ([], True)
    sq = np.sqrt(disc)
    # Citardauq pairing avoids cancellation for the small root
    if b >= 0.0:
        r1 = (-b - sq) / (2.0 * a)
    else:
        r1 = (-b + sq) / (2.0 * a)
    r2 = c / (a * r1) if r1 != 0.0 else -b / a
    return ([float(r1), float(r2)], False)


def _bs_solution(
    roots: list[float],
    regime: str,
    n: int,
    approximate: bool,
    no_real: bool = False,
    divided_out: float | None = None,
    notes: tuple[str, ...] = (),
) -> VacuumSolution:
    uniq: list[float] = []
    for r in roots:
        if not any(r == u for u in uniq):
            uniq.append(r)
    pts = tuple(FieldPoint(phi_x=r, n=n) for r in uniq)
    nontrivial = sum(1 for r in uniq if r != 0.0)
    return VacuumSolution(
        roots=pts,
        regime=regime,
        n=n,
        degeneracy=nontrivial,
        price_translation_broken=any(r != 0.0 for r in uniq) if not no_real else None,
        volatility_translation_broken=None,
        approximate=approximate,
        no_real_solution=no_real,
        divided_out_trivial=divided_out,
        notes=notes,
    )


def bs_vacuum_exact(p: MarketParams, n: int) -> VacuumSolution:
    """Exact equilibrium field values at order n.

    For n >= 2 solves the quadratic obtained by dividing the order-n
    polynomial by phi^{n-2}:

        r phi^2 + (sigma_sq/2 - r) n phi - (sigma_sq/2) n (n-1) = 0.

    Zero roots removed by that division (n >= 3) are reported as
    ``divided_out_trivial`` metadata. For n = 1 returns {0, 1 -
    sigma_sq/2r}; the 0 there is the multiplied-in trivial branch and
    satisfies the divided (quadratic) form rather than the literal
    order-1 polynomial.
    """
    if n < 1:
        raise ValueError(f"order n must be >= 1, got {n}")
    if n == 1:
        nontrivial = 1.0 - p.sigma_sq / (2.0 * p.r)
        roots = [0.0] if nontrivial == 0.0 else [0.0, float(nontrivial)]
        return _bs_solution(
            roots,
            REGIME_EXACT,
            n,
            approximate=False,
            notes=("root 0.0 is the multiplied-in trivial branch",),
        )
    a = p.r
    b = (0.5 * p.sigma_sq - p.r) * n
    c = -0.5 * p.sigma_sq * n * (n - 1)
    roots, no_real = _quadratic_real_roots(a, b, c)
    divided_out = 0.0 if n >= 3 else None
    return _bs_solution(
        roots, REGIME_EXACT, n, approximate=False, no_real=no_real, divided_out=divided_out
    )


def bs_vacuum_weak(p: MarketParams, n: int) -> VacuumSolution:
    """Weak-field truncation: the single root sigma_sq (n-1) / (sigma_sq - 2r).

    Trivial (0) at n = 1 for any parameters and at sigma_sq = 0. The
    formula has a pole at sigma_sq = 2r, raised as SingularRegimeError.
    """
    if n < 0:
        raise ValueError(f"order n must be >= 0, got {n}")
    denom = p.sigma_sq - 2.0 * p.r
    if denom == 0.0:
        raise SingularRegimeError(
            "weak-field formula is singular at sigma_sq = 2 r"
        )
    root = p.sigma_sq * (n - 1) / denom
    return _bs_solution([float(root)], REGIME_WEAK, n, approximate=True)


def bs_vacuum_strong(p: MarketParams, n: int) -> VacuumSolution:
    """Strong-field truncation: roots {0, (1 - sigma_sq/2r) n}.

    Collapses to the unique trivial vacuum at sigma_sq = 2r; at n = 1 the
    nontrivial root coincides with the exact solver's.
    """
    if n < 0:
        raise ValueError(f"order n must be >= 0, got {n}")
    nontrivial = (1.0 - p.sigma_sq / (2.0 * p.r)) * n
    roots = [0.0] if nontrivial == 0.0 else [0.0, float(nontrivial)]
    return _bs_solution(roots, REGIME_STRONG, n, approximate=True)


def bs_extremum_roots(p: MarketParams, n: int) -> VacuumSolution:
    """Roots of the extremum-shifted quadratic

        phi^2 + (sigma_sq/2r - 1)(n-1) phi - (sigma_sq/2r)(n-1)(n-2) = 0.

    Trivial at n = 1 (both non-constant coefficients vanish).
    """
    if n < 1:
        raise ValueError(f"order n must be >= 1, got {n}")
    ratio = p.sigma_sq / (2.0 * p.r)
    a = 1.0
    b = (ratio - 1.0) * (n - 1)
    c = -ratio * (n - 1) * (n - 2)
    if n == 1:
        return _bs_solution([0.0], REGIME_EXTREMUM, n, approximate=False)
    roots, no_real = _quadratic_real_roots(a, b, c)
    return _bs_solution(roots, REGIME_EXTREMUM, n, approximate=False, no_real=no_real)


def extremum_quadratic_residual(p: MarketParams, n: int, phi: float) -> float:
    """Defining residual of the extremum family (used by fidelity checks)."""
    ratio = p.sigma_sq / (2.0 * p.r)
    return phi**2 + (ratio - 1.0) * (n - 1) * phi - ratio * (n - 1) * (n - 2)


def mg_polynomial_residual(p: MGParams, point: FieldPoint, y: float) -> float:
    """Two-field potential polynomial at (phi_x, phi_y, n, m) and log-variance y:

        -(e^y/2) n(n-1) phi_x^{n-2} phi_y^m
        - (r - e^y/2) n phi_x^{n-1} phi_y^m
        - C(y) m phi_x^n phi_y^{m-1}
        - rho zeta e^{y(alpha-1/2)} n m phi_x^{n-1} phi_y^{m-1}
        - zeta^2 e^{2y(alpha-1)} m(m-1) phi_x^n phi_y^{m-2}
        + r phi_x^n phi_y^m

    with C(y) = lam e^{-y} + mu - (zeta^2/2) e^{2y(alpha-1)}.
    """
    n = point.n
    m = point.m if point.m is not None else 0
    if n < 0 or m < 0:
        raise ValueError(f"orders must be >= 0, got n={n}, m={m}")
    ey = np.exp(y)
    phi_x, phi_y = point.phi_x, point.phi_y

    def pair(cx: float, ex: int, ey_: int, label: str) -> float:
        """coeff * phi_x^ex * phi_y^ey_ under the power conventions."""
        if cx == 0.0:
            return 0.0
        px = _term(1.0, phi_x, ex, label + "/x")
        return _term(cx * px, phi_y, ey_, label + "/y") if px != 0.0 else 0.0

    t1 = pair(-0.5 * ey * n * (n - 1), n - 2, m, "xx")
    t2 = pair(-(p.r - 0.5 * ey) * n, n - 1, m, "x")
    t3 = pair(-float(mg_y_drift(p, y)) * m, n, m - 1, "y")
    t4 = pair(-p.rho * p.zeta * np.exp(y * (p.alpha - 0.5)) * n * m, n - 1, m - 1, "xy")
    t5 = pair(-p.zeta**2 * np.exp(2.0 * y * (p.alpha - 1.0)) * m * (m - 1), n, m - 2, "yy")
    t6 = pair(p.r, n, m, "rate")
    return t1 + t2 + t3 + t4 + t5 + t6


def _mg_verdicts(points: tuple[FieldPoint, ...]) -> tuple[bool, bool]:
    """Translation-symmetry verdicts: a generator is broken when some
    solution leaves its field nonzero or unconstrained."""
    price = any(pt.phi_x is None or pt.phi_x != 0.0 for pt in points)
    vol = any(pt.phi_y is None or pt.phi_y != 0.0 for pt in points)
    return price, vol


def mg_case_solver(p: MGParams, y: float, n: int, m: int) -> VacuumSolution:
    """Closed-form solutions of the low-order two-field cases.

    (0,1): phi_y = C(y)/r with phi_x unconstrained. (1,0): phi_x =
    1 - e^y/2r with phi_y unconstrained. (1,1): the bilinear solution
    curve; under the full symmetric parameter conditions (e^y = 2r and
    C(y) = 0) it collapses to the product constraint
    phi_x phi_y = rho zeta e^{y(alpha-1/2)} / r.
    """
    ey = float(np.exp(y))
    cy = float(mg_y_drift(p, y))
    if (n, m) == (0, 1):
        pt = FieldPoint(phi_x=None, phi_y=cy / p.r, n=0, m=1)
        price, vol = _mg_verdicts((pt,))
        return VacuumSolution(
            roots=(pt,),
            regime="case(0,1)",
            n=0,
            m=1,
            degeneracy=1 if pt.phi_y != 0.0 else 0,
            price_translation_broken=price,
            volatility_translation_broken=vol,
        )
    if (n, m) == (1, 0):
        pt = FieldPoint(phi_x=1.0 - ey / (2.0 * p.r), phi_y=None, n=1, m=0)
        price, vol = _mg_verdicts((pt,))
        return VacuumSolution(
            roots=(pt,),
            regime="case(1,0)",
            n=1,
            m=0,
            degeneracy=1 if pt.phi_x != 0.0 else 0,
            price_translation_broken=price,
            volatility_translation_broken=vol,
        )
    if (n, m) == (1, 1):
        cross = p.rho * p.zeta * float(np.exp(y * (p.alpha - 0.5)))
        coeffs = {
            "phi_x_phi_y": p.r,
            "phi_y": -(p.r - 0.5 * ey),
            "phi_x": -cy,
            "const": -cross,
        }
        hermitian = abs(ey - 2.0 * p.r) <= FLAG_TOL and abs(cy) <= FLAG_TOL
        product = cross / p.r if hermitian else None
        return VacuumSolution(
            roots=(),
            regime="case(1,1)",
            n=1,
            m=1,
            degeneracy=0,
            price_translation_broken=True,
            volatility_translation_broken=True,
            relation=(
                "r*phi_x*phi_y - (r - e^y/2)*phi_y - C(y)*phi_x "
                "- rho*zeta*e^{y(alpha-1/2)} = 0"
            ),
            curve_coeffs=coeffs,
            product_value=product,
            notes=("solution set is a curve; degeneracy is continuous",),
        )
    raise ValueError(f"unsupported case (n, m) = ({n}, {m}); expected (0,1), (1,0), (1,1)")


def mg_regime_solver(
    p: MGParams, y: float, n: int, m: int, regime: str, phi_x: float = 1.0
) -> VacuumSolution:
    """Truncated-regime solutions of the two-field polynomial.

    Regime formulas are evaluated as given, flagged approximate; no
    in-regime validation is attempted. ``phi_x`` sets the free price
    field scale where a branch needs one (the coupled weak-weak roots
    are linear in it). Division by zero in a branch raises
    SingularRegimeError naming the offending condition.
    """
    key = regime.replace("_", "-").lower()
    tag = _REGIME_ALIASES.get(key)
    if tag is None:
        raise ValueError(f"unknown regime {regime!r}")
    ey = float(np.exp(y))
    cy = float(mg_y_drift(p, y))

    if tag == REGIME_STRONG_STRONG:
        a_y = (1.0 - ey / (2.0 * p.r)) * n
        a_x = (cy / p.r) * m
        hermitian = abs(ey - 2.0 * p.r) <= FLAG_TOL and abs(cy) <= FLAG_TOL
        return VacuumSolution(
            roots=(),
            regime=tag,
            n=n,
            m=m,
            degeneracy=0,
            price_translation_broken=True,
            volatility_translation_broken=True,
            approximate=True,
            relation="phi_x*phi_y = a_y*phi_y + a_x*phi_x",
            curve_coeffs={"a_y": a_y, "a_x": a_x},
            product_value=0.0 if hermitian else None,
        )

    if tag == REGIME_WEAK_WEAK:
        if n == 1:
            return VacuumSolution(
                roots=(),
                regime=tag,
                n=n,
                m=m,
                degeneracy=0,
                price_translation_broken=True,
                volatility_translation_broken=True,
                approximate=True,
                relation="phi_x*phi_y = 0",
                product_value=0.0,
                notes=("unit order collapses the coupled branch to the product form",),
            )
        if p.rho == 0.0:
            raise SingularRegimeError(
                "coupled weak-weak discriminant is singular at rho = 0"
            )
        if n == 0 or m == 0:
            raise SingularRegimeError(
                "coupled weak-weak formula needs n, m >= 2 (division by n*m)"
            )
        pref = p.rho * p.zeta * float(np.exp(y * (p.alpha - 1.5))) * m * phi_x / (1.0 - n)
        disc = 1.0 - 2.0 * (m - 1) * (n - 1) / (p.rho**2 * n * m)
        if disc < 0.0:
            return VacuumSolution(
                roots=(),
                regime=tag,
                n=n,
                m=m,
                degeneracy=0,
                approximate=True,
                no_real_solution=True,
            )
        sq = float(np.sqrt(disc))
        r1 = pref * (1.0 + sq)
        r2 = pref * (1.0 - sq)
        pts = tuple(
            FieldPoint(phi_x=phi_x, phi_y=val, n=n, m=m)
            for val in ([r1] if r1 == r2 else [r1, r2])
        )
        price, vol = _mg_verdicts(pts)
        return VacuumSolution(
            roots=pts,
            regime=tag,
            n=n,
            m=m,
            degeneracy=sum(1 for pt in pts if pt.phi_y != 0.0),
            price_translation_broken=price,
            volatility_translation_broken=vol,
            approximate=True,
        )

    if tag == REGIME_STRONG_X_WEAK_Y:
        if abs(cy) <= FLAG_TOL:
            raise SingularRegimeError(
                "strong-x/weak-y denominator C(y) vanishes at these parameters"
            )
        phi_y = p.zeta**2 * float(np.exp(2.0 * y * (p.alpha - 1.0))) * (1 - m) / cy
        pt = FieldPoint(phi_x=0.0, phi_y=phi_y, n=n, m=m)
        price, vol = _mg_verdicts((pt,))
        return VacuumSolution(
            roots=(pt,),
            regime=tag,
            n=n,
            m=m,
            degeneracy=1 if phi_y != 0.0 else 0,
            price_translation_broken=price,
            volatility_translation_broken=vol,
            approximate=True,
        )

    # weak-x / strong-y
    denom = p.r - 0.5 * ey
    if abs(denom) <= FLAG_TOL:
        raise SingularRegimeError("weak-x/strong-y denominator r - e^y/2 vanishes")
    val = (1 - n) * (0.5 * ey) / denom
    pt = FieldPoint(phi_x=val, phi_y=0.0, n=n, m=m)
    price, vol = _mg_verdicts((pt,))
    return VacuumSolution(
        roots=(pt,),
        regime=tag,
        n=n,
        m=m,
        degeneracy=1 if val != 0.0 else 0,
        price_translation_broken=price,
        volatility_translation_broken=vol,
        approximate=True,
        limit_value=float(n - 1),
        notes=("limit_value is the y -> infinity value, parameter-free",),
    )


def classify_information_flow(p, y: float | None = None) -> RegimeReport:
    """Hermiticity flags and the information-flow verdict.

    One-factor parameters: the single flag sigma_sq = 2r. Two-factor
    parameters (y required): the y-drift C(y) must vanish and e^y must
    equal 2r. Preserved iff all applicable flags hold; the raw flag
    expressions are echoed so a leaking verdict shows its source.
    """
    if isinstance(p, MarketParams):
        diff = p.sigma_sq - 2.0 * p.r
        flags = {"sigma_sq_equals_2r": abs(diff) <= FLAG_TOL}
        values = {"sigma_sq_minus_2r": float(diff)}
        return RegimeReport(
            flags=flags, values=values, preserved=all(flags.values()), y=None
        )
    if isinstance(p, MGParams):
        if y is None:
            raise ValueError("two-factor classification requires a log-variance y")
        cy = float(mg_y_drift(p, y))
        ey_diff = float(np.exp(y) - 2.0 * p.r)
        flags = {
            "y_drift_zero": abs(cy) <= FLAG_TOL,
            "ey_equals_2r": abs(ey_diff) <= FLAG_TOL,
        }
        values = {"y_drift": cy, "ey_minus_2r": ey_diff}
        return RegimeReport(
            flags=flags, values=values, preserved=all(flags.values()), y=float(y)
        )
    raise ValueError(f"unsupported parameter type {type(p).__name__}")
