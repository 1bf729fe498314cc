"""Hellinger distance between densities by adaptive quadrature.

A single quadrature routine handles bounded and unbounded supports: the
half-line is mapped onto (0,1) through ``x = lower + t/(1-t)`` so the
integrand stays proper.  Distances are the square root of half the
integrated squared difference of root densities, so values live in [0,1].
"""

from __future__ import annotations

import math

from scipy.integrate import quad

from .errors import NumericError
from .gpd import Support

__all__ = ["hellinger", "integrate_density"]

_QUAD_ABS_TOL = 1e-8
_QUAD_LIMIT = 200


def _quad_on_support(fun, support: Support, abs_tol: float, breakpoints=()):
    """Adaptive quadrature of ``fun`` over ``support`` with error reporting.

    ``breakpoints`` flags known discontinuities (e.g. density onsets), which
    otherwise stall the subdivision.
    """
    if support.bounded:
        pts = [b for b in breakpoints if support.lower < b < support.upper]
        ret = quad(
            fun, support.lower, support.upper,
            points=sorted(pts) or None,
            epsabs=abs_tol, limit=_QUAD_LIMIT, full_output=True,
        )
    else:
        lo = support.lower

        def transformed(t):
            w = 1.0 - t
            return fun(lo + t / w) / (w * w)

        pts = [
            (b - lo) / (1.0 + b - lo)
            for b in breakpoints
            if math.isfinite(b) and b > lo
        ]
        ret = quad(
            transformed, 0.0, 1.0,
            points=sorted(pts) or None,
            epsabs=abs_tol, limit=_QUAD_LIMIT, full_output=True,
        )
    val, err = ret[0], ret[1]
    # quad appends an explanation string only when it could not meet the tolerance
    if len(ret) > 3 and err > max(10.0 * abs_tol, 1e-4 * abs(val)):
        raise NumericError(
            f"quadrature did not converge: estimate={val!r}, abs error={err!r}, "
            f"subintervals={ret[2].get('last', '?')}: {ret[3]}"
        )
    return val


def integrate_density(
    pdf, support: Support, abs_tol: float = _QUAD_ABS_TOL, breakpoints=()
) -> float:
    """Integral of a density over its support (normalization check)."""
    return _quad_on_support(pdf, support, abs_tol, breakpoints)


def hellinger(
    f, g, support: Support, abs_tol: float = _QUAD_ABS_TOL, breakpoints=()
) -> float:
    """Hellinger distance ``sqrt(0.5 * integral (sqrt f - sqrt g)^2)``.

    ``f`` and ``g`` must be integrable densities returning 0 outside their
    own supports; ``support`` must cover the union of the two.  Pass the
    densities' support onsets as ``breakpoints`` when they differ; the
    squared-root-difference integrand jumps there.  The result is symmetric
    and lies in [0, 1] for normalized inputs.
    """

    def integrand(x):
        d = math.sqrt(max(f(x), 0.0)) - math.sqrt(max(g(x), 0.0))
        return d * d

    val = _quad_on_support(integrand, support, abs_tol, breakpoints)
    return math.sqrt(max(0.5 * val, 0.0))
