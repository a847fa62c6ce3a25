"""Adaptive Simpson quadrature."""

from __future__ import annotations

from typing import Callable

from .errors import NumericError

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DEPTH = 40


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Uses the classic recursive bisection with the Richardson correction
    ``(S_left + S_right - S_whole) / 15``. Raises :class:`NumericError` if a
    subinterval is still unresolved at ``max_depth``.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _recurse(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        raise NumericError(
            f"adaptive Simpson did not converge on [{a!r}, {b!r}] (error estimate {abs(delta) / 15:.3e})"
        )
    return _recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _recurse(
        f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )
