"""Small numerical helpers: Richardson-extrapolated finite differences and
elementary geometric constants."""

from __future__ import annotations

import math


def sphere_area(n: int) -> float:
    """Surface area of the unit (n-1)-sphere embedded in n dimensions.

    n=1 gives 2 (two endpoints of an interval), n=2 gives 2*pi, n=3 gives 4*pi.
    """
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def double_factorial(n: int) -> int:
    """n!! with the convention (-1)!! = 0!! = 1."""
    if n <= 0:
        return 1
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def richardson_derivative(f, x: float, *, base_step: float, levels: int = 3) -> float:
    """First derivative of ``f`` at ``x`` by central differences extrapolated
    over ``levels`` step halvings (error order h^(2*levels))."""
    tab = []
    h = base_step
    for _ in range(levels):
        tab.append((f(x + h) - f(x - h)) / (2.0 * h))
        h *= 0.5
    return _extrapolate(tab)


def _extrapolate(tab):
    # Richardson triangle for estimates whose error expands in even powers of h
    tab = list(tab)
    k = len(tab)
    for level in range(1, k):
        fac = 4.0**level
        tab = [
            (fac * tab[i + 1] - tab[i]) / (fac - 1.0)
            for i in range(len(tab) - 1)
        ]
    return tab[0]
