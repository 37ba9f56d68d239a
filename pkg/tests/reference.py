"""Independent high-precision references used by the tests.

Everything here works on the two-level block with 50-digit arithmetic and
mpmath's own matrix exponential, so it shares no code with the package.
"""

import mpmath as mp

DPS = 50


def block(N, gamma, kappa, epsilon_w=1):
    with mp.workdps(DPS):
        N, g, k = mp.mpf(N), mp.mpf(gamma), mp.mpf(kappa)
        a = -(g + epsilon_w + 1j * k)
        b = -g * mp.sqrt(N - 1)
        d = -g * (N - 1)
        return a, b, d


def state(N, gamma, kappa, t):
    """``(<w|psi(t)>, <r_perp|psi(t)>)`` from the matrix exponential."""
    with mp.workdps(DPS):
        a, b, d = block(N, gamma, kappa)
        h = mp.matrix([[a, b], [b, d]])
        s = mp.matrix([1 / mp.sqrt(N), mp.sqrt(1 - mp.mpf(1) / N)])
        psi = mp.expm(-1j * h * mp.mpf(t)) * s
        return complex(psi[0]), complex(psi[1])


def no_click(N, gamma, kappa, t):
    w, p = state(N, gamma, kappa, t)
    return abs(w) ** 2 + abs(p) ** 2


def eigenpair(N, gamma, kappa):
    with mp.workdps(DPS):
        a, b, d = block(N, gamma, kappa)
        root = mp.sqrt((a - d) ** 2 + 4 * b ** 2)
        return (a + d + root) / 2, (a + d - root) / 2


def overlaps_from_components(N, gamma, kappa):
    """Overlaps from ``v = (lambda - d) / b`` and the normalization ``1 + v^2``."""
    with mp.workdps(DPS):
        a, b, d = block(N, gamma, kappa)
        lams = eigenpair(N, gamma, kappa)
        sw, sp = 1 / mp.sqrt(N), mp.sqrt(1 - mp.mpf(1) / N)
        v = [(lam - d) / b for lam in lams]
        norm = [1 + x ** 2 for x in v]
        O = [(1 + abs(x) ** 2) * abs(sp + x * sw) ** 2 / abs(n) ** 2 for x, n in zip(v, norm)]
        coef = [(x * sw + sp) / n for x, n in zip(v, norm)]
        cross = mp.conj(coef[1]) * (mp.conj(v[1]) * v[0] + 1) * coef[0]
        return float(O[0]), float(O[1]), complex(cross)


def discriminant_at_ep(N):
    """``|D| / |a - d|`` at the coalescence point, evaluated at 50 digits."""
    with mp.workdps(DPS):
        N = mp.mpf(N)
        g = 1 / (N - 2)
        k = 2 * g * mp.sqrt(N - 1)
        a = -(g + 1 + 1j * k)
        b = -g * mp.sqrt(N - 1)
        d = -g * (N - 1)
        disc = mp.sqrt((a - d) ** 2 / 4 + b ** 2)
        return float(abs(disc) / abs(a - d))
