"""Brute-force wedge series in extended precision (mpmath, 40 digits, 400 terms)."""
from mpmath import mp, mpf, sqrt, acos, atan2, besseli, sin, pi

mp.dps = 40


def setup(mu, s, rho, x0, b):
    s1, s2 = map(mpf, s)
    rho = mpf(rho)
    alpha = acos(-rho)
    k3 = s1 * s2 * sqrt(1 - rho**2)

    def polar(x):
        d1, d2 = mpf(b[0]) - x[0], mpf(b[1]) - x[1]
        c = s2 * d1 - s1 * rho * d2
        si = s1 * sqrt(1 - rho**2) * d2
        return sqrt(c * c + si * si), atan2(si, c)

    return alpha, k3, polar


def h(x, t, mu, s, rho, x0, b):
    alpha, k3, polar = setup(mu, s, rho, x0, b)
    r, ph = polar(x)
    r0, ph0 = polar(x0)
    z = r * r0 / (k3**2 * mpf(t))
    return sum(sin(n * pi * ph0 / alpha) * sin(n * pi * ph / alpha) * besseli(n * pi / alpha, z)
               for n in range(1, 400))


def g(i, xi, t, mu, s, rho, x0, b):
    alpha, k3, polar = setup(mu, s, rho, x0, b)
    r0, ph0 = polar(x0)
    sj = mpf(s[1 - i])
    z = sj * (mpf(b[i]) - xi) * r0 / (k3**2 * mpf(t))
    tot = 0
    for n in range(1, 400):
        d = 1 if i == 0 else (-1) ** (n + 1)
        tot += d * n * sin(n * pi * ph0 / alpha) * besseli(n * pi / alpha, z)
    return tot


if __name__ == "__main__":
    args = ([0.3, -0.2], [1.0, 1.4], 0.35, [0.1, -0.3], [1.2, 0.9])
    for x, t in [((-0.4, 0.2), 0.6), ((0.5, -1.5), 2.0), ((-3.0, -2.0), 0.3)]:
        print("h", x, t, mp.nstr(h(tuple(map(mpf, x)), t, *args), 20))
    for i, xi, t in [(0, 0.3, 0.8), (1, -0.9, 1.7), (0, -2.5, 0.15)]:
        print("g", i + 1, xi, t, mp.nstr(g(i, mpf(xi), t, *args), 20))
