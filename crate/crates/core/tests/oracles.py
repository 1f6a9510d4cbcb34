"""Reference values frozen in oracles.rs. Run with: python3 oracles.py"""
from mpmath import mp, mpf, gamma, gammainc, quad, exp, inf, log, fabs, beta

mp.dps = 60

SETS = [(1.5, 1.0, 1.2), (1.8, 1.0, 1.1), (1.8, 1.0, 1.5), (1.3, 2.0, 1.2), (1.9, 0.5, 1.6)]


def k(a, c):
    return c * gamma(-a)


def a1(a, c, p):
    return a * k(a, c) ** (p / a) * gamma(p) / gamma(p / a)


def coeffs(a, c, p, n):
    out = [mpf(1)]
    for m in range(n):
        out.append(out[-1] * (p / a - m) * gamma(a * m + 1) / (gamma(a * (m + 1) + 1) * k(a, c)))
    return out


def f1(a, c, p, z, n=400):
    cs = coeffs(a, c, p, n)
    return sum(cn * z ** (a * m) for m, cn in enumerate(cs))


def laplace_closed(a, c, p, lam):
    kk = k(a, c)
    x = kk * lam ** a
    return a1(a, c, p) / kk ** (p / a) * exp(x) / lam ** (1 + p) * gammainc(1 + p / a, x)


def fmt(x):
    return "{:.17e}".format(float(x))


print("// a1: (alpha, c, p, a1)")
for a, c, p in SETS:
    a, c, p = mpf(a), mpf(c), mpf(p)
    print(f"({float(a)}, {float(c)}, {float(p)}, {fmt(a1(a, c, p))}),")

print("// coefficients: (alpha, c, p, n, a_n)")
for a, c, p in SETS[:2]:
    cs = coeffs(mpf(a), mpf(c), mpf(p), 50)
    for n in (1, 2, 5, 10, 20, 50):
        print(f"({a}, {c}, {p}, {n}, {fmt(cs[n])}),")

print("// F1: (alpha, c, p, z, F1)")
for a, c, p in SETS[:3]:
    for z in (0.5, 1, 2, 4):
        print(f"({a}, {c}, {p}, {z:.1f}, {fmt(f1(mpf(a), mpf(c), mpf(p), mpf(z)))}),")

print("// laplace closed form: (alpha, c, p, lambda, value)")
for a, c, p in SETS[:3]:
    for lam in (0.5, 1, 2, 4):
        print(f"({a}, {c}, {p}, {lam:.1f}, {fmt(laplace_closed(mpf(a), mpf(c), mpf(p), mpf(lam)))}),")

print("// beta_integral(1.3, 0.4, 2)")
print(fmt(quad(lambda x: x ** mpf(0.3) * (2 - x) ** mpf(-0.6), [0, 1, 2])))
print("// lower tail constant (alpha, c)")
for a, c in ((1.8, 1.0), (1.3, 2.0)):
    a, c = mpf(a), mpf(c)
    print(f"({float(a)}, {float(c)}, {fmt(1 / (k(a, c) ** (1 - 1 / a) * gamma(a) * gamma(1 / a)))}),")
