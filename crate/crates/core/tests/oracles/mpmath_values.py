"""Arbitrary-precision reference values frozen into the Rust tests.

Run with `python3 mpmath_values.py`; every printed value is copied verbatim
into the test that uses it. Nothing here shares code with the crate.
"""
from mpmath import mp, mpf, gamma, rgamma, factorial, exp, quad, inf, expint, diff, binomial, nsum, sqrt, pi

mp.dps = 40


def wright_1psi1(z, a1, b1, a2, b2, terms=400):
    return nsum(lambda k: z**k / factorial(k) * gamma(a1 + b1 * k) * rgamma(a2 + b2 * k), [0, inf])


def gen_exp_integral(l, z):
    return quad(lambda u: exp(-u * z) * u ** (-l), [1, 2, 10, inf])


def tss_pmf_bivariate(alpha, theta, l1, l2, k1, k2, t):
    lam = l1 + l2
    f = lambda u: exp(-t * ((u + theta) ** alpha - theta ** alpha))
    h = k1 + k2
    return l1**k1 * l2**k2 / (factorial(k1) * factorial(k2)) * (-1) ** h * diff(f, lam, h)


def uniform_mixture(alpha, theta, lam, t):
    return quad(lambda p: exp(-t * ((lam * p + theta) ** alpha - theta ** alpha)), [0, 1])


print("wright z=-1 (1,0.5)/(0.5,0.5):", wright_1psi1(mpf(-1), 1, mpf('0.5'), mpf('0.5'), mpf('0.5')))
print("E_1(1):", gen_exp_integral(1, 1), expint(1, 1))
print("E_-1(1.5):", gen_exp_integral(-1, mpf('1.5')))
print("E_0.5(0.3):", gen_exp_integral(mpf('0.5'), mpf('0.3')))
a, th, s = mpf('0.7'), mpf(2), mpf('0.3')
print("levy density TSS(0.7,2) s=0.3:", a * exp(-th * s) / (gamma(1 - a) * s ** (a + 1)))
print("pmf a=0.7 th=0.5 l=(1,2) k=(1,1) t=0.8:", tss_pmf_bivariate(mpf('0.7'), mpf('0.5'), 1, 2, 1, 1, mpf('0.8')))
print("pmf a=0.3 th=2 l=(1,2) k=(4,6) t=1:", tss_pmf_bivariate(mpf('0.3'), mpf(2), 1, 2, 4, 6, mpf(1)))
print("pmf a=0.5 th=0 l=(1,2) k=(2,3) t=0.1:", tss_pmf_bivariate(mpf('0.5'), mpf(0), 1, 2, 2, 3, mpf('0.1')))
print("uniform mixture a=0.5 th=1 lam=2 t=1:", uniform_mixture(mpf('0.5'), mpf(1), mpf(2), mpf(1)))
