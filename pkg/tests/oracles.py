"""Independent reference computations for the closed-form marginals.

These deliberately avoid the package's formulas: continuous and integer
marginals are computed by adaptive quadrature of the prior-times-likelihood
integrand, categorical marginals and the proportion factor by the sequential
predictive (urn) product. Intended for small inputs (n <= ~25).
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)


def cont_marginal_quad(values, a, b, c, d) -> float:
    """log of the Gaussian-cell marginal: integrate the likelihood against
    sigma² ~ IG(a/2, b²/2), mu | sigma² ~ N(c, sigma²/d) over (mu, ln sigma²)."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        return 0.0
    sx, sxx = float(x.sum()), float((x * x).sum())
    const = (0.5 * a * math.log(0.5 * b * b) - float(gammaln(0.5 * a))
             + 0.5 * math.log(d) - 0.5 * (n + 1) * LOG_2PI)

    def log_integrand(mu, v):
        s = math.exp(v)
        quad_term = (sxx - 2.0 * mu * sx + n * mu * mu
                     + d * (mu - c) * (mu - c) + b * b) / (2.0 * s)
        return const - 0.5 * (n + 1) * v - quad_term - (0.5 * a + 1.0) * v + v

    mu0 = (x.sum() + d * c) / (n + d)
    s0 = (b * b + float(((x - mu0) ** 2).sum())) / (a + n + 2.0)
    res = optimize.minimize(lambda p: -log_integrand(p[0], p[1]),
                            x0=[mu0, math.log(max(s0, 1e-12))],
                            method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    mu_star, v_star = res.x
    peak = -res.fun

    # At fixed sigma² the mu-integrand is a Gaussian with variance s/(n+d)
    # centered at mu0, which gives (i) v-dependent mu-limits and (ii) an exact
    # per-v profile to clip the v-range where the mass lives.
    def v_profile(v):
        return log_integrand(mu0, v) + 0.5 * (LOG_2PI + v - math.log(n + d))

    grid = v_star + np.linspace(-50.0, 50.0 + 160.0 / (a + n), 400)
    prof = np.array([v_profile(v) for v in grid])
    live = grid[prof >= prof.max() - 38.0]
    lo_v, hi_v = live.min() - 0.5, live.max() + 0.5

    def mu_lims(v):
        half = 13.0 * math.sqrt(math.exp(v) / (n + d)) + 1e-6
        return mu0 - half, mu0 + half

    val, _ = integrate.dblquad(
        lambda mu, v: math.exp(log_integrand(mu, v) - peak),
        lo_v, hi_v,
        lambda v: mu_lims(v)[0], lambda v: mu_lims(v)[1],
        epsabs=1e-12, epsrel=1e-7)
    return peak + math.log(val)


def int_marginal_quad(values, a, b) -> float:
    """log of the Poisson-cell marginal: integrate against
    rate ~ Gamma(a, b) over ln rate."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        return 0.0
    S = float(x.sum())
    lg = float(gammaln(x + 1.0).sum())

    def log_integrand(u):
        lam = math.exp(u)
        return (S * u - n * lam - lg
                + a * math.log(b) - gammaln(a) + (a - 1.0) * u - b * lam + u)

    u_star = math.log((S + a) / (n + b))
    peak = log_integrand(u_star)
    w = 1.0 / math.sqrt(S + a)
    span = max(16.0 * w, 1.0)
    val, _ = integrate.quad(lambda u: math.exp(log_integrand(u) - peak),
                            u_star - span, u_star + span,
                            epsabs=1e-12, epsrel=1e-10, limit=200)
    return peak + math.log(val)


def cat_marginal_urn(codes, m, a) -> float:
    """log of the multinomial-cell marginal via the sequential predictive
    product: p(x_t | x_<t) = (count + a) / (t - 1 + m a)."""
    counts = [0] * m
    out = 0.0
    for t, h in enumerate(codes):
        out += math.log(counts[h] + a) - math.log(t + m * a)
        counts[h] += 1
    return out


def proportions_urn(labels, g, u) -> float:
    """log of the component-count factor via the same urn product."""
    return cat_marginal_urn([int(z) - 1 for z in labels], g, u)


def marginal_oracle(values_by_class, kind_tag, hyper_tuple, m=0) -> float:
    """Per-column oracle: one factor per class (relevant) or one pooled factor
    (pass a single pooled group)."""
    total = 0.0
    for vals in values_by_class:
        if kind_tag == "cont":
            a, b, c, d = hyper_tuple
            total += cont_marginal_quad(vals, a, b, c, d)
        elif kind_tag == "int":
            a, b = hyper_tuple
            total += int_marginal_quad(vals, a, b)
        else:
            (a,) = hyper_tuple
            total += cat_marginal_urn([int(v) - 1 for v in vals], m, a)
    return total
