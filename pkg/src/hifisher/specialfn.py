"""Special functions used by the model catalog.

Digamma and trigamma use upward recurrence followed by the asymptotic
(Bernoulli) series.  The modified Bessel function of the second kind is
computed in log space: Temme's series for ``x < 2`` and Steed's continued
fraction for ``x >= 2`` give ``K_mu`` and ``K_{mu+1}`` for ``|mu| <= 1/2``;
higher orders follow from the (stable) forward recurrence applied to the
ratio ``K_{nu+1} / K_nu``.  The GIG sampler is the ratio-of-uniforms family
of Hörmann & Leydold (2014), vectorized over parameter arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "digamma",
    "trigamma",
    "log_bessel_k",
    "bessel_ratio_r",
    "s_curvature",
    "s_curvature_recurrence",
    "GigParams",
    "gig_logpdf",
    "gig_moments",
    "gig_variance",
    "gig_sample",
]

_EPS = np.finfo(float).eps

# Bernoulli-number coefficients B_{2k}
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)

_ASYMPTOTIC_START = 10.0


def _check_positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} must be strictly positive")
    return x


def _shift_up(x):
    """Return ``(z, n)`` with ``z = x + n >= _ASYMPTOTIC_START``."""
    n = np.maximum(np.ceil(_ASYMPTOTIC_START - x), 0.0)
    return x + n, n.astype(int)


def trigamma(x):
    """Trigamma function psi'(x) for x > 0.

    Raises
    ------
    ValueError
        If any element of ``x`` is not strictly positive.
    """
    x = _check_positive(x)
    z, n = _shift_up(x)
    acc = np.zeros_like(z)
    nmax = int(n.max()) if n.size else 0
    for k in range(nmax):
        active = k < n
        acc = acc + np.where(active, 1.0 / (x + k) ** 2, 0.0)
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    # sum_k B_2k / z^(2k+1), Horner in 1/z^2
    for b in reversed(_BERNOULLI):
        series = (series + b) * inv2
    series = series * inv
    out = acc + inv + 0.5 * inv2 + series
    return out if out.ndim else float(out)


def digamma(x):
    """Digamma function psi(x) for x > 0."""
    x = _check_positive(x)
    z, n = _shift_up(x)
    acc = np.zeros_like(z)
    nmax = int(n.max()) if n.size else 0
    for k in range(nmax):
        active = k < n
        acc = acc - np.where(active, 1.0 / (x + k), 0.0)
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for k in reversed(range(len(_BERNOULLI))):
        series = (series + _BERNOULLI[k] / (2 * (k + 1))) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    return out if out.ndim else float(out)


# Taylor coefficients of 1/Gamma(1+z) about z = 0
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
)


def _temme_gammas(mu):
    """gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = average; cancellation-free."""
    mu2 = mu * mu
    gam1 = np.zeros_like(mu)
    gam2 = np.zeros_like(mu)
    odd = _RGAMMA1P[1::2]
    even = _RGAMMA1P[0::2]
    for c in reversed(odd):
        gam1 = gam1 * mu2 + c
    for c in reversed(even):
        gam2 = gam2 * mu2 + c
    gam1 = -gam1
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _log_k_small_x(mu, x):
    """log K_mu(x) and K_{mu+1}/K_mu by Temme's series (|mu| <= 1/2, x < 2)."""
    x2 = 0.5 * x
    pimu = np.pi * mu
    with np.errstate(invalid="ignore", divide="ignore"):
        fact = np.where(np.abs(pimu) < _EPS, 1.0, pimu / np.sin(pimu))
        d = -np.log(x2)
        e = mu * d
        fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / e)
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    mu2 = mu * mu
    done = np.zeros(x.shape, dtype=bool)
    for i in range(1, 10_000):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        delta1 = c * (p - i * ff)
        total = np.where(done, total, total + delta)
        total1 = np.where(done, total1, total1 + delta1)
        done |= np.abs(delta) < np.abs(total) * _EPS
        if done.all():
            break
    else:  # pragma: no cover - series always converges for x < 2
        raise RuntimeError("Temme series did not converge")
    k_mu = total
    k_mu1 = total1 * 2.0 / x
    return np.log(k_mu), k_mu1 / k_mu


def _log_k_large_x(mu, x):
    """log K_mu(x) and K_{mu+1}/K_mu by Steed's continued fraction (x >= 2)."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu2
    q = a1.copy()
    c = a1.copy()
    a = -a1
    s = 1.0 + q * delh
    done = np.zeros(x.shape, dtype=bool)
    for i in range(2, 100_000):
        a = a - 2 * (i - 1)
        c = -a * c / i
        with np.errstate(divide="ignore", invalid="ignore"):
            qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        dels = q * delh
        h = np.where(done, h, h + delh)
        s = np.where(done, s, s + dels)
        done |= np.abs(dels / s) < _EPS
        if done.all():
            break
    else:  # pragma: no cover
        raise RuntimeError("Steed continued fraction did not converge")
    h = a1 * h
    log_k = 0.5 * np.log(np.pi / (2.0 * x)) - x - np.log(s)
    ratio = (mu + x + 0.5 - h) / x
    return log_k, ratio


def _log_k_with_ratio(order, x):
    nu = np.abs(order)
    nl = np.floor(nu + 0.5)
    mu = nu - nl
    log_k = np.empty_like(x)
    ratio = np.empty_like(x)
    small = x < 2.0
    if small.any():
        log_k[small], ratio[small] = _log_k_small_x(mu[small], x[small])
    if (~small).any():
        log_k[~small], ratio[~small] = _log_k_large_x(mu[~small], x[~small])
    steps = nl.astype(int)
    for k in range(1, int(steps.max()) + 1 if steps.size else 1):
        active = k <= steps
        order_k = mu + k
        log_k = np.where(active, log_k + np.log(ratio), log_k)
        ratio = np.where(active, 2.0 * order_k / x + 1.0 / ratio, ratio)
    return log_k, ratio


def log_bessel_k(order, x):
    """Natural log of the modified Bessel function K_order(x).

    Parameters
    ----------
    order : float or array_like
        Real order; ``K_{-v} = K_v``.
    x : float or array_like
        Positive argument.  Never overflows: the exponential factor is
        carried in log space.

    Returns
    -------
    float or ndarray
    """
    order, x = np.broadcast_arrays(
        np.asarray(order, dtype=float), _check_positive(x)
    )
    shape = x.shape
    log_k, _ = _log_k_with_ratio(order.ravel().copy(), x.ravel().copy())
    out = log_k.reshape(shape)
    return out if out.ndim else float(out)


def bessel_ratio_r(rho, x):
    """R_rho(x) = K_{rho+1}(x) / K_rho(x)."""
    rho = np.asarray(rho, dtype=float)
    out = np.exp(log_bessel_k(rho + 1.0, x) - log_bessel_k(rho, x))
    return out if np.ndim(out) else float(out)


def s_curvature(rho, x):
    """S_rho(x) = K_{rho+2}/K_rho - (K_{rho+1}/K_rho)^2 from log-K differences.

    For a GIG(rho, gamma, kappa) variable, ``S_rho(gamma*kappa)*(kappa/gamma)**2``
    is its variance.
    """
    rho = np.asarray(rho, dtype=float)
    lk0 = log_bessel_k(rho, x)
    r1 = np.exp(log_bessel_k(rho + 1.0, x) - lk0)
    r2 = np.exp(log_bessel_k(rho + 2.0, x) - lk0)
    out = r2 - r1 * r1
    return out if np.ndim(out) else float(out)


def s_curvature_recurrence(rho, x):
    """S_rho(x) using K_{rho+2} = K_rho + 2(rho+1)/x K_{rho+1}."""
    rho = np.asarray(rho, dtype=float)
    x = _check_positive(x)
    r = bessel_ratio_r(rho, x)
    out = 1.0 + 2.0 * (rho + 1.0) * r / x - r * r
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class GigParams:
    """GIG(rho, gamma, kappa): density proportional to
    ``w**(rho-1) * exp(-(kappa**2 / w + gamma**2 * w) / 2)`` on ``w > 0``.

    Fields may be scalars or broadcast-compatible arrays.
    """

    rho: float
    gamma: float
    kappa: float

    def __post_init__(self):
        rho, gamma, kappa = np.broadcast_arrays(
            np.asarray(self.rho, dtype=float),
            np.asarray(self.gamma, dtype=float),
            np.asarray(self.kappa, dtype=float),
        )
        if np.any(~np.isfinite(rho)) or np.any(gamma < 0) or np.any(kappa < 0):
            raise ValueError("GIG requires finite rho and gamma, kappa >= 0")
        if np.any((gamma == 0) & (kappa == 0)):
            raise ValueError("GIG gamma and kappa cannot both be zero")
        if np.any((gamma == 0) & (rho >= 0)) or np.any((kappa == 0) & (rho <= 0)):
            raise ValueError("GIG parameters give a non-normalizable density")

    def arrays(self):
        return np.broadcast_arrays(
            np.asarray(self.rho, dtype=float),
            np.asarray(self.gamma, dtype=float),
            np.asarray(self.kappa, dtype=float),
        )


def _lgamma(x):
    return np.vectorize(math.lgamma, otypes=[float])(x)


def gig_logpdf(w, p: GigParams):
    """Log density of GIG(rho, gamma, kappa) at ``w`` (``-inf`` off support)."""
    rho, gamma, kappa = p.arrays()
    w = np.asarray(w, dtype=float)
    rho, gamma, kappa, w = np.broadcast_arrays(rho, gamma, kappa, w)
    out = np.full(w.shape, -np.inf)
    pos = w > 0
    both = pos & (gamma > 0) & (kappa > 0)
    with np.errstate(divide="ignore"):
        logw = np.log(np.where(pos, w, 1.0))
    if both.any():
        r, g, k = rho[both], gamma[both], kappa[both]
        log_c = r * np.log(g / k) - np.log(2.0) - log_bessel_k(r, g * k)
        out[both] = log_c + (r - 1) * logw[both] - 0.5 * (k * k / w[both] + g * g * w[both])
    gam = pos & (kappa == 0)
    if gam.any():
        r, rate = rho[gam], 0.5 * gamma[gam] ** 2
        out[gam] = r * np.log(rate) - _lgamma(r) + (r - 1) * logw[gam] - rate * w[gam]
    inv = pos & (gamma == 0)
    if inv.any():
        a, scale = -rho[inv], 0.5 * kappa[inv] ** 2
        out[inv] = a * np.log(scale) - _lgamma(a) - (a + 1) * logw[inv] - scale / w[inv]
    return out if out.ndim else float(out)


_LOG_MOMENT_STEP = 1e-5


def _power_moment(rho, gamma, kappa, k):
    x = gamma * kappa
    return np.exp(k * np.log(kappa / gamma) + log_bessel_k(rho + k, x) - log_bessel_k(rho, x))


def gig_moments(p: GigParams):
    """Return ``(E[w], E[1/w], E[log w])`` for a GIG law.

    ``E[w**k] = (kappa/gamma)**k K_{rho+k}(gamma*kappa) / K_rho(gamma*kappa)``;
    ``E[log w]`` is the central rho-difference (step 1e-5) of the log
    normalizer.  Gamma (``kappa = 0``) and inverse-gamma (``gamma = 0``)
    limits use their closed forms; divergent moments come back as ``inf``.
    """
    rho, gamma, kappa = (np.atleast_1d(a).astype(float) for a in p.arrays())
    mean = np.empty_like(rho)
    inv_mean = np.empty_like(rho)
    log_mean = np.empty_like(rho)
    both = (gamma > 0) & (kappa > 0)
    if both.any():
        r, g, k = rho[both], gamma[both], kappa[both]
        mean[both] = _power_moment(r, g, k, 1.0)
        inv_mean[both] = _power_moment(r, g, k, -1.0)
        h = _LOG_MOMENT_STEP
        x = g * k
        dlogk = (log_bessel_k(r + h, x) - log_bessel_k(r - h, x)) / (2 * h)
        log_mean[both] = np.log(k / g) + dlogk
    gam = kappa == 0
    if gam.any():
        r, rate = rho[gam], 0.5 * gamma[gam] ** 2
        mean[gam] = r / rate
        with np.errstate(divide="ignore"):
            inv_mean[gam] = np.where(r > 1, rate / np.where(r > 1, r - 1, 1.0), np.inf)
        log_mean[gam] = digamma(r) - np.log(rate)
    inv = gamma == 0
    if inv.any():
        a, scale = -rho[inv], 0.5 * kappa[inv] ** 2
        mean[inv] = np.where(a > 1, scale / np.where(a > 1, a - 1, 1.0), np.inf)
        inv_mean[inv] = a / scale
        log_mean[inv] = np.log(scale) - digamma(a)
    if np.ndim(p.rho) == 0 and np.ndim(p.gamma) == 0 and np.ndim(p.kappa) == 0:
        return float(mean[0]), float(inv_mean[0]), float(log_mean[0])
    return mean, inv_mean, log_mean


def gig_variance(p: GigParams):
    """Var[w] = (kappa/gamma)^2 S_rho(gamma*kappa) for gamma, kappa > 0."""
    rho, gamma, kappa = p.arrays()
    out = (kappa / gamma) ** 2 * s_curvature(rho, gamma * kappa)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# GIG sampling (standardized form x^(lam-1) exp(-omega/2 (x + 1/x)), lam >= 0)


def _gig_mode(lam, omega):
    return np.where(
        lam >= 1.0,
        (np.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega,
        omega / (np.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam)),
    )


def _rou_shift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    fi = np.arccos(np.clip(-q / (2.0 * np.sqrt(-(p**3) / 27.0)), -1.0, 1.0))
    fak = 2.0 * np.sqrt(-p / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 / 3.0 * np.pi) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)

    out = np.empty_like(lam)
    pending = np.arange(lam.size)
    while pending.size:
        u = uminus[pending] + rng.random(pending.size) * (uplus[pending] - uminus[pending])
        v = rng.random(pending.size)
        x = u / v + xm[pending]
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (x > 0) & (
                np.log(v)
                <= t[pending] * np.log(x) - s[pending] * (x + 1.0 / x) - nc[pending]
            )
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    return out


def _rou_noshift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + omega**2)) / omega
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)

    out = np.empty_like(lam)
    pending = np.arange(lam.size)
    while pending.size:
        u = um[pending] * rng.random(pending.size)
        v = rng.random(pending.size)
        x = u / v
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (x > 0) & (
                np.log(v)
                <= t[pending] * np.log(x) - s[pending] * (x + 1.0 / x) - nc[pending]
            )
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    return out


def _concave_small(lam, omega, rng):
    """Rejection from a three-piece hat; valid for 0 <= lam < 1, small omega."""
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    area0 = k0 * x0
    far = x0 >= 2.0 / omega
    k1 = np.where(far, 0.0, np.exp(-omega))
    with np.errstate(divide="ignore", invalid="ignore"):
        a1_mid = np.where(
            lam == 0.0,
            k1 * np.log(2.0 / (omega * omega)),
            k1 / lam * ((2.0 / omega) ** lam - x0**lam),
        )
    area1 = np.where(far, 0.0, a1_mid)
    k2 = np.where(far, x0 ** (lam - 1.0), (2.0 / omega) ** (lam - 1.0))
    area2 = np.where(
        far,
        k2 * 2.0 * np.exp(-omega * x0 / 2.0) / omega,
        k2 * 2.0 * np.exp(-1.0) / omega,
    )
    total = area0 + area1 + area2
    edge = np.maximum(x0, 2.0 / omega)

    out = np.empty_like(lam)
    pending = np.arange(lam.size)
    while pending.size:
        L, W = lam[pending], omega[pending]
        A0, A1 = area0[pending], area1[pending]
        v = total[pending] * rng.random(pending.size)
        x = np.empty_like(v)
        hx = np.empty_like(v)
        r0 = v <= A0
        x[r0] = x0[pending][r0] * v[r0] / A0[r0]
        hx[r0] = k0[pending][r0]
        v1 = v - A0
        r1 = ~r0 & (v1 <= A1)
        if r1.any():
            Lr, K1r = L[r1], k1[pending][r1]
            zero = Lr == 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                xr = np.where(
                    zero,
                    W[r1] * np.exp(np.exp(W[r1]) * v1[r1]),
                    (x0[pending][r1] ** Lr + Lr / K1r * v1[r1]) ** (1.0 / np.where(zero, 1.0, Lr)),
                )
            x[r1] = xr
            hx[r1] = np.where(zero, K1r / xr, K1r * xr ** (Lr - 1.0))
        r2 = ~r0 & ~r1
        if r2.any():
            v2 = v1[r2] - A1[r2]
            Wr = W[r2]
            K2r = k2[pending][r2]
            x[r2] = -2.0 / Wr * np.log(np.exp(-Wr / 2.0 * edge[pending][r2]) - Wr / (2.0 * K2r) * v2)
            hx[r2] = K2r * np.exp(-Wr / 2.0 * x[r2])
        u = rng.random(pending.size) * hx
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (x > 0) & (np.log(u) <= (L - 1.0) * np.log(x) - W / 2.0 * (x + 1.0 / x))
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    return out


def gig_sample(p: GigParams, rng: np.random.Generator, size=None):
    """Draw exact GIG variates (ratio-of-uniforms, with mode shift where needed).

    Parameters
    ----------
    p : GigParams
        Scalar or array parameters (broadcast against ``size``).
    rng : numpy.random.Generator
    size : int or tuple, optional

    Returns
    -------
    float or ndarray of positive draws
    """
    rho, gamma, kappa = p.arrays()
    if size is not None:
        rho, gamma, kappa = (np.broadcast_to(a, size) for a in (rho, gamma, kappa))
    shape = rho.shape
    rho, gamma, kappa = (np.ascontiguousarray(a, dtype=float).ravel() for a in (rho, gamma, kappa))
    out = np.empty(rho.size)

    gam = kappa == 0
    if gam.any():
        out[gam] = rng.gamma(rho[gam], 2.0 / gamma[gam] ** 2)
    inv = gamma == 0
    if inv.any():
        out[inv] = 1.0 / rng.gamma(-rho[inv], 2.0 / kappa[inv] ** 2)

    both = ~gam & ~inv
    if both.any():
        lam = np.abs(rho[both])
        omega = gamma[both] * kappa[both]
        alpha = kappa[both] / gamma[both]
        x = np.empty_like(lam)
        shift = (lam > 2.0) | (omega > 3.0)
        noshift = ~shift & ((lam >= 1.0 - 2.25 * omega**2) | (omega > 0.2))
        small = ~shift & ~noshift
        for mask, algo in ((shift, _rou_shift), (noshift, _rou_noshift), (small, _concave_small)):
            if mask.any():
                x[mask] = algo(lam[mask], omega[mask], rng)
        out[both] = np.where(rho[both] < 0, alpha / x, alpha * x)
    out = out.reshape(shape)
    return out if out.ndim else float(out)
