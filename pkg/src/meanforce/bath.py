"""Reservoir spectral functions: gamma(W), Lamb shift S(w), finite-time Gamma(w,t).

The reservoir enters only through the Fourier transform of its autocorrelation
function, gamma(W) = int dt e^{iWt} <R(t)R(0)>, represented here as a
SpectralMeasure with a smooth density and/or discrete atoms.  Everything else
is built from it:

    S(w)       = PV (1/2pi) int dW gamma(W) / (w - W)
    Gamma(w,t) = int_0^t ds e^{iws} <R(s)R(0)>
               = (1/2pi) int dW gamma(W) phi_t(w - W),   phi_t(x) = (e^{ixt}-1)/(ix)
    Gamma(w,oo) = gamma(w)/2 + i S(w)

and the Bloch-Redfield pair coefficients

    gamma(w,w',t) = Gamma(w',t) + Gamma(w,t)^*
    S(w,w',t)     = (Gamma(w',t) - Gamma(w,t)^*) / 2i.

Supported reservoirs: Ohmic J(W) = gc * W * exp(-|W|/wc) at inverse temperature
beta (gamma(W) = pi J(W) (coth(beta W/2) + 1), detailed balance built in), and
discrete mode sets {(W_k, g_k)} whose measure is a pair of atoms per mode with
Bose weights 2pi g_k^2 (n_k + 1) at +W_k and 2pi g_k^2 n_k at -W_k.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from ._quad import (
    DEFAULT_QUAD,
    QuadratureConfig,
    adaptive_quad,
    oscillatory_quad,
    panel_nodes,
    phi_diff_quotient,
    phi_kernel,
    principal_value,
)
from .errors import NumericsError, PoleError, ValidationError

__all__ = [
    "OhmicBath",
    "DiscreteBath",
    "SpectralMeasure",
    "QuadratureConfig",
    "DEFAULT_QUAD",
    "gamma_spectral",
    "as_measure",
    "measure_value",
    "bose_occupation",
    "lamb_shift_S",
    "finite_time_Gamma",
    "gamma_finite_time",
    "S_finite_time",
    "correlation_time_domain",
    "integrated_gamma_matrix",
    "integrated_S_matrix",
    "pv_spectral_integral",
]


@dataclass(frozen=True)
class OhmicBath:
    """Ohmic reservoir J(W) = coupling * W * exp(-|W|/cutoff) at inverse temperature beta."""

    beta: float
    coupling: float
    cutoff: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.cutoff <= 0:
            raise ValidationError("cutoff frequency must be positive")
        if self.coupling < 0:
            raise ValidationError("coupling strength must be nonnegative")


@dataclass(frozen=True)
class DiscreteBath:
    """Finite set of bosonic modes (W_k > 0, g_k) at inverse temperature beta."""

    beta: float
    modes: tuple

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        modes = tuple((float(w), float(g)) for w, g in self.modes)
        if any(w <= 0 for w, _ in modes):
            raise ValidationError("all mode frequencies must be positive")
        object.__setattr__(self, "modes", modes)


@dataclass(frozen=True)
class SpectralMeasure:
    """gamma(W) as a smooth density plus delta atoms.

    density           vectorised W -> gamma(W), or None if purely atomic
    atoms             tuple of (location, weight)
    scale             characteristic frequency, used to size PV pairing windows
    support           radius beyond which the smooth part is negligible
    tail_zero_coeff   c in Gamma(0,s) ~ Gamma(0,oo) + c/s, the slow tail produced
                      by the |W| cusp of a detailed-balanced density at W = 0
    """

    beta: float
    density: object
    atoms: tuple
    scale: float
    support: float
    tail_zero_coeff: float = 0.0


def bose_occupation(beta, omega):
    """n(omega) = 1 / (e^{beta omega} - 1)."""
    return 1.0 / math.expm1(beta * omega)


@lru_cache(maxsize=128)
def gamma_spectral(bath):
    """Spectral measure gamma(W) of a bath model."""
    if isinstance(bath, OhmicBath):
        beta, gc, wc = bath.beta, bath.coupling, bath.cutoff

        def density(w):
            # gamma(W) = 2 pi J(|W|) (n_B(|W|) + theta(W)); the Bose form keeps
            # detailed balance exact to rounding on both branches
            w = np.asarray(w, dtype=float)
            aw = np.abs(w)
            x = beta * aw
            with np.errstate(over="ignore", divide="ignore"):
                occ = 1.0 / np.expm1(np.where(x == 0.0, 1.0, x))
            occ = occ + (w > 0.0)
            vals = 2.0 * np.pi * gc * aw * np.exp(-aw / wc) * occ
            return np.where(x == 0.0, 2.0 * np.pi * gc / beta, vals)

        return SpectralMeasure(
            beta=beta,
            density=density,
            atoms=(),
            scale=wc,
            support=DEFAULT_QUAD.window_mult * max(wc, 1.0 / beta),
            tail_zero_coeff=-2.0 * gc / (beta * wc),
        )
    if isinstance(bath, DiscreteBath):
        atoms = []
        for w_k, g_k in bath.modes:
            n_k = bose_occupation(bath.beta, w_k)
            atoms.append((w_k, 2.0 * np.pi * g_k**2 * (n_k + 1.0)))
            atoms.append((-w_k, 2.0 * np.pi * g_k**2 * n_k))
        scale = max(w for w, _ in bath.modes)
        return SpectralMeasure(
            beta=bath.beta, density=None, atoms=tuple(atoms), scale=scale, support=scale
        )
    raise ValidationError(f"unsupported bath model {type(bath).__name__}")


def as_measure(bath):
    return bath if isinstance(bath, SpectralMeasure) else gamma_spectral(bath)


def measure_value(measure, omega):
    """Pointwise gamma(omega) of the smooth part (atoms carry no density)."""
    measure = as_measure(measure)
    if measure.density is None:
        return 0.0
    return float(measure.density(np.asarray(float(omega))))


def _check_atom_pole(measure, omega):
    for loc, _ in measure.atoms:
        if abs(omega - loc) <= 1e-12 * max(1.0, abs(loc)):
            raise PoleError(f"frequency {omega:g} sits on the atom at {loc:g}")


def _smooth_domain(measure, omega=0.0):
    r = measure.support + abs(omega) + 1.0
    return -r, r


def _structure_scale(measure):
    """Variation scale of the smooth density (thermal factor or cutoff)."""
    return min(measure.scale, 1.0 / measure.beta)


def pv_spectral_integral(measure, f, pole, config=DEFAULT_QUAD):
    """PV int gamma(W) f(W) dW where f has one simple pole at `pole`.

    The atoms are summed exactly (they must not sit on the pole); the smooth
    part uses symmetric pairing around the pole.
    """
    measure = as_measure(measure)
    _check_atom_pole(measure, pole)
    total = 0.0
    for loc, wgt in measure.atoms:
        total += wgt * float(np.real(f(np.asarray(loc))))
    if measure.density is not None:
        lo, hi = _smooth_domain(measure, pole)
        cap = min(abs(pole) + 5.0 * measure.scale, config.pairing_mult * measure.scale)

        def integrand(w):
            w = np.asarray(w)
            return measure.density(w) * f(w)

        total += principal_value(integrand, pole, lo, hi, config, pairing_cap=cap)
    return total


def _lamb_shift(measure, omega, config):
    total = 0.0
    for loc, wgt in measure.atoms:
        total += wgt / (2.0 * np.pi * (omega - loc))
    if measure.density is not None:
        lo, hi = _smooth_domain(measure, omega)
        cap = min(abs(omega) + 5.0 * measure.scale, config.pairing_mult * measure.scale)

        def integrand(w):
            w = np.asarray(w)
            return measure.density(w) / (2.0 * np.pi * (omega - w))

        total += principal_value(integrand, omega, lo, hi, config, pairing_cap=cap)
    return total


@lru_cache(maxsize=16384)
def _lamb_shift_cached(measure, omega, config):
    return _lamb_shift(measure, omega, config)


def lamb_shift_S(bath, omega, config=DEFAULT_QUAD):
    """Lamb shift S(w) = PV (1/2pi) int dW gamma(W)/(w - W)."""
    measure = as_measure(bath)
    _check_atom_pole(measure, omega)
    return _lamb_shift_cached(measure, float(omega), config)


@lru_cache(maxsize=16384)
def _finite_gamma_cached(measure, omega, t, config):
    total = 0.0 + 0.0j
    for loc, wgt in measure.atoms:
        total += wgt * complex(phi_kernel(omega - loc, t)) / (2.0 * np.pi)
    if measure.density is not None:
        lo, hi = _smooth_domain(measure, omega)

        def integrand(w):
            return measure.density(w) * phi_kernel(omega - w, t)

        total += oscillatory_quad(integrand, lo, hi, t,
                                  structure_scale=_structure_scale(measure)) / (2.0 * np.pi)
    return total


def finite_time_Gamma(bath, omega, t, config=DEFAULT_QUAD):
    """Gamma(w, t) = int_0^t ds e^{iws} <R(s)R(0)>, with t = inf accepted.

    Evaluated in the frequency domain as (1/2pi) int gamma(W) phi_t(w - W) dW;
    the infinite-time sentinel returns gamma(w)/2 + i S(w).
    """
    measure = as_measure(bath)
    if t == np.inf:
        return 0.5 * measure_value(measure, omega) + 1j * lamb_shift_S(measure, omega, config)
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if t == 0:
        return 0.0 + 0.0j
    return _finite_gamma_cached(measure, float(omega), float(t), config)


def gamma_finite_time(bath, w, wp, t, config=DEFAULT_QUAD):
    """gamma(w, w', t) = Gamma(w', t) + Gamma(w, t)^*."""
    g1 = finite_time_Gamma(bath, wp, t, config)
    g2 = finite_time_Gamma(bath, w, t, config)
    return g1 + np.conj(g2)


def S_finite_time(bath, w, wp, t, config=DEFAULT_QUAD):
    """S(w, w', t) = (Gamma(w', t) - Gamma(w, t)^*) / 2i."""
    g1 = finite_time_Gamma(bath, wp, t, config)
    g2 = finite_time_Gamma(bath, w, t, config)
    return (g1 - np.conj(g2)) / 2.0j


def correlation_time_domain(bath, t, config=DEFAULT_QUAD):
    """Autocorrelation <R(t)R(0)>; satisfies <R(-t)R(0)> = <R(t)R(0)>^*."""
    measure = as_measure(bath)
    if t < 0:
        return np.conj(correlation_time_domain(measure, -t, config))
    total = 0.0 + 0.0j
    for loc, wgt in measure.atoms:
        total += wgt * np.exp(-1j * loc * t) / (2.0 * np.pi)
    if measure.density is not None:
        lo, hi = _smooth_domain(measure)

        def dens(w):
            return float(measure.density(np.asarray(w)))

        if t == 0:
            total += adaptive_quad(dens, lo, hi, config) / (2.0 * np.pi)
        else:
            re, re_err = quad(dens, lo, hi, weight="cos", wvar=t,
                              epsabs=config.abs_tol, epsrel=config.rel_tol,
                              limit=config.limit)[:2]
            im, im_err = quad(dens, lo, hi, weight="sin", wvar=t,
                              epsabs=config.abs_tol, epsrel=config.rel_tol,
                              limit=config.limit)[:2]
            if max(re_err, im_err) > 1e3 * config.abs_tol * max(1.0, abs(re), abs(im)):
                raise NumericsError(
                    f"oscillatory correlation quadrature stalled at error {max(re_err, im_err):.2e}"
                )
            total += (re - 1j * im) / (2.0 * np.pi)
    return total


def _split_time(measure):
    # beyond this, Gamma(w, s) has converged to Gamma(w, oo) except for the
    # known 1/s tail in the w = 0 channel (thermal decay e^{-2 pi s / beta})
    return 60.0 * measure.beta


def _log_tail_integral(delta, t0, t1):
    """int_{t0}^{t1} e^{i delta s} / s ds."""
    if delta == 0.0:
        return complex(np.log(t1 / t0))
    from scipy.special import exp1

    return complex(exp1(-1j * delta * t0) - exp1(-1j * delta * t1))


def _gamma_matrix_direct(measure, freqs, t, config):
    n = len(freqs)
    xi = np.zeros((n, n), dtype=complex)
    fa = np.array(freqs, dtype=float)
    for loc, wgt in measure.atoms:
        v = phi_kernel(fa - loc, t)
        xi += (wgt / (2.0 * np.pi)) * np.outer(v, v.conj())
    if measure.density is not None:
        lo, hi = _smooth_domain(measure, max(abs(f) for f in freqs))
        nodes, weights = panel_nodes(lo, hi, t, structure_scale=_structure_scale(measure))
        c = weights * measure.density(nodes) / (2.0 * np.pi)
        phi = phi_kernel(fa[None, :] - nodes[:, None], t)
        xi += np.einsum("n,ni,nj->ij", c, phi, phi.conj())
    return xi


def _S_matrix_direct(measure, freqs, t, config):
    n = len(freqs)
    out = np.zeros((n, n), dtype=complex)
    fa = np.array(freqs, dtype=float)

    def accumulate(points, coeffs):
        for i in range(n):
            for j in range(n):
                delta = fa[i] - fa[j]
                term = phi_diff_quotient(fa[i] - points, delta, t) \
                    - phi_diff_quotient(points - fa[j], delta, t)
                out[i, j] += -0.5 * np.sum(coeffs * term) / (2.0 * np.pi)

    if measure.atoms:
        locs = np.array([a[0] for a in measure.atoms])
        wgts = np.array([a[1] for a in measure.atoms])
        accumulate(locs, wgts)
    if measure.density is not None:
        lo, hi = _smooth_domain(measure, max(abs(f) for f in freqs))
        nodes, weights = panel_nodes(lo, hi, t, structure_scale=_structure_scale(measure))
        accumulate(nodes, weights * measure.density(nodes))
    return out


@lru_cache(maxsize=512)
def _integrated_matrices_cached(measure, freqs, t, config):
    """(int_0^t gamma~, int_0^t S~) coefficient matrices over the frequency list.

    For large t the integral is split at T0: the correlation function has
    decayed there, so gamma(w,w',s) = gamma(w,w',oo) + [w or w' = 0 tail c/s],
    and the remainder integrates in closed form.
    """
    t0 = _split_time(measure)
    if measure.density is None or t <= t0:
        return (
            _gamma_matrix_direct(measure, freqs, t, config),
            _S_matrix_direct(measure, freqs, t, config),
        )
    xi = _gamma_matrix_direct(measure, freqs, t0, config)
    sig = _S_matrix_direct(measure, freqs, t0, config)
    n = len(freqs)
    for i in range(n):
        for j in range(n):
            w, wp = freqs[i], freqs[j]
            delta = w - wp
            ginf = 0.5 * (measure_value(measure, w) + measure_value(measure, wp)) + 1j * (
                _lamb_shift_cached(measure, wp, config) - _lamb_shift_cached(measure, w, config)
            )
            sinf = 0.5 * (
                _lamb_shift_cached(measure, w, config) + _lamb_shift_cached(measure, wp, config)
            ) + 0.25j * (measure_value(measure, w) - measure_value(measure, wp))
            step = complex(phi_kernel(delta, t) - phi_kernel(delta, t0))
            xi[i, j] += ginf * step
            sig[i, j] += sinf * step
            c = measure.tail_zero_coeff
            if c != 0.0:
                tail = _log_tail_integral(delta, t0, t)
                xi[i, j] += c * ((wp == 0.0) + (w == 0.0)) * tail
                sig[i, j] += c * ((wp == 0.0) - (w == 0.0)) * tail / 2.0j
    return xi, sig


def integrated_gamma_matrix(bath, freqs, t, config=DEFAULT_QUAD):
    """Matrix int_0^t e^{i(w-w')s} gamma(w, w', s) ds over the given frequencies.

    Computed as the Gram matrix (1/2pi) int gamma(W) phi_t(w-W) phi_t(w'-W)^* dW,
    so it is positive semi-definite by construction.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    measure = as_measure(bath)
    return _integrated_matrices_cached(measure, tuple(float(f) for f in freqs), float(t), config)[0].copy()


def integrated_S_matrix(bath, freqs, t, config=DEFAULT_QUAD):
    """Matrix int_0^t e^{i(w-w')s} S(w, w', s) ds over the given frequencies."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    measure = as_measure(bath)
    return _integrated_matrices_cached(measure, tuple(float(f) for f in freqs), float(t), config)[1].copy()
