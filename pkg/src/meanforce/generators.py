"""Superoperators: Bloch-Redfield / Davies generators, cumulant map, diagnostics.

Vectorisation is column-stacking, vec(rho) = rho.flatten(order="F"), so
A rho B maps to (B^T kron A) vec(rho).  The master-equation generator in the
Schroedinger picture is

  L[rho] = -i[H0, rho] + lam^2 sum_{a,b; w,w'} ( i S_ab(w,w',t) [rho, A_a(w)^dag A_b(w')]
           + K_ab(w,w',t) ( A_b(w') rho A_a(w)^dag - {A_a(w)^dag A_b(w'), rho}/2 ) )

with (K, S) = (gamma, S) finite-time Bloch-Redfield coefficients, their
t -> oo limits, or the secular Davies coefficients.  The cumulant map is
rho(t) = e^{-iH0 t} exp(K_t) e^{+iH0 t} with the interaction-picture exponent

  K_t = lam^2 sum ( i Xi_ab(w,w',t) [rho, A_a(w)^dag A_b(w')]
        + xi_ab(w,w',t) ( A_b(w') rho A_a(w)^dag - {.,.}/2 ) ),

where xi and Xi are the time-integrated coefficient matrices from the bath
module (xi positive semi-definite by construction, which makes the map CPTP).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._quad import DEFAULT_QUAD
from .bath import (
    finite_time_Gamma,
    integrated_S_matrix,
    integrated_gamma_matrix,
    lamb_shift_S,
    measure_value,
)
from .corrections import _pair_measure
from .errors import (
    DegenerateSteadyStateError,
    NumericsError,
    ValidationError,
)
from .operators import require_hermitian

__all__ = [
    "Superoperator",
    "vectorize",
    "unvectorize",
    "commutator_superop",
    "build_redfield_generator",
    "build_davies_generator",
    "interaction_redfield_generator",
    "build_cumulant_exponent",
    "cumulant_map",
    "propagate",
    "choi_matrix",
    "steady_state_of_generator",
    "thermal_state",
    "validate_density_matrix",
]


def vectorize(rho):
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvectorize(v):
    d = round(np.sqrt(v.size))
    return np.asarray(v, dtype=complex).reshape((d, d), order="F")


@dataclass(frozen=True)
class Superoperator:
    """Dense d^2 x d^2 matrix acting on column-stacked density matrices."""

    dim: int
    matrix: np.ndarray

    def apply(self, rho):
        return unvectorize(self.matrix @ vectorize(rho))

    def norm(self):
        return np.linalg.norm(self.matrix, 2)

    def expm(self, scale=1.0):
        return Superoperator(self.dim, expm(scale * self.matrix))

    def trace_defect(self):
        """Norm of the dual action on the identity; 0 for trace-preserving generators."""
        idv = vectorize(np.eye(self.dim))
        return float(np.linalg.norm(idv.conj() @ self.matrix))


def _left(a):
    return np.kron(np.eye(a.shape[0]), a)


def _right(b):
    return np.kron(b.T, np.eye(b.shape[0]))


def _sandwich(l, r):
    # L rho R -> (R^T kron L)
    return np.kron(r.T, l)


def commutator_superop(h):
    """Superoperator of -i[H, .]."""
    return -1j * (_left(h) - _right(h))


def _hamiltonian_term(x):
    """Superoperator of i[., X] = i(rho X - X rho)."""
    return 1j * (_right(x) - _left(x))


def _dissipator_term(a_side, b_side):
    """A_b rho A_a^dag - (1/2){A_a^dag A_b, rho} for given A_a(w), A_b(w')."""
    adag = a_side.conj().T
    p = adag @ b_side
    return _sandwich(b_side, adag) - 0.5 * (_left(p) + _right(p))


def dissipative_generator(jumps, kmat, dyn):
    """lam^2-part of the generator for coefficient accessors kmat/dyn(a,b,w,w')."""
    dim = jumps[0].dim
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for a, ja in enumerate(jumps):
        for b, jb in enumerate(jumps):
            for w in ja.frequencies:
                aw = ja.op(w)
                for wp in jb.frequencies:
                    bwp = jb.op(wp)
                    s = dyn(a, b, w, wp)
                    if s != 0.0:
                        out += s * _hamiltonian_term(aw.conj().T @ bwp)
                    k = kmat(a, b, w, wp)
                    if k != 0.0:
                        out += k * _dissipator_term(aw, bwp)
    return out


def _finite_coefficients(baths, t, config):
    """(gamma, S)(a, b, w, w') accessors at time t (t = inf for the long-time limit)."""

    def gamma_ab(a, b, w, wp):
        m = _pair_measure(baths, a, b)
        if m is None:
            return 0.0
        g1 = finite_time_Gamma(m, wp, t, config)
        g2 = finite_time_Gamma(m, w, t, config)
        return g1 + np.conj(g2)

    def s_ab(a, b, w, wp):
        m = _pair_measure(baths, a, b)
        if m is None:
            return 0.0
        g1 = finite_time_Gamma(m, wp, t, config)
        g2 = finite_time_Gamma(m, w, t, config)
        return (g1 - np.conj(g2)) / 2.0j

    return gamma_ab, s_ab


def build_redfield_generator(h0, jumps, baths, lam, t=np.inf, config=DEFAULT_QUAD):
    """Schroedinger-picture Bloch-Redfield generator at time t (default long-time)."""
    if lam < 0:
        raise ValidationError("coupling constant must be nonnegative")
    h = require_hermitian(h0, name="H0")
    gen = commutator_superop(h)
    if lam > 0:
        gamma_ab, s_ab = _finite_coefficients(baths, t, config)
        gen = gen + lam**2 * dissipative_generator(jumps, gamma_ab, s_ab)
    return Superoperator(h.shape[0], gen)


def interaction_redfield_generator(jumps, baths, lam, t, config=DEFAULT_QUAD):
    """Interaction-picture Bloch-Redfield generator: coefficients carry e^{i(w-w')t}."""
    gamma_ab, s_ab = _finite_coefficients(baths, t, config)

    def phase(w, wp):
        return np.exp(1j * (w - wp) * t)

    gen = dissipative_generator(
        jumps,
        lambda a, b, w, wp: phase(w, wp) * gamma_ab(a, b, w, wp),
        lambda a, b, w, wp: phase(w, wp) * s_ab(a, b, w, wp),
    )
    dim = jumps[0].dim
    return Superoperator(dim, lam**2 * gen)


def build_davies_generator(h0, jumps, baths, lam, config=DEFAULT_QUAD):
    """Davies generator: secular (w = w') coefficients only; thermalises to Gibbs(H0)."""
    if lam < 0:
        raise ValidationError("coupling constant must be nonnegative")
    h = require_hermitian(h0, name="H0")
    freqs = sorted({w for j in jumps for w in j.frequencies})
    # per-frequency Kossakowski matrix must be PSD (diagnostic for bad spectra)
    for w in freqs:
        kw = np.zeros((len(jumps), len(jumps)), dtype=complex)
        for a in range(len(jumps)):
            for b in range(len(jumps)):
                m = _pair_measure(baths, a, b)
                if m is not None and w in jumps[a].frequencies and w in jumps[b].frequencies:
                    kw[a, b] = measure_value(m, w)
        low = np.linalg.eigvalsh(0.5 * (kw + kw.conj().T)).min()
        if low < -1e-10 * max(1.0, np.abs(kw).max()):
            raise NumericsError(
                f"secular Kossakowski matrix at w = {w:g} is not PSD (min eig {low:.2e})"
            )

    def kmat(a, b, w, wp):
        if w != wp:
            return 0.0
        m = _pair_measure(baths, a, b)
        return 0.0 if m is None else measure_value(m, w)

    def dyn(a, b, w, wp):
        if w != wp:
            return 0.0
        m = _pair_measure(baths, a, b)
        return 0.0 if m is None else lamb_shift_S(m, w, config)

    gen = commutator_superop(h)
    if lam > 0:
        gen = gen + lam**2 * dissipative_generator(jumps, kmat, dyn)
    return Superoperator(h.shape[0], gen)


def _grouped_integrated(jumps, baths, t, config):
    """Per coupling pair: integrated (xi, Xi) accessors from shared grids."""
    if not isinstance(baths, (list, tuple)):
        baths = (baths,) * len(jumps)
    cache = {}

    def tables(a, b):
        m = _pair_measure(baths, a, b)
        if m is None:
            return None
        freqs = tuple(sorted(set(jumps[a].frequencies) | set(jumps[b].frequencies)))
        key = (m, freqs)
        if key not in cache:
            xi = integrated_gamma_matrix(m, freqs, t, config)
            big_xi = integrated_S_matrix(m, freqs, t, config)
            index = {w: i for i, w in enumerate(freqs)}
            cache[key] = (xi, big_xi, index)
        return cache[key]

    def xi_ab(a, b, w, wp):
        tab = tables(a, b)
        if tab is None:
            return 0.0
        xi, _, index = tab
        return xi[index[w], index[wp]]

    def big_xi_ab(a, b, w, wp):
        tab = tables(a, b)
        if tab is None:
            return 0.0
        _, big_xi, index = tab
        return big_xi[index[w], index[wp]]

    return xi_ab, big_xi_ab


def build_cumulant_exponent(h0, jumps, baths, lam, t, config=DEFAULT_QUAD):
    """Interaction-picture cumulant exponent K_t (zero superoperator at t = 0)."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    h = require_hermitian(h0, name="H0")
    dim = h.shape[0]
    if t == 0 or lam == 0:
        return Superoperator(dim, np.zeros((dim * dim, dim * dim), dtype=complex))
    xi_ab, big_xi_ab = _grouped_integrated(jumps, baths, t, config)
    gen = dissipative_generator(jumps, xi_ab, big_xi_ab)
    return Superoperator(dim, lam**2 * gen)


def frame_rotation(h0, t):
    """Superoperator of X -> e^{-iH0 t} X e^{+iH0 t}."""
    h = require_hermitian(h0, name="H0")
    u = expm(-1j * h * t)
    return Superoperator(h.shape[0], _sandwich(u, u.conj().T))


def cumulant_map(h0, jumps, baths, lam, t, config=DEFAULT_QUAD):
    """Schroedinger-picture cumulant dynamical map e^{-iH0t} exp(K_t) e^{+iH0t}."""
    k = build_cumulant_exponent(h0, jumps, baths, lam, t, config)
    rot = frame_rotation(h0, t)
    return Superoperator(k.dim, rot.matrix @ expm(k.matrix))


def validate_density_matrix(rho, tol=1e-12):
    r = np.asarray(rho, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError("density matrix must be square")
    if np.abs(r - r.conj().T).max() > tol * max(1.0, np.abs(r).max()):
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(r) - 1.0) > 1e-10:
        raise ValidationError(f"density matrix trace {np.trace(r).real:.12f} != 1")
    return r


def propagate(superop, rho0, t=None):
    """Propagate rho0 with a generator (finite t) or apply a ready-made map (t=None)."""
    rho = validate_density_matrix(rho0)
    if t is None:
        return superop.apply(rho)
    if t < 0:
        raise ValidationError("t must be nonnegative")
    try:
        prop = expm(superop.matrix * t)
    except (ValueError, FloatingPointError) as exc:
        raise NumericsError(f"superoperator exponential failed: {exc}") from None
    if not np.all(np.isfinite(prop)):
        raise NumericsError("superoperator exponential overflowed")
    return unvectorize(prop @ vectorize(rho))


def choi_matrix(superop):
    """Choi matrix sum_ij |i><j| kron M(|i><j|); the map is CP iff it is PSD."""
    d = superop.dim
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            c += np.kron(unit, superop.apply(unit))
    return 0.5 * (c + c.conj().T)


def steady_state_of_generator(superop, null_tol=1e-10):
    """Unit-trace Hermitian null vector of a trace-preserving generator.

    Raises DegenerateSteadyStateError when the null space has dimension > 1
    (tie-breaking is never silent) and NumericsError when the null vector has
    no positive unit-trace representative.
    """
    mat = superop.matrix
    _, s, vh = np.linalg.svd(mat)
    smax = s[0] if s.size else 0.0
    null_rows = np.where(s <= null_tol * max(smax, 1e-300))[0]
    if null_rows.size == 0:
        raise NumericsError("generator has no null vector at the working tolerance")
    if null_rows.size > 1:
        raise DegenerateSteadyStateError(
            f"steady state not unique: null-space dimension {null_rows.size}"
        )
    x = unvectorize(vh[null_rows[0]].conj())
    x = 0.5 * (x + x.conj().T)
    tr = np.trace(x).real
    if abs(tr) < 1e-12 * np.linalg.norm(x):
        raise NumericsError("null vector is traceless; no density-matrix candidate")
    rho = x / tr
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        raise NumericsError("steady-state candidate is not positive semi-definite")
    return rho


def thermal_state(h, beta):
    """Gibbs state e^{-beta H} / Z via eigendecomposition."""
    m = require_hermitian(h, name="H")
    vals, vecs = np.linalg.eigh(m)
    w = np.exp(-beta * (vals - vals.min()))
    w /= w.sum()
    return (vecs * w) @ vecs.conj().T
