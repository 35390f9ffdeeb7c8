"""Error, energy and spectral diagnostics for reduced trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import UnsupportedError


class AlignmentError(ValueError):
    pass


@dataclass
class DiagnosticsSeries:
    times: np.ndarray
    instant_error: np.ndarray
    energy: np.ndarray
    total_error: float
    blowup_time: float = math.inf
    resampled: bool = False


def total_error(times, instant_error) -> float:
    """``sqrt(int ||e||^2 dt)`` by a left Riemann sum on the recording grid."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(instant_error, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.sqrt(np.sum(e[:-1] ** 2 * np.diff(t))))


def _align(ref_times, times, dt):
    """Indices into ``ref_times`` nearest to each of ``times``; flags resampling."""
    idx = np.clip(np.searchsorted(ref_times, times - 0.5 * dt), 0, len(ref_times) - 1)
    # pick nearest of idx, idx-1
    prev = np.clip(idx - 1, 0, len(ref_times) - 1)
    better = np.abs(ref_times[prev] - times) < np.abs(ref_times[idx] - times)
    idx = np.where(better, prev, idx)
    gap = np.abs(ref_times[idx] - times)
    if np.any(gap > dt * (1 + 1e-9)):
        raise AlignmentError(f"time grids differ by up to {gap.max():g} (> one step {dt:g})")
    return idx, bool(np.any(gap > 1e-9 * max(1.0, dt)))


def error_series(reference, approx_states, approx_times, energy_fn=None, compare="state",
                 dt=None, blowup_time=math.inf) -> DiagnosticsSeries:
    """Instant and total error of lifted approximate states against a reference.

    ``reference`` is either a trajectory-like object with ``times``/``states``
    or a callable ``t -> state`` (an analytic solution).  ``compare="q"``
    restricts the comparison to the first half of the state.  If the
    approximation blew up, ``total_error`` is infinite.
    """
    X = np.asarray(approx_states, dtype=float)
    t = np.asarray(approx_times, dtype=float)
    if callable(reference):
        R = np.array([reference(tt) for tt in t])
        resampled = False
    else:
        rt = np.asarray(reference.times, dtype=float)
        step = dt if dt is not None else (rt[1] - rt[0] if rt.size > 1 else 1.0)
        idx, resampled = _align(rt, t, step)
        R = np.asarray(reference.states)[idx]
    D = X - R
    if compare == "q":
        D = D[:, : D.shape[1] // 2]
    elif compare != "state":
        raise ValueError("compare must be 'state' or 'q'")
    e = np.linalg.norm(D, axis=1)
    E = np.array([energy_fn(x) for x in X]) if energy_fn is not None else np.full(len(t), np.nan)
    tot = math.inf if math.isfinite(blowup_time) else total_error(t, e)
    return DiagnosticsSeries(t, e, E, tot, blowup_time, resampled)


def energy_series(model_or_system, states) -> np.ndarray:
    """``E(t_j) = H_d(x_j)``; reduced states are lifted first."""
    obj = model_or_system
    if hasattr(obj, "reduced_energy"):
        return np.array([obj.reduced_energy(z) for z in states])
    return np.array([obj.energy(x) for x in states])


def relative_energy_drift(E) -> float:
    E = np.asarray(E, dtype=float)
    return float(np.max(np.abs(E - E[0])) / abs(E[0]))


@dataclass
class SpectralStability:
    lambda_star: complex
    a_star: complex
    eigvec: np.ndarray
    residual: float

    @property
    def unstable(self) -> bool:
        return self.lambda_star.real > 0


def _normalize_phase(v):
    i = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[i]) / abs(v[i]))


def spectral_stability(reduced_linear, z0) -> SpectralStability:
    """Eigenvalue of maximal real part, its unit eigenvector ``xi`` and ``a = xi^T z0``.

    Ties in the real part prefer the larger ``|Im|`` and then the lower index.
    The eigenvector is scaled so that its largest entry is real and positive.
    """
    K = np.asarray(reduced_linear)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("reduced operator must be square")
    ev, V = np.linalg.eig(K)
    re = np.round(ev.real, 12)
    order = np.lexsort((np.arange(ev.size), -np.abs(ev.imag), -re))
    i = int(order[0])
    xi = V[:, i] / np.linalg.norm(V[:, i])
    xi = _normalize_phase(xi)
    res = float(np.linalg.norm(K @ xi - ev[i] * xi))
    a = complex(xi @ np.asarray(z0))
    lam = complex(ev[i])
    return SpectralStability(lam, a, xi, res)


def pod_spectral_stability(model, x0) -> SpectralStability:
    """Spectral instability indicator of a POD reduced linear model for initial state ``x0``."""
    return spectral_stability(model.K, model.restrict_state(x0))


@dataclass
class WaveSpectrum:
    beta: np.ndarray  # eigenvalues of D_xx, i = 1..n
    gamma: np.ndarray  # c sqrt(-beta)
    xi: np.ndarray  # (2n, n) complex
    zeta: np.ndarray  # (2n, n) complex; zeta_n redefined


def analytic_wave_spectrum(grid, c, bc=None) -> WaveSpectrum:
    """Closed-form eigenpairs of ``K = [[0, I], [c^2 D_xx, 0]]`` for periodic ``D_xx``.

    ``K xi_i = i gamma_i xi_i`` and ``K zeta_i = -i gamma_i zeta_i``; for
    ``i = n`` the eigenvalue is zero and ``zeta_n = [0; 1]/sqrt(n)`` completes a
    Jordan block with ``K zeta_n = xi_n``.
    """
    if bc is not None and bc.tag != "periodic":
        raise UnsupportedError("analytic spectrum is only available for periodic boundaries")
    n, dx = grid.n, grid.dx
    i = np.arange(1, n + 1)
    beta = -2.0 / dx**2 * (1.0 - np.cos(2 * np.pi * i / n))
    beta[-1] = 0.0
    gam = c * np.sqrt(-beta)
    j = np.arange(1, n + 1)
    # w_i = (1/sqrt n)[e^{-2 pi i i/n}, ..., e^{-2 pi i i (n-1)/n}, 1]
    W = np.exp(-2j * np.pi * np.outer(j, i) / n) / np.sqrt(n)
    nrm = 1.0 / np.sqrt(1.0 + gam**2)
    xi = np.vstack([W, 1j * gam * W]) * nrm
    zeta = np.vstack([W, -1j * gam * W]) * nrm
    zeta[:, -1] = np.concatenate([np.zeros(n), np.ones(n)]) / np.sqrt(n)
    return WaveSpectrum(beta, gam, xi, zeta)
