"""Symplectic time stepping for full and reduced systems.

Any object exposing ``dim``, ``is_linear``, ``K`` (sparse or dense),
``rhs(x)`` and ``rhs_jacobian(x)`` can be integrated; both
:class:`~symred.models.HamiltonianSystem` and
:class:`~symred.reduction.ReducedModel` qualify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SCHEMES = ("symplectic_euler_qp", "symplectic_euler_pq", "implicit_midpoint")


class StepError(RuntimeError):
    """A time step could not be completed."""

    def __init__(self, msg, residual=float("nan"), step=None):
        super().__init__(msg)
        self.residual = residual
        self.step = step


NEWTON_JACOBIANS = ("exact", "reuse")
NEWTON_GUESSES = ("previous", "extrapolate")


@dataclass(frozen=True)
class IntegratorSpec:
    """Time stepping settings.

    ``newton_jacobian="exact"`` refactors the Newton matrix every iteration;
    ``"reuse"`` keeps one factorization across iterations and steps and
    refreshes it when the residual contracts by less than a factor four.
    ``newton_guess`` starts Newton from the previous state or from the linear
    extrapolation ``2 x_j - x_{j-1}``.  All combinations stop on the same
    residual test and so agree to within ``newton_tol``.
    """

    scheme: str = "implicit_midpoint"
    dt: float = 0.01
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    newton_jacobian: str = "exact"
    newton_guess: str = "previous"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be positive")
        if self.newton_jacobian not in NEWTON_JACOBIANS:
            raise ValueError(f"newton_jacobian must be one of {NEWTON_JACOBIANS}")
        if self.newton_guess not in NEWTON_GUESSES:
            raise ValueError(f"newton_guess must be one of {NEWTON_GUESSES}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_records, dim)
    stride: int
    dt: float
    energies: Optional[np.ndarray] = None
    blowup_time: float = math.inf
    failure: str = ""
    newton_iterations: int = 0

    @property
    def final(self):
        return self.states[-1]

    @property
    def blew_up(self) -> bool:
        return math.isfinite(self.blowup_time)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


class _ShiftedSolver:
    """Factorization of ``I - a K`` for repeated solves."""

    def __init__(self, K, a):
        m = K.shape[0]
        if sp.issparse(K):
            self._lu = spla.splu((sp.identity(m, format="csc") - a * K).tocsc())
            self.solve = self._lu.solve
        else:
            lu = sla.lu_factor(np.eye(m) - a * np.asarray(K))
            if np.any(np.diag(lu[0]) == 0):
                raise StepError(f"I - (dt/2) K is singular (dt/2 = {a})")
            self.solve = lambda b: sla.lu_solve(lu, b, check_finite=False)


class MidpointLinear:
    """Cayley map ``(I - h/2 K)^{-1} (I + h/2 K)``, factorized once."""

    def __init__(self, system, dt):
        self.K = system.K
        self.dt = dt
        self._solver = _ShiftedSolver(self.K, 0.5 * dt) if dt != 0 else None

    def __call__(self, x):
        if self._solver is None:
            return np.array(x, dtype=float)
        return self._solver.solve(x + 0.5 * self.dt * (self.K @ x))


def midpoint_step_linear(system, x, dt):
    return MidpointLinear(system, dt)(np.asarray(x, dtype=float))


class MidpointNewton:
    """Implicit midpoint ``y = x + dt F((x+y)/2)`` solved by Newton iteration.

    Converged when ``||R|| <= tol (1 + ||x||)`` with ``R = y - x - dt F((x+y)/2)``.
    See :class:`IntegratorSpec` for the ``jacobian`` and ``guess`` policies.
    """

    def __init__(self, system, dt, tol=1e-12, max_iters=50, jacobian="exact", guess="previous"):
        if jacobian not in NEWTON_JACOBIANS or guess not in NEWTON_GUESSES:
            raise ValueError("unknown Newton policy")
        self.system = system
        self.dt = dt
        self.tol = tol
        self.max_iters = max_iters
        self.reuse = jacobian == "reuse"
        self.extrapolate = guess == "extrapolate"
        self.iterations = 0
        self.factorizations = 0
        self._sparse = sp.issparse(system.K)
        self._I = sp.identity(system.dim, format="csc") if self._sparse else np.eye(system.dim)
        self._solve = None
        self._last = None  # (input, output) of the previous call

    def _factorize(self, m):
        A = self._I - 0.5 * self.dt * self.system.rhs_jacobian(m)
        self.factorizations += 1
        if self._sparse:
            try:
                self._solve = spla.splu(sp.csc_matrix(A)).solve
            except RuntimeError as exc:
                raise StepError(f"Newton matrix is singular: {exc}") from exc
        else:
            lu = sla.lu_factor(A, check_finite=False)
            if np.any(np.diag(lu[0]) == 0):
                raise StepError("Newton matrix is singular")
            self._solve = lambda r: sla.lu_solve(lu, r, check_finite=False)

    def __call__(self, x):
        sys, h = self.system, self.dt
        x = np.asarray(x, dtype=float)
        if h == 0:
            return x.copy()
        if self.extrapolate and self._last is not None and x is self._last[1]:
            y = 2.0 * x - self._last[0]
        else:
            y = x.copy()
        thresh = self.tol * (1.0 + np.linalg.norm(x))
        rn_prev = math.inf
        for it in range(self.max_iters + 1):
            R = y - x - h * sys.rhs(0.5 * (x + y))
            rn = np.linalg.norm(R)
            if not np.isfinite(rn):
                raise StepError("Newton residual is not finite", rn)
            if rn <= thresh:
                self.iterations += it
                self._last = (x, y)
                return y
            if it == self.max_iters:
                break
            if not self.reuse or self._solve is None or rn > 0.25 * rn_prev:
                self._factorize(0.5 * (x + y))
            y = y - self._solve(R)
            rn_prev = rn
        raise StepError(
            f"Newton did not converge in {self.max_iters} iterations (residual {rn:.3e})", rn
        )


def midpoint_step_nonlinear(system, x, dt, tol=1e-12, max_iters=50, jacobian="exact"):
    return MidpointNewton(system, dt, tol, max_iters, jacobian)(x)


class SymplecticEuler:
    """Explicit symplectic Euler for separable ``H = T(p) + U(q)``.

    ``qp``: ``q+ = q + h T'(p)``, then ``p+ = p - h U'(q+)``.
    ``pq``: ``p+ = p - h U'(q)``, then ``q+ = q + h T'(p+)``.
    """

    def __init__(self, system, dt, variant="qp"):
        if variant not in ("qp", "pq"):
            raise ValueError("variant must be 'qp' or 'pq'")
        self.velocity, self.force = system.separable_parts()
        self.n = system.dim // 2
        self.dt = dt
        self.variant = variant

    def __call__(self, x):
        n, h = self.n, self.dt
        q, p = np.array(x[:n], dtype=float), np.array(x[n:], dtype=float)
        if self.variant == "qp":
            q = q + h * self.velocity(p)
            p = p + h * self.force(q)
        else:
            p = p + h * self.force(q)
            q = q + h * self.velocity(p)
        return np.concatenate([q, p])


def symplectic_euler_step(system, x, dt, variant="qp"):
    return SymplecticEuler(system, dt, variant)(x)


def make_stepper(system, spec: IntegratorSpec):
    if spec.scheme == "implicit_midpoint":
        if system.is_linear:
            return MidpointLinear(system, spec.dt)
        return MidpointNewton(system, spec.dt, spec.newton_tol, spec.newton_max_iters,
                             spec.newton_jacobian, spec.newton_guess)
    return SymplecticEuler(system, spec.dt, spec.scheme.rsplit("_", 1)[1])


def n_steps_for(T: float, dt: float) -> int:
    m = T / dt
    mi = int(round(m))
    if abs(m - mi) > 1e-8 * max(1.0, m):
        raise ValueError(f"final time {T} is not a multiple of dt={dt}")
    return mi


def integrate(
    system,
    x0,
    spec: IntegratorSpec,
    T: float,
    stride: int = 1,
    energy: Optional[Callable] = None,
    blowup_factor: Optional[float] = None,
    stepper=None,
) -> Trajectory:
    """Advance ``x0`` to time ``T`` recording every ``stride`` steps.

    When ``blowup_factor`` is given the run stops as soon as the state norm
    exceeds ``blowup_factor * max(||x0||, 1e-300)`` or a step fails, and the
    trajectory records the blow-up time instead of raising.  A state that
    overflows to a non-finite value always ends the run as a blow-up.
    """
    if stride < 1:
        raise ValueError("stride must be positive")
    m = n_steps_for(T, spec.dt)
    step = stepper or make_stepper(system, spec)
    x = np.array(x0, dtype=float)
    limit = None
    if blowup_factor is not None:
        limit = blowup_factor * max(np.linalg.norm(x), 1e-300)
    times, states = [0.0], [x.copy()]
    blowup, failure = math.inf, ""
    for j in range(1, m + 1):
        try:
            x = step(x)
        except StepError as exc:
            if limit is None:
                exc.step = j
                raise StepError(f"step {j} (t={j * spec.dt:g}): {exc}", exc.residual, j) from exc
            blowup, failure = j * spec.dt, str(exc)
            break
        norm = np.linalg.norm(x)
        if not math.isfinite(norm):
            blowup, failure = j * spec.dt, "state became non-finite"
            break
        if limit is not None and not (norm <= limit):
            blowup, failure = j * spec.dt, "norm exceeded blow-up threshold"
            break
        if j % stride == 0:
            times.append(j * spec.dt)
            states.append(x.copy())
    S = np.array(states)
    E = None
    if energy is not None:
        E = np.array([energy(s) for s in S])
    return Trajectory(
        np.array(times), S, stride, spec.dt, E, blowup, failure,
        getattr(step, "iterations", 0),
    )


def step_jacobian_fd(step, x, eps=1e-6):
    """Central finite-difference Jacobian of a one-step map."""
    x = np.asarray(x, dtype=float)
    m = x.size
    M = np.empty((m, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = eps
        M[:, i] = (step(x + e) - step(x - e)) / (2 * eps)
    return M
