"""Implicit midpoint time integration of the semi-discrete K(n,n) system.

The spatial semi-discretization, in a frame moving with velocity ``c0`` and
with second/fourth-order linear dissipation, reads

    mass du/dt = c0*deriv1 u + alpha2*deriv2 u - alpha4*deriv4 u
                 - (deriv1 + deriv3) u^n

with the signed power ``u^n := sign(u)|u|^n``.  One time step solves the
midpoint equations

    mass (U+ - U-)/dt - (c0*deriv1 + alpha2*deriv2 - alpha4*deriv4) (U+ + U-)/2
        + (deriv1 + deriv3) ((U+ + U-)/2)^n = 0

for ``U+`` by Newton iteration; each Newton system is cyclic pentadiagonal
and is solved in linear time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import (
    CyclicPentaMatrix,
    NumericalError,
    OperatorSet,
    apply_stencil,
)

STATUS_OK = "ok"
STATUS_DIVERGED = "newton-diverged"
STATUS_BLOWUP = "blowup"


@dataclass(frozen=True)
class ModelParams:
    """Equation parameters: exponent, frame velocity, dissipation strengths.

    ``alpha2`` may be negative: the tail-removal balance pairs fourth-order
    damping with a second-order term of the opposite (anti-diffusive) sign.
    """

    n: float
    c0: float = 0.0
    alpha2: float = 0.0
    alpha4: float = 0.0

    def __post_init__(self):
        if not 1.0 < self.n <= 3.0:
            raise ValueError(f"exponent must satisfy 1 < n <= 3, got n={self.n}")
        if self.alpha4 < 0:
            raise ValueError(f"alpha4 must be nonnegative, got {self.alpha4}")


@dataclass(frozen=True)
class TimeStepper:
    """Time step size and Newton/blow-up controls."""

    dt: float
    newton_tol: float = 1e-12
    newton_max: int = 25
    blowup_factor: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.newton_max < 1:
            raise ValueError(f"newton_max must be at least 1, got {self.newton_max}")
        if not self.blowup_factor > 1:
            raise ValueError(f"blowup_factor must exceed 1, got {self.blowup_factor}")


@dataclass
class StepReport:
    newton_iters: int
    final_residual: float
    status: str = STATUS_OK


@dataclass
class IntegrationResult:
    """Trajectory summary returned by :func:`integrate`."""

    u: np.ndarray
    t: float
    steps: int
    status: str
    failure_time: float | None = None
    newton_iters: int = 0


def odd_power(u, n: float):
    """Signed power sign(u)*|u|^n, the odd extension of u^n to u < 0.

    Exactly zero at u = 0 and continuously differentiable for n > 1.
    """
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.abs(u) ** n
    return float(out) if out.ndim == 0 else out


def odd_power_deriv(u, n: float):
    """Derivative n*|u|^(n-1) of :func:`odd_power`."""
    u = np.asarray(u, dtype=float)
    out = n * np.abs(u) ** (n - 1.0)
    return float(out) if out.ndim == 0 else out


def _frame_weights(params: ModelParams, ops: OperatorSet) -> np.ndarray:
    """Weights of c0*deriv1 + alpha2*deriv2 - alpha4*deriv4 (zero-sum)."""
    return (
        params.c0 * ops.deriv1.weights
        + params.alpha2 * ops.deriv2.weights
        - params.alpha4 * ops.deriv4.weights
    )


def _flux_weights(ops: OperatorSet) -> np.ndarray:
    """Weights of deriv1 + deriv3 (zero-sum), applied to the signed power."""
    return ops.deriv1.weights + ops.deriv3.weights


def _off(w: np.ndarray):
    return (w[0], w[1], w[3], w[4])


def semidiscrete_rhs(u: np.ndarray, params: ModelParams, ops: OperatorSet) -> np.ndarray:
    """Evaluate mass du/dt, i.e. the spatial side of the semi-discrete system."""
    wf = _frame_weights(params, ops)
    wq = _flux_weights(ops)
    out = apply_stencil(_off(wf), 0.0, u)
    out -= apply_stencil(_off(wq), 0.0, odd_power(u, params.n))
    return out


def midpoint_residual(
    u_prev: np.ndarray,
    u_next: np.ndarray,
    params: ModelParams,
    ops: OperatorSet,
    dt: float,
) -> np.ndarray:
    """Left-hand side of the midpoint equations, componentwise."""
    u_prev = np.asarray(u_prev, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    if u_prev.shape != u_next.shape or u_prev.ndim != 1:
        raise ValueError(
            f"fields must be one-dimensional and conforming, got {u_prev.shape} and {u_next.shape}"
        )
    mid = 0.5 * (u_prev + u_next)
    mass = ops.mass
    r = apply_stencil(mass._off_weights, mass.unit_weight, u_next - u_prev)
    r *= 1.0 / dt
    r -= apply_stencil(_off(_frame_weights(params, ops)), 0.0, mid)
    r += apply_stencil(_off(_flux_weights(ops)), 0.0, odd_power(mid, params.n))
    return r


def newton_step_matrix(
    u_mid: np.ndarray,
    params: ModelParams,
    ops: OperatorSet,
    dt: float,
) -> CyclicPentaMatrix:
    """Jacobian of the midpoint residual with respect to the new time level.

    J = mass/dt - (c0*deriv1 + alpha2*deriv2 - alpha4*deriv4)/2
        + (deriv1 + deriv3) diag(n*|u_mid|^(n-1)) / 2,

    where the diagonal factor multiplies pointwise before the stencil.
    """
    u_mid = np.asarray(u_mid, dtype=float)
    m = u_mid.shape[0]
    g = odd_power_deriv(u_mid, params.n)
    base = ops.mass.weights / dt - 0.5 * _frame_weights(params, ops)
    wq = 0.5 * _flux_weights(ops)
    bands = np.empty((5, m))
    for i, s in enumerate((-2, -1, 0, 1, 2)):
        bands[i] = base[i] + wq[i] * np.roll(g, -s)
    return CyclicPentaMatrix(bands)


def step_once(
    u_prev: np.ndarray,
    dt: float,
    params: ModelParams,
    ops: OperatorSet,
    newton_tol: float = 1e-12,
    newton_max: int = 25,
):
    """One midpoint step of size ``dt`` (sign-agnostic) by Newton iteration.

    Returns ``(u_next, iters, final_residual, converged, history)`` where
    ``history`` lists the residual max-norm at each Newton iterate.  The
    initial guess is the previous time level.
    """
    u = u_prev.astype(float, copy=True)
    history: list[float] = []
    for it in range(newton_max + 1):
        r = midpoint_residual(u_prev, u, params, ops, dt)
        rnorm = float(np.max(np.abs(r)))
        history.append(rnorm)
        if rnorm <= newton_tol:
            return u, it, rnorm, True, history
        if it == newton_max or not math.isfinite(rnorm):
            return u, it, rnorm, False, history
        mid = 0.5 * (u_prev + u)
        jac = newton_step_matrix(mid, params, ops, dt)
        try:
            delta = jac.factor().solve(r)
        except NumericalError:
            return u, it, rnorm, False, history
        u = u - delta
    return u, newton_max, history[-1], False, history


def step(
    u_prev: np.ndarray,
    params: ModelParams,
    ops: OperatorSet,
    stepper: TimeStepper,
    ref_amplitude: float | None = None,
):
    """Advance one step of ``stepper.dt``; classify blow-up against ``ref_amplitude``.

    ``ref_amplitude`` is the max amplitude of the initial condition of the
    enclosing integration; it defaults to the current field's own maximum.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    if not np.all(np.isfinite(u_prev)):
        raise ValueError("previous time level contains non-finite entries")
    if ref_amplitude is None:
        ref_amplitude = float(np.max(np.abs(u_prev)))
    u_next, iters, rnorm, converged, _ = step_once(
        u_prev, stepper.dt, params, ops, stepper.newton_tol, stepper.newton_max
    )
    if not converged:
        return u_next, StepReport(iters, rnorm, STATUS_DIVERGED)
    if float(np.max(np.abs(u_next))) > stepper.blowup_factor * ref_amplitude:
        return u_next, StepReport(iters, rnorm, STATUS_BLOWUP)
    return u_next, StepReport(iters, rnorm, STATUS_OK)


def _step_count(t_final: float, dt: float) -> int:
    ratio = t_final / dt
    return max(0, math.ceil(ratio - 1e-9 * max(1.0, abs(ratio))))


def integrate(
    u0: np.ndarray,
    t_final: float,
    params: ModelParams,
    ops: OperatorSet,
    stepper: TimeStepper,
    observers=(),
) -> IntegrationResult:
    """March ceil(t_final/dt) midpoint steps from ``u0``.

    ``observers`` is a sequence of ``(stride, callback)`` pairs; each
    callback receives ``(step_index, time, field)`` at step 0, every
    ``stride`` steps, and at the final step.  Integration halts early when a
    step reports blow-up or a Newton failure, recording the failure time.
    """
    if t_final < 0:
        raise ValueError(f"final time must be nonnegative, got {t_final}")
    u = np.asarray(u0, dtype=float).copy()
    nsteps = _step_count(t_final, stepper.dt)
    ref = float(np.max(np.abs(u))) if u.size else 0.0
    for _, callback in observers:
        callback(0, 0.0, u)
    total_iters = 0
    for i in range(1, nsteps + 1):
        u, report = step(u, params, ops, stepper, ref_amplitude=ref)
        total_iters += report.newton_iters
        t = i * stepper.dt
        if report.status != STATUS_OK:
            return IntegrationResult(u, t, i, report.status, failure_time=t,
                                     newton_iters=total_iters)
        for stride, callback in observers:
            if i % stride == 0 or i == nsteps:
                callback(i, t, u)
    return IntegrationResult(u, nsteps * stepper.dt, nsteps, STATUS_OK,
                             newton_iters=total_iters)
