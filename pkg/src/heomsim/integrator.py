"""Fixed-step propagation with conservation checks and convergence control."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

DT_SAFETY = 0.1
STEPS_PER_CYCLE = 200

DEFAULT_TRACE_TOL = 1e-6
DEFAULT_HERMITICITY_TOL = 1e-8


class IntegrationError(RuntimeError):
    """Raised when a recorded sample violates a conservation check."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size plus the sample-time sanity tolerances.

    stiffness_bound is the largest generator frequency the step must
    resolve; time_step * stiffness_bound may not exceed DT_SAFETY.
    """

    time_step: float
    stiffness_bound: float = 0.0
    trace_tol: float = DEFAULT_TRACE_TOL
    hermiticity_tol: float = DEFAULT_HERMITICITY_TOL

    def __post_init__(self):
        if self.time_step <= 0.0:
            raise ValueError("time_step must be positive")
        if self.stiffness_bound < 0.0:
            raise ValueError("stiffness_bound must be nonnegative")
        product = self.time_step * self.stiffness_bound
        if product > DT_SAFETY * (1.0 + 1e-12):
            raise ValueError(
                "time_step %.3e too large for stiffness bound %.3e "
                "(product %.3e exceeds %.2f)"
                % (self.time_step, self.stiffness_bound, product, DT_SAFETY)
            )


def default_time_step(system) -> float:
    """Resolve the fastest Hamiltonian cycle and stay inside stability."""
    bound = system.stiffness_bound()
    hnorm = float(np.linalg.norm(np.asarray(system.hamiltonian), 2))
    candidates = [DT_SAFETY / bound] if bound > 0.0 else []
    if hnorm > 0.0:
        candidates.append(2.0 * math.pi / (STEPS_PER_CYCLE * hnorm))
    if not candidates:
        raise ValueError("system has no frequency scale to set a step from")
    return min(candidates)


def default_config(system, **overrides) -> IntegratorConfig:
    settings = {
        "time_step": default_time_step(system),
        "stiffness_bound": system.stiffness_bound(),
    }
    settings.update(overrides)
    return IntegratorConfig(**settings)


@dataclass
class Trajectory:
    """Samples of one propagation run on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    time_step: float
    final_state: np.ndarray
    metadata: Optional[dict] = None


def _rk4_step(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + (0.5 * dt) * k1)
    k3 = rhs(y + (0.5 * dt) * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_sample(t, state, rho, config):
    if not np.isfinite(state).all():
        raise IntegrationError("state became non-finite at t=%.6g" % t)
    drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
    if drift > config.trace_tol:
        raise IntegrationError(
            "trace drift %.3e exceeds %.1e at t=%.6g" % (drift, config.trace_tol, t)
        )
    asymmetry = float(np.abs(rho - rho.conj().T).max())
    if asymmetry > config.hermiticity_tol:
        raise IntegrationError(
            "hermiticity defect %.3e exceeds %.1e at t=%.6g"
            % (asymmetry, config.hermiticity_tol, t)
        )


def integrate(
    system,
    rho0,
    t_final: float,
    n_records: int = 201,
    config: Optional[IntegratorConfig] = None,
    observe: Optional[Callable[[np.ndarray], object]] = None,
) -> Trajectory:
    """Propagate rho0 and record n_records uniform samples.

    The requested step is shortened so samples land exactly on grid
    points; observe maps the physical density matrix to the recorded
    value (defaults to a copy of the matrix itself).
    """
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    if n_records < 2:
        raise ValueError("need at least two records")
    if config is None:
        config = default_config(system)

    segment = t_final / (n_records - 1)
    per_segment = max(1, math.ceil(segment / config.time_step - 1e-9))
    dt = segment / per_segment

    y = system.initial_state(rho0)
    times = np.linspace(0.0, t_final, n_records)
    if observe is None:
        observe = lambda rho: rho.copy()

    rho = system.physical(y)
    _check_sample(0.0, y, rho, config)
    samples = [observe(rho)]
    for i in range(1, n_records):
        for _ in range(per_segment):
            y = _rk4_step(system.rhs, y, dt)
        rho = system.physical(y)
        _check_sample(times[i], y, rho, config)
        samples.append(observe(rho))
    return Trajectory(
        times=times,
        values=np.array(samples),
        time_step=dt,
        final_state=y,
    )


@dataclass
class ConvergenceResult:
    depth: int
    matsubara_terms: int
    converged: bool
    depth_delta: float
    matsubara_delta: float
    trajectory: Trajectory
    n_runs: int


def _values(result):
    return result.values if isinstance(result, Trajectory) else np.asarray(result)


def converge(
    run: Callable[[int, int], object],
    depth: int,
    matsubara_terms: int,
    tol: float,
    max_depth: int = 14,
    max_matsubara: int = 16,
    refine_matsubara: bool = True,
) -> ConvergenceResult:
    """Refine the truncation controls until the observable stops moving.

    run(depth, matsubara_terms) must return a Trajectory (or value array)
    on a fixed time grid.  The depth is raised by two and the expansion
    length doubled until both refinements move the result by less than
    tol in the sup norm; hitting either budget cap first reports
    converged False with the best run kept.  With refine_matsubara False
    the expansion length is trusted as given (useful when it was chosen
    by a tail-weight rule) and only the depth is probed.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    cache: dict[tuple[int, int], object] = {}

    def evaluate(n, k):
        key = (n, k)
        if key not in cache:
            cache[key] = run(n, k)
        return cache[key]

    base = evaluate(depth, matsubara_terms)
    depth_delta = math.inf
    matsubara_delta = math.inf if refine_matsubara else 0.0
    while True:
        probe_depth = depth + 2
        if probe_depth > max_depth:
            converged = False
            break
        refined = evaluate(probe_depth, matsubara_terms)
        depth_delta = float(np.abs(_values(refined) - _values(base)).max())
        if depth_delta > tol:
            depth, base = probe_depth, refined
            continue

        if not refine_matsubara:
            converged = True
            break
        probe_terms = 2 * matsubara_terms
        if probe_terms > max_matsubara:
            converged = False
            break
        refined = evaluate(depth, probe_terms)
        matsubara_delta = float(np.abs(_values(refined) - _values(base)).max())
        if matsubara_delta > tol:
            matsubara_terms, base = probe_terms, refined
            continue
        converged = True
        break

    trajectory = base if isinstance(base, Trajectory) else None
    return ConvergenceResult(
        depth=depth,
        matsubara_terms=matsubara_terms,
        converged=converged,
        depth_delta=depth_delta,
        matsubara_delta=matsubara_delta,
        trajectory=trajectory,
        n_runs=len(cache),
    )
