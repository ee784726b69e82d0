"""
Small dense kernels for Gaussian covariance matrices.

Covariance matrices are real symmetric 2n x 2n arrays in (q1, p1, q2, p2, ...)
ordering with vacuum variance 1/2.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from config import Config

logger = logging.getLogger(__name__)

CovarianceMatrix = np.ndarray


class LinalgError(Exception):
    pass


class UnstableDrift(LinalgError):
    pass


class SingularSystem(LinalgError):
    pass


class StepTooLarge(LinalgError):
    pass


class NonFiniteState(LinalgError):
    pass


class AsymmetricInput(LinalgError):
    pass


class NonPairedSpectrum(LinalgError):
    pass


class EigenvalueFailure(LinalgError):
    pass


def symplectic_form(n_modes: int) -> np.ndarray:
    """Omega = direct sum of n blocks [[0, 1], [-1, 0]]"""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def vacuum_cm(n_modes: int = 3) -> CovarianceMatrix:
    return 0.5 * np.eye(2 * n_modes)


def identity_cm(n_modes: int = 3) -> CovarianceMatrix:
    return np.eye(2 * n_modes)


def symmetrize(gamma: np.ndarray) -> CovarianceMatrix:
    return 0.5 * (gamma + gamma.T)


def lyapunov_residual(F: np.ndarray, gamma: np.ndarray, D: np.ndarray) -> float:
    """||F G + G F^T + D||_F / ||D||_F (absolute norm when D = 0)"""
    residual = np.linalg.norm(F @ gamma + gamma @ F.T + D)
    scale = np.linalg.norm(D)
    return float(residual / scale) if scale > 0 else float(residual)


def stability_margin(F: np.ndarray) -> float:
    """Largest real part of the drift spectrum; negative means stable"""
    if not np.all(np.isfinite(F)):
        raise NonFiniteState("Drift matrix has non-finite entries")
    try:
        eigenvalues = np.linalg.eigvals(F)
    except np.linalg.LinAlgError as e:
        raise EigenvalueFailure(f"Eigenvalue iteration failed: {str(e)}")
    return float(np.max(eigenvalues.real))


def solve_lyapunov_steady(F: np.ndarray, D: np.ndarray,
                          tol: Optional[float] = None) -> CovarianceMatrix:
    """
    Steady-state covariance from F G + G F^T + D = 0.

    Solved through the vectorized system (I (x) F + F (x) I) vec(G) = -vec(D);
    one refinement pass is applied if the first residual misses the tolerance.

    Raises:
        UnstableDrift: F has an eigenvalue with non-negative real part
        SingularSystem: the linear system is numerically defective
    """
    tol = Config.LYAPUNOV_RESIDUAL_TOL if tol is None else tol

    margin = stability_margin(F)
    if margin >= 0:
        raise UnstableDrift(f"Drift matrix is not stable (max Re eig = {margin:.6g})")

    dim = F.shape[0]
    identity = np.eye(dim)
    operator = np.kron(identity, F) + np.kron(F, identity)
    rhs = -D.reshape(-1, order='F')

    try:
        lu = scipy.linalg.lu_factor(operator)
        vec = scipy.linalg.lu_solve(lu, rhs)
        gamma = symmetrize(vec.reshape(dim, dim, order='F'))

        residual = lyapunov_residual(F, gamma, D)
        if residual > tol:
            correction = scipy.linalg.lu_solve(lu, -(F @ gamma + gamma @ F.T + D).reshape(-1, order='F'))
            gamma = symmetrize(gamma + correction.reshape(dim, dim, order='F'))
            residual = lyapunov_residual(F, gamma, D)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"Lyapunov solve failed: {str(e)}")

    if not np.all(np.isfinite(gamma)) or residual > tol:
        raise SingularSystem(f"Lyapunov residual {residual:.3e} exceeds tolerance {tol:.1e}")

    return gamma


def default_step(F: np.ndarray, freq_floor: float = 0.0) -> float:
    """Largest RK4 step with step * max(|eig(F)|, freq_floor) <= RK4_STEP_BOUND"""
    rate = max(float(np.max(np.abs(np.linalg.eigvals(F)))), freq_floor)
    if rate == 0:
        return math.inf
    return Config.RK4_STEP_BOUND / rate


def _lyapunov_rhs(F: np.ndarray, D: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return F @ gamma + gamma @ F.T + D


def evolve_cm(F: np.ndarray, D: np.ndarray, gamma0: np.ndarray, t_grid: Sequence[float],
              step: Optional[float] = None, freq_floor: float = 0.0) -> List[CovarianceMatrix]:
    """
    Integrate dG/dt = F G + G F^T + D with classical fixed-step RK4.

    Args:
        F, D: drift and diffusion matrices
        gamma0: covariance at t = 0
        t_grid: output times (s), strictly increasing, starting at 0
        step: forced internal step; None picks the default bound
        freq_floor: extra frequency entering the step bound (e.g. omega_d)

    Returns:
        Covariance matrix at each grid time (the first is gamma0)
    """
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0:
        raise ValueError("t_grid must be a non-empty 1-D sequence starting at 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    bound_step = default_step(F, freq_floor)
    if step is None:
        max_step = bound_step
    else:
        if step <= 0 or not math.isfinite(step):
            raise ValueError(f"step must be positive and finite (got {step})")
        if step > Config.RK4_FORCED_STEP_FACTOR * bound_step:
            raise StepTooLarge(
                f"step {step:.3e} s is more than {Config.RK4_FORCED_STEP_FACTOR:g}x "
                f"the RK4 bound {bound_step:.3e} s"
            )
        max_step = step

    gamma = symmetrize(np.array(gamma0, dtype=float))
    states = [gamma.copy()]

    for t_start, t_end in zip(times[:-1], times[1:]):
        interval = t_end - t_start
        n_sub = max(1, int(math.ceil(interval / max_step - 1e-12))) if math.isfinite(max_step) else 1
        h = interval / n_sub
        for _ in range(n_sub):
            k1 = _lyapunov_rhs(F, D, gamma)
            k2 = _lyapunov_rhs(F, D, gamma + 0.5 * h * k1)
            k3 = _lyapunov_rhs(F, D, gamma + 0.5 * h * k2)
            k4 = _lyapunov_rhs(F, D, gamma + h * k3)
            gamma = symmetrize(gamma + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(gamma)):
            raise NonFiniteState(f"Covariance overflowed at t = {t_end:.6g} s")
        states.append(gamma.copy())

    return states


def propagate_cm_exact(F: np.ndarray, D: np.ndarray, gamma0: np.ndarray, t: float) -> CovarianceMatrix:
    """Closed-form G(t) = e^{Ft} (G0 - Gss) e^{F^T t} + Gss for a stable drift"""
    steady = solve_lyapunov_steady(F, D)
    propagator = scipy.linalg.expm(F * t)
    return symmetrize(propagator @ (gamma0 - steady) @ propagator.T + steady)


def symplectic_eigenvalues(gamma: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """
    Symplectic spectrum {nu_k} of a 2n x 2n covariance matrix, ascending.

    Uses the eigenvalues of Omega G, which come in pairs +-i nu_k.

    Raises:
        AsymmetricInput: gamma is not symmetric
        NonPairedSpectrum: the spectrum does not split into +-i nu pairs
    """
    tol = Config.SYMPLECTIC_PAIRING_TOL if tol is None else tol
    gamma = np.asarray(gamma, dtype=float)
    dim = gamma.shape[0]
    if gamma.ndim != 2 or gamma.shape[1] != dim or dim % 2:
        raise ValueError(f"Expected a 2n x 2n matrix, got shape {gamma.shape}")

    scale = np.max(np.abs(gamma))
    if np.max(np.abs(gamma - gamma.T)) > Config.SYMMETRY_TOL * max(scale, 1.0):
        raise AsymmetricInput("Covariance matrix is not symmetric")
    if not np.all(np.isfinite(gamma)):
        raise NonFiniteState("Covariance matrix has non-finite entries")

    try:
        eigenvalues = np.linalg.eigvals(symplectic_form(dim // 2) @ gamma)
    except np.linalg.LinAlgError as e:
        raise EigenvalueFailure(f"Eigenvalue iteration failed: {str(e)}")

    magnitude = np.max(np.abs(eigenvalues))
    if np.any(np.abs(eigenvalues.real) > tol * magnitude):
        raise NonPairedSpectrum("Omega*Gamma has eigenvalues off the imaginary axis")

    upper = np.sort(np.abs(eigenvalues[eigenvalues.imag > 0]))
    lower = np.sort(np.abs(eigenvalues[eigenvalues.imag < 0]))
    if upper.size != dim // 2 or lower.size != dim // 2:
        raise NonPairedSpectrum(f"Expected {dim // 2} conjugate pairs, got {upper.size}/{lower.size}")
    if np.any(np.abs(upper - lower) > tol * np.maximum(upper, lower)):
        raise NonPairedSpectrum("Symplectic eigenvalues do not pair within tolerance")

    return 0.5 * (upper + lower)
