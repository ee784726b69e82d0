"""
Entanglement measures on three-mode Gaussian covariance matrices.

Mode order is (cavity, magnon, mechanics). Bipartite entanglement is the
logarithmic negativity E_N = max[0, -ln(2 nu_min)] of the partially transposed
covariance matrix; the contangle is E_N squared.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from config import Config
from services.linalg import LinalgError, symplectic_eigenvalues

logger = logging.getLogger(__name__)

CAVITY, MAGNON, MECHANICS = 0, 1, 2
MODES = (CAVITY, MAGNON, MECHANICS)
MODE_LETTERS = {CAVITY: 'c', MAGNON: 'm', MECHANICS: 'd'}


class NegativeDiscriminant(LinalgError):
    pass


class InvalidModeSet(ValueError):
    pass


class BipartitionLabel(Enum):
    OM = 'om'  # cavity | magnon
    OMECH = 'oM'  # cavity | mechanics
    MMECH = 'mM'  # magnon | mechanics
    C_MD = 'c|md'
    M_CD = 'm|cd'
    D_CM = 'd|cm'

    @property
    def modes(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return _BIPARTITION_MODES[self]


_BIPARTITION_MODES = {
    BipartitionLabel.OM: ((CAVITY,), (MAGNON,)),
    BipartitionLabel.OMECH: ((CAVITY,), (MECHANICS,)),
    BipartitionLabel.MMECH: ((MAGNON,), (MECHANICS,)),
    BipartitionLabel.C_MD: ((CAVITY,), (MAGNON, MECHANICS)),
    BipartitionLabel.M_CD: ((MAGNON,), (CAVITY, MECHANICS)),
    BipartitionLabel.D_CM: ((MECHANICS,), (CAVITY, MAGNON)),
}


@dataclass(frozen=True)
class EntanglementRecord:
    e_om: float
    e_oM: float
    e_mM: float
    r_min: Optional[float]
    r_pivots: Dict[str, float] = field(default_factory=dict)
    stability_margin: float = float('nan')

    @property
    def monogamy_ok(self) -> bool:
        return self.r_min is not None


def _check_modes(modes: Iterable[int], n_modes: int) -> Tuple[int, ...]:
    modes = tuple(modes)
    if not modes:
        raise InvalidModeSet("Mode set must not be empty")
    if len(set(modes)) != len(modes):
        raise InvalidModeSet(f"Duplicate modes in {modes}")
    for mode in modes:
        if not 0 <= mode < n_modes:
            raise InvalidModeSet(f"Mode {mode} out of range for {n_modes} modes")
    return modes


def reduce(gamma: np.ndarray, modes: Iterable[int]) -> np.ndarray:
    """Covariance matrix of the selected modes, in the given order"""
    n_modes = gamma.shape[0] // 2
    modes = _check_modes(modes, n_modes)
    index = [2 * mode + quadrature for mode in modes for quadrature in (0, 1)]
    return gamma[np.ix_(index, index)]


def partial_transpose(gamma: np.ndarray, transposed_modes: Iterable[int]) -> np.ndarray:
    """P G P with P flipping the momentum sign of every transposed mode"""
    n_modes = gamma.shape[0] // 2
    transposed_modes = tuple(transposed_modes)
    if transposed_modes:
        _check_modes(transposed_modes, n_modes)
    signs = np.ones(2 * n_modes)
    for mode in transposed_modes:
        signs[2 * mode + 1] = -1.0
    return gamma * np.outer(signs, signs)


def _negativity_from_nu(nu_min: float) -> float:
    if nu_min <= 0:
        raise NegativeDiscriminant(f"Non-positive symplectic eigenvalue {nu_min}")
    # rounding noise around the separability threshold 2 nu = 1 reads as zero
    if 2.0 * nu_min >= 1.0 - Config.NEGATIVITY_CLAMP_TOL:
        return 0.0
    return -math.log(2.0 * nu_min)


def logneg_two_mode(gamma4: np.ndarray, tol: Optional[float] = None) -> float:
    """
    Closed-form two-mode logarithmic negativity.

    sigma = det A + det B - 2 det C is the partially transposed seralian; the
    smallest symplectic eigenvalue is taken in the cancellation-free form
    nu^2 = 2 det G / (sigma + sqrt(sigma^2 - 4 det G)).
    """
    tol = Config.DISCRIMINANT_TOL if tol is None else tol
    gamma4 = np.asarray(gamma4, dtype=float)
    if gamma4.shape != (4, 4):
        raise ValueError(f"Expected a 4x4 covariance matrix, got {gamma4.shape}")

    A = gamma4[0:2, 0:2]
    B = gamma4[2:4, 2:4]
    C = gamma4[0:2, 2:4]
    sigma = np.linalg.det(A) + np.linalg.det(B) - 2.0 * np.linalg.det(C)
    det_gamma = np.linalg.det(gamma4)

    discriminant = sigma ** 2 - 4.0 * det_gamma
    if discriminant < 0:
        if discriminant < -tol * sigma ** 2:
            raise NegativeDiscriminant(
                f"sigma^2 - 4 det(Gamma) = {discriminant:.3e} < 0: unphysical covariance matrix"
            )
        discriminant = 0.0

    denominator = sigma + math.sqrt(discriminant)
    if denominator <= 0 or det_gamma <= 0:
        raise NegativeDiscriminant("Covariance matrix is not positive definite")
    nu_min = math.sqrt(2.0 * det_gamma / denominator)
    return _negativity_from_nu(nu_min)


def logneg_two_mode_spectral(gamma4: np.ndarray) -> float:
    """Two-mode logarithmic negativity from the full symplectic spectrum"""
    nu = symplectic_eigenvalues(partial_transpose(np.asarray(gamma4, dtype=float), [1]))
    return _negativity_from_nu(float(nu[0]))


def logneg_one_vs_rest(gamma: np.ndarray, pivot: int) -> float:
    """Logarithmic negativity of the pivot mode against the other two"""
    _check_modes([pivot], gamma.shape[0] // 2)
    nu = symplectic_eigenvalues(partial_transpose(gamma, [pivot]))
    return _negativity_from_nu(float(nu[0]))


def contangle(negativity: float) -> float:
    return negativity ** 2


def residual_contangle(gamma: np.ndarray, pivot: int, partners: Tuple[int, int]) -> float:
    """R^{i|jk} = C_{i|jk} - C_{i|j} - C_{i|k} (raw, not clamped)"""
    j, k = partners
    if sorted((pivot, j, k)) != list(MODES):
        raise InvalidModeSet(f"({pivot}, {j}, {k}) is not a permutation of the three modes")

    c_split = contangle(logneg_one_vs_rest(gamma, pivot))
    c_j = contangle(logneg_two_mode(reduce(gamma, (pivot, j))))
    c_k = contangle(logneg_two_mode(reduce(gamma, (pivot, k))))
    return c_split - c_j - c_k


def residual_pivots(gamma: np.ndarray) -> Dict[str, float]:
    """Raw residual contangles keyed by bipartition label (c|md, m|cd, d|cm)"""
    pivots = {}
    for label in (BipartitionLabel.C_MD, BipartitionLabel.M_CD, BipartitionLabel.D_CM):
        (pivot,), partners = label.modes
        pivots[label.value] = residual_contangle(gamma, pivot, partners)
    return pivots


def _clamped_minimum(pivots: Dict[str, float], tol: float) -> Optional[float]:
    values = list(pivots.values())
    if min(values) < -tol:
        return None
    return max(0.0, min(values))


def min_residual_contangle(gamma: np.ndarray, tol: Optional[float] = None) -> float:
    """
    Minimum residual contangle over the three pivots.

    Values within -tol of zero are clamped to zero; a pivot further below
    zero violates monogamy and the raw minimum is returned with a warning.
    """
    tol = Config.MONOGAMY_TOL if tol is None else tol
    pivots = residual_pivots(gamma)
    clamped = _clamped_minimum(pivots, tol)
    if clamped is None:
        logger.warning(f"Monogamy violated beyond tolerance: {pivots}")
        return min(pivots.values())
    return clamped


def evaluate_record(gamma: np.ndarray, margin: float, tol: Optional[float] = None) -> EntanglementRecord:
    """All bipartite negativities and residual contangles at one point"""
    tol = Config.MONOGAMY_TOL if tol is None else tol
    pivots = residual_pivots(gamma)
    return EntanglementRecord(
        e_om=logneg_two_mode(reduce(gamma, (CAVITY, MAGNON))),
        e_oM=logneg_two_mode(reduce(gamma, (CAVITY, MECHANICS))),
        e_mM=logneg_two_mode(reduce(gamma, (MAGNON, MECHANICS))),
        r_min=_clamped_minimum(pivots, tol),
        r_pivots=pivots,
        stability_margin=margin,
    )
