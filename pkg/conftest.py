"""
Shared helpers for the test suites: reference parameter sets and Gaussian
state constructions.
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

# quick_test.py matches the *_test.py pattern but is a script
collect_ignore = ['quick_test.py']

from services.constants import TWO_PI
from services.model import SystemParams

MHZ = TWO_PI * 1e6
OMEGA_D = 10 * MHZ


def baseline_params(**changes) -> SystemParams:
    """Published baseline: Delta_c = -omega_d, Delta_m = 0.9 omega_d, tau = 0.1, T = 10 mK"""
    params = SystemParams(
        omega_c=TWO_PI * 10e9,
        omega_d=OMEGA_D,
        delta_c=-OMEGA_D,
        delta_m_eff=0.9 * OMEGA_D,
        kappa_c=1 * MHZ,
        kappa_m=1 * MHZ,
        gamma_d=TWO_PI * 100.0,
        g_mc=3.2 * MHZ,
        G_md=3.2 * MHZ,
        tau=0.1,
        theta=0.0,
        temperature=10e-3,
    )
    return params.replace(**changes)


def toy_params(**changes) -> SystemParams:
    """Same ratios as the baseline in units of omega_d = 1, with a lossier oscillator"""
    params = SystemParams(
        omega_c=100.0,
        omega_d=1.0,
        delta_c=-1.0,
        delta_m_eff=0.9,
        kappa_c=0.1,
        kappa_m=0.1,
        gamma_d=0.05,
        g_mc=0.32,
        G_md=0.32,
        tau=0.1,
        temperature=0.0,
    )
    return params.replace(**changes)


def two_mode_squeezed_cm(r: float) -> np.ndarray:
    a = 0.5 * np.cosh(2 * r) * np.eye(2)
    c = 0.5 * np.sinh(2 * r) * np.diag([1.0, -1.0])
    return np.block([[a, c], [c, a]])


def rotation(phi: float) -> np.ndarray:
    return np.array([[np.cos(phi), np.sin(phi)], [-np.sin(phi), np.cos(phi)]])


def local_symplectic(blocks) -> np.ndarray:
    """Direct sum of single-mode 2x2 symplectic blocks"""
    n = len(blocks)
    out = np.zeros((2 * n, 2 * n))
    for i, block in enumerate(blocks):
        out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = block
    return out


def _embed_two_mode(S4: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    index = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    out = np.eye(2 * n)
    out[np.ix_(index, index)] = S4
    return out


def random_symplectic(n: int, rng: np.random.Generator) -> np.ndarray:
    """Product of random rotations, squeezers, beam splitters and two-mode squeezers"""
    S = np.eye(2 * n)
    for _ in range(3):
        blocks = []
        for _ in range(n):
            s = rng.uniform(-0.5, 0.5)
            blocks.append(rotation(rng.uniform(0, 2 * np.pi)) @ np.diag([np.exp(-s), np.exp(s)]))
        S = local_symplectic(blocks) @ S
        for i in range(n):
            for j in range(i + 1, n):
                theta = rng.uniform(0, np.pi)
                bs = np.block([[np.cos(theta) * np.eye(2), np.sin(theta) * np.eye(2)],
                               [-np.sin(theta) * np.eye(2), np.cos(theta) * np.eye(2)]])
                r = rng.uniform(0, 0.6)
                tms = np.block([[np.cosh(r) * np.eye(2), np.sinh(r) * np.diag([1.0, -1.0])],
                                [np.sinh(r) * np.diag([1.0, -1.0]), np.cosh(r) * np.eye(2)]])
                S = _embed_two_mode(tms @ bs, i, j, n) @ S
    return S


def random_physical_cm(n: int, rng: np.random.Generator) -> np.ndarray:
    """S diag(nu) S^T with symplectic eigenvalues nu >= 1/2"""
    nu = rng.uniform(0.5, 2.0, size=n)
    S = random_symplectic(n, rng)
    gamma = S @ np.diag(np.repeat(nu, 2)) @ S.T
    return 0.5 * (gamma + gamma.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
