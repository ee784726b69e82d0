"""
Linearized model of the coherent-feedback cavity magnomechanical system.

Maps physical parameters onto the 6x6 drift and diffusion matrices of the
quadrature fluctuations (dQ, dP, dx, dy, dq, dp), i.e. cavity, magnon and
mechanical mode in that order. All frequencies and rates are angular (rad/s).
"""

import logging
import math
from dataclasses import dataclass, replace, fields
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from config import Config
from services.constants import HBAR, K_B, GYROMAGNETIC, YIG_SPIN_DENSITY, DEFAULT_SPHERE_DIAMETER

logger = logging.getLogger(__name__)

COUPLING_MODES = ('direct', 'physical')

# Matrix aliases; the arrays are plain float64 numpy arrays.
DriftMatrix = np.ndarray
DiffusionMatrix = np.ndarray


class InvalidParameters(ValueError):
    pass


class DegenerateParameters(Exception):
    pass


@lru_cache(maxsize=64)
def _warn_low_quality(quality: float):
    logger.warning(
        f"Mechanical quality factor {quality:.3g} is below {Config.QUALITY_FACTOR_WARN:.0e}; "
        "the Markovian mechanical bath is a poor approximation"
    )


@dataclass(frozen=True)
class SystemParams:
    omega_c: float
    omega_d: float
    delta_c: float
    delta_m_eff: float
    kappa_c: float
    kappa_m: float
    gamma_d: float
    g_mc: float
    G_md: float = 0.0
    tau: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    omega_drive_amp: float = 0.0
    temperature: float = 0.0
    omega_m: Optional[float] = None  # magnon frequency, only enters n_m; None -> omega_c
    coupling_mode: str = 'direct'
    g_md_bare: float = 0.0
    drive_field: float = 0.0  # B0, tesla
    sphere_diameter: float = DEFAULT_SPHERE_DIAMETER

    def __post_init__(self):
        errors = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float) and not math.isfinite(value):
                errors.append(f"{f.name} must be finite (got {value})")
        if errors:
            raise InvalidParameters('; '.join(errors))

        for name in ('kappa_c', 'kappa_m', 'gamma_d', 'temperature', 'G_md',
                     'g_md_bare', 'drive_field', 'omega_drive_amp'):
            if getattr(self, name) < 0:
                errors.append(f"{name} must be >= 0 (got {getattr(self, name)})")
        if not 0.0 <= self.tau <= 1.0:
            errors.append(f"tau must lie in [0, 1] (got {self.tau})")
        if self.omega_d <= 0:
            errors.append(f"omega_d must be > 0 (got {self.omega_d})")
        if self.omega_c <= 0:
            errors.append(f"omega_c must be > 0 (got {self.omega_c})")
        if self.omega_m is not None and self.omega_m <= 0:
            errors.append(f"omega_m must be > 0 (got {self.omega_m})")
        if self.sphere_diameter <= 0:
            errors.append(f"sphere_diameter must be > 0 (got {self.sphere_diameter})")
        if self.coupling_mode not in COUPLING_MODES:
            errors.append(f"coupling_mode must be one of {COUPLING_MODES} (got {self.coupling_mode!r})")
        if errors:
            raise InvalidParameters('; '.join(errors))

        if self.gamma_d > 0:
            quality = self.omega_d / self.gamma_d
            if quality < Config.QUALITY_FACTOR_WARN:
                _warn_low_quality(quality)

    @property
    def mu(self) -> float:
        """Beam-splitter transmissivity, mu**2 + tau**2 = 1"""
        return math.sqrt(1.0 - self.tau ** 2)

    @property
    def magnon_frequency(self) -> float:
        return self.omega_c if self.omega_m is None else self.omega_m

    def replace(self, **changes) -> 'SystemParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    kappa_fb: float
    delta_fb: float
    n_c: float
    n_m: float
    n_d: float
    rabi: float
    m_s: Optional[complex]
    c_s: Optional[complex]
    q_s: Optional[float]
    G_md_eff: float


def thermal_occupation(omega: float, T: float) -> float:
    """
    Bose-Einstein occupation [exp(hbar*omega / k_B T) - 1]^-1

    Args:
        omega: angular frequency (rad/s), > 0
        T: temperature (K), >= 0

    Returns:
        Mean thermal quanta; exactly 0 at T = 0
    """
    if not (math.isfinite(omega) and math.isfinite(T)):
        raise InvalidParameters(f"Non-finite input to thermal_occupation: omega={omega}, T={T}")
    if omega <= 0:
        raise InvalidParameters(f"omega must be > 0 (got {omega})")
    if T < 0:
        raise InvalidParameters(f"T must be >= 0 (got {T})")
    if T == 0:
        return 0.0

    x = HBAR * omega / (K_B * T)
    # e^-x / (1 - e^-x): no overflow for large x
    return float(np.exp(-x) / -np.expm1(-x))


def derive_feedback_params(p: SystemParams) -> Tuple[float, float]:
    """Feedback-modified cavity decay and detuning (kappa_fb, delta_fb)"""
    kappa_fb = p.kappa_c * (1.0 - 2.0 * p.tau * math.cos(p.theta))
    delta_fb = p.delta_c + 2.0 * p.kappa_c * p.tau * math.sin(p.theta)
    return kappa_fb, delta_fb


def rabi_frequency(B0: float, sphere_diameter: float) -> float:
    """
    Drive Rabi frequency of the Kittel mode, (sqrt(5)/4) * gamma * sqrt(N) * B0

    Args:
        B0: drive field amplitude (T)
        sphere_diameter: YIG sphere diameter (m)
    """
    if not (math.isfinite(B0) and math.isfinite(sphere_diameter)):
        raise InvalidParameters("Non-finite input to rabi_frequency")
    if B0 < 0:
        raise InvalidParameters(f"Drive field must be >= 0 (got {B0})")
    if sphere_diameter <= 0:
        raise InvalidParameters(f"Sphere diameter must be > 0 (got {sphere_diameter})")

    volume = math.pi * sphere_diameter ** 3 / 6.0
    n_spins = YIG_SPIN_DENSITY * volume
    return math.sqrt(5.0) / 4.0 * GYROMAGNETIC * math.sqrt(n_spins) * B0


def steady_state_amplitudes(p: SystemParams, rabi: float,
                            approximate: bool = False) -> Tuple[complex, complex, float]:
    """
    Mean-field amplitudes (m_s, c_s, q_s) around which the dynamics is linearized.

    The exact path solves the coupled magnon/cavity pair as a 2x2 complex
    linear system. With approximate=True the large-detuning form is returned
    instead (decay rates dropped), valid when |delta_m|, |delta_fb| >> kappa.
    """
    kappa_fb, delta_fb = derive_feedback_params(p)
    cavity_drive = p.mu * p.omega_drive_amp * np.exp(1j * p.phi)

    if approximate:
        denom = p.g_mc ** 2 - p.delta_m_eff * delta_fb
        if denom == 0 or delta_fb == 0:
            raise DegenerateParameters(
                "Large-detuning amplitudes undefined: g_mc^2 = delta_m * delta_fb or delta_fb = 0"
            )
        m_s = (1j * rabi * delta_fb - p.g_mc * cavity_drive) / denom
        c_s = -(p.g_mc * m_s + cavity_drive) / delta_fb
    else:
        system = np.array([
            [1j * p.delta_m_eff + p.kappa_m, 1j * p.g_mc],
            [1j * p.g_mc, 1j * delta_fb + kappa_fb],
        ], dtype=complex)
        rhs = np.array([rabi, -1j * cavity_drive], dtype=complex)

        scale = np.max(np.abs(system))
        if scale == 0 or abs(np.linalg.det(system)) <= 1e3 * np.finfo(float).eps * scale ** 2:
            raise DegenerateParameters(
                f"Singular steady-state system (delta_m={p.delta_m_eff}, delta_fb={delta_fb}, "
                f"kappa_m={p.kappa_m}, kappa_fb={kappa_fb}, g_mc={p.g_mc})"
            )
        try:
            m_s, c_s = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as e:
            raise DegenerateParameters(f"Steady-state solve failed: {str(e)}")

    q_s = -(p.g_md_bare / p.omega_d) * abs(m_s) ** 2
    return complex(m_s), complex(c_s), float(q_s)


def effective_coupling(p: SystemParams, m_s: complex) -> float:
    """Magnitude of the enhanced magnomechanical coupling |sqrt(2) g_md m_s|"""
    return abs(math.sqrt(2.0) * p.g_md_bare * m_s)


def drive_field_for_coupling(p: SystemParams, target_G: float) -> float:
    """
    Drive field B0 giving a target |G_md| in physical mode (cavity drive off).

    m_s is linear in the Rabi frequency when Omega = 0, so one unit-field
    solve fixes the scale.
    """
    if p.g_md_bare <= 0:
        raise InvalidParameters("g_md_bare must be > 0 to reach a target coupling")
    unit = p.replace(drive_field=1.0, omega_drive_amp=0.0, coupling_mode='physical')
    m_s, _, _ = steady_state_amplitudes(unit, rabi_frequency(1.0, unit.sphere_diameter))
    unit_coupling = effective_coupling(unit, m_s)
    if unit_coupling == 0:
        raise DegenerateParameters("Unit drive produces no magnon amplitude")
    return target_G / unit_coupling


def derive_params(p: SystemParams) -> DerivedParams:
    """Compute every derived quantity for one parameter point"""
    kappa_fb, delta_fb = derive_feedback_params(p)
    n_c = thermal_occupation(p.omega_c, p.temperature)
    n_m = thermal_occupation(p.magnon_frequency, p.temperature)
    n_d = thermal_occupation(p.omega_d, p.temperature)

    if p.coupling_mode == 'physical':
        rabi = rabi_frequency(p.drive_field, p.sphere_diameter)
        m_s, c_s, q_s = steady_state_amplitudes(p, rabi)
        coupling = effective_coupling(p, m_s)
    else:
        rabi = 0.0
        m_s = c_s = q_s = None
        coupling = p.G_md

    return DerivedParams(
        kappa_fb=kappa_fb,
        delta_fb=delta_fb,
        n_c=n_c,
        n_m=n_m,
        n_d=n_d,
        rabi=rabi,
        m_s=m_s,
        c_s=c_s,
        q_s=q_s,
        G_md_eff=coupling,
    )


def build_drift(p: SystemParams, d: DerivedParams) -> DriftMatrix:
    """Drift matrix F for (dQ, dP, dx, dy, dq, dp)"""
    k, dfb, g, km, dm = d.kappa_fb, d.delta_fb, p.g_mc, p.kappa_m, p.delta_m_eff
    G, wd, gd = d.G_md_eff, p.omega_d, p.gamma_d

    return np.array([
        [-k, dfb, 0.0, g, 0.0, 0.0],
        [-dfb, -k, -g, 0.0, 0.0, 0.0],
        [0.0, g, -km, dm, -G, 0.0],
        [-g, 0.0, -dm, -km, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, wd],
        [0.0, 0.0, 0.0, G, -wd, -gd],
    ], dtype=float)


def build_diffusion(p: SystemParams, d: DerivedParams) -> DiffusionMatrix:
    """
    Diagonal diffusion matrix D.

    The cavity entries carry the feedback noise factor |1 - tau e^{i theta}|^2,
    which equals (1 - tau)^2 at theta = 0.
    """
    feedback_factor = 1.0 - 2.0 * p.tau * math.cos(p.theta) + p.tau ** 2
    cavity = p.kappa_c * p.mu ** 2 * feedback_factor * (2.0 * d.n_c + 1.0)
    magnon = p.kappa_m * (2.0 * d.n_m + 1.0)
    mechanics = p.gamma_d * (2.0 * d.n_d + 1.0)
    return np.diag([cavity, cavity, magnon, magnon, 0.0, mechanics])
