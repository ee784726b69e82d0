import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    # Execution
    WORKERS = int(os.getenv('MAGNOMECH_WORKERS', 1))
    LOG_LEVEL = os.getenv('MAGNOMECH_LOG_LEVEL', 'INFO')

    # Numerical tolerances
    SYMPLECTIC_PAIRING_TOL = float(os.getenv('SYMPLECTIC_PAIRING_TOL', 1e-9))
    LYAPUNOV_RESIDUAL_TOL = float(os.getenv('LYAPUNOV_RESIDUAL_TOL', 1e-10))
    SYMMETRY_TOL = float(os.getenv('SYMMETRY_TOL', 1e-12))
    MONOGAMY_TOL = float(os.getenv('MONOGAMY_TOL', 1e-9))
    DISCRIMINANT_TOL = float(os.getenv('DISCRIMINANT_TOL', 1e-12))
    NEGATIVITY_CLAMP_TOL = float(os.getenv('NEGATIVITY_CLAMP_TOL', 1e-9))  # 2*nu within this of 1 counts as separable

    # Covariance integrator
    RK4_STEP_BOUND = float(os.getenv('RK4_STEP_BOUND', 0.05))  # step * spectral radius
    RK4_FORCED_STEP_FACTOR = float(os.getenv('RK4_FORCED_STEP_FACTOR', 10))

    # Sweep defaults
    GRID_POINTS_2D = int(os.getenv('GRID_POINTS_2D', 101))
    GRID_POINTS_1D = int(os.getenv('GRID_POINTS_1D', 201))
    DYNAMICS_T_MAX = float(os.getenv('DYNAMICS_T_MAX', 3e-6))  # seconds
    DYNAMICS_OUTPUT_STEP = float(os.getenv('DYNAMICS_OUTPUT_STEP', 1e-9))

    # Output
    CSV_SIGNIFICANT_DIGITS = int(os.getenv('CSV_SIGNIFICANT_DIGITS', 12))

    # Model sanity
    QUALITY_FACTOR_WARN = float(os.getenv('QUALITY_FACTOR_WARN', 1e3))
