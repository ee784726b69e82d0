"""
Parameter-grid and time-grid drivers for the model -> linalg -> entanglement pipeline.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import Config
from services import __version__
from services.constants import TWO_PI
from services.entanglement import EntanglementRecord, evaluate_record
from services.linalg import (
    evolve_cm,
    identity_cm,
    solve_lyapunov_steady,
    stability_margin,
    lyapunov_residual,
    symplectic_eigenvalues,
    vacuum_cm,
)
from services.model import InvalidParameters, SystemParams, build_diffusion, build_drift, derive_params

logger = logging.getLogger(__name__)

SWEEPABLE = ('delta_c', 'delta_m_eff', 'tau', 'theta', 'temperature', 'G_md')
MODES = ('steady', 'dynamics')
INITIAL_STATES = ('identity', 'vacuum')
SCENARIO_SETTINGS = ('mode', 't_max', 'output_step', 'integration_step', 'gamma0', 'name')
RECORD_COLUMNS = ['E_om', 'E_oM', 'E_mM', 'R_min', 'stability_margin', 'status']

PRESET_NAMES = ('fig2', 'fig3a', 'fig3b', 'fig3c', 'fig4a', 'fig4b', 'fig5')


class ScenarioInvalid(ValueError):
    pass


class UnknownPreset(KeyError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class Scenario:
    base: SystemParams
    axes: Tuple[Axis, ...] = ()
    mode: str = 'steady'
    t_max: float = Config.DYNAMICS_T_MAX
    output_step: float = Config.DYNAMICS_OUTPUT_STEP
    integration_step: Optional[float] = None
    gamma0: str = 'identity'
    name: str = 'custom'

    def __post_init__(self):
        errors = []
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.gamma0 not in INITIAL_STATES:
            errors.append(f"gamma0 must be one of {INITIAL_STATES} (got {self.gamma0!r})")
        if len(self.axes) > 2:
            errors.append(f"At most 2 axes allowed (got {len(self.axes)})")
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            errors.append(f"Axis parameters must be distinct (got {names})")
        for axis in self.axes:
            errors.extend(_axis_errors(axis))
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            errors.append(f"t_max must be positive (got {self.t_max})")
        if not (self.output_step > 0 and math.isfinite(self.output_step)):
            errors.append(f"output_step must be positive (got {self.output_step})")
        if self.integration_step is not None and not self.integration_step > 0:
            errors.append(f"integration_step must be positive (got {self.integration_step})")
        if errors:
            raise ScenarioInvalid('; '.join(errors))

    @property
    def axis_names(self) -> Tuple[str, ...]:
        return tuple(axis.name for axis in self.axes)

    def grid_points(self) -> List[Tuple[Tuple[float, ...], SystemParams]]:
        """(axis values, parameters) per grid point; the first axis varies slowest"""
        if not self.axes:
            return [((), self.base)]
        points = []
        for values in itertools.product(*(axis.values() for axis in self.axes)):
            values = tuple(float(v) for v in values)
            params = self.base.replace(**dict(zip(self.axis_names, values)))
            points.append((values, params))
        return points

    def with_overrides(self, overrides: Mapping[str, Union[float, str, Axis, None]]) -> 'Scenario':
        """
        Apply key=value overrides.

        A scalar for a swept parameter pins it and removes its axis; an Axis
        value installs or replaces the axis for that parameter.
        """
        base_changes = {}
        settings = {}
        axes = list(self.axes)
        for key, value in overrides.items():
            if isinstance(value, Axis):
                if key not in SWEEPABLE:
                    raise ScenarioInvalid(f"{key} cannot be swept (sweepable: {', '.join(SWEEPABLE)})")
                axes = [a for a in axes if a.name != key] + [replace(value, name=key)]
            elif key in SCENARIO_SETTINGS:
                settings[key] = value
            else:
                base_changes[key] = value
                axes = [a for a in axes if a.name != key]
        try:
            base = self.base.replace(**base_changes)
        except TypeError as e:
            raise ScenarioInvalid(f"Unknown parameter in overrides: {str(e)}")
        except InvalidParameters as e:
            raise ScenarioInvalid(str(e))
        return replace(self, base=base, axes=tuple(axes), **settings)

    def without_axes(self) -> 'Scenario':
        return replace(self, axes=())


def _axis_errors(axis: Axis) -> List[str]:
    errors = []
    if axis.name not in SWEEPABLE:
        errors.append(f"{axis.name} cannot be swept (sweepable: {', '.join(SWEEPABLE)})")
    if axis.count < 2:
        errors.append(f"Axis {axis.name} needs count >= 2 (got {axis.count})")
    if not (math.isfinite(axis.min) and math.isfinite(axis.max)):
        errors.append(f"Axis {axis.name} range must be finite")
    low, high = min(axis.min, axis.max), max(axis.min, axis.max)
    if axis.name == 'tau' and (low < 0 or high > 1):
        errors.append(f"Axis tau must stay within [0, 1] (got {axis.min}..{axis.max})")
    if axis.name in ('temperature', 'G_md') and low < 0:
        errors.append(f"Axis {axis.name} must be non-negative (got {axis.min}..{axis.max})")
    return errors


@dataclass
class PointRecord:
    axis_values: Tuple[float, ...]
    status: str
    record: Optional[EntanglementRecord] = None
    stability_margin: float = float('nan')
    residual: Optional[float] = None
    min_symplectic: Optional[float] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    axis_names: Tuple[str, ...]
    records: List[PointRecord]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def point_count(self) -> int:
        return len(self.records)

    @property
    def unstable_count(self) -> int:
        return sum(1 for r in self.records if r.status == 'unstable')

    @property
    def error_count(self) -> int:
        return sum(1 for r in self.records if r.status == 'error')

    @property
    def unstable_fraction(self) -> float:
        return self.unstable_count / self.point_count if self.records else 0.0

    def to_frame(self) -> pd.DataFrame:
        """One row per record, grid order; missing measures are NaN"""
        rows = []
        for point in self.records:
            row = dict(zip(self.axis_names, point.axis_values))
            rec = point.record
            row['E_om'] = rec.e_om if rec else np.nan
            row['E_oM'] = rec.e_oM if rec else np.nan
            row['E_mM'] = rec.e_mM if rec else np.nan
            row['R_min'] = rec.r_min if rec and rec.r_min is not None else np.nan
            row['stability_margin'] = point.stability_margin
            row['status'] = point.status
            rows.append(row)
        return pd.DataFrame(rows, columns=list(self.axis_names) + RECORD_COLUMNS)


def evaluate_steady_point(params: SystemParams, axis_values: Tuple[float, ...] = ()) -> PointRecord:
    """Full steady-state pipeline at one parameter point; never raises"""
    try:
        derived = derive_params(params)
        F = build_drift(params, derived)
        D = build_diffusion(params, derived)
        margin = stability_margin(F)
        if margin >= 0:
            return PointRecord(axis_values=axis_values, status='unstable', stability_margin=margin)

        gamma = solve_lyapunov_steady(F, D)
        record = evaluate_record(gamma, margin)
        return PointRecord(
            axis_values=axis_values,
            status='ok',
            record=record,
            stability_margin=margin,
            residual=lyapunov_residual(F, gamma, D),
            min_symplectic=float(symplectic_eigenvalues(gamma)[0]),
        )
    except Exception as e:
        logger.error(f"Point {axis_values} failed: {str(e)}")
        return PointRecord(axis_values=axis_values, status='error', error=str(e))


class SweepRunner:
    def __init__(self, workers: Optional[int] = None):
        self.workers = Config.WORKERS if workers is None else workers
        if self.workers < 1:
            raise ValueError(f"Worker count must be >= 1 (got {self.workers})")

    def _evaluate_all(self, points) -> List[PointRecord]:
        if self.workers == 1:
            return [evaluate_steady_point(params, values) for values, params in points]
        # joblib returns results in submission order
        return Parallel(n_jobs=self.workers)(
            delayed(evaluate_steady_point)(params, values) for values, params in points
        )

    def _metadata(self, scenario: Scenario, mode: str) -> Dict[str, Any]:
        return {
            'scenario': scenario,
            'mode': mode,
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'code_version': __version__,
        }

    def run_steady_sweep(self, scenario: Scenario) -> SweepResult:
        """
        Steady-state entanglement at every grid point of the scenario.

        Unstable points are recorded with status 'unstable' and no measures;
        failing points with status 'error'.
        """
        if scenario.mode != 'steady':
            raise ScenarioInvalid(f"run_steady_sweep needs a steady scenario (got {scenario.mode!r})")

        points = scenario.grid_points()
        logger.info(f"Steady sweep '{scenario.name}': {len(points)} points, {self.workers} worker(s)")
        start = time.time()
        records = self._evaluate_all(points)

        result = SweepResult(scenario.axis_names, records, self._metadata(scenario, 'steady'))
        result.metadata['wall_time_s'] = time.time() - start
        if result.unstable_count:
            logger.warning(
                f"{result.unstable_count}/{result.point_count} points unstable "
                f"({100 * result.unstable_fraction:.1f}%)"
            )
        return result

    def run_temperature_scan(self, scenario: Scenario) -> SweepResult:
        """
        Steady sweep along a temperature axis, reporting for each bipartition the
        first grid temperature at which its negativity has dropped to zero.
        """
        if 'temperature' not in scenario.axis_names:
            raise ScenarioInvalid("Temperature scan needs a temperature axis")

        result = self.run_steady_sweep(scenario)
        result.metadata['zero_crossings'] = temperature_zero_crossings(result)
        for crossing in result.metadata['zero_crossings']:
            logger.info(f"Entanglement death temperatures {crossing}")
        return result

    def run_dynamics(self, scenario: Scenario, keep_covariances: bool = False) -> SweepResult:
        """
        Time evolution of the covariance matrix from the scenario's initial state,
        with all entanglement measures evaluated at every output time.
        """
        if scenario.mode != 'dynamics':
            raise ScenarioInvalid(f"run_dynamics needs a dynamics scenario (got {scenario.mode!r})")
        if scenario.axes:
            raise ScenarioInvalid("Dynamics runs at a single parameter point; remove the axes")

        params = scenario.base
        derived = derive_params(params)
        F = build_drift(params, derived)
        D = build_diffusion(params, derived)
        margin = stability_margin(F)

        n_steps = int(round(scenario.t_max / scenario.output_step))
        t_grid = np.linspace(0.0, n_steps * scenario.output_step, n_steps + 1)
        gamma0 = identity_cm() if scenario.gamma0 == 'identity' else vacuum_cm()

        logger.info(f"Dynamics '{scenario.name}': {len(t_grid)} output times up to {t_grid[-1]:.3e} s")
        start = time.time()
        states = evolve_cm(F, D, gamma0, t_grid, step=scenario.integration_step, freq_floor=params.omega_d)

        records = []
        for t, gamma in zip(t_grid, states):
            try:
                record = evaluate_record(gamma, margin)
                records.append(PointRecord(axis_values=(float(t),), status='ok', record=record,
                                           stability_margin=margin))
            except Exception as e:
                logger.error(f"Entanglement evaluation failed at t = {t:.3e} s: {str(e)}")
                records.append(PointRecord(axis_values=(float(t),), status='error',
                                           stability_margin=margin, error=str(e)))

        result = SweepResult(('t',), records, self._metadata(scenario, 'dynamics'))
        result.metadata['wall_time_s'] = time.time() - start
        result.metadata['stability_margin'] = margin
        if keep_covariances:
            result.metadata['covariances'] = states
        return result


def temperature_zero_crossings(result: SweepResult) -> List[Dict[str, Any]]:
    """
    First temperature, per slice of the other axis, at which each bipartite
    negativity is zero after having been positive (None if it never vanishes).
    """
    t_index = result.axis_names.index('temperature')
    others = [i for i in range(len(result.axis_names)) if i != t_index]

    slices: Dict[Tuple[float, ...], List[PointRecord]] = {}
    for point in result.records:
        key = tuple(point.axis_values[i] for i in others)
        slices.setdefault(key, []).append(point)

    crossings = []
    for key, points in slices.items():
        points = sorted(points, key=lambda p: p.axis_values[t_index])
        entry: Dict[str, Any] = {'slice': {result.axis_names[i]: v for i, v in zip(others, key)}}
        for label, attr in (('E_om', 'e_om'), ('E_oM', 'e_oM'), ('E_mM', 'e_mM')):
            entry[label] = None
            seen_positive = False
            for point in points:
                value = getattr(point.record, attr) if point.record else None
                if value is not None and value > 0:
                    seen_positive = True
                elif seen_positive and value == 0:
                    entry[label] = point.axis_values[t_index]
                    break
        crossings.append(entry)
    return crossings


def _mhz(value: float) -> float:
    return TWO_PI * value * 1e6


def _baseline() -> SystemParams:
    omega_d = _mhz(10.0)
    return SystemParams(
        omega_c=TWO_PI * 10e9,
        omega_d=omega_d,
        delta_c=-omega_d,
        delta_m_eff=0.9 * omega_d,
        kappa_c=_mhz(1.0),
        kappa_m=_mhz(1.0),
        gamma_d=TWO_PI * 100.0,
        g_mc=_mhz(3.2),
        G_md=_mhz(3.2),
        tau=0.1,
        theta=0.0,
        temperature=10e-3,
    )


def make_preset(name: str) -> Scenario:
    """Scenario reproducing one of the published figure sweeps"""
    if name not in PRESET_NAMES:
        raise UnknownPreset(f"Unknown preset {name!r} (known: {', '.join(PRESET_NAMES)})")

    base = _baseline()
    omega_d = base.omega_d
    n2, n1 = Config.GRID_POINTS_2D, Config.GRID_POINTS_1D
    detuning_c = Axis('delta_c', -2.0 * omega_d, 2.0 * omega_d, n1)
    strong = base.replace(G_md=_mhz(4.8))

    if name == 'fig2':
        return Scenario(base=base, name=name, axes=(
            Axis('delta_c', -2.0 * omega_d, 2.0 * omega_d, n2),
            Axis('delta_m_eff', -2.0 * omega_d, 2.0 * omega_d, n2),
        ))
    if name == 'fig3a':
        return Scenario(base=strong, name=name, axes=(detuning_c,))
    if name == 'fig3b':
        return Scenario(base=strong, name=name, axes=(Axis('temperature', 0.0, 0.4, n1),))
    if name == 'fig3c':
        return Scenario(base=strong, name=name, axes=(Axis('tau', 0.0, 0.5, n1),))
    if name == 'fig4a':
        return Scenario(base=strong.replace(tau=0.2), name=name, axes=(detuning_c,))
    if name == 'fig4b':
        return Scenario(base=strong.replace(tau=0.2), name=name, axes=(
            Axis('tau', 0.0, 0.5, n1),
            Axis('temperature', 10e-3, 150e-3, 3),
        ))
    return Scenario(base=strong, name=name, mode='dynamics', gamma0='identity')
