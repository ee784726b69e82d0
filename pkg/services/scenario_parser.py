import configparser
import logging
import os
import re
from dataclasses import MISSING, fields
from typing import Dict, Iterable, List, Optional, Tuple, Union

from services.model import InvalidParameters, SystemParams
from services.sweep import (
    SWEEPABLE,
    Axis,
    Scenario,
    ScenarioInvalid,
    UnknownPreset,
    make_preset,
)
from utils.units import UnitConversionError, format_quantity, parse_quantity

logger = logging.getLogger(__name__)

PARAM_KINDS = {
    'omega_c': 'frequency',
    'omega_d': 'frequency',
    'omega_m': 'frequency',
    'delta_c': 'frequency',
    'delta_m_eff': 'frequency',
    'kappa_c': 'frequency',
    'kappa_m': 'frequency',
    'gamma_d': 'frequency',
    'g_mc': 'frequency',
    'G_md': 'frequency',
    'g_md_bare': 'frequency',
    'omega_drive_amp': 'frequency',
    'tau': 'dimensionless',
    'theta': 'phase',
    'phi': 'phase',
    'temperature': 'temperature',
    'drive_field': 'field',
    'sphere_diameter': 'length',
    'coupling_mode': 'choice',
}

SETTING_KINDS = {
    'name': 'text',
    'mode': 'choice',
    't_max': 'time',
    'output_step': 'time',
    'integration_step': 'time',
    'gamma0': 'choice',
}

SECTION_KEYS = {
    'scenario': ('name', 'mode'),
    'dynamics': ('t_max', 'output_step', 'integration_step', 'gamma0'),
    'params': tuple(PARAM_KINDS),
}
AXIS_KEYS = ('min', 'max', 'count')
REQUIRED_PARAMS = tuple(f.name for f in fields(SystemParams)
                        if f.default is MISSING and f.default_factory is MISSING)
AXIS_PATTERN = re.compile(r'^\s*(\S+)\s*:\s*(\S+)\s*:\s*(\d+)\s*(\S*)\s*$')


class ScenarioError(ValueError):
    def __init__(self, diagnostics: Union[str, List[str]]):
        self.diagnostics = [diagnostics] if isinstance(diagnostics, str) else list(diagnostics)
        super().__init__('; '.join(self.diagnostics))


class ScenarioParseError(ScenarioError):
    pass


class UnitError(ScenarioError):
    pass


class RangeError(ScenarioError):
    pass


class ScenarioParser:
    def __init__(self):
        self.errors: List[str] = []
        self.unit_errors: List[str] = []
        self._text = ''
        self._origin = '<string>'

    def parse_file(self, path: str) -> Scenario:
        """Read and validate a scenario file"""
        if not os.path.exists(path):
            raise ScenarioParseError(f"Scenario file not found: {path}")
        with open(path, 'r') as f:
            return self.parse_text(f.read(), origin=path)

    def parse_text(self, text: str, origin: str = '<string>') -> Scenario:
        """
        Parse scenario text

        Returns:
            Validated Scenario

        Raises:
            ScenarioParseError / UnitError / RangeError listing every problem found
        """
        self.errors, self.unit_errors = [], []
        self._text, self._origin = text, origin

        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#',))
        parser.optionxform = str
        try:
            parser.read_string(text, source=origin)
        except configparser.Error as e:
            raise ScenarioParseError(f"{origin}: {str(e)}")

        params: Dict[str, object] = {}
        settings: Dict[str, object] = {}
        axes: List[Axis] = []
        present = set()

        for section in parser.sections():
            if section.startswith('axis.'):
                axis = self._parse_axis_section(section, parser[section])
                if axis is not None:
                    axes.append(axis)
                continue
            if section not in SECTION_KEYS:
                self.errors.append(f"{self._where(section)}: unknown section [{section}]")
                continue
            for key, raw in parser[section].items():
                if key not in SECTION_KEYS[section]:
                    self.errors.append(f"{self._where(section, key)}: unknown key '{key}' in [{section}]")
                    continue
                if section == 'params':
                    present.add(key)
                value = self._convert(section, key, raw)
                if value is not None or key == 'integration_step':
                    (params if section == 'params' else settings)[key] = value

        for name in REQUIRED_PARAMS:
            if name not in present:
                self.errors.append(f"{origin}: [params] missing required key '{name}'")

        self._raise_collected()
        return self._build(params, settings, axes)

    def parse_override(self, pair: str) -> Tuple[str, object]:
        """Parse one 'key=value' override; 'min:max:count [unit]' gives an Axis"""
        if '=' not in pair:
            raise ScenarioParseError(f"Override must look like key=value (got {pair!r})")
        key, raw = (part.strip() for part in pair.split('=', 1))
        if key not in PARAM_KINDS and key not in SETTING_KINDS:
            raise ScenarioParseError(f"Unknown override key '{key}'")

        match = AXIS_PATTERN.match(raw)
        if match:
            if key not in SWEEPABLE:
                raise ScenarioParseError(f"'{key}' cannot be swept (sweepable: {', '.join(SWEEPABLE)})")
            low, high, count, unit = match.groups()
            kind = PARAM_KINDS[key]
            try:
                return key, Axis(key, parse_quantity(f"{low} {unit}", kind),
                                 parse_quantity(f"{high} {unit}", kind), int(count))
            except UnitConversionError as e:
                raise UnitError(f"--set {key}: {str(e)}")

        self.errors, self.unit_errors = [], []
        self._text, self._origin = '', '--set'
        section ='params' if key in PARAM_KINDS else 'override'
        value = self._convert(section, key, raw)
        self._raise_collected()
        return key, value

    def serialize(self, scenario: Scenario) -> str:
        """Scenario file text that parses back to an identical Scenario"""
        lines = ['[scenario]', f"name = {scenario.name}", f"mode = {scenario.mode}", '', '[params]']
        for f in fields(SystemParams):
            value = getattr(scenario.base, f.name)
            if value is None:
                continue
            kind = PARAM_KINDS[f.name]
            rendered = value if kind == 'choice' else format_quantity(float(value), kind)
            lines.append(f"{f.name} = {rendered}")

        for axis in scenario.axes:
            kind = PARAM_KINDS[axis.name]
            lines += ['', f"[axis.{axis.name}]",
                      f"min = {format_quantity(float(axis.min), kind)}",
                      f"max = {format_quantity(float(axis.max), kind)}",
                      f"count = {axis.count}"]

        lines += ['', '[dynamics]',
                  f"t_max = {format_quantity(scenario.t_max, 'time')}",
                  f"output_step = {format_quantity(scenario.output_step, 'time')}"]
        if scenario.integration_step is not None:
            lines.append(f"integration_step = {format_quantity(scenario.integration_step, 'time')}")
        lines.append(f"gamma0 = {scenario.gamma0}")
        return '\n'.join(lines) + '\n'

    def _parse_axis_section(self, section: str, values) -> Optional[Axis]:
        name = section[len('axis.'):]
        if name not in SWEEPABLE:
            self.errors.append(f"{self._where(section)}: '{name}' cannot be swept "
                               f"(sweepable: {', '.join(SWEEPABLE)})")
            return None
        for key in values:
            if key not in AXIS_KEYS:
                self.errors.append(f"{self._where(section, key)}: unknown key '{key}' in [{section}]")
        missing = [key for key in AXIS_KEYS if key not in values]
        if missing:
            self.errors.append(f"{self._where(section)}: [{section}] missing {', '.join(missing)}")
            return None

        kind = PARAM_KINDS[name]
        low = self._quantity(section, 'min', values['min'], kind)
        high = self._quantity(section, 'max', values['max'], kind)
        try:
            count = int(values['count'])
        except ValueError:
            self.errors.append(f"{self._where(section, 'count')}: count must be an integer")
            return None
        if low is None or high is None:
            return None
        return Axis(name, low, high, count)

    def _convert(self, section: str, key: str, raw: str):
        kind = PARAM_KINDS.get(key) if section == 'params' else SETTING_KINDS.get(key)
        raw = raw.strip()
        if kind in ('choice', 'text'):
            return raw
        if key == 'integration_step' and raw.lower() in ('auto', 'none', ''):
            return None
        return self._quantity(section, key, raw, kind)

    def _quantity(self, section: str, key: str, raw: str, kind: str) -> Optional[float]:
        try:
            return parse_quantity(raw, kind)
        except UnitConversionError as e:
            self.unit_errors.append(f"{self._where(section, key)}: {key}: {str(e)}")
            return None

    def _build(self, params: Dict, settings: Dict, axes: List[Axis]) -> Scenario:
        try:
            base = SystemParams(**params)
            return Scenario(base=base, axes=tuple(axes), **settings)
        except (InvalidParameters, ScenarioInvalid) as e:
            raise RangeError(f"{self._origin}: {str(e)}")

    def _raise_collected(self):
        if self.errors:
            raise ScenarioParseError(self.errors + self.unit_errors)
        if self.unit_errors:
            raise UnitError(self.unit_errors)

    def _where(self, section: str, key: Optional[str] = None) -> str:
        """origin:line of a section header or of a key inside it"""
        current = None
        for number, line in enumerate(self._text.splitlines(), 1):
            stripped = line.strip()
            if stripped.startswith('[') and stripped.endswith(']'):
                current = stripped[1:-1].strip()
                if key is None and current == section:
                    return f"{self._origin}:{number}"
            elif key is not None and current == section and re.match(rf'^{re.escape(key)}\s*[=:]', stripped):
                return f"{self._origin}:{number}"
        return self._origin


def parse_scenario(preset: Optional[str] = None, path: Optional[str] = None,
                   overrides: Iterable[str] = ()) -> Scenario:
    """
    Load a scenario from exactly one source (preset name or file) and apply
    key=value overrides.
    """
    if (preset is None) == (path is None):
        raise ScenarioParseError("Exactly one of preset or scenario file is required")

    parser = ScenarioParser()
    if preset is not None:
        try:
            scenario = make_preset(preset)
        except UnknownPreset as e:
            raise ScenarioParseError(str(e.args[0]))
    else:
        scenario = parser.parse_file(path)

    parsed = dict(parser.parse_override(pair) for pair in overrides)
    if parsed:
        try:
            scenario = scenario.with_overrides(parsed)
        except ScenarioInvalid as e:
            raise RangeError(str(e))
        logger.info(f"Applied overrides: {', '.join(sorted(parsed))}")
    return scenario


def serialize_scenario(scenario: Scenario) -> str:
    return ScenarioParser().serialize(scenario)
