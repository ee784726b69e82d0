import json
import os

import pandas as pd
import pytest

from app import EXIT_CONFIG_ERROR, EXIT_OK, main
from conftest import MHZ
from services.record_writer import RecordWriter
from services.scenario_parser import (
    RangeError,
    ScenarioParseError,
    ScenarioParser,
    UnitError,
    parse_scenario,
    serialize_scenario,
)
from services.sweep import PRESET_NAMES, Axis, SweepResult, make_preset
from utils.units import UnitConversionError, format_quantity, parse_quantity

SCENARIO_TEXT = """\
[scenario]
name = custom
mode = steady

[params]
omega_c = 10 GHz
omega_d = 10 MHz
delta_c = -10 MHz
delta_m_eff = 9 MHz
kappa_c = 1 MHz
kappa_m = 1 MHz
gamma_d = 100 Hz
g_mc = 3.2 MHz
G_md = 3.2 MHz
tau = {tau}
temperature = 10 mK

[axis.delta_c]
min = -20 MHz
max = 20 MHz
count = 5
"""


def read_csv(path):
    return pd.read_csv(path, comment='#')


# ============================================
# Units
# ============================================

def test_frequency_units_are_stored_angular():
    assert parse_quantity('1 MHz', 'frequency') == pytest.approx(MHZ, rel=1e-15)
    assert parse_quantity('5 rad/s', 'frequency') == 5.0


def test_phase_defaults_to_radians():
    assert parse_quantity('0.5', 'phase') == 0.5
    assert parse_quantity('180 deg', 'phase') == pytest.approx(3.141592653589793)


@pytest.mark.parametrize('text, kind', [('3 MHzz', 'frequency'), ('3', 'frequency'), ('abc K', 'temperature'),
                                        ('1 2 3', 'time'), ('inf K', 'temperature')])
def test_bad_quantities_rejected(text, kind):
    with pytest.raises(UnitConversionError):
        parse_quantity(text, kind)


@pytest.mark.parametrize('value, kind', [(MHZ * 3.2, 'frequency'), (0.01, 'temperature'), (3e-6, 'time'),
                                         (0.7, 'phase'), (0.1, 'dimensionless')])
def test_formatted_quantities_parse_back_exactly(value, kind):
    assert parse_quantity(format_quantity(value, kind), kind) == value


# ============================================
# Scenario files
# ============================================

def test_scenario_file_values_are_converted():
    scenario = ScenarioParser().parse_text(SCENARIO_TEXT.format(tau=0.1))
    assert scenario.base.kappa_c == pytest.approx(MHZ, rel=1e-15)
    assert scenario.base.temperature == pytest.approx(0.01)
    assert scenario.axes == (Axis('delta_c', -20 * MHZ, 20 * MHZ, 5),)


def test_out_of_range_tau_is_a_range_error():
    with pytest.raises(RangeError):
        ScenarioParser().parse_text(SCENARIO_TEXT.format(tau=1.5))


def test_unknown_key_reports_line():
    text = SCENARIO_TEXT.format(tau=0.1).replace('tau = 0.1', 'tau = 0.1\nwobble = 3')
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioParser().parse_text(text, origin='bad.scenario')
    assert "bad.scenario:16: unknown key 'wobble'" in str(excinfo.value)


def test_bad_unit_is_a_unit_error():
    text = SCENARIO_TEXT.format(tau=0.1).replace('kappa_c = 1 MHz', 'kappa_c = 1 MHzz')
    with pytest.raises(UnitError) as excinfo:
        ScenarioParser().parse_text(text)
    assert 'kappa_c' in str(excinfo.value)
    assert 'missing' not in str(excinfo.value)


def test_missing_required_key():
    text = SCENARIO_TEXT.format(tau=0.1).replace('g_mc = 3.2 MHz\n', '')
    with pytest.raises(ScenarioParseError, match='g_mc'):
        ScenarioParser().parse_text(text)


def test_unsweepable_axis_rejected():
    text = SCENARIO_TEXT.format(tau=0.1).replace('[axis.delta_c]', '[axis.kappa_c]')
    with pytest.raises(ScenarioParseError, match='cannot be swept'):
        ScenarioParser().parse_text(text)


@pytest.mark.parametrize('name', PRESET_NAMES)
def test_presets_survive_serialization(name):
    scenario = make_preset(name)
    assert ScenarioParser().parse_text(serialize_scenario(scenario)) == scenario


def test_overrides_pin_and_sweep():
    scenario = parse_scenario(preset='fig3a', overrides=['delta_c=-5:5:3 MHz', 'temperature=50 mK'])
    assert scenario.axes == (Axis('delta_c', -5 * MHZ, 5 * MHZ, 3),)
    assert scenario.base.temperature == pytest.approx(0.05)


def test_override_unknown_key():
    with pytest.raises(ScenarioParseError):
        parse_scenario(preset='fig2', overrides=['wobble=3'])


def test_exactly_one_source_required(tmp_path):
    with pytest.raises(ScenarioParseError):
        parse_scenario()
    with pytest.raises(ScenarioParseError):
        parse_scenario(preset='fig2', path=str(tmp_path / 'x.scenario'))


# ============================================
# Record output
# ============================================

def test_empty_result_writes_header_only(tmp_path):
    path = tmp_path / 'empty.csv'
    RecordWriter().write(SweepResult(('delta_c',), []), str(path), 'csv')
    lines = [line for line in path.read_text().splitlines() if not line.startswith('#')]
    assert lines == ['delta_c,E_om,E_oM,E_mM,R_min,stability_margin,status']


def test_csv_and_ndjson_carry_same_fields(tmp_path):
    assert main(['sweep', '--preset', 'fig3a', '--set', 'delta_c=-10:10:3 MHz',
                 '--out', str(tmp_path / 'a.csv')]) == EXIT_OK
    assert main(['sweep', '--preset', 'fig3a', '--set', 'delta_c=-10:10:3 MHz',
                 '--format', 'ndjson', '--out', str(tmp_path / 'a.ndjson')]) == EXIT_OK

    frame = read_csv(tmp_path / 'a.csv')
    rows = [json.loads(line) for line in (tmp_path / 'a.ndjson').read_text().splitlines()]
    assert len(rows) == len(frame) == 3
    assert list(rows[0]) == list(frame.columns)
    for row, expected in zip(rows, frame['E_mM']):
        if row['E_mM'] is None:
            assert pd.isna(expected)
        else:
            assert row['E_mM'] == pytest.approx(expected, rel=1e-11)


# ============================================
# Command line
# ============================================

def test_steady_command(tmp_path):
    out = tmp_path / 'steady.csv'
    assert main(['steady', '--preset', 'fig2', '--out', str(out)]) == EXIT_OK
    frame = read_csv(out)
    assert len(frame) == 1
    assert frame['status'][0] == 'ok'


def test_pinned_unstable_feedback_flags_every_row(tmp_path):
    out = tmp_path / 'fig4b.csv'
    assert main(['sweep', '--preset', 'fig4b', '--set', 'tau=0.9', '--out', str(out)]) == EXIT_OK
    frame = read_csv(out)
    assert len(frame) == 3
    assert (frame['status'] == 'unstable').all()
    assert frame['E_om'].isna().all()


def test_repeated_runs_are_byte_identical(tmp_path):
    args = ['sweep', '--preset', 'fig2', '--set', 'delta_c=-20:20:4 MHz', '--set', 'delta_m_eff=-20:20:4 MHz']
    assert main(args + ['--out', str(tmp_path / 'one.csv')]) == EXIT_OK
    assert main(args + ['--out', str(tmp_path / 'two.csv'), '--workers', '2']) == EXIT_OK
    assert (tmp_path / 'one.csv').read_bytes() == (tmp_path / 'two.csv').read_bytes()


def test_scenario_file_command(tmp_path):
    scenario = tmp_path / 'custom.scenario'
    scenario.write_text(SCENARIO_TEXT.format(tau=0.1))
    out = tmp_path / 'custom.csv'
    assert main(['sweep', '--scenario', str(scenario), '--out', str(out)]) == EXIT_OK
    assert len(read_csv(out)) == 5


@pytest.mark.parametrize('argv', [
    ['sweep', '--preset', 'fig9'],
    ['sweep', '--preset', 'fig2', '--set', 'tau=1.5'],
    ['sweep', '--preset', 'fig2', '--set', 'wobble=1'],
    ['sweep', '--scenario', 'does-not-exist.scenario'],
    ['sweep', '--preset', 'fig2', '--workers', '0'],
    ['sweep', '--preset', 'fig5'],
    ['frobnicate'],
])
def test_configuration_errors_exit_2(argv, tmp_path):
    assert main(argv + (['--out', str(tmp_path / 'x.csv')] if argv[0] == 'sweep' else [])) == EXIT_CONFIG_ERROR


def test_presets_export(tmp_path):
    assert main(['presets', '--export', str(tmp_path)]) == EXIT_OK
    for name in PRESET_NAMES:
        path = os.path.join(str(tmp_path), f"{name}.scenario")
        assert parse_scenario(path=path) == make_preset(name)


def test_anchor_batch_passes():
    from quick_test import batch_test
    assert batch_test()
