import json
import logging
import math
import os
from typing import Dict, List

from config import Config
from services.sweep import SweepResult

logger = logging.getLogger(__name__)

FORMATS = ('csv', 'ndjson')

AXIS_UNITS = {
    'delta_c': 'rad/s',
    'delta_m_eff': 'rad/s',
    'G_md': 'rad/s',
    'theta': 'rad',
    'tau': 'dimensionless',
    'temperature': 'K',
    't': 's',
}


class OutputError(OSError):
    pass


class RecordWriter:
    def __init__(self):
        self.digits = Config.CSV_SIGNIFICANT_DIGITS

    def write(self, result: SweepResult, path: str, fmt: str = 'csv') -> str:
        """
        Write sweep records to disk

        Args:
            result: SweepResult in grid order
            path: output file
            fmt: 'csv' or 'ndjson'

        Returns:
            The path written
        """
        if fmt not in FORMATS:
            raise ValueError(f"Unknown output format {fmt!r} (expected one of {FORMATS})")

        content = self.export_to_csv(result) if fmt == 'csv' else self.export_to_ndjson(result)
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, 'w', newline='') as f:
                f.write(content)
        except OSError as e:
            raise OutputError(f"Cannot write records to {path}: {str(e)}")

        logger.info(f"Wrote {result.point_count} records to {path} ({fmt})")
        return path

    def export_to_csv(self, result: SweepResult) -> str:
        """
        CSV with '#' unit comments, a header row and one row per grid point

        Returns:
            CSV string
        """
        header = ['# magnomech-entanglement sweep records']
        for name in result.axis_names:
            header.append(f"# {name}: {AXIS_UNITS.get(name, 'SI')}")
        header.append('# E_om, E_oM, E_mM: logarithmic negativity (dimensionless)')
        header.append('# R_min: minimum residual contangle (dimensionless)')
        header.append('# stability_margin: max real part of drift spectrum, rad/s')
        header.append('# status: ok | unstable | error')

        df = result.to_frame()
        body = df.to_csv(index=False, float_format=f'%.{self.digits}g', na_rep='', lineterminator='\n')
        return '\n'.join(header) + '\n' + body

    def export_to_ndjson(self, result: SweepResult) -> str:
        """
        One JSON object per line with the same fields as the CSV

        Returns:
            NDJSON string
        """
        lines = [json.dumps(row) for row in self._rows(result)]
        return ''.join(line + '\n' for line in lines)

    def _rows(self, result: SweepResult) -> List[Dict]:
        rows = []
        for row in result.to_frame().to_dict(orient='records'):
            rows.append({key: self._round(value) for key, value in row.items()})
        return rows

    def _round(self, value):
        if isinstance(value, str):
            return value
        value = float(value)
        if math.isnan(value):
            return None
        return float(f"{value:.{self.digits}g}")


def write_records(result: SweepResult, cfg) -> str:
    """Write result to cfg.output_path in cfg.format"""
    return RecordWriter().write(result, cfg.output_path, cfg.format)
