# data_manager.py
import csv
import io
import math
import os
from pathlib import Path

import numpy as np

from logger import Logger
from utils import canonical_json, format_seconds

TRAJECTORY_COLUMNS = ('mode', 'traj_id', 'time_s', 'atom_id', 'site_x', 'site_y', 'sx', 'sy', 'sz')


def format_value(value):
    """CSV text of one cell; floats use repr so identical runs give identical files"""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return repr(value)
    return str(value)


class ResultWriter:
    """Writes a RunResult as CSV tables plus meta.txt under ``out_dir``"""
    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.logger = Logger()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _atomic_write(self, name, text):
        """Write ``text`` to a .tmp sibling, then rename it into place"""
        path = self.out_dir / name
        tmp = path.with_name(path.name + '.tmp')
        with open(tmp, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
        return path

    def table_text(self, table, scenario_hash):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(list(table.columns) + ['scenario_hash'])
        for row in table.rows:
            writer.writerow([format_value(v) for v in row] + [scenario_hash])
        return buf.getvalue()

    def write_table(self, stem, table, scenario_hash):
        path = self._atomic_write(f"{stem}.csv", self.table_text(table, scenario_hash))
        self.logger.debug(f"Wrote {len(table.rows)} rows to {path}")
        return path

    def meta_text(self, result):
        lines = [f"scenario_hash: {result.scenario_hash}"]
        for key in sorted(result.provenance):
            lines.append(f"{key}: {result.provenance[key]}")
        if 'wall_time_s' in result.provenance:
            lines.append(f"wall_time: {format_seconds(result.provenance['wall_time_s'])}")
        lines.append(f"scenario: {canonical_json(result.scenario)}")
        return '\n'.join(lines) + '\n'

    def write_trajectories(self, trajectories):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(TRAJECTORY_COLUMNS)
        for mode, ensembles in trajectories.items():
            for ensemble in ensembles:
                for row in ensemble.to_rows():
                    writer.writerow([mode] + [format_value(v) for v in row])
        return self._atomic_write('trajectories.csv', buf.getvalue())

    def write(self, result):
        """Persist every table of ``result``; returns the written paths.

        Parameters
        ----------
        result : harness.RunResult

        Returns
        -------
        list of Path
        """
        paths = [self.write_table(stem, table, result.scenario_hash)
                 for stem, table in result.tables.items()]
        if result.trajectories:
            paths.append(self.write_trajectories(result.trajectories))
        paths.append(self._atomic_write('meta.txt', self.meta_text(result)))
        self.logger.info(f"Wrote {len(paths)} files to {self.out_dir}")
        return paths
