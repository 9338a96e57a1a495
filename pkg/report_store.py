#!/usr/bin/env python3
"""
Persistence for scenario outputs

This module handles:
- Writing curve tables as CSV with round-trippable doubles
- Writing JSON summaries with a schema version and sorted keys
- Atomic writes (temporary file in the target directory, then rename)
"""

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

import config


def to_plain(obj: Any) -> Any:
    """Convert numpy scalars, tuples and non-finite floats into strict JSON values"""
    if isinstance(obj, dict):
        return {str(key): to_plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(item) for item in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return obj


def dumps(data: Dict) -> str:
    return json.dumps(to_plain(data), indent=2, sort_keys=True, allow_nan=False) + '\n'


class ReportStore:
    """Output directory for one scenario or sweep"""

    def __init__(self, output_dir):
        """
        Args:
            output_dir: Directory that receives CSV and JSON files (created on demand)
        """
        self.output_dir = Path(output_dir)

    def _atomic_write(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path

    def save_table(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a DataFrame as <name>.csv"""
        text = frame.to_csv(index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator='\n')
        return self._atomic_write(self.output_dir / f'{name}.csv', text)

    def save_summary(self, name: str, data: Dict) -> Path:
        """Write a summary as <name>.json, stamped with the schema version"""
        payload = dict(data)
        payload['schema_version'] = config.SCHEMA_VERSION
        return self._atomic_write(self.output_dir / f'{name}.json', dumps(payload))

    def save_bundle(self, summary: Dict, tables: Dict[str, pd.DataFrame]) -> Dict[str, int]:
        """
        Save one scenario's tables and its summary.json

        Returns:
            Dictionary with counts: {'tables': N, 'summaries': 1}
        """
        for name in sorted(tables):
            self.save_table(name, tables[name])
        self.save_summary('summary', summary)
        return {'tables': len(tables), 'summaries': 1}
