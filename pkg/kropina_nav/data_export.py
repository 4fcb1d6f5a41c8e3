"""
Result export for Kropina Nav.

This module writes solver results as CSV tables (trajectories, reachable-set
grids, Katok rows) and JSON reports. Output is deterministic: JSON keys are
sorted and floats use Python's shortest round-trip repr, so identical runs
give byte-identical files.
"""

import csv
import hashlib
import json
import logging
import math
import os
from io import StringIO
from typing import Any, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


def plain(value: Any) -> Any:
    """Numpy values to plain Python; non-finite floats become strings."""
    if isinstance(value, np.ndarray):
        return [plain(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    return value


def config_hash(payload: Dict[str, Any]) -> str:
    """First 12 hex digits of SHA-256 over the canonical JSON of ``payload``."""
    canonical = json.dumps(plain(payload), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]


class ResultExporter:
    """Handles result export as CSV and JSON files."""

    def __init__(self, output_dir: str):
        self.output_dir = os.path.abspath(output_dir)

        # Katok row keys renamed on export; any other key is its own header
        self.field_mappings = {
            'short': 'delta_short',
            'long': 'delta_long',
            'numeric': 'numeric_short',
            'error': 'short_error',
        }

    def export_to_csv(self, records: List[Dict[str, Any]], include_headers: bool = True) -> str:
        """Export records to CSV format."""
        if not records:
            return ""

        output = StringIO()
        fieldnames = list(records[0].keys())
        writer = csv.DictWriter(output, fieldnames=fieldnames, lineterminator='\n')

        if include_headers:
            writer.writerow({name: self.field_mappings.get(name, name) for name in fieldnames})

        for record in records:
            processed_record = {}
            for key, value in record.items():
                if value is None or value == '':
                    processed_record[key] = ''
                elif isinstance(value, (bool, np.bool_)):
                    processed_record[key] = 1 if value else 0
                elif isinstance(value, (float, np.floating)):
                    processed_record[key] = repr(float(value))
                else:
                    processed_record[key] = str(value)
            writer.writerow(processed_record)

        return output.getvalue()

    def export_to_json(self, payload: Any) -> str:
        """Export a report to JSON format."""
        return json.dumps(plain(payload), sort_keys=True, indent=2, ensure_ascii=False) + '\n'

    def file_name(self, command: str, manifold: str, run_config: Dict[str, Any], suffix: str = 'csv',
                  tag: Optional[str] = None) -> str:
        """Deterministic name ``{command}_{manifold}_{hash}.{suffix}``."""
        stem = f"{command}_{manifold}_{config_hash(run_config)}"
        if tag:
            stem = f"{stem}_{tag}"
        return f"{stem}.{suffix}"

    def write(self, name: str, content: str) -> str:
        """Write ``content`` under the output directory and return its path."""
        path = os.path.join(self.output_dir, name)
        try:
            os.makedirs(self.output_dir, exist_ok=True)
            with open(path, 'w', encoding='utf-8', newline='') as handle:
                handle.write(content)
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from e
        logger.info(f"Wrote {path}")
        return path
