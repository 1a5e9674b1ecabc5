"""Run directories and the files written into them"""
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def json_safe(value):
    """Plain JSON types; non-finite floats become 'inf', '-inf' or 'nan'"""
    if isinstance(value, dict):
        return {str(key): json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return [json_safe(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload):
    with open(path, 'w') as handle:
        json.dump(json_safe(payload), handle, indent=2, sort_keys=True)
        handle.write('\n')


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_rows(path, columns, rows):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def run_directory(config, output_dir=None, prefix=None):
    """<output_dir>/<prefix or scenario>-s<seed>-<digest>, created if missing"""
    root = Path(output_dir) if output_dir else config.output_dir
    directory = root / f"{prefix or config.scenario}-s{config.seed}-{config.digest}"
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_provenance(directory, config, constants, thresholds=None):
    """Exact config, constants ledger and (when given) the threshold report"""
    (directory / 'config.env').write_text(config.text)
    write_json(directory / 'constants.json', constants.ledger())
    if thresholds is not None:
        write_json(directory / 'thresholds.json', thresholds)
    logger.debug(f"Wrote provenance to {directory}")
