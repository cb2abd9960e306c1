# utils/formats.py
"""
Input schemas and output writers for the command line.

JSON inputs are validated with jsonschema before use. JSON output relies on
float repr, which round-trips exactly; CSV uses ',' and LF line endings.
"""
import csv
import json
import logging
from typing import Any, Dict, Iterable, Optional, Sequence, TextIO

import jsonschema
import numpy as np

logger = logging.getLogger(__name__)

LAMBDA_SCHEMA = {
    'type': 'object',
    'properties': {
        'd': {'type': 'integer', 'minimum': 1},
        'p': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
        'lambda': {'type': 'array', 'items': {'type': 'number', 'minimum': 0}, 'minItems': 1},
    },
    'required': ['lambda'],
}

PMF_SCHEMA = {
    'type': 'object',
    'properties': {
        'd': {'type': 'integer', 'minimum': 1},
        'pmf': {'type': 'array', 'items': {'type': 'number', 'minimum': 0}, 'minItems': 2},
    },
    'required': ['pmf'],
}

RAYS_SCHEMA = {
    'type': 'object',
    'properties': {
        'd': {'type': 'integer', 'minimum': 1},
        'p': {'type': 'number'},
        'rays': {
            'type': 'array',
            'items': {
                'type': 'object',
                'properties': {
                    'support': {'type': 'array', 'items': {'type': 'integer', 'minimum': 0},
                                'minItems': 1, 'maxItems': 2},
                    'mass': {'type': 'array', 'items': {'type': 'number'}, 'minItems': 1, 'maxItems': 2},
                },
                'required': ['support', 'mass'],
            },
        },
    },
    'required': ['d', 'p', 'rays'],
}


def load_json(path: str, schema: Dict[str, Any]) -> Dict[str, Any]:
    """Read a JSON file and validate it; raises jsonschema.ValidationError"""
    with open(path) as handle:
        data = json.load(handle)
    jsonschema.validate(instance=data, schema=schema)
    logger.info(f"Loaded {path}")
    return data


def validate_json(data: Any, schema: Dict[str, Any]) -> Any:
    """Validate an outgoing payload in its plain JSON form; raises jsonschema.ValidationError"""
    plain = _plain(data)
    jsonschema.validate(instance=plain, schema=schema)
    return plain


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(data: Any, out: TextIO):
    json.dump(_plain(data), out, indent=2)
    out.write('\n')


def write_csv(rows: Iterable[Sequence[Any]], out: TextIO, header: Optional[Sequence[str]] = None):
    writer = csv.writer(out, lineterminator='\n')
    if header:
        writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else _plain(v) for v in row])
