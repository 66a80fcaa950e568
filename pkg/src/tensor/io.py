#!/usr/bin/env python3
"""
Tensor container files: one JSON header line, then little-endian complex128 data
"""

import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from src.tensor.core import Tensor, as_array
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

DTYPE_TAG = 'c128'
LAYOUT = 'row-major'


def write_tensor(path, tensor, metadata=None):
    """Write a tensor container atomically"""
    data = np.ascontiguousarray(as_array(tensor))
    header = {
        'shape': [int(d) for d in data.shape],
        'dtype': DTYPE_TAG,
        'layout': LAYOUT,
        'metadata': metadata or {}
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
            f.write(data.astype('<c16').tobytes(order='C'))
        os.replace(tmp_name, path)
    except Exception:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote tensor {data.shape} to {path}")
    return path


def read_tensor(path):
    """Read a tensor container, returning (Tensor, metadata)"""
    path = Path(path)
    with open(path, 'rb') as f:
        header_line = f.readline()
        payload = f.read()

    try:
        header = json.loads(header_line.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValidationError(f"Invalid tensor header in {path}: {e}")

    if header.get('dtype') != DTYPE_TAG or header.get('layout') != LAYOUT:
        raise ValidationError(f"Unsupported tensor encoding in {path}: {header.get('dtype')}/{header.get('layout')}")

    shape = tuple(int(d) for d in header['shape'])
    expected = int(np.prod(shape)) * 16
    if len(payload) != expected:
        raise ValidationError(f"Tensor payload in {path} has {len(payload)} bytes, expected {expected}")

    data = np.frombuffer(payload, dtype='<c16').reshape(shape)
    return Tensor(data), header.get('metadata', {})
