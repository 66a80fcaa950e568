#!/usr/bin/env python3
"""
Run configuration: JSON document validated into RunConfig
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ByteSize, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)


class LoggingConfig(BaseModel):
    """'logging' section, consumed by setup_logging"""

    model_config = ConfigDict(extra='forbid')

    level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR'] = 'INFO'
    file: str = 'logs/mera-tomography.log'
    max_size: ByteSize = Field(default='10MiB', validate_default=True)
    backup_count: int = Field(default=5, ge=0)
    console: bool = True


class RunConfig(BaseModel):
    """Parameters shared by every CLI command"""

    model_config = ConfigDict(extra='forbid')

    model: Literal['ising', 'xx', 'random-mera'] = 'random-mera'
    n: int = Field(default=8, ge=2)
    chi: int = 2
    geometry: Literal['binary', 'ternary'] = 'binary'
    mode: Literal['exact', 'sampled'] = 'exact'
    shots: int = Field(default=1000, gt=0)
    m0: int = Field(default=100, gt=0)
    seed: int = 0
    seeds: Optional[List[int]] = None
    delta: float = Field(default=0.0, ge=0.0, lt=1.0)
    max_sites: int = Field(default=20, ge=2, le=26)
    max_sweeps: int = Field(default=2000, gt=0)
    tolerance: float = Field(default=1e-12, gt=0.0)
    gradient_tolerance: float = Field(default=1e-12, gt=0.0)
    initial_disentangler: Literal['identity', 'random'] = 'identity'
    renormalized_source: Literal['basis', 'state'] = 'basis'
    candidate_window: Literal['interior', 'central'] = 'interior'
    conditioning_window: Literal['interior', 'central', 'closed'] = 'closed'
    replacement_passes: int = Field(default=1000, ge=0)
    budget_sizes: List[int] = Field(default_factory=lambda: [4, 6, 8, 12, 16, 24, 32, 48, 64, 96])
    budget_s: float = Field(default=6.0, ge=1.0)
    budget_lambda: float = Field(default=6.0, ge=1.0)
    per_j_trace_factor: bool = False
    state_file: Optional[str] = None
    result_dir: Optional[str] = None
    output_dir: str = 'output'
    workers: int = Field(default=1, ge=1)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @field_validator('chi')
    @classmethod
    def _qubit_bond(cls, value):
        if value != 2:
            raise ValueError('chi must be 2: renormalized sites carry the qubit dimension')
        return value

    @model_validator(mode='after')
    def _check_sizes(self):
        if self.n > self.max_sites:
            raise ValueError(f'n={self.n} exceeds max_sites={self.max_sites}')
        return self

    def seed_list(self):
        """Seeds to sweep; falls back to the single 'seed'"""
        return list(self.seeds) if self.seeds else [self.seed]


def load_config(config_path=None, overrides=None):
    """Read a JSON config (optional), apply overrides and validate.

    Raises json.JSONDecodeError, pydantic.ValidationError or OSError; the CLI
    turns these into diagnostics.
    """
    document = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"Configuration file not found: {path}")
        with open(path, 'r') as f:
            document = json.load(f)
        if not isinstance(document, dict):
            raise ValueError(f"Configuration root must be an object: {path}")

    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.model_validate(document)
