#!/usr/bin/env python3
"""
MERA tomography toolkit - Main application
Prepares target states, runs layer-by-layer tomography, certifies the
reconstruction and writes conditioning and budget tables
"""

import sys
import csv
import json
import os
import typing
import logging
import argparse
import tempfile
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor

import pydantic

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.certificate.bounds import CSV_FIELDS, certificate
from src.mera.circuit import write_circuit
from src.selection.budget import budget_curves
from src.selection.candidates import block_starts
from src.selection.plan import conditioning_factor, cumulative_conditioning, two_level_conditioning
from src.states.prep import SpinModel, ground_state, perturbed_state, random_mera_state
from src.tensor.io import read_tensor, write_tensor
from src.tomography.access import StateAccess
from src.tomography.engine import MeraTomographer, read_result
from src.utils.config import RunConfig, load_config
from src.utils.errors import GeometryError, MeraError
from src.utils.logger import setup_logging

COMMANDS = ('prepare-state', 'tomograph', 'conditioning', 'budget', 'certify', 'check-config')
CONDITIONING_FIELDS = ['seed', 'level', 'S_layer', 'S_cumulative', 'S_two_level']
BUDGET_FIELDS = ['n', 'binary', 'ternary', 'brute_force']


def write_csv(path, fields, rows):
    """Write CSV rows atomically"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    with os.fdopen(fd, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ('' if row.get(k) is None else row.get(k)) for k in fields})
    os.replace(tmp_name, path)
    return path


def write_json(path, document):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    with os.fdopen(fd, 'w') as f:
        json.dump(document, f, indent=2)
    os.replace(tmp_name, path)
    return path


class MeraTomographyApp:
    """Runs one CLI command for a validated configuration"""

    def __init__(self, config):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.logger = logging.getLogger(__name__)

    def _map_seeds(self, task):
        seeds = self.config.seed_list()
        if self.config.workers > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(task, seeds))
        return [task(seed) for seed in seeds]

    def build_state(self, seed):
        """Target state vector and its metadata for one seed"""
        cfg = self.config
        if cfg.model == 'random-mera':
            state, circuit = random_mera_state(cfg.n, cfg.geometry, seed, cfg.chi)
            metadata = {'model': cfg.model, 'n': cfg.n, 'geometry': cfg.geometry, 'seed': seed}
        else:
            model = SpinModel(cfg.model, cfg.n)
            result = ground_state(model, cfg.max_sites)
            state, circuit = result.state, None
            metadata = result.metadata(model)
        if cfg.delta > 0:
            state = perturbed_state(state, cfg.delta, seed)
        metadata['delta'] = cfg.delta
        return state, circuit, metadata

    def load_state(self, seed):
        if self.config.state_file:
            tensor, metadata = read_tensor(self.config.state_file)
            self.logger.info(f"State loaded from {self.config.state_file}")
            return tensor.data.reshape(-1), metadata
        state, _, metadata = self.build_state(seed)
        return state, metadata

    def prepare_state(self):
        def task(seed):
            state, circuit, metadata = self.build_state(seed)
            name = f"state_{self.config.model}_n{self.config.n}_seed{seed}"
            path = write_tensor(self.output_dir / f"{name}.tensor", state, metadata)
            if circuit is not None:
                write_circuit(circuit, self.output_dir / f"{name}_circuit")
            self.logger.info(f"State written to {path}")
            return path
        return self._map_seeds(task)

    def tomograph(self):
        tomographer = MeraTomographer(self.config)

        def task(seed):
            state, metadata = self.load_state(seed)
            access = StateAccess(state, self.config.mode, self.config.shots, seed)
            result = tomographer.run(access)
            directory = tomographer.write(result, self.output_dir / f"tomography_seed{seed}")
            cert = certificate(result.report, result.bases, state, result.mixture(), self.config.per_j_trace_factor)
            write_json(directory / 'certificate.json', cert.to_dict())
            value = self.config.delta if self.config.mode == 'exact' else self.config.shots
            write_csv(directory / 'certificate.csv', CSV_FIELDS, [cert.csv_row(f"seed{seed}", value)])
            self.logger.info(f"Seed {seed}: infidelity {cert.exact_infidelity:.3e}, "
                             f"fidelity bound {cert.fidelity_bound:.3e}, trace distance {cert.exact_trace_distance:.3e}, "
                             f"sqrt fidelity bound {cert.fidelity_trace_bound:.3e}, "
                             f"trace-form bound {cert.combined_bound:.3e} (indicative)")
            return cert.csv_row(f"seed{seed}", value)

        rows = self._map_seeds(task)
        return write_csv(self.output_dir / 'certificates.csv', CSV_FIELDS, rows)

    def conditioning(self):
        cfg = self.config
        tomographer = MeraTomographer(cfg.model_copy(update={'renormalized_source': 'state'}))

        def task(seed):
            state, _ = self.load_state(seed)
            result = tomographer.run(StateAccess(state, 'exact', cfg.shots, seed))
            layers = result.circuit.layers
            levels, factors = [], []
            for layer in layers:
                if layer.geometry != 'binary' or not block_starts(layer):
                    continue
                levels.append(layer.level)
                factors.append(conditioning_factor(layer, cfg.m0, cfg.conditioning_window, cfg.replacement_passes))
                self.logger.info(f"Seed {seed} level {layer.level}: S={factors[-1]:.4f} ({cfg.conditioning_window} window)")
            two_level = None
            if len(layers) >= 2:
                try:
                    two_level = two_level_conditioning(layers[0], layers[1], self.config.m0,
                                                       passes=self.config.replacement_passes)
                except GeometryError as e:
                    self.logger.warning(f"Two-level conditioning skipped: {e}")
            return [
                {'seed': seed, 'level': level, 'S_layer': factor, 'S_cumulative': cumulative,
                 'S_two_level': two_level if level == 2 else None}
                for level, factor, cumulative in zip(levels, factors, cumulative_conditioning(factors))
            ]

        rows = [row for rows in self._map_seeds(task) for row in rows]
        return write_csv(self.output_dir / 'conditioning.csv', CONDITIONING_FIELDS, rows)

    def budget(self):
        cfg = self.config
        rows = budget_curves(cfg.budget_sizes, cfg.budget_s, cfg.budget_lambda, cfg.m0)
        return write_csv(self.output_dir / 'budget.csv', BUDGET_FIELDS, rows)

    def certify(self):
        if not self.config.result_dir:
            raise MeraError("certify needs result_dir pointing at a tomography bundle")
        directory = Path(self.config.result_dir)
        result = read_result(directory)
        true_state = None
        if self.config.state_file:
            tensor, _ = read_tensor(self.config.state_file)
            true_state = tensor.data.reshape(-1)
        cert = certificate(result.report, None, true_state, result.mixture() if true_state is not None else None)
        write_json(directory / 'certificate.json', cert.to_dict())
        write_csv(directory / 'certificate.csv', CSV_FIELDS, [cert.csv_row(directory.name, self.config.delta)])
        self.logger.info(f"Certificate written to {directory}")
        return cert

    def run(self, command):
        if command == 'check-config':
            self.logger.info("Configuration validation passed")
            return True
        handler = {
            'prepare-state': self.prepare_state,
            'tomograph': self.tomograph,
            'conditioning': self.conditioning,
            'budget': self.budget,
            'certify': self.certify,
        }[command]
        handler()
        return True


def _flag_type(annotation):
    """(argparse kwargs) for a RunConfig field annotation"""
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return _flag_type(inner[0])
    if origin is list:
        return {'type': args[0], 'nargs': '+'}
    if origin is typing.Literal:
        return {'type': type(args[0]), 'choices': list(args)}
    if annotation is bool:
        return {'action': argparse.BooleanOptionalAction}
    return {'type': annotation}


def build_parser():
    parser = argparse.ArgumentParser(description='MERA tomography toolkit')
    parser.add_argument(
        '--config',
        type=str,
        help='Path to configuration file'
    )
    for name, info in RunConfig.model_fields.items():
        if name == 'logging':
            continue
        parser.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            default=None,
            help=info.description,
            **_flag_type(info.annotation)
        )
    parser.add_argument('command', choices=COMMANDS)
    return parser


def main(argv=None):
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ('config', 'command')}

    try:
        config = load_config(args.config, overrides)
    except pydantic.ValidationError as e:
        print(f"Configuration error: {e}")
        return 1
    except (json.JSONDecodeError, OSError, ValueError) as e:
        print(f"Error loading configuration: {e}")
        return 1

    try:
        setup_logging(config.logging.model_dump())
        app = MeraTomographyApp(config)
        return 0 if app.run(args.command) else 1
    except KeyboardInterrupt:
        print("\nShutdown requested by user")
        return 0
    except MeraError as e:
        logging.getLogger(__name__).error(f"{type(e).__name__}: {e}")
        print(f"Fatal error: {e}")
        return 1
    except Exception as e:
        logging.getLogger(__name__).error(f"Unexpected error: {e}", exc_info=True)
        print(f"Fatal error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
