import csv
import json

import pytest

from src.main import build_parser, main


def read_rows(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


class TestParser:
    def test_flags_follow_config_fields(self):
        args = build_parser().parse_args(['budget', '--n', '12', '--no-per-j-trace-factor', '--seeds', '1', '2'])
        assert args.n == 12
        assert args.seeds == [1, 2]
        assert args.per_j_trace_factor is False
        assert args.geometry is None

    def test_unknown_choice_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['--geometry', 'quaternary', 'budget'])


class TestCommands:
    def test_check_config(self, config_file):
        assert main(['--config', str(config_file()), 'check-config']) == 0

    @pytest.mark.parametrize('overrides', [{'bogus': 1}, {'chi': 3}, {'n': 30}])
    def test_invalid_config_exits_with_error(self, config_file, overrides):
        assert main(['--config', str(config_file(**overrides)), 'check-config']) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(['--config', str(tmp_path / 'absent.json'), 'check-config']) == 1

    def test_budget_table(self, config_file, tmp_path):
        assert main(['--config', str(config_file(budget_sizes=[8, 10, 16])), 'budget']) == 0
        rows = {int(row['n']): row for row in read_rows(tmp_path / 'output' / 'budget.csv')}
        assert float(rows[8]['brute_force']) == 656_100
        assert float(rows[8]['binary']) == 1_600
        assert float(rows[16]['binary']) == 419_200
        assert rows[10]['binary'] == ''

    def test_prepare_state_is_reproducible(self, config_file, tmp_path):
        path = config_file(n=8, seed=3)
        target = tmp_path / 'output' / 'state_random-mera_n8_seed3.tensor'
        assert main(['--config', str(path), 'prepare-state']) == 0
        first = target.read_bytes()
        assert main(['--config', str(path), 'prepare-state']) == 0
        assert target.read_bytes() == first
        assert (tmp_path / 'output' / 'state_random-mera_n8_seed3_circuit' / 'circuit.json').exists()

    def test_tomograph_then_certify(self, config_file, tmp_path):
        path = str(config_file(n=4))
        output = tmp_path / 'output'
        assert main(['--config', path, 'prepare-state']) == 0
        assert main(['--config', path, 'tomograph']) == 0
        bundle = output / 'tomography_seed0'
        measured = json.loads((bundle / 'certificate.json').read_text())
        assert 0.0 <= measured['exact_fidelity'] <= 1.0 + 1e-9
        assert [row['label'] for row in read_rows(output / 'certificates.csv')] == ['seed0']

        state_file = str(output / 'state_random-mera_n4_seed0.tensor')
        assert main(['--config', path, '--result-dir', str(bundle), '--state-file', state_file, 'certify']) == 0
        certified = json.loads((bundle / 'certificate.json').read_text())
        assert certified['exact_fidelity'] == pytest.approx(measured['exact_fidelity'], abs=1e-10)
        assert certified['fidelity_bound'] == pytest.approx(measured['fidelity_bound'])

    def test_certify_needs_result_dir(self, config_file):
        assert main(['--config', str(config_file()), 'certify']) == 1
