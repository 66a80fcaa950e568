import json
import logging

import pydantic
import pytest

from src.utils.config import RunConfig, load_config
from src.utils.errors import ContractionError, RankDeficiencyError, ValidationError
from src.utils.logger import _parse_size, setup_logging


class TestParseSize:
    @pytest.mark.parametrize('text,expected', [
        ('10MiB', 10 * 1024 ** 2),
        ('10MB', 10 ** 7),
        ('1.5KiB', 1536),
        ('2gb', 2 * 10 ** 9),
        ('512', 512),
        (100, 100),
    ])
    def test_sizes(self, text, expected):
        assert _parse_size(text) == expected

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            _parse_size('lotsMB')


class TestSetupLogging:
    def test_creates_log_directory_once(self, tmp_path):
        log_file = tmp_path / 'nested' / 'run.log'
        setup_logging({'file': str(log_file), 'console': False})
        logger = setup_logging({'file': str(log_file), 'console': False, 'level': 'debug'})
        assert log_file.parent.is_dir()
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.chi == 2
        assert config.geometry == 'binary'
        assert config.seed_list() == [0]
        assert config.max_sweeps == 2000
        assert config.gradient_tolerance == 1e-12
        assert config.conditioning_window == 'closed'

    def test_overrides_skip_unset_flags(self, tmp_path):
        path = tmp_path / 'config.json'
        path.write_text(json.dumps({'n': 12, 'seeds': [4, 5]}))
        config = load_config(path, {'n': None, 'mode': 'sampled'})
        assert config.n == 12
        assert config.mode == 'sampled'
        assert config.seed_list() == [4, 5]

    @pytest.mark.parametrize('document', [{'bogus': 1}, {'chi': 4}, {'n': 24}, {'delta': 1.0},
                                          {'logging': {'colour': True}}, {'logging': {'max_size': 'lotsMB'}},
                                          {'conditioning_window': 'wide'}])
    def test_invalid_documents(self, document):
        with pytest.raises(pydantic.ValidationError):
            RunConfig.model_validate(document)

    def test_log_size_is_bytes(self):
        assert RunConfig().logging.max_size == 10 * 1024 ** 2
        assert RunConfig.model_validate({'logging': {'max_size': '2MB'}}).logging.max_size == 2 * 10 ** 6

    def test_larger_cap_admits_larger_lattices(self):
        assert RunConfig(n=24, max_sites=24).n == 24

    def test_root_must_be_object(self, tmp_path):
        path = tmp_path / 'config.json'
        path.write_text('[1, 2]')
        with pytest.raises(ValueError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / 'absent.json')


class TestErrors:
    def test_hierarchy(self):
        assert issubclass(ContractionError, ValidationError)
        error = RankDeficiencyError("span too small", 7)
        assert error.rank == 7
