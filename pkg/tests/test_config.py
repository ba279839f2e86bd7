import pytest

from stefan_control.config import (ConfigError, default_config, dump_config, env_overrides,
                                   load_config, read_pairs)


def test_defaults():
    cfg = default_config()
    assert cfg.domain.sigma == 10.0 and cfg.grid.nx == 12 and cfg.grid.nt == 200
    assert cfg.region.kind == "tilted_band" and cfg.backend == "kkt"
    assert cfg.params["observability.T_grid"] == (0.05, 0.1, 0.15, 0.2, 0.3, 0.5)


def test_file_env_and_override_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ndomain.sigma = 2.5\ngrid.nx = 6   # inline\nseed = 7\n")
    cfg = load_config(path, environ={"STEFANCTL_GRID__NX": "8", "OTHER": "x"},
                      overrides={"seed": "11"})
    assert cfg.domain.sigma == 2.5
    assert cfg.grid.nx == 8
    assert cfg.seed == 11


def test_env_mapping():
    assert env_overrides({"STEFANCTL_DOMAIN__SIGMA": "0"}) == {"domain.sigma": "0"}


def test_field_level_errors():
    with pytest.raises(ConfigError) as err:
        default_config(control__backend="lu", grid__nx="many", bogus=1)
    assert set(err.value.errors) == {"grid.nx", "bogus"}
    with pytest.raises(ConfigError) as err:
        default_config(control__backend="lu", series__c=0.9, lr__J=40)
    assert {"control.backend", "series.c", "lr.J"} <= set(err.value.errors)


def test_domain_and_region_errors():
    with pytest.raises(ConfigError) as err:
        default_config(domain__sigma=-1)
    assert "domain" in err.value.errors
    with pytest.raises(ConfigError) as err:
        default_config(region__half_width=0, region__center_x2=0.05, region__slope=0)
    assert "region" in err.value.errors


def test_bad_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("this line has no separator\n")
    with pytest.raises(ConfigError):
        read_pairs(path)


def test_dump_round_trip_fields():
    lines = dump_config(default_config(domain__sigma=0))
    assert "domain.sigma = 0.0" in lines and "seed = 20240101" in lines
