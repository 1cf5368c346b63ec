import json

import pytest

from fqm.config import ConfigError, load_config, parse_json, verify_defaults
from fqm.core import PowerLaw, Tabulated

BASE = {
    "units": {"system": "natural"},
    "physics": {"alpha": 1.5},
    "grid": {"points": 64, "extent": 10.0},
    "potential": {"kind": "power_law", "q2": 1.0, "beta": 2.0},
    "evolve": {"dt": 0.01, "steps": 10},
}


def dump(doc):
    return json.dumps(doc, indent=2)


def error_for(text):
    with pytest.raises(ConfigError) as info:
        load_config(text, "run.json")
    return info.value


def test_valid_config_loads_with_defaults():
    cfg = load_config(dump(BASE))
    assert cfg.params.alpha == 1.5
    assert cfg.params.d_alpha == 0.5
    assert cfg.grid.points == 64
    assert cfg.potential == PowerLaw(1.0, 2.0)
    assert cfg.units == {"system": "natural"}
    assert cfg.seed == 0


def test_unknown_key_is_reported_on_its_line():
    text = dump({**BASE, "physics": {"alpha": 1.5, "gamma": 2.0}})
    err = error_for(text)
    assert "gamma" in str(err)
    assert err.line == text.splitlines().index('    "gamma": 2.0') + 1


def test_unknown_top_level_key():
    err = error_for(dump({**BASE, "extra": 1}))
    assert "extra" in str(err)


def test_missing_dt_names_the_field():
    doc = {**BASE, "evolve": {"steps": 10}}
    err = error_for(dump(doc))
    assert "dt" in str(err)
    assert err.line is not None


def test_alpha_out_of_range_rejected_at_load():
    text = dump({**BASE, "physics": {"alpha": 2.5}})
    err = error_for(text)
    assert "alpha" in str(err)
    assert err.line == 6


def test_units_block_is_mandatory():
    doc = dict(BASE)
    del doc["units"]
    assert "units" in str(error_for(dump(doc)))


def test_duplicate_keys_rejected_at_second_occurrence():
    text = '{\n "units": {"system": "x"},\n "units": {"system": "y"},\n "physics": {"alpha": 1.5}\n}'
    err = error_for(text)
    assert "duplicate" in str(err)
    assert err.line == 3


@pytest.mark.parametrize("text", ["{", '{"units": NaN}', "[1, 2]", '{"a": 1} trailing', ""])
def test_malformed_json(text):
    with pytest.raises(ConfigError):
        parse_json(text)


def test_error_message_is_line_anchored():
    err = error_for('{\n  "units": {"system": "n"},\n  "physics": {"alpha": "fast"}\n}')
    assert str(err).startswith("run.json:3:")


def test_wrong_types_rejected():
    for bad in ({"alpha": True}, {"alpha": [1.5]}):
        error_for(dump({**BASE, "physics": bad}))
    error_for(dump({**BASE, "grid": {"points": 64.5, "extent": 10.0}}))
    error_for(dump({**BASE, "grid": {"points": 60, "extent": 10.0}}))


def test_tabulated_potential_needs_matching_samples():
    doc = {**BASE, "potential": {"kind": "tabulated", "samples": [0.0] * 64}}
    assert isinstance(load_config(dump(doc)).potential, Tabulated)
    doc["potential"]["samples"] = [0.0] * 10
    error_for(dump(doc))


def test_unknown_potential_kind():
    assert "kind" in str(error_for(dump({**BASE, "potential": {"kind": "coulomb"}})))


def test_verify_defaults_are_fresh_copies():
    a = verify_defaults()
    a["alphas"].append(3.0)
    assert verify_defaults()["alphas"] == [1.1, 1.5, 1.9, 2.0]


def test_negative_seed_rejected():
    error_for(dump({**BASE, "seed": -1}))
