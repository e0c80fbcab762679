import dataclasses

import pytest

from mavot.errors import ConfigError
from mavot.harness.config import build_config, config_keys, dump_config, load_config, parse_pairs
from mavot.memory import MemoryConfig
from mavot.tracker import TrackerConfig


def test_every_field_has_a_key():
    keys = set(config_keys())
    for f in dataclasses.fields(TrackerConfig):
        if f.name in ("fg_memory", "bg_memory"):
            continue
        assert f.name in keys
    for f in dataclasses.fields(MemoryConfig):
        assert f"fg.{f.name}" in keys and f"bg.{f.name}" in keys


def test_file_then_overrides(tmp_path):
    p = tmp_path / "t.cfg"
    p.write_text("# tuned\nmask_sigma = 6.5\nbg_top_k=4  # fewer\n\nfg.write_threshold=0.95\n")
    cfg = load_config(p, ["bg_top_k=7", "bg.decay=0.9"])
    assert cfg.mask_sigma == 6.5 and cfg.bg_top_k == 7
    assert cfg.fg_memory.write_threshold == 0.95 and cfg.bg_memory.decay == 0.9
    assert cfg.bg_memory.write_threshold == 0.9


def test_defaults_without_file():
    assert load_config() == TrackerConfig()


@pytest.mark.parametrize("line, msg", [("nokey", "expected key=value"), ("frobnicate=1", "unknown key"),
                                       ("zz.decay=0.5", "unknown key")])
def test_parse_errors_carry_line_numbers(line, msg):
    with pytest.raises(ConfigError, match=f"cfg:2: {msg}"):
        parse_pairs(["mask_sigma=5", line], "cfg")


@pytest.mark.parametrize("pair", ["bg_top_k=ten", "mask_sigma=", "fg.slot_count=1.5", "mask_sigma=-1",
                                  "padding=wrap", "bg_overlap_exclusion=2"])
def test_bad_values(pair):
    with pytest.raises(ConfigError):
        load_config(overrides=[pair])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_dump_roundtrip():
    cfg = build_config({"mask_sigma": "7", "fg.slot_count": "64", "padding": "zero"})
    again = load_config(overrides=dump_config(cfg).splitlines())
    assert again == cfg
