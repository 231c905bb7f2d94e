import json

import pytest

from sempower import config
from sempower.perception import Metric, Scheme


def default_doc():
    return json.loads(json.dumps(config.load().doc))


def parse(doc):
    return config.parse(json.dumps(doc).encode())


def test_default_config_mirrors_reference_setup():
    cfg = config.load()
    ch = cfg.channel
    assert (ch.distance_m, ch.pl0_db, ch.noise_dbm, ch.path_loss_exponent) == (100.0, -30.0, -110.0, 3.4)
    for s in cfg.doc["streams"]:
        assert s["bits"] / s["codeword"] == 0.8
    clip = cfg.model(Scheme.CODED_DISCARD, Metric.CLIP)
    assert [s.semantic_value for s in clip.streams] == pytest.approx([0.5887, 0.3596], abs=1e-15)
    ms = cfg.model(Scheme.UNCODED_FORWARD, Metric.MSSSIM)
    assert [s.semantic_value for s in ms.streams] == pytest.approx([0.5465, 0.6355], abs=1e-15)
    assert {e.name for e in cfg.experiments()} >= {"power_coded_clip", "cdf_coded_clip", "link_validate"}


def test_round_trip():
    cfg = config.load()
    again = config.parse(config.dumps(cfg).encode())
    assert again.doc == cfg.doc
    assert again.experiments() == cfg.experiments()
    assert again.model() == cfg.model()


def test_unknown_key_rejected_with_location():
    doc = default_doc()
    doc["streams"][1]["colour"] = "red"
    with pytest.raises(config.ConfigError, match="streams/1"):
        parse(doc)
    doc = default_doc()
    doc["experiments"][0]["sed"] = 1
    with pytest.raises(config.ConfigError, match="experiments/0"):
        parse(doc)


def test_max_ber_above_half_rejected():
    doc = default_doc()
    doc["max_ber"] = 0.6
    with pytest.raises(config.ConfigError, match="max_ber"):
        parse(doc)


def test_semantic_invariants_checked_at_load():
    doc = default_doc()
    doc["streams"][0]["codeword"] = 100
    with pytest.raises(config.ConfigError, match="streams/0"):
        parse(doc)
    doc = default_doc()
    doc["presets"]["CLIP"]["semantic_values"] = [0.5887]
    with pytest.raises(config.ConfigError, match="presets/CLIP"):
        parse(doc)
    doc = default_doc()
    doc["experiments"][0]["p_bar_grid"] = [0.5, 0.4]
    with pytest.raises(config.ConfigError, match="experiments/0"):
        parse(doc)
    doc = default_doc()
    doc["experiments"][1]["name"] = doc["experiments"][0]["name"]
    with pytest.raises(config.ConfigError, match="duplicate"):
        parse(doc)


def test_explicit_subset_table():
    doc = default_doc()
    doc["presets"]["CLIP"] = {
        "p_best": 0.3191,
        "p_worst_uncoded": 0.8112,
        "subset_perception": [1.0, 0.4113, 0.6404, 0.3191],
    }
    cfg = parse(doc)
    assert cfg.preset(Metric.CLIP).subset_perception == (1.0, 0.4113, 0.6404, 0.3191)


def test_fixed_fading_and_bad_json():
    doc = default_doc()
    doc["channel"]["fading"] = [1.0, 0.5]
    assert parse(doc).channel.fading == (1.0, 0.5)
    with pytest.raises(config.ConfigError, match="JSON"):
        config.parse(b"{not json")


def test_sha_is_of_raw_bytes():
    a = config.parse(b'{"metric": "CLIP", "scheme": "coded", "channel": {}, "streams": [{"name": "p", "bits": 8, "codeword": 10}], "presets": {"CLIP": {"p_best": 0.4, "p_worst_uncoded": 0.7, "semantic_values": [0.6]}}}')
    assert len(a.sha256) == 64
    assert a.model().n == 1
