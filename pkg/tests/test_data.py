import json

import numpy as np
import pytest

from fairgp.data import (FormatError, SyntheticConfig, dumps_report, generate_synthetic,
                         load_graph, load_report, save_graph, save_report, validate_report)
from fairgp.graph import default_degree_threshold
from fairgp.metrics import delta_sp, proportion_table


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


FEATS = "id,f1,sensitive,label\na,0.5,0,0\nb,1.5,1,3\nc,-1,0,1\n"


class TestLoad:
    def test_path_graph(self, tmp_path):
        g = load_graph(write(tmp_path, "e.txt", "a b\nb c\n"), write(tmp_path, "f.csv", FEATS))
        np.testing.assert_array_equal(g.degrees, [1, 2, 1])
        np.testing.assert_array_equal(g.labels, [0, 1, 1])

    def test_duplicate_edges(self, tmp_path):
        g = load_graph(write(tmp_path, "e.txt", "# edges\na b\nb a\na b\n"), write(tmp_path, "f.csv", FEATS))
        assert g.num_edges == 1

    def test_non_numeric_names_line(self, tmp_path):
        bad = FEATS.replace("1.5", "x")
        with pytest.raises(FormatError, match=":3:"):
            load_graph(write(tmp_path, "e.txt", "a b\n"), write(tmp_path, "f.csv", bad))

    def test_missing_node(self, tmp_path):
        with pytest.raises(FormatError, match="e.txt:2"):
            load_graph(write(tmp_path, "e.txt", "a b\na z\n"), write(tmp_path, "f.csv", FEATS))

    def test_mapping_written(self, tmp_path):
        load_graph(write(tmp_path, "e.txt", "a b\n"), write(tmp_path, "f.csv", FEATS),
                   mapping_path=tmp_path / "map.csv")
        assert (tmp_path / "map.csv").read_text().splitlines()[1:] == ["a,0", "b,1", "c,2"]

    def test_roundtrip(self, tmp_path):
        g = generate_synthetic(SyntheticConfig(n=120, seed=4))
        save_graph(g, tmp_path / "e.txt", tmp_path / "f.csv")
        h = load_graph(tmp_path / "e.txt", tmp_path / "f.csv")
        np.testing.assert_array_equal(h.edge_array(), g.edge_array())
        np.testing.assert_array_equal(h.features, g.features)
        np.testing.assert_array_equal(h.sensitive, g.sensitive)
        np.testing.assert_array_equal(h.labels, g.labels)


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(SyntheticConfig(n=300, seed=7))
        b = generate_synthetic(SyntheticConfig(n=300, seed=7))
        np.testing.assert_array_equal(a.edge_array(), b.edge_array())
        np.testing.assert_array_equal(a.features, b.features)

    def test_unbiased_limit(self):
        cfg = SyntheticConfig(sensitive_skew=0.5, skew_spread=0.0, hub_skew=0.5, label_bias=0.0,
                              block_label_spread=0.0, seed=1)
        g = generate_synthetic(cfg)
        t = proportion_table(g, np.zeros(g.n, int), default_degree_threshold(g))
        assert max(t.all_nodes) < 1.15
        fair = np.random.default_rng(0).integers(0, 2, g.n)
        assert delta_sp(fair, g.sensitive) < 0.06

    def test_majority_flips(self):
        flips = 0
        for seed in range(20):
            g = generate_synthetic(SyntheticConfig(seed=seed))
            t = proportion_table(g, np.zeros(g.n, int), default_degree_threshold(g))
            flips += t.majority("all_nodes") != t.majority("higher_order")
        assert flips >= 15

    def test_edge_density(self):
        cfg = SyntheticConfig(n=400, hub_fraction=0.0, seed=0)
        size = cfg.n // cfg.blocks
        pairs_in = cfg.blocks * size * (size - 1) / 2
        pairs_out = cfg.n * (cfg.n - 1) / 2 - pairs_in
        mean = pairs_in * cfg.intra_p + pairs_out * cfg.inter_p
        var = pairs_in * cfg.intra_p * (1 - cfg.intra_p) + pairs_out * cfg.inter_p * (1 - cfg.inter_p)
        counts = [generate_synthetic(SyntheticConfig(n=400, hub_fraction=0.0, seed=s)).num_edges
                  for s in range(20)]
        assert abs(np.mean(counts) - mean) <= 3 * np.sqrt(var / 20)

    @pytest.mark.parametrize("kw", [dict(intra_p=1.5), dict(hub_fraction=1.0), dict(blocks=0),
                                    dict(n=50, intra_p=1.0, hub_degree_boost=20.0),
                                    dict(sensitive_skew=(0.1, 0.2))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticConfig(**kw))


class TestReports:
    def test_roundtrip_and_rounding(self, tmp_path):
        rep = {"kind": "x", "config": {"a": 1}, "val": 1 / 3, "missing": None, "arr": np.array([2.0, np.nan])}
        path = save_report(rep, tmp_path / "r.json")
        back = load_report(path)
        assert back["val"] == 0.333333 and back["missing"] is None and back["arr"] == [2.0, None]
        validate_report(back)

    def test_stable_bytes(self):
        rep = {"kind": "x", "config": {"b": 2, "a": 1}}
        assert dumps_report(rep) == dumps_report(json.loads(dumps_report(rep)))
        assert dumps_report(rep).index('"a"') < dumps_report(rep).index('"b"')

    def test_layout_check(self):
        with pytest.raises(FormatError):
            validate_report({"config": {}})
