"""Smoke test for the sdmscr Python extension.

Build first:
    cargo build -p sdmscr-python --release --features extension-module
then run:
    python3 python/smoke_test.py
"""

import importlib.util
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libsdmscr.so"
        if lib.exists():
            break
    else:
        sys.exit("libsdmscr.so not found; build the sdmscr-python crate first")
    tmp = Path(tempfile.mkdtemp())
    target = tmp / "sdmscr.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("sdmscr", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    s = load_module()

    g = s.Graph(3, [(0, 1), (1, 2)], ["a", "b", "c"], [0, 0, 1])
    assert g.num_nodes == 3 and g.num_edges == 2
    assert [g.degree(i) for i in range(3)] == [1, 2, 1]
    adj = g.normalized_adjacency()
    assert abs(adj[0][1] - 1 / math.sqrt(6)) < 1e-12
    assert s.Graph.from_json(g.to_json()).edges == g.edges
    try:
        s.Graph(2, [(0, 0)])
    except ValueError:
        pass
    else:
        raise AssertionError("self-loop accepted")

    v = s.hash_embed("Camera lens, camera!", 64)
    assert abs(sum(x * x for x in v) - 1.0) < 1e-12
    assert s.hash_embed("", 64) == [0.0] * 64

    rel, irr = s.mock_decouple("Great camera. Fast shipping.", ["camera"])
    assert rel == "Great camera." and irr == "Fast shipping."
    assert s.parse_response('Sure: {"relevant": "x", "irrelevant": "y"} ok') == ("x", "y")

    assert abs(s.sdm_loss([[1, 0], [0, 1]], [[1, 0], [0, 1]], [[0, -1], [-1, 0]], 1.0)
               - math.log(1 + math.exp(-2))) < 1e-12
    assert s.scr_loss([[1.0, 0.0], [-1.0, 0.0]], s.Graph(2, [(0, 1)])) == 2.0

    graph = s.generate_sbm(classes=3, per_class=20, seed=1)
    views = s.plant_views(graph, dim=16, seed=1)
    enc, history = s.train(graph, views["ori"], views["rel"], views["irr"], epochs=5, seed=1)
    assert len(history) == 5 and all(math.isfinite(h["l_total"]) for h in history)
    z = enc.encode(graph, views["ori"])
    assert len(z) == 60 and len(z[0]) == 64
    probe = s.linear_probe(views["rel"], graph.labels, seed=1)
    assert 0.0 <= probe["accuracy"] <= 1.0

    rows = s.variance_reduction(graph, sigma=1.0, trials=1000, seed=0)
    assert all(k > 0 and emp > 0 for k, _, emp, _ in rows)

    print("sdmscr", s.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
