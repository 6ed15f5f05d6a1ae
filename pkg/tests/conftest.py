import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from atlaspack.chartset_io import Chart, ChartSet

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

QUAD = np.array([[0, 1, 2], [0, 2, 3]])
TRI = np.array([[0, 1, 2]])


def rect(w, h, x=0.0, y=0.0, cid=0):
    v = np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]], dtype=float)
    return Chart(cid, v, QUAD)


def triangle(points, cid=0):
    return Chart(cid, np.asarray(points, dtype=float), TRI)


def chart_set(*charts):
    return ChartSet([Chart(i, c.vertices, c.triangles) for i, c in enumerate(charts)])


@pytest.fixture
def tmp_json(tmp_path):
    def write(charts, name="set.json"):
        from atlaspack.chartset_io import dump_chartset_json
        p = tmp_path / name
        p.write_text(dump_chartset_json(charts))
        return p
    return write


def knee_set(seed, atlas=256):
    """Three tall boxes over many short charts, so rows end in sharp drops."""
    from atlaspack.corpus import generate
    rng = np.random.default_rng(seed)
    charts = []
    for _ in range(3):
        w, h = rng.uniform(0.15, 0.25) * atlas, rng.uniform(0.45, 0.6) * atlas
        charts.append(rect(w, h))
    charts += generate(seed, 60, area=0.5 * atlas * atlas, height_ratio=4.0).charts
    return chart_set(*charts)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
