"""Secondary acceptance: the scripts reproduce the recorded slope to 1e-6
and render all three figures from a fixture dataset, without importing any
solver code."""

import sys

import pytest

from plotviz.io import read_records, read_summary
from plotviz.separation import render_separation
from plotviz.supports import render_supports, _scalar
from plotviz.trend import render_trend


def test_acceptance_10_figures_from_fixture(fixture_dir, tmp_path):
    records = read_records(fixture_dir / "records.csv")
    summary = read_summary(fixture_dir / "summary.json")

    slope = render_trend(records, tmp_path / "trend.png", summary)
    assert abs(slope - summary["slope"]) <= 1e-6

    render_separation(records, tmp_path / "separation.png")

    a = _scalar(fixture_dir / "bump_a.field")
    b = _scalar(fixture_dir / "bump_b.field")
    area = render_supports(a, b, tmp_path / "supports.png",
                           x_star=summary["witness"]["x_star"])
    assert area == 0.0

    for name in ("trend.png", "separation.png", "supports.png"):
        assert (tmp_path / name).stat().st_size > 0

    # pure consumer: nothing from the solver package may be loaded
    assert not any(mod.startswith("eulermap") for mod in sys.modules)

    ok = True
    print(f"\nACCEPTANCE 10: {'PASS' if ok else 'FAIL'} - slope reproduced to "
          f"{abs(slope - summary['slope']):.1e}; three figures rendered; "
          f"no solver modules imported")
