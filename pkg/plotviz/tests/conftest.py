import json

import numpy as np
import pytest

HEADER = ("n,N,input_distance,output_distance,vorticity_distance,ratio,"
          "particle_separation,separation_bound,supports_disjoint")


def make_records_csv(path, rows):
    lines = [HEADER]
    for r in rows:
        lines.append(",".join([
            str(r["n"]), str(r["N"]),
            f"{r['input_distance']:.17g}", f"{r['output_distance']:.17g}",
            f"{r['vorticity_distance']:.17g}", f"{r['ratio']:.17g}",
            f"{r['particle_separation']:.17g}", f"{r['separation_bound']:.17g}",
            "true" if r["supports_disjoint"] else "false",
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_scalar_field(path, values):
    n = values.shape[0]
    header = json.dumps({"type": "scalar", "n": n, "version": 1}) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def gaussian_bump(n, cx, cy, width):
    x = np.arange(n) * 2 * np.pi / n
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return np.exp(-(((x1 - cx) ** 2 + (x2 - cy) ** 2) / width**2))


@pytest.fixture
def fixture_rows():
    rows = []
    for i, n in enumerate((1, 2, 4, 8)):
        ratio = 1.3 * n  # exact power law, slope 1
        rows.append({
            "n": n, "N": 128 * (i + 1),
            "input_distance": 1.0 / n, "output_distance": 1.3,
            "vorticity_distance": 1.1, "ratio": ratio,
            "particle_separation": 0.08 / n, "separation_bound": 0.04 / n,
            "supports_disjoint": n >= 2,
        })
    return rows


@pytest.fixture
def fixture_dir(tmp_path, fixture_rows):
    make_records_csv(tmp_path / "records.csv", fixture_rows)
    slope, intercept = np.polyfit(np.log([r["n"] for r in fixture_rows]),
                                  np.log([r["ratio"] for r in fixture_rows]), 1)
    summary = {"slope": float(slope), "intercept": float(intercept),
               "witness": {"x_star": [np.pi, np.pi]}}
    (tmp_path / "summary.json").write_text(json.dumps(summary), encoding="utf-8")
    save_scalar_field(tmp_path / "bump_a.field",
                      gaussian_bump(64, 2.0, 3.0, 0.4))
    save_scalar_field(tmp_path / "bump_b.field",
                      gaussian_bump(64, 4.5, 3.0, 0.4))
    save_scalar_field(tmp_path / "bump_a_copy.field",
                      gaussian_bump(64, 2.0, 3.0, 0.4))
    return tmp_path
