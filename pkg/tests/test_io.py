import time
from dataclasses import replace

import numpy as np
import pytest
import yaml

from porofrac.benchmarks import scenario_path, shipped_scenarios
from porofrac.errors import ConfigError, InvalidArgumentError
from porofrac.io import load_scenario, parse_scenario, serialize_scenario, write_probe_csv
from porofrac.io.cli import main
from porofrac.io.output import read_csv, write_vtk_snapshot
from porofrac.mesh import build_structured_grid
from porofrac.scenario import run_scenario

MINIMAL = """
geometry: {width_m: 1.0, height_m: 0.5, nx: 4, ny: 2}
material: {E_Pa: 1.0e9, nu: 0.3, Gc_N_per_m: 1.0, l0_m: 0.1}
"""

TABLE4 = {"E_Pa": 210.0e9, "nu": 0.3, "Gc_N_per_m": 1.0e-2, "l0_m": 4.0e-3}
TABLE4_FLOW = {"c1": 0.4, "c2": 1.0, "eps_pR": 2.0e-3, "alpha_R": 2.0e-3,
               "rho_R_kg_per_m3": 1000.0, "rho_F_kg_per_m3": 1000.0,
               "q_R_kg_per_m3s": 0.0, "q_F_kg_per_m3s": 10000.0,
               "K_R_m2": 1.0e-15, "K_F_m2": 1.333e-6, "c_R_per_Pa": 1.0e-8,
               "c_F_per_Pa": 1.0e-8, "mu_R_Pa_s": 1.0e-3, "mu_F_Pa_s": 1.0e-3}


def with_flow(flow=None):
    doc = yaml.safe_load(MINIMAL)
    doc["material"] = dict(TABLE4)
    doc["flow"] = dict(TABLE4_FLOW if flow is None else flow)
    return yaml.safe_dump(doc)


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_scenario(MINIMAL)
        assert cfg.material.k == 1e-9
        assert cfg.stagger.eps_t == 1e-3
        assert cfg.genalpha.rho_inf == 0.9
        assert cfg.flow is None and not cfg.physics.flow

    def test_table_parameters_round_trip(self):
        text = serialize_scenario(parse_scenario(with_flow()))
        doc = yaml.safe_load(text)
        got = {**{k: doc["material"][k] for k in TABLE4},
               **{k: doc["flow"][k] for k in TABLE4_FLOW}}
        assert len(got) == 18
        assert got == {**TABLE4, **TABLE4_FLOW}

    def test_thresholds_order(self):
        with pytest.raises(ConfigError) as exc:
            parse_scenario(with_flow({**TABLE4_FLOW, "c1": 1.0}))
        assert exc.value.key.startswith("flow")

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_scenario(MINIMAL + "bogus: 1\n")
        assert exc.value.key == "bogus"
        assert exc.value.line == 4

    def test_syntax_error_position(self):
        with pytest.raises(ConfigError) as exc:
            parse_scenario("geometry: {width_m: 1\nmaterial: [")
        assert exc.value.line is not None and exc.value.column is not None

    def test_invalid_value_names_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_scenario(MINIMAL.replace("E_Pa: 1.0e9", "E_Pa: -1.0e9"))
        assert exc.value.key == "material.E_Pa"
        assert "line" in str(exc.value)

    def test_missing_required(self):
        with pytest.raises(ConfigError) as exc:
            parse_scenario("geometry: {width_m: 1.0, height_m: 0.5, nx: 4, ny: 2}\n")
        assert exc.value.key == "material"

    def test_crack_outside_domain(self):
        with pytest.raises(ConfigError):
            parse_scenario(MINIMAL + "cracks:\n  - segment_m: [[0.0, 0.0], [2.0, 0.0]]\n")

    def test_unknown_boundary(self):
        with pytest.raises(ConfigError):
            parse_scenario(MINIMAL + "displacement_bcs:\n  - {boundary: middle, component: x}\n")

    def test_exponent_without_dot(self):
        cfg = parse_scenario(MINIMAL.replace("1.0e9", "1e9"))
        assert cfg.material.E == 1e9

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_scenario(tmp_path / "nope.yaml")


class TestShippedScenarios:
    @pytest.mark.parametrize("name", shipped_scenarios())
    def test_round_trip(self, name):
        cfg = load_scenario(scenario_path(name))
        text = serialize_scenario(cfg)
        again = parse_scenario(text)
        assert again == cfg
        assert serialize_scenario(again) == text

    @pytest.mark.parametrize("name", shipped_scenarios())
    def test_runs_one_step(self, name, tmp_path):
        cfg = load_scenario(scenario_path(name))
        cfg = replace(cfg, stagger=replace(cfg.stagger, t_end=cfg.stagger.dt))
        t0 = time.perf_counter()
        res = run_scenario(cfg, output_dir=tmp_path, write=True, keep_reports=False)
        assert time.perf_counter() - t0 < 60.0
        assert (tmp_path / "probes.csv").is_file() or not cfg.probes
        assert res.state is not None


class TestCsv:
    def test_empty_series(self, tmp_path):
        path = tmp_path / "p.csv"
        write_probe_csv(path, [], {"a": []})
        assert path.read_bytes() == b"time,a\n"

    def test_one_probe_two_steps(self, tmp_path):
        path = tmp_path / "p.csv"
        write_probe_csv(path, [0.1, 0.2], {"p": [1.0 / 3.0, 2.0]})
        lines = path.read_bytes().split(b"\n")
        assert len(lines) == 4 and lines[-1] == b""
        assert b"\r" not in path.read_bytes()
        header, rows = read_csv(path)
        assert header == ["time", "p"]
        assert rows[0, 1] == 1.0 / 3.0

    def test_full_precision(self, tmp_path, rng):
        path = tmp_path / "p.csv"
        vals = rng.standard_normal(20) * 10.0 ** rng.integers(-20, 20, 20)
        write_probe_csv(path, np.arange(20.0), {"x": vals})
        np.testing.assert_array_equal(read_csv(path)[1][:, 1], vals)

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            write_probe_csv(tmp_path / "p.csv", [0.1, 0.2], {"p": [1.0]})


class TestVtk:
    def test_single_element(self, tmp_path):
        m = build_structured_grid(1.0, 1.0, 1, 1)
        path = tmp_path / "s.vtk"
        write_vtk_snapshot(path, m, {"phi": ("point", np.zeros(4)),
                                     "u": ("point", np.zeros((4, 2))),
                                     "H": ("cell", np.ones(1))})
        text = path.read_text().splitlines()
        assert text[0].startswith("# vtk DataFile")
        assert "POINTS 4 double" in text
        assert "CELLS 1 5" in text and "4 0 1 3 2" in text
        assert text[text.index("CELL_TYPES 1") + 1] == "9"
        assert "SCALARS phi double 1" in text and "VECTORS u double" in text
        assert "CELL_DATA 1" in text

    def test_size_mismatch(self, tmp_path):
        m = build_structured_grid(1.0, 1.0, 1, 1)
        with pytest.raises(InvalidArgumentError):
            write_vtk_snapshot(tmp_path / "s.vtk", m, {"phi": ("point", np.zeros(3))})


class TestCli:
    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "none.yaml")]) == 2

    def test_bad_command(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_bad_threads(self, capsys):
        assert main(["run", "x.yaml", "--threads", "0"]) == 2

    def test_inspect(self, capsys):
        assert main(["inspect", str(scenario_path("jointed"))]) == 0
        out = capsys.readouterr().out
        assert parse_scenario(out) == load_scenario(scenario_path("jointed"))

    def test_invalid_scenario(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(MINIMAL + "bogus: 1\n")
        assert main(["inspect", str(path)]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_run_writes_outputs(self, tmp_path, capsys):
        path = tmp_path / "s.yaml"
        path.write_text(MINIMAL + "time: {dt_s: 1.0e-4, t_end_s: 3.0e-4}\n"
                        "outputs: {snapshot_every: 2, fields: [u, phi]}\n"
                        "probes:\n  - {name: ux, field: ux, point_m: [1.0, 0.5]}\n")
        out = tmp_path / "out"
        assert main(["run", str(path), "--output-dir", str(out), "--dt-override", "1.5e-4"]) == 0
        header, rows = read_csv(out / "probes.csv")
        assert header == ["time", "ux"] and rows.shape == (2, 2)
        assert sorted(p.name for p in out.glob("*.vtk")) == ["snapshot_000000.vtk",
                                                             "snapshot_000002.vtk"]

    def test_verify_jointed(self, capsys):
        assert main(["verify", "jointed-specimen"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_run_is_deterministic(self, tmp_path, capsys):
        path = tmp_path / "s.yaml"
        path.write_text(with_flow() + "time: {dt_s: 1.0e-6, t_end_s: 5.0e-6}\n"
                        "sources:\n  - segment_m: [[0.2, 0.25], [0.8, 0.25]]\n"
                        "probes:\n  - {name: p, field: p, point_m: [0.5, 0.25]}\n")
        for d in ("a", "b"):
            assert main(["run", str(path), "--output-dir", str(tmp_path / d), "--threads", "1"]) == 0
        for f in ("probes.csv", "steps.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
