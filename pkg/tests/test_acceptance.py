"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The long simulations come from ``acceptance_runs`` and are cached on disk;
run ``python tests/acceptance_runs.py`` first to compute them outside
pytest.  The lines are repeated in the terminal summary.
"""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from porofrac import benchmarks, cracks
from porofrac.io.cli import main as cli_main
from porofrac.scenario import build_problem

import acceptance_runs as runs

RESULTS = {}
TESTS = Path(__file__).resolve().parent

# branching metrics
INITIATION_WINDOW = (300e-6, 600e-6)
BRANCHING_RUNTIME = 2 * 3600.0
SINGLE_CRACK_RUNTIME = 600.0
KERNEL_RUNTIME = 60.0
# parameter studies
PEAK_SPREAD = 0.20
# interaction metrics
DROP_WINDOW = 20e-6
MIN_DROP = 0.10


def record(num, title, passed, detail):
    line = f"criterion {num} {title}: {'PASS' if passed else 'FAIL'} ({detail})"
    RESULTS[num] = line
    print(line)
    return passed


def crack_field(cfg, phi):
    mesh = build_problem(cfg)[0].mesh
    return cracks.grid_field(mesh, phi, cfg.symmetry.mirror_x, cfg.symmetry.mirror_y)


def seed_tip_margin(cfg):
    mesh = build_problem(cfg)[0].mesh
    return max(2.0 * max(mesh.hx, mesh.hy), cfg.material.l0)


def final_tips(name):
    rec = runs.get_run(name)
    cfg = runs.RUNS[name].config()
    seg = cfg.cracks[0].segment
    half = float(np.hypot(seg[1][0] - seg[0][0], seg[1][1] - seg[0][1]))
    return cracks.branch_tip_count(crack_field(cfg, rec.final_phi), (0.0, 0.0),
                                   half + 2.0 * cfg.material.l0)


def peak(name):
    rec = runs.get_run(name)
    p = rec.probes["p_center"]
    i = int(np.argmax(p))
    return float(p[i]), float(rec.times[i]), rec


class TestAcceptance:
    def test_1_single_crack_diffusion(self):
        t0 = time.perf_counter()
        res = benchmarks.single_crack_diffusion()
        wall = time.perf_counter() - t0
        worst = max(c.error for c in res.checks)
        ok = record(1, "single-crack pressure diffusion",
                    res.passed and wall < SINGLE_CRACK_RUNTIME,
                    f"max |P/P0 error| {worst:.2e} <= {benchmarks.SINGLE_CRACK_TOL}, "
                    f"{wall:.0f} s")
        assert ok, res.table()

    def test_2_jointed_specimen(self):
        res = benchmarks.jointed_specimen()
        c = res.checks[0]
        ok = record(2, "jointed specimen water head", res.passed,
                    f"max relative head error {c.error:.2e} <= {c.tolerance}")
        assert ok, res.table()

    def test_3_dynamic_consolidation(self):
        res = benchmarks.consolidation()
        peak_c, period_c = res.checks
        ok = record(3, "dynamic consolidation", res.passed,
                    f"peak {peak_c.value:.3f} Ps in {benchmarks.PEAK_BAND}, period "
                    f"{period_c.value * 1e3:.2f} ms vs {period_c.reference * 1e3:.2f} ms "
                    f"(error {period_c.error:.1%})")
        assert ok, res.table()

    @pytest.mark.slow
    def test_4_branching_morphology(self):
        rec = runs.get_run("branching")
        cfg = runs.RUNS["branching"].config()
        seg = cfg.cracks[0].segment
        t_init = cracks.initiation_time(rec.sample_times, rec.extents, seed_tip_margin(cfg))
        field = crack_field(cfg, rec.final_phi)
        comp = cracks.component_mask(field, (0.0, 0.0))
        axis = comp[np.abs(field.ys).argmin()]
        reach = float(np.abs(field.xs[axis]).max()) if axis.any() else 0.0
        tip_x = max(abs(seg[0][0]), abs(seg[1][0]))
        horizontal = reach - tip_x >= 2.0 * cfg.material.l0
        tips = final_tips("branching")
        init_ok = t_init is not None and INITIATION_WINDOW[0] <= t_init <= INITIATION_WINDOW[1]
        ok = record(4, "branching morphology",
                    init_ok and horizontal and tips >= 4 and tips % 2 == 0
                    and rec.wall_time < BRANCHING_RUNTIME,
                    f"initiation {t_init * 1e6 if t_init else float('nan'):.0f} us, "
                    f"horizontal growth {1e3 * (reach - tip_x):.1f} mm, {tips} tips "
                    f"({tips // 2} symmetric pairs), {rec.wall_time / 60:.0f} min")
        assert ok

    @pytest.mark.slow
    def test_5_parameter_studies(self):
        gc = [peak(n)[0] for n in ("gc_1e-4", "gc_1e-3", "branching")]
        gc_ok = gc[0] < gc[1] < gc[2]
        qf = [peak(n) for n in ("qf_1000", "qf_5000", "branching")]
        t_peak = [t for _, t, _ in qf]
        p_peak = [p for p, _, _ in qf]
        spread = (max(p_peak) - min(p_peak)) / max(p_peak)
        qf_ok = t_peak[0] > t_peak[1] > t_peak[2] and spread < PEAK_SPREAD
        tips = [final_tips(n) for n in ("dt_0.05", "dt_0.1", "branching")]
        dt_ok = len(set(tips)) == 1
        ok = record(5, "parameter-study orderings", gc_ok and qf_ok and dt_ok,
                    f"(a) peak p for Gc 1e-4/1e-3/1e-2: "
                    f"{'/'.join(f'{p / 1e3:.0f}' for p in gc)} kPa; "
                    f"(b) time to peak for q_F 1e3/5e3/1e4: "
                    f"{'/'.join(f'{t * 1e6:.0f}' for t in t_peak)} us, peak spread {spread:.1%}; "
                    f"(c) tips for dt 0.05/0.1/0.2 us: {tips}")
        assert ok

    @pytest.mark.slow
    def test_6_natural_crack_interaction(self):
        details, flags = [], []
        for name, expect_join in (("interaction_case1", True), ("interaction_case2", False)):
            rec = runs.get_run(name)
            cfg = runs.RUNS[name].config()
            inj, nat = cfg.cracks[0].segment, cfg.cracks[1].segment
            field = crack_field(cfg, rec.final_phi)
            joined = cracks.connected(field, (0.0, 0.0), nat[0])
            flags.append(joined == expect_join)
            details.append(f"{name}: {'coalesced' if joined else 'separate'}")
            if not expect_join:
                continue
            # growth beyond the natural crack's tip, inside a 45 degree cone above it
            tip = np.asarray(nat[1], dtype=float)
            comp = cracks.component_mask(field, (0.0, 0.0))
            pts = field.points[comp]
            above = pts[:, 1] - tip[1]
            cone = (above > 0) & (np.abs(pts[:, 0] - tip[0]) <= above)
            growth = float(above[cone].max()) if cone.any() else 0.0
            grew = growth >= 2.0 * cfg.material.l0
            flags.append(grew)
            details.append(f"growth past natural tip {growth * 1e3:.1f} mm")
            # pressure drop around the coalescence time
            hit = np.flatnonzero(rec.joined)
            if len(hit) == 0:
                flags.append(False)
                details.append("coalescence not seen in samples")
                continue
            t_join = float(rec.sample_times[hit[0]])
            t_before = float(rec.sample_times[hit[0] - 1]) if hit[0] > 0 else 0.0
            t = rec.times
            sel = (t >= t_before - DROP_WINDOW) & (t <= t_join + DROP_WINDOW)
            drop, _ = cracks.pressure_drops(t[sel], rec.probes["p_center"][sel], DROP_WINDOW)
            flags.append(drop >= MIN_DROP)
            details.append(f"coalescence at {t_join * 1e6:.0f} us, pressure drop {drop:.0%} "
                           f"within {DROP_WINDOW * 1e6:.0f} us")
        ok = record(6, "natural-crack interaction", all(flags), "; ".join(details))
        assert ok

    def test_7_kernel_property_suites(self):
        files = ["test_constitutive.py", "test_mesh.py", "test_phasefield.py", "test_flow.py",
                 "test_momentum.py", "test_oracles.py", "test_solver.py"]
        t0 = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                               *[str(TESTS / f) for f in files]],
                              capture_output=True, text=True, cwd=TESTS.parent)
        wall = time.perf_counter() - t0
        summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
        ok = record(7, "kernel property suites", proc.returncode == 0 and wall < KERNEL_RUNTIME,
                    f"{summary.strip('= ')}, {wall:.0f} s")
        assert ok, proc.stdout[-3000:]

    def test_8_determinism(self, tmp_path, capsys):
        path = str(benchmarks.scenario_path("single_crack"))
        codes = [cli_main(["run", path, "--output-dir", str(tmp_path / d), "--threads", "1"])
                 for d in ("a", "b")]
        names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        same = bool(names) and all((tmp_path / "a" / n).read_bytes()
                                   == (tmp_path / "b" / n).read_bytes() for n in names)
        ok = record(8, "determinism", codes == [0, 0] and same,
                    f"{', '.join(names)} byte-identical across two runs" if same
                    else "outputs differ")
        assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
