import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from reflectsep.cli import _build_solver_config, build_parser, main
from reflectsep.pngio import load_png, quantize_u8, save_png
from reflectsep.solver import TRACE_HEADER, SolverConfig
from reflectsep.synth import MixtureSpec, procedural_pair, synthesize_mixture

FIXTURES = Path(__file__).parent / "fixtures"

FAST = ["--scales", "1", "--layers", "1", "--atoms", "4", "--kernel", "3"]


def run_synth(out_dir, kind="checker", seed=7, size=32):
    rc = main(
        ["synth", "--kind", kind, "--seed", str(seed), "--size", str(size),
         "-o", str(out_dir)]
    )
    assert rc == 0
    return out_dir / f"mix_{kind}_s{seed}.png"


# --- synth -------------------------------------------------------------------


def test_synth_writes_triplet(tmp_path):
    mix = run_synth(tmp_path)
    assert mix.exists()
    assert (tmp_path / "gt_t_checker_s7.png").exists()
    assert (tmp_path / "gt_r_checker_s7.png").exists()
    assert load_png(mix).shape == (32, 32, 1)


def test_synth_deterministic_bytes(tmp_path):
    a = run_synth(tmp_path / "a")
    b = run_synth(tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()


def test_synth_matches_library_rendering(tmp_path):
    mix_png = run_synth(tmp_path, kind="ramp", seed=3, size=48)
    t, r = procedural_pair("ramp", 48, seed=3)
    want = synthesize_mixture(t, r, MixtureSpec(blur_sigma=2.0, gain=0.6, clip=True))
    assert np.array_equal(load_png(mix_png), quantize_u8(want) / 255.0)


def test_synth_bad_kind_exits_2(tmp_path, capsys):
    with pytest.raises(SystemExit):  # argparse rejects the choice itself
        main(["synth", "--kind", "plaid", "-o", str(tmp_path)])
    rc = main(["synth", "--kind", "ramp", "--size", "8", "-o", str(tmp_path)])
    assert rc == 2
    assert "size" in capsys.readouterr().err


# --- separate ----------------------------------------------------------------


def test_separate_writes_estimates(tmp_path):
    mix = run_synth(tmp_path)
    out = tmp_path / "out"
    rc = main(["separate", str(mix), "-o", str(out)] + FAST)
    assert rc == 0
    t_est = load_png(out / "mix_checker_s7_T.png")
    r_est = load_png(out / "mix_checker_s7_R.png")
    assert t_est.shape == r_est.shape == (32, 32, 1)


def test_separate_zero_steps_identity(tmp_path):
    mix = run_synth(tmp_path)
    out = tmp_path / "out"
    rc = main(
        ["separate", str(mix), "-o", str(out), "--steps", "0", "--kappa", "0",
         "--scales", "1", "--layers", "1", "--atoms", "4", "--kernel", "3"]
    )
    assert rc == 0
    assert np.array_equal(load_png(out / "mix_checker_s7_T.png"), load_png(mix))
    assert np.all(load_png(out / "mix_checker_s7_R.png") == 0.0)


def test_separate_trace_and_plot(tmp_path):
    mix = run_synth(tmp_path)
    trace = tmp_path / "trace.csv"
    plot = tmp_path / "trace_fig.png"
    rc = main(
        ["separate", str(mix), "-o", str(tmp_path / "o"), "--trace", str(trace),
         "--plot", str(plot)] + FAST
    )
    assert rc == 0
    lines = trace.read_text().strip().split("\n")
    assert lines[0] == TRACE_HEADER
    assert len(lines) == 2  # one scale, one layer
    assert plot.exists() and plot.stat().st_size > 0


def test_separate_truth_psnr_in_trace(tmp_path):
    mix = run_synth(tmp_path)
    trace = tmp_path / "trace.csv"
    rc = main(
        ["separate", str(mix), "-o", str(tmp_path / "o"), "--trace", str(trace),
         "--truth-t", str(tmp_path / "gt_t_checker_s7.png"),
         "--truth-r", str(tmp_path / "gt_r_checker_s7.png")] + FAST
    )
    assert rc == 0
    last = trace.read_text().strip().split("\n")[-1].split(",")
    assert last[-1] != "" and last[-2] != ""
    assert float(last[-2]) > 0


def test_separate_missing_input_exits_2(tmp_path, capsys):
    rc = main(["separate", str(tmp_path / "nope.png")])
    assert rc == 2
    assert "does not exist" in capsys.readouterr().err


def test_separate_divergence_exits_3(tmp_path, capsys):
    mix = run_synth(tmp_path)
    with np.errstate(all="ignore"):
        rc = main(
            ["separate", str(mix), "-o", str(tmp_path / "o"), "--steps", "inf",
             "--scales", "1", "--layers", "1", "--atoms", "4", "--kernel", "3"]
        )
    assert rc == 3
    assert "diverged" in capsys.readouterr().err


def test_separate_empty_directory_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    rc = main(["separate", str(empty)])
    assert rc == 2
    assert "no PNG files" in capsys.readouterr().err


@pytest.mark.parametrize("jobs", ["1", "3"])
def test_separate_directory_batch(tmp_path, jobs):
    src = tmp_path / f"batch{jobs}"
    run_synth(src, kind="ramp", seed=1)
    run_synth(src, kind="checker", seed=2)
    out = tmp_path / f"out{jobs}"
    rc = main(
        ["separate", str(src), "-o", str(out), "--jobs", jobs,
         "--trace", "yes", "--plot", "yes"] + FAST
    )
    assert rc == 0
    # every PNG in the directory, ground truths included, gets an estimate pair
    for stem in ("mix_ramp_s1", "mix_checker_s2", "gt_t_ramp_s1"):
        assert (out / f"{stem}_T.png").exists()
        assert (out / f"{stem}_R.png").exists()
        assert (out / f"{stem}_trace.csv").exists()
        assert (out / f"{stem}_trace.png").exists()


def test_jobs_do_not_change_results(tmp_path):
    src = tmp_path / "src"
    run_synth(src, kind="ramp", seed=1)
    run_synth(src, kind="blobs", seed=2)
    out1 = tmp_path / "serial"
    out4 = tmp_path / "pooled"
    assert main(["separate", str(src), "-o", str(out1), "--jobs", "1"] + FAST) == 0
    assert main(["separate", str(src), "-o", str(out4), "--jobs", "4"] + FAST) == 0
    names = sorted(p.name for p in out1.iterdir())
    assert names == sorted(p.name for p in out4.iterdir())
    for name in names:
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()


# --- config handling -----------------------------------------------------------


def parse_separate(extra):
    parser = build_parser()
    return parser.parse_args(["separate", "in.png"] + extra)


def test_config_defaults_match_dataclass():
    cfg = _build_solver_config(parse_separate([]))
    assert cfg == SolverConfig()


def test_config_file_then_flags_precedence(tmp_path):
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"kappa": 0.3, "layers": 5, "tau": 0.9}))
    cfg = _build_solver_config(parse_separate(["--config", str(cfg_file)]))
    assert cfg.kappa == 0.3 and cfg.layers == 5 and cfg.tau == 0.9

    cfg = _build_solver_config(
        parse_separate(["--config", str(cfg_file), "--kappa", "0.05"])
    )
    assert cfg.kappa == 0.05 and cfg.layers == 5  # flag wins, file still applies


def test_steps_flag_sets_all_etas(tmp_path):
    cfg = _build_solver_config(parse_separate(["--steps", "0.2"]))
    assert (cfg.eta1, cfg.eta2, cfg.eta3, cfg.eta4) == (0.2, 0.2, 0.2, 0.2)
    assert cfg.auto_step is False

    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"steps": 0.4}))
    cfg = _build_solver_config(parse_separate(["--config", str(cfg_file)]))
    assert cfg.eta3 == 0.4 and cfg.auto_step is False
    cfg = _build_solver_config(
        parse_separate(["--config", str(cfg_file), "--steps", "0.1"])
    )
    assert cfg.eta3 == 0.1


def test_unknown_config_keys_exit_2(tmp_path, capsys):
    cfg_file = tmp_path / "bad.json"
    cfg_file.write_text(json.dumps({"kappa": 0.3, "smoothing": 1}))
    mix = run_synth(tmp_path)
    rc = main(["separate", str(mix), "--config", str(cfg_file)])
    assert rc == 2
    assert "unknown config keys: smoothing" in capsys.readouterr().err


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    mix = run_synth(tmp_path)
    assert main(["separate", str(mix), "--config", str(bad)]) == 2
    assert main(["separate", str(mix), "--config", str(tmp_path / "gone.json")]) == 2


# --- eval ----------------------------------------------------------------------


def test_eval_identical_files(tmp_path, capsys):
    run_synth(tmp_path)
    capsys.readouterr()  # drop the synth output line
    gt = tmp_path / "gt_t_checker_s7.png"
    rc = main(["eval", str(gt), str(gt), "--est-r", str(gt), "--ref-r", str(gt)])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["psnr_t"] == 100.0 and data["psnr_r"] == 100.0
    assert data["ssim_t"] == 1.0 and data["ssim_r"] == 1.0
    assert data["recon"] == 0.0


def test_eval_field_set_matches_schema(tmp_path, capsys):
    run_synth(tmp_path)
    capsys.readouterr()
    mix = tmp_path / "mix_checker_s7.png"
    gt = tmp_path / "gt_t_checker_s7.png"
    assert main(["eval", str(mix), str(gt)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert set(data) == {
        "psnr_t", "psnr_r", "ssim_t", "ssim_r",
        "excl_multiscale", "excl_transform", "recon",
    }
    assert data["psnr_r"] is None and data["excl_transform"] is None


def test_eval_shape_mismatch_exits_2(tmp_path, capsys):
    run_synth(tmp_path, size=32)
    run_synth(tmp_path / "big", size=64)
    rc = main(
        ["eval", str(tmp_path / "mix_checker_s7.png"),
         str(tmp_path / "big" / "mix_checker_s7.png")]
    )
    assert rc == 2
    assert "shape" in capsys.readouterr().err


# --- committed fixture regressions ----------------------------------------------


def test_committed_mixture_reproduces(tmp_path):
    regen = run_synth(tmp_path, kind="checker", seed=7, size=64)
    committed = FIXTURES / "mix_checker_s7.png"
    assert np.array_equal(load_png(regen), load_png(committed))
    for name in ("gt_t_checker_s7.png", "gt_r_checker_s7.png"):
        assert (tmp_path / name).read_bytes() == (FIXTURES / name).read_bytes()


def test_committed_eval_metrics(tmp_path, capsys):
    rc = main(
        ["eval", str(FIXTURES / "mix_checker_s7.png"),
         str(FIXTURES / "gt_t_checker_s7.png"),
         "--est-r", str(FIXTURES / "gt_r_checker_s7.png"),
         "--ref-r", str(FIXTURES / "gt_r_checker_s7.png"),
         "--report", str(tmp_path / "m.json")]
    )
    assert rc == 0
    got = json.loads((tmp_path / "m.json").read_text())
    want = json.loads((FIXTURES / "metrics_checker_s7.json").read_text())
    assert set(got) == set(want)
    for key, val in want.items():
        assert got[key] == pytest.approx(val, abs=1e-9), key


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "reflectsep.cli", "synth", "--kind", "blobs",
         "--size", "32", "-o", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "mix_blobs_s0.png" in proc.stdout
    assert (tmp_path / "mix_blobs_s0.png").exists()
