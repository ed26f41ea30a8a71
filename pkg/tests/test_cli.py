import importlib

import numpy as np
import pytest

from pinto import cli
from pinto.autodiff import jet as J
from pinto.problems import get_problem
from pinto.problems.analytic import kovasznay_solution
from pinto.problems.fields import ReferenceField

TINY_ARCH = "[arch]\nembed_dim = 4\nencoder_layers = 1\nheads = 1\nn_cau = 1\ncau_dense_layers = 0\nhead_layers = 0\n"


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "runs"))
    return tmp_path / "runs"


def tiny_cfg(tmp_path, problem, extra="", name=None):
    name = name or f"tiny-{problem}"
    text = (f"[run]\nname = {name}\n\n[train]\nproblem = {problem}\nn_collocation = 20\nn_boundary = 12\n"
            f"seq_len = 6\nepochs = 2\nbatches = 1\nlr = 1e-3\n{extra}\n" + TINY_ARCH)
    path = tmp_path / f"{name}.cfg"
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert cli.main(["train", "toy-desk", "--output", str(out), "--quiet"]) == cli.EXIT_OK
    return out


def test_missing_config_exits_2(capsys):
    assert cli.main(["train", "/nonexistent/x.cfg"]) == cli.EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize("extra", ["learning_rate = 1\n", "\n[optimizer]\nkind = adam\n"])
def test_unknown_key_or_section_exits_2(tmp_path, extra):
    assert cli.main(["train", str(tiny_cfg(tmp_path, "toy", extra))]) == cli.EXIT_CONFIG


def test_bad_subcommand_exits_2():
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG


def test_toy_train_writes_outputs_under_output_root(tmp_path, output_root, capsys):
    assert cli.main(["train", str(tiny_cfg(tmp_path, "toy")), "--quiet"]) == cli.EXIT_OK
    run = output_root / "tiny-toy"
    assert (run / "final.ckpt").exists() and (run / "history.csv").exists() and (run / "resolved.cfg").exists()
    assert "[arch]" in capsys.readouterr().out


def test_config_echo_round_trips(toy_run):
    echo = (toy_run / "resolved.cfg").read_text()
    again = cli.resolved_config(cli.load_config(str(toy_run / "resolved.cfg")))
    assert again == echo


def test_all_bundled_configs_validate():
    names = cli.bundled_configs()
    assert {"advection-desk", "kovasznay-desk", "toy-desk", "lid-paper"} <= set(names)
    for n in names:
        exp = cli.load_config(n)
        assert cli.resolved_config(cli.load_config(n)) == cli.resolved_config(exp)


def test_evaluate_writes_metrics(toy_run, capsys):
    assert cli.main(["evaluate", str(toy_run / "final.ckpt"), "--problem", "toy", "--grid", "8x5",
                     "--times", "2.0"]) == cli.EXIT_OK
    text = (toy_run / "metrics.csv").read_text()
    assert "seen" in text and ",2," in text
    assert "mean_rel" in capsys.readouterr().out


def test_evaluate_problem_mismatch_exits_4(toy_run):
    assert cli.main(["evaluate", str(toy_run / "final.ckpt"), "--problem", "burgers"]) == cli.EXIT_MISMATCH


def test_corrupt_checkpoint_exits_4(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert cli.main(["evaluate", str(bad)]) == cli.EXIT_MISMATCH


def test_oracle_zero_lid_is_zero(tmp_path):
    out = tmp_path / "lid0.csv"
    assert cli.main(["oracle", "lid", "--condition", "lid_velocity=0", "--grid", "9x9", "--out", str(out)]) == 0
    f = ReferenceField.load_csv(out)
    assert all(np.all(v == 0.0) for v in f.values.values())


def test_oracle_repeat_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.main(["oracle", "burgers", "--condition", "seed=0,index=1", "--grid", "16x5", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_oracle_kovasznay_matches_closed_form(tmp_path):
    out = tmp_path / "k.csv"
    assert cli.main(["oracle", "kovasznay", "--condition", "Re=40", "--grid", "7x9", "--out", str(out)]) == 0
    f = ReferenceField.load_csv(out)
    X, Y = np.meshgrid(f.axes["x"], f.axes["y"], indexing="ij")
    u, v, p = kovasznay_solution(X, Y, 40.0)
    np.testing.assert_array_equal(f.values["u"], u)
    np.testing.assert_array_equal(f.values["v"], v)
    np.testing.assert_array_equal(f.values["p"], p)


def test_oracle_relative_out_goes_under_output_root(output_root):
    assert cli.main(["oracle", "advection", "--condition", "index=0", "--grid", "8x3", "--out", "a.csv"]) == 0
    assert (output_root / "a.csv").exists()


def test_oracle_bad_condition_exits_2(tmp_path):
    assert cli.main(["oracle", "kovasznay", "--condition", "nu=3", "--out", str(tmp_path / "x.csv")]) == 2


def test_oracle_nonconvergence_exits_5(tmp_path, monkeypatch):
    cavity = importlib.import_module("pinto.problems.cavity")

    def boom(*a, **k):
        raise cavity.ConvergenceError("did not converge")

    monkeypatch.setattr(get_problem("lid").__class__, "reference", boom)
    assert cli.main(["oracle", "lid", "--condition", "lid_velocity=1", "--out", str(tmp_path / "x.csv")]) == 5


def test_gradcheck_passes(capsys):
    assert cli.main(["gradcheck", "--problems", "advection"]) == cli.EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_detects_corrupted_derivative(monkeypatch, capsys):
    good = J.DERIVS["tanh"]

    def bad(y):
        d = list(good(y))
        d[1] = d[1] * 1.01
        return tuple(d)

    monkeypatch.setitem(J.DERIVS, "tanh", bad)
    assert cli.main(["gradcheck", "--problems", "advection"]) == cli.EXIT_GRADCHECK
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize("problem,grid", [("advection", "16x4"), ("burgers", "16x4"), ("kovasznay", "8x8"),
                                          ("beltrami", "6x6x3"), ("lid", "8x8")])
def test_timing_all_problems(tmp_path, output_root, capsys, problem, grid):
    extra = "problem_params = {\"oracle_n\": 16}\n" if problem == "lid" else ""
    assert cli.main(["train", str(tiny_cfg(tmp_path, problem, extra)), "--quiet"]) == 0
    capsys.readouterr()
    ck = output_root / f"tiny-{problem}" / "final.ckpt"
    assert cli.main(["timing", str(ck), "--grid", grid, "--passes", "3"]) == 0
    out = capsys.readouterr().out
    assert "mean" in out and "std" in out and problem in out


def test_configs_lists_bundled(capsys):
    assert cli.main(["configs"]) == 0
    assert "advection-desk" in capsys.readouterr().out.split()
