import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlconsensus.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main
from nlconsensus.config import ConfigError, ExperimentConfig, parse_config, render_config
from nlconsensus.graph import generate, write_edgelist

BASE = "graph=complete:10\ntransmit=tanh:0.05:10\nalpha=inverse_t\nsteps=20\n"


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParse:
    def test_minimal(self):
        cfg = parse_config(BASE)
        assert cfg.graph == "complete:10" and cfg.steps == 20
        assert cfg.noise == "none" and cfg.trials == 1

    def test_transmit(self):
        f = parse_config(BASE).transmit_function()
        assert (f.kind, f.omega, f.rho) == ("tanh", 0.05, 10.0)

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\n" + BASE.replace("steps=20", "steps=20  # short"))
        assert cfg.steps == 20

    def test_collects_every_error(self):
        text = "graph=complete:10\ncolour=blue\ntransmit=sine:1:0\nsteps=abc\nsteps=3\njunk\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        errs = info.value.errors
        assert any("line 2" in e and "unknown key" in e for e in errs)
        assert any("line 3" in e and "transmit" in e for e in errs)
        assert any("line 4" in e and "steps" in e for e in errs)
        assert any("line 5" in e and "duplicate" in e for e in errs)
        assert any("line 6" in e for e in errs)
        assert any("missing required key 'alpha'" in e for e in errs)
        assert len(errs) == 6

    @pytest.mark.parametrize("line", [
        "graph=random_geometric:10", "graph=complete:0", "alpha=constant:-1", "noise=vector:-1",
        "seed=-3", "stride=0", "trials=0", "theta=nan", "sensing_std=-1", "steps=1.5",
    ])
    def test_malformed(self, line):
        key = line.split("=")[0]
        text = "\n".join(l for l in BASE.splitlines() if not l.startswith(key + "=")) + "\n" + line
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_file_graph(self, tmp_path):
        path = tmp_path / "g.txt"
        write_edgelist(generate("cycle", 5), path)
        cfg = parse_config(BASE.replace("complete:10", f"file:{path}"))
        assert cfg.topology() == generate("cycle", 5)


designators = st.one_of(
    st.just("linear"),
    st.builds(
        lambda k, w, r: f"{k}:{w!r}:{r!r}",
        st.sampled_from(["tanh", "arctan", "gudermannian", "algebraic_sigmoid"]),
        st.floats(1e-4, 10), st.floats(-20, 20),
    ),
    st.builds(lambda w, r: f"arctan:{w!r}:{r!r}:normalized", st.floats(1e-4, 10), st.floats(-20, 20)),
)
graphs = st.one_of(
    st.builds(lambda f, n: f"{f}:{n}", st.sampled_from(["path", "cycle", "complete", "star"]), st.integers(1, 500)),
    st.builds(lambda n, c: f"grid:{n}:{c}", st.integers(1, 100), st.integers(1, 10)),
    st.builds(lambda n, r: f"random_geometric:{n}:{r!r}", st.integers(1, 300), st.floats(0.01, 1.4)),
    st.builds(lambda n, p: f"erdos_renyi:{n}:{p!r}", st.integers(1, 300), st.floats(0.01, 1.0)),
)
schedules = st.one_of(
    st.just("inverse_t"),
    st.builds(lambda a: f"constant:{a!r}", st.floats(1e-3, 10)),
    st.builds(lambda a: f"harmonic:{a!r}", st.floats(1e-3, 10)),
    st.builds(lambda a, t: f"a_over_t:{a!r}:{t!r}", st.floats(1e-3, 10), st.floats(0.5, 100)),
)
noises = st.one_of(
    st.just("none"),
    st.builds(lambda s: f"per_edge:{s!r}", st.floats(0, 10)),
    st.builds(lambda s: f"vector:{s!r}", st.floats(0, 10)),
)
reals = st.floats(-1e6, 1e6, allow_nan=False)


@given(
    graphs, designators, schedules, st.integers(0, 10**6), noises,
    st.one_of(st.none(), st.integers(0, 2**64 - 1)), reals, st.floats(0, 100),
    st.one_of(st.none(), reals), st.integers(0, 2**64 - 1), st.integers(1, 50),
    st.integers(1, 5000), st.integers(1, 500),
    st.text("abcdefghijklmnopqrstuvwxyz_/.0123456789", min_size=1, max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_round_trip(graph, transmit, alpha, steps, noise, gseed, theta, std, target, seed, stride, trials, window, out):
    first = parse_config(
        f"graph={graph}\ntransmit={transmit}\nalpha={alpha}\nsteps={steps}\nnoise={noise}\n"
        f"graph_seed={'none' if gseed is None else gseed}\ntheta={theta!r}\nsensing_std={std!r}\n"
        f"target_mean={'none' if target is None else repr(target)}\nseed={seed}\nstride={stride}\n"
        f"trials={trials}\nwindow={window}\nout={out}\n"
    )
    assert isinstance(first, ExperimentConfig)
    again = parse_config(render_config(first))
    assert again == first
    assert render_config(again) == render_config(first)


class TestCli:
    def test_spectrum_path(self, capsys):
        assert main(["spectrum", "--graph", "path:3"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "lambda_2 = 0.99999999999999" in out or "lambda_2 = 1" in out
        assert "connectivity = connected" in out

    def test_spectrum_complete(self, capsys):
        assert main(["spectrum", "--graph", "complete:10"]) == EXIT_OK
        out = capsys.readouterr().out
        lam2 = float(out.split("lambda_2 = ")[1].split()[0])
        lamn = float(out.split("lambda_N = ")[1].split()[0])
        assert lam2 == pytest.approx(10, rel=1e-12) and lamn == pytest.approx(10, rel=1e-12)

    def test_spectrum_disconnected(self, tmp_path, capsys):
        path = tmp_path / "two.txt"
        path.write_text("nodes 4\n0 1\n2 3\n")
        assert main(["spectrum", "--graph", f"file:{path}"]) != EXIT_OK
        assert "disconnected" in capsys.readouterr().out

    def test_covariance_k10(self, capsys):
        assert main(["covariance", "--graph", "complete:10", "--sigma2v", "1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert float(out.split("a_star = ")[1].split()[0]) == pytest.approx(0.055, rel=1e-12)
        assert float(out.split("optimal_norm = ")[1].split()[0]) == pytest.approx(0.003025, rel=1e-12)
        assert float(out.split("spectral_norm = ")[1].split()[0]) == pytest.approx(0.003025, rel=1e-6)

    def test_covariance_invalid_gain(self, capsys):
        assert main(["covariance", "--graph", "complete:10", "--a", "0.01"]) == EXIT_INVALID
        captured = capsys.readouterr()
        assert "2 a lambda_2(L) h'(theta0) > 1" in captured.out + captured.err

    def test_covariance_half_slope(self, capsys):
        main(["covariance", "--graph", "complete:10", "--transmit", "linear"])
        lin = float(capsys.readouterr().out.split("optimal_norm = ")[1].split()[0])
        main(["covariance", "--graph", "complete:10", "--transmit", f"tanh:0.5:{0.0!r}"])
        half = float(capsys.readouterr().out.split("optimal_norm = ")[1].split()[0])
        assert half / lin == pytest.approx(4.0, rel=1e-12)

    def test_run_writes_csv(self, tmp_path, capsys):
        cfg = write(tmp_path, BASE + f"out={tmp_path / 'r'}\n")
        assert main(["run", "--config", cfg]) == EXIT_OK
        csv = (tmp_path / "r_trajectory.csv").read_text()
        assert len(csv.splitlines()) == 22
        assert "final_err_norm" in (tmp_path / "r_summary.txt").read_text()

    def test_run_zero_steps(self, tmp_path):
        cfg = write(tmp_path, BASE.replace("steps=20", "steps=0") + f"out={tmp_path / 'z'}\n")
        assert main(["run", "--config", cfg]) == EXIT_OK
        assert len((tmp_path / "z_trajectory.csv").read_text().splitlines()) == 2

    def test_run_deterministic(self, tmp_path):
        text = BASE + "noise=per_edge:1.0\ntheta=5\n"
        cfg = write(tmp_path, text)
        main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a_trajectory.csv").read_bytes() == (tmp_path / "b_trajectory.csv").read_bytes()

    def test_step_bound_warning(self, tmp_path, capsys):
        cfg = write(tmp_path, BASE.replace("inverse_t", "constant:9.9").replace("tanh:0.05:10", "linear")
                    .replace("steps=20", "steps=2") + f"out={tmp_path / 'w'}\n")
        assert main(["run", "--config", cfg]) == EXIT_OK
        assert "violates alpha < 2/(c lambda_N)" in capsys.readouterr().out

    def test_divergence_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, BASE.replace("inverse_t", "constant:9.9").replace("tanh:0.05:10", "linear")
                    .replace("steps=20", "steps=500") + "theta=1\n" + f"out={tmp_path / 'd'}\n")
        assert main(["run", "--config", cfg]) == EXIT_NUMERIC
        assert "step" in capsys.readouterr().err

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, "graph=complete:10\nfoo=1\n")
        assert main(["run", "--config", cfg]) == EXIT_INVALID
        err = capsys.readouterr().err
        assert "unknown key" in err and "missing required key" in err

    def test_usage_error_is_validation(self, capsys):
        assert main(["figure", "9"]) == EXIT_INVALID
        assert main(["bogus"]) == EXIT_INVALID

    def test_mc_needs_two_trials(self, tmp_path):
        cfg = write(tmp_path, BASE)
        assert main(["mc", "--config", cfg, "--trials", "1"]) == EXIT_INVALID

    def test_mc_noiseless_two_trials(self, tmp_path, capsys):
        cfg = write(tmp_path, BASE + "trials=2\ntheta=3\n")
        assert main(["mc", "--config", cfg, "--out", str(tmp_path / "m")]) == EXIT_OK
        summary = (tmp_path / "m_summary.txt").read_text()
        assert float(summary.split("empirical_mse = ")[1].split()[0]) <= 1e-12
        assert "mse_within_bound = True" in summary and "unbiased_4se = True" in summary
        lines = (tmp_path / "m_mean_error.csv").read_text().splitlines()
        assert lines[0] == "t,mean_err_norm" and len(lines) == 22

    def test_figure_three(self, tmp_path, capsys):
        assert main(["figure", "3", "--out", str(tmp_path / "f")]) == EXIT_OK
        header = (tmp_path / "f_fig3_err_norm.csv").read_text().splitlines()[0]
        assert header == "t,alpha_2,alpha_4,alpha_6,alpha_8"
        cfg = (tmp_path / "f_fig3_alpha_8_summary.txt").read_text()
        assert "transmit=gudermannian:0.005:0.0" in cfg and "alpha=constant:8.0" in cfg
        assert "target_mean=114.0" in cfg and "warning" not in cfg

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "nlconsensus", "spectrum", "--graph", "complete:3"],
            capture_output=True, text=True, env={**os.environ},
        )
        assert proc.returncode == 0 and "lambda_N = 3" in proc.stdout
