import json

import pytest

from evacc.harness import (
    ExperimentConfig,
    curve_to_csv,
    emit_curves,
    emit_table,
    main,
    read_curve_csv,
    run_experiment,
)
from evacc.agents import EvalRecord


def small_config(tmp_path, name="run", **kw):
    defaults = dict(agent_kind="threshold", epsilon=0.2, seed=1, episodes=200,
                    eval_interval=100, eval_episodes=20,
                    out_dir=str(tmp_path / name))
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def synthetic_summary(kind, epsilon, reward):
    return {"config": {"agent_kind": kind, "epsilon": epsilon},
            "final_reward": reward}


class TestExperimentConfig:
    def test_rejects_unknown_agent(self):
        with pytest.raises(ValueError):
            ExperimentConfig(agent_kind="dqn", epsilon=0.1)

    def test_rejects_unknown_hyperparameter(self):
        with pytest.raises(ValueError):
            ExperimentConfig(agent_kind="threshold", epsilon=0.1,
                             hyperparams={"momentum": 0.9})

    def test_episode_default_depends_on_agent(self):
        assert ExperimentConfig(agent_kind="threshold", epsilon=0.1).episodes == 50_000
        assert ExperimentConfig(agent_kind="joint", epsilon=0.1).episodes == 150_000

    def test_dict_roundtrip_is_fixed_point(self):
        cfg = ExperimentConfig(agent_kind="joint", epsilon=0.4, seed=7,
                               hyperparams={"lr_evidence": 1e-3})
        once = ExperimentConfig.from_dict(cfg.to_dict())
        assert once == cfg
        assert ExperimentConfig.from_dict(once.to_dict()) == once

    def test_json_roundtrip_is_fixed_point(self):
        cfg = ExperimentConfig(agent_kind="threshold", epsilon=0.6, seed=3,
                               hyperparams={"lr": 2e-4})
        text = json.dumps(cfg.to_dict(), sort_keys=True)
        again = json.dumps(ExperimentConfig.from_dict(json.loads(text)).to_dict(),
                           sort_keys=True)
        assert text == again


class TestRunExperiment:
    def test_mc_oracle_summary(self, tmp_path):
        cfg = ExperimentConfig(agent_kind="mc_oracle", epsilon=0.4, seed=1,
                               mc_rollouts=10_000, out_dir=str(tmp_path / "mc"))
        summary = run_experiment(cfg)
        assert abs(summary["best_mean_reward"] - 25.0) < 1.0
        assert (tmp_path / "mc" / "sweep.csv").exists()
        assert (tmp_path / "mc" / "summary.json").exists()

    def test_learning_run_writes_curve_and_summary(self, tmp_path):
        cfg = small_config(tmp_path)
        summary = run_experiment(cfg)
        curve = read_curve_csv(tmp_path / "run" / "curve.csv")
        assert len(curve) == 2  # 200 episodes / 100 interval
        assert summary["curve_rows"] == 2
        saved = json.loads((tmp_path / "run" / "summary.json").read_text())
        assert saved["config"] == cfg.to_dict()

    def test_curve_row_count_with_initial_eval(self, tmp_path):
        cfg = small_config(tmp_path, name="run2", initial_eval=True)
        run_experiment(cfg)
        curve = read_curve_csv(tmp_path / "run2" / "curve.csv")
        assert [r.episodes_trained for r in curve] == [0, 100, 200]

    def test_identical_config_reruns_are_byte_identical(self, tmp_path):
        cfg = small_config(tmp_path, name="same")
        run_experiment(cfg)
        first_curve = (tmp_path / "same" / "curve.csv").read_bytes()
        first_summary = (tmp_path / "same" / "summary.json").read_bytes()
        run_experiment(small_config(tmp_path, name="same"))
        assert (tmp_path / "same" / "curve.csv").read_bytes() == first_curve
        assert (tmp_path / "same" / "summary.json").read_bytes() == first_summary

    def test_checkpoints_written_on_request(self, tmp_path):
        cfg = small_config(tmp_path, name="ckpt", episodes=100, save_params=True)
        run_experiment(cfg)
        assert (tmp_path / "ckpt" / "params_policy.bin").exists()

    def test_smoke_noiseless_threshold_learns_fast(self, tmp_path):
        cfg = small_config(tmp_path, name="smoke", epsilon=0.0, episodes=5000,
                           eval_interval=500, eval_episodes=200)
        summary = run_experiment(cfg)
        assert summary["final_reward"] >= 29.0


class TestCurveCsv:
    def test_roundtrip(self, tmp_path):
        curve = [EvalRecord(500, 0.5, 12.25, -3.75), EvalRecord(1000, 1.0, 1.0, 30.0)]
        path = tmp_path / "curve.csv"
        curve_to_csv(curve, path)
        assert read_curve_csv(path) == curve

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            read_curve_csv(path)

    def test_malformed_row_error_names_the_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("episodes_trained,accuracy,mean_decision_time,mean_reward\n"
                        "500,0.5,12.0,1.5\n"
                        "oops,x,y\n")
        with pytest.raises(ValueError, match="row 3"):
            read_curve_csv(path)


class TestEmitTable:
    def test_full_grid_layout(self):
        eps = [0.0, 0.2, 0.4, 0.6, 0.8]
        mc = [30.0, 27.6, 25.0, 18.4, -8.2]
        summaries = [synthetic_summary("mc_oracle", e, r) for e, r in zip(eps, mc)]
        summaries += [synthetic_summary("a2c_rnn", e, r)
                      for e, r in zip(eps, [30.0, 26.9, 7.5, -23.0, -30.0])]
        summaries += [synthetic_summary("threshold", e, r)
                      for e, r in zip(eps, [30.0, 27.6, 24.9, 17.4, -13.7])]
        summaries += [synthetic_summary("joint", e, r)
                      for e, r in zip(eps, [29.7, 25.7, 22.2, 12.5, -25.2])]
        text = emit_table(summaries)
        lines = text.splitlines()
        assert lines[0].split() == ["agent", "eps=0", "eps=0.2", "eps=0.4",
                                    "eps=0.6", "eps=0.8"]
        assert "Monte-Carlo sweep" in lines[2]
        assert "30.0" in lines[2] and "-8.2" in lines[2]
        assert any("delta" in line for line in lines)
        # a2c_rnn delta at eps 0.4 is 7.5 - 25.0
        rnn_delta = [l for l in lines if l.startswith("A2C-RNN")][-1]
        assert "-17.5" in rnn_delta

    def test_single_cell(self):
        text = emit_table([synthetic_summary("threshold", 0.4, 24.9)])
        assert "24.9" in text and "eps=0.4" in text

    def test_mc_deltas_against_itself_are_zero(self):
        summaries = [synthetic_summary("mc_oracle", 0.2, 27.6),
                     synthetic_summary("threshold", 0.2, 27.6)]
        text = emit_table(summaries)
        assert "+0.0" in text

    def test_missing_cells_render_blank(self):
        summaries = [synthetic_summary("mc_oracle", 0.0, 30.0),
                     synthetic_summary("joint", 0.2, 25.7)]
        text = emit_table(summaries)
        joint_row = [l for l in text.splitlines() if l.startswith("Joint")][0]
        assert "25.7" in joint_row

    def test_multiple_seeds_per_cell_show_their_mean(self):
        summaries = [synthetic_summary("threshold", 0.4, 22.0),
                     synthetic_summary("threshold", 0.4, 26.0)]
        text = emit_table(summaries)
        row = [l for l in text.splitlines() if l.startswith("Threshold")][0]
        assert "24.0" in row


def write_run_dir(tmp_path, name, kind, epsilon, curve_rows=3):
    d = tmp_path / name
    d.mkdir()
    summary = {"config": {"agent_kind": kind, "epsilon": epsilon},
               "final_reward": 10.0, "final_accuracy": 0.8,
               "final_decision_time": 4.0}
    (d / "summary.json").write_text(json.dumps(summary))
    if kind != "mc_oracle":
        curve = [EvalRecord(500 * (i + 1), 0.1 * i, 10.0 - i, -20.0 + 5 * i)
                 for i in range(curve_rows)]
        curve_to_csv(curve, d / "curve.csv")
    return d


class TestEmitCurves:
    def test_single_agent_single_eps_writes_three_charts(self, tmp_path):
        d = write_run_dir(tmp_path, "thr", "threshold", 0.4)
        out = emit_curves([d], tmp_path / "plots")
        assert len(out) == 3
        assert all(p.suffix == ".svg" and p.exists() for p in out)

    def test_full_grid_writes_fifteen_charts(self, tmp_path):
        paths = []
        for e in (0.0, 0.2, 0.4, 0.6, 0.8):
            tag = f"{e:g}".replace(".", "p")
            for kind in ("a2c_rnn", "threshold", "joint"):
                paths.append(write_run_dir(tmp_path, f"{kind}{tag}", kind, e))
            paths.append(write_run_dir(tmp_path, f"mc{tag}", "mc_oracle", e))
        out = emit_curves(paths, tmp_path / "plots")
        assert len(out) == 15

    def test_empty_curve_aborts_without_output(self, tmp_path):
        good = write_run_dir(tmp_path, "ok", "threshold", 0.2)
        bad = write_run_dir(tmp_path, "bad", "threshold", 0.4)
        (bad / "curve.csv").write_text("")
        with pytest.raises(ValueError):
            emit_curves([good, bad], tmp_path / "plots")
        assert not (tmp_path / "plots").exists()

    def test_malformed_row_aborts_with_row_number(self, tmp_path):
        bad = write_run_dir(tmp_path, "bad2", "threshold", 0.4)
        with open(bad / "curve.csv", "a") as fh:
            fh.write("1,2\n")
        with pytest.raises(ValueError, match="row 5"):
            emit_curves([bad], tmp_path / "plots")


class TestCli:
    def test_run_and_table_and_plot(self, tmp_path, capsys):
        out = tmp_path / "cli_run"
        rc = main(["run", "--agent", "threshold", "--epsilon", "0.0", "--seed", "2",
                   "--episodes", "300", "--eval-interval", "100",
                   "--eval-episodes", "10", "--out", str(out)])
        assert rc == 0
        assert (out / "curve.csv").exists()

        rc = main(["table", str(out), "--out", str(tmp_path / "table.txt")])
        assert rc == 0
        assert "Threshold learner" in (tmp_path / "table.txt").read_text()

        rc = main(["plot", str(out), "--out", str(tmp_path / "plots")])
        assert rc == 0
        assert len(list((tmp_path / "plots").glob("*.svg"))) == 3

    def test_sweep_subcommand(self, tmp_path):
        out = tmp_path / "cli_sweep"
        rc = main(["sweep", "--epsilon", "0.0", "--seed", "1",
                   "--rollouts", "2000", "--out", str(out)])
        assert rc == 0
        assert (out / "sweep.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["best_mean_reward"] == 30.0

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "agent_kind": "threshold", "epsilon": 0.2, "seed": 5,
            "episodes": 100, "eval_interval": 50, "eval_episodes": 5,
            "lr": 0.0002, "out_dir": str(tmp_path / "from_file")}))
        out = tmp_path / "overridden"
        rc = main(["run", "--config", str(cfg_file), "--epsilon", "0.0",
                   "--out", str(out)])
        assert rc == 0
        saved = json.loads((out / "summary.json").read_text())
        assert saved["config"]["epsilon"] == 0.0      # flag wins
        assert saved["config"]["seed"] == 5           # file value kept
        assert saved["config"]["lr"] == 0.0002

    def test_joint_run_with_sensitivity_flag(self, tmp_path):
        out = tmp_path / "cli_joint"
        rc = main(["run", "--agent", "joint", "--epsilon", "0.2", "--seed", "1",
                   "--episodes", "20", "--eval-interval", "10",
                   "--eval-episodes", "5", "--sensitivity", "2.0",
                   "--out", str(out)])
        assert rc == 0
        saved = json.loads((out / "summary.json").read_text())
        assert saved["config"]["sensitivity"] == 2.0

    def test_unwritable_output_dir_fails_nonzero(self, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        rc = main(["run", "--agent", "threshold", "--epsilon", "0.1", "--seed", "1",
                   "--episodes", "10", "--eval-interval", "10",
                   "--eval-episodes", "2", "--out", str(target)])
        assert rc == 1

    def test_invalid_agent_rejected_by_parser(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--agent", "dqn", "--epsilon", "0.1", "--out", "x"])
        assert exc.value.code != 0
