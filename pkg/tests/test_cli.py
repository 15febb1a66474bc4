import json
import os

import pytest
import yaml

from madsnas.cli import cli, main

GOLDEN_TOTAL = (
    "total macs=440458045 params=5962891 mac_ratio=0.7930 param_ratio=0.5336"
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestMacs:
    def test_identity_ratios(self, capsys):
        code, out, _ = run(capsys, "macs", "--family", "resnet18")
        assert code == 0
        assert "mac_ratio=1.0000 param_ratio=1.0000" in out

    def test_scaled_totals(self, capsys):
        code, out, _ = run(
            capsys, "macs", "--family", "resnet18", "--multipliers", "1,0.73,1.18"
        )
        assert code == 0
        assert GOLDEN_TOTAL in out

    def test_csv_format(self, capsys):
        code, out, _ = run(
            capsys, "macs", "--family", "senet18", "--format", "csv"
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "layer,out_channels,out_height,out_width,macs,params"
        assert lines[1].startswith("stem,64,32,32,")

    def test_bad_multipliers_is_config_error(self, capsys):
        code, _, err = run(
            capsys, "macs", "--family", "resnet18", "--multipliers", "a,b,c"
        )
        assert code == 1
        assert "error:" in err

    def test_wrong_multiplier_count(self, capsys):
        code, _, _ = run(
            capsys, "macs", "--family", "resnet18", "--multipliers", "1,1"
        )
        assert code == 1

    def test_unknown_family_rejected(self, capsys):
        code, _, _ = run(capsys, "macs", "--family", "vgg16")
        assert code == 1


class TestSurrogateAndBbTest:
    def test_surrogate_round_trip(self, capsys, tmp_path):
        point = tmp_path / "p.txt"
        point.write_text("0.042 0.005 2 512\n")
        code, out, _ = run(
            capsys, "surrogate", "--kind", "hpo_accuracy", str(point), "0"
        )
        assert code == 0
        assert float(out.strip()) == pytest.approx(87.8)

    def test_surrogate_spec_file(self, capsys, tmp_path):
        point = tmp_path / "p.txt"
        point.write_text("0\n")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"value": 75.5}))
        code, out, _ = run(
            capsys, "surrogate", "--kind", "constant", "--spec", str(spec),
            str(point), "0",
        )
        assert code == 0
        assert float(out.strip()) == 75.5

    def test_failing_surrogate_exits_nonzero(self, capsys, tmp_path):
        point = tmp_path / "p.txt"
        point.write_text("0\n")
        code, _, _ = run(capsys, "surrogate", "--kind", "failing", str(point), "0")
        assert code != 0

    def test_bb_test_ok(self, capsys):
        code, out, _ = run(
            capsys, "bb-test",
            "--command", "madsnas surrogate --kind quadratic {input} {seed}",
            "--point", "0.5",
        )
        assert code == 0
        assert "protocol OK" in out

    def test_bb_test_failure(self, capsys):
        code, _, err = run(
            capsys, "bb-test", "--command", "false {input}", "--point", "0",
        )
        assert code == 2
        assert "protocol FAILED" in err

    def test_bb_test_bad_point(self, capsys):
        code, _, _ = run(
            capsys, "bb-test", "--command", "true {input}", "--point", "abc",
        )
        assert code == 1


class TestNasCommand:
    def test_run_writes_artifacts(self, capsys, tmp_path):
        outdir = tmp_path / "run"
        code, out, _ = run(
            capsys, "nas",
            "--family", "resnet18",
            "--bb-command", "madsnas surrogate --kind nas_accuracy {input} {seed}",
            "--budget", "30", "--seed", "0", "--out", str(outdir),
        )
        assert code == 0
        assert "nas done:" in out
        for artifact in ("config_echo.yaml", "history.csv", "report.txt"):
            assert (outdir / artifact).exists()
        echo = yaml.safe_load((outdir / "config_echo.yaml").read_text())
        assert echo["family"] == "resnet18"
        assert echo["engine"]["max_evaluations"] == 30
        header = (outdir / "history.csv").read_text().splitlines()[0]
        assert header == (
            "eval_id,depth,width,resolution,objective,constraint_1,status,wall_time_s"
        )

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "nas.yaml"
        cfg.write_text(yaml.safe_dump({
            "family": "resnet18",
            "blackbox": {
                "command": "madsnas surrogate --kind nas_accuracy {input} {seed}",
                "timeout": 30,
            },
            "engine": {"max_evaluations": 25, "seed": 5},
            "output_dir": str(tmp_path / "from_config"),
        }))
        code, _, _ = run(
            capsys, "nas", "--config", str(cfg), "--budget", "12",
            "--out", str(tmp_path / "flag_wins"),
        )
        assert code == 0
        assert (tmp_path / "flag_wins" / "history.csv").exists()
        assert not (tmp_path / "from_config").exists()
        rows = (tmp_path / "flag_wins" / "history.csv").read_text().splitlines()
        assert len(rows) - 1 <= 12

    def test_unknown_config_key_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(yaml.safe_dump({"family": "resnet18", "fmaily": True}))
        code, _, err = run(capsys, "nas", "--config", str(cfg))
        assert code == 1
        assert "unknown keys" in err

    def test_missing_command_rejected(self, capsys):
        code, _, _ = run(capsys, "nas", "--family", "resnet18")
        assert code == 1

    def test_missing_config_file(self, capsys):
        code, _, _ = run(capsys, "nas", "--config", "/does/not/exist.yaml")
        assert code == 1


class TestHpoCommand:
    def test_run_writes_artifacts(self, capsys, tmp_path):
        outdir = tmp_path / "hpo"
        code, out, _ = run(
            capsys, "hpo",
            "--bb-command", "madsnas surrogate --kind hpo_accuracy {input} {seed}",
            "--budget", "25", "--seed", "0", "--out", str(outdir),
        )
        assert code == 0
        assert "hpo done:" in out
        report = (outdir / "report.txt").read_text()
        assert "best_accuracy:" in report
        header = (outdir / "history.csv").read_text().splitlines()[0]
        assert header == (
            "eval_id,lr_log10,weight_decay,optimizer,batch_size,"
            "objective,status,wall_time_s"
        )


class TestTournamentCommand:
    def test_ranking_and_selection(self, capsys, tmp_path):
        specs = {}
        for name, value in (("SENet-18", 77.0), ("ResNet-18", 75.5)):
            path = tmp_path / f"{name}.json"
            path.write_text(json.dumps({"value": value}))
            specs[name] = path
        cfg = tmp_path / "tournament.yaml"
        cfg.write_text(yaml.safe_dump({
            "candidates": [
                {"name": name,
                 "command": f"madsnas surrogate --kind constant --spec {path} "
                            "{input} {seed}"}
                for name, path in specs.items()
            ],
            "seeds": [0, 1],
            "top": 2,
            "output_dir": str(tmp_path / "out"),
        }))
        code, out, _ = run(capsys, "tournament", "--config", str(cfg))
        assert code == 0
        assert "top 2 = SENet-18, ResNet-18" in out
        ranking = (tmp_path / "out" / "ranking.csv").read_text().splitlines()
        assert ranking[1].startswith("1,SENet-18,77,")

    def test_candidate_needs_name_and_command(self, capsys, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(yaml.safe_dump({"candidates": [{"name": "x"}]}))
        code, _, _ = run(capsys, "tournament", "--config", str(cfg))
        assert code == 1


class TestReportCommand:
    def test_summarizes_run_dir(self, capsys, tmp_path):
        outdir = tmp_path / "run"
        run(
            capsys, "hpo",
            "--bb-command", "madsnas surrogate --kind hpo_accuracy {input} {seed}",
            "--budget", "12", "--seed", "0", "--out", str(outdir),
        )
        code, out, _ = run(capsys, "report", "--dir", str(outdir))
        assert code == 0
        assert "best_accuracy:" in out
        assert "history:" in out

    def test_missing_dir(self, capsys, tmp_path):
        code, _, _ = run(capsys, "report", "--dir", str(tmp_path / "nope"))
        assert code == 1


class TestHelpParity:
    def test_every_flag_documented_in_help(self, capsys):
        for name, command in cli.commands.items():
            code, out, _ = run(capsys, name, "--help")
            assert code == 0
            for param in command.params:
                if param.param_type_name == "argument":
                    expected = [param.name.upper()]
                else:
                    expected = list(param.opts) + list(param.secondary_opts)
                assert any(opt in out for opt in expected), (
                    f"{name}: {expected} missing from --help"
                )

    def test_group_lists_all_subcommands(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0
        for name in cli.commands:
            assert name in out


class TestDeterminism:
    @staticmethod
    def stable_history(path):
        rows = []
        with open(path) as fh:
            for line in fh.read().splitlines():
                rows.append(line.rsplit(",", 1)[0])  # drop wall_time_s
        return rows

    def test_nas_histories_identical(self, capsys, tmp_path):
        args = [
            "nas", "--family", "resnet18",
            "--bb-command", "madsnas surrogate --kind nas_accuracy {input} {seed}",
            "--budget", "20", "--seed", "7",
        ]
        histories = []
        for run_dir in ("a", "b"):
            outdir = tmp_path / run_dir
            assert main(args + ["--out", str(outdir)]) == 0
            capsys.readouterr()
            histories.append(self.stable_history(outdir / "history.csv"))
        assert histories[0] == histories[1]
