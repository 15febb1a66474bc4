import os
import shlex
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from madsnas.errors import ConfigError
from madsnas.protocol import (
    BlackboxConfig,
    EvalResult,
    check_protocol,
    evaluate_aggregate,
    format_number,
    format_point_line,
    parse_output,
    run_blackbox,
    write_point_file,
)
from madsnas.space import SearchSpace, VariableSpec

PY = shlex.quote(sys.executable)


def cont_space(n):
    return SearchSpace(
        tuple(
            VariableSpec(f"x{i}", "continuous", lower=-1e6, upper=1e6, initial=0.0)
            for i in range(n)
        )
    )


HPO_WIRE_SPACE = SearchSpace(
    (
        VariableSpec("lr", "continuous", lower=0.0, upper=6.0, initial=0.1),
        VariableSpec("weight_decay", "discrete_set",
                     values=(0.0, 5e-5, 5e-4, 5e-3, 5e-2, 0.5), initial=5e-4),
        VariableSpec("optimizer", "categorical",
                     values=("Adadelta", "Adagrad", "SGD", "Adam", "AdamW",
                             "Adamax", "ASGD"), initial="SGD"),
        VariableSpec("batch_size", "discrete_set", values=(128, 256, 512), initial=128),
    )
)


def script_cfg(body, timeout=30.0, seeds=(0,)):
    """Blackbox running an inline python script; argv = [input, seed]."""
    return BlackboxConfig(
        command_template=f"{PY} -c {shlex.quote(body)} {{input}} {{seed}}",
        timeout=timeout,
        seeds=seeds,
    )


class TestPointFormat:
    def test_decimal_not_scientific(self):
        assert format_number(5e-05) == "0.00005"
        assert format_number(0.5) == "0.5"
        assert format_number(512) == "512"
        assert "e" not in format_number(1.234e-9)

    def test_twelve_significant_digits_survive(self):
        value = 0.123456789012
        assert float(format_number(value)) == pytest.approx(value, abs=1e-15)

    def test_hpo_style_line(self):
        line = format_point_line(HPO_WIRE_SPACE, (0.042, 0.005, "Adam", 512))
        assert line == "0.042 0.005 3 512\n"

    def test_categorical_crosses_as_index(self):
        line = format_point_line(HPO_WIRE_SPACE, (0.1, 0.0, "ASGD", 128))
        assert line.split() == ["0.1", "0", "6", "128"]

    def test_write_point_file(self, tmp_path):
        path = tmp_path / "point.txt"
        write_point_file(cont_space(2), (1.5, -2.0), str(path))
        assert path.read_text() == "1.5 -2\n"


ADVERSARIAL_OUTPUTS = [
    ("", 0, "failed"),
    ("   \n\t\n", 0, "failed"),
    ("hello world", 0, "failed"),
    ("87.8", 0, "ok"),
    ("87.8\n", 0, "ok"),
    ("log line\nanother\n87.8 -0.5\n", 0, "ok"),
    ("87.8\n\n\n", 0, "ok"),
    ("epoch 1: 50%\nepoch 2: 60%\n", 0, "failed"),
    ("nan", 0, "failed"),
    ("NaN", 0, "failed"),
    ("inf", 0, "failed"),
    ("-inf 0.0", 0, "failed"),
    ("87.8 nan", 0, "failed"),
    ("1e3", 0, "ok"),
    ("+42.5", 0, "ok"),
    ("87.8,0.5", 0, "failed"),
    ("87.8 done", 0, "failed"),
    ("87.8", 1, "failed"),
    ("0x1f", 0, "failed"),
    ("  87.8   -0.25  ", 0, "ok"),
]


class TestParseOutput:
    @pytest.mark.parametrize("stdout,exit_code,expected", ADVERSARIAL_OUTPUTS)
    def test_total_mapping(self, stdout, exit_code, expected):
        result = parse_output(stdout, exit_code, timed_out=False)
        assert result.status == expected
        if expected == "ok":
            assert result.objective is not None
        else:
            assert result.objective is None

    def test_timeout_wins(self):
        result = parse_output("87.8", 0, timed_out=True)
        assert result.status == "timeout"

    def test_last_line_constraints(self):
        result = parse_output("noise\n161886916 -0.25 1.5\n", 0, False)
        assert result.objective == 161886916.0
        assert result.constraints == (-0.25, 1.5)


class TestBlackboxConfig:
    def test_template_must_have_input(self):
        with pytest.raises(ConfigError):
            BlackboxConfig(command_template="trainer --mode nas")

    def test_timeout_positive(self):
        with pytest.raises(ConfigError):
            BlackboxConfig(command_template="x {input}", timeout=0)

    def test_seeds_required(self):
        with pytest.raises(ConfigError):
            BlackboxConfig(command_template="x {input}", seeds=())


ECHO_SUM = (
    "import sys\n"
    "values = [float(t) for t in open(sys.argv[1]).read().split()]\n"
    "print('debug line')\n"
    "print(sum(values) + int(sys.argv[2]))\n"
)


class TestRunBlackbox:
    def test_round_trip_sum(self):
        cfg = script_cfg(ECHO_SUM)
        result = run_blackbox(cfg, cont_space(3), (1.0, 2.5, -0.5), seed=4)
        assert result.ok
        assert result.objective == pytest.approx(7.0)

    def test_seed_substitution(self):
        cfg = script_cfg("import sys; print(sys.argv[2])")
        for seed in (0, 17):
            result = run_blackbox(cfg, cont_space(1), (0.0,), seed=seed)
            assert result.objective == float(seed)

    def test_nonzero_exit_fails(self):
        cfg = script_cfg("import sys; print(87.8); sys.exit(3)")
        result = run_blackbox(cfg, cont_space(1), (0.0,), seed=0)
        assert result.status == "failed"

    def test_missing_command_fails(self):
        cfg = BlackboxConfig(command_template="definitely-not-a-command {input}")
        result = run_blackbox(cfg, cont_space(1), (0.0,), seed=0)
        assert result.status == "failed"

    def test_point_file_cleaned_up(self, tmp_path):
        before = set(os.listdir(tmp_path))
        os.environ["TMPDIR"] = str(tmp_path)
        try:
            import tempfile
            tempfile.tempdir = None
            cfg = script_cfg("print(1.0)")
            run_blackbox(cfg, cont_space(1), (0.5,), seed=0)
        finally:
            os.environ.pop("TMPDIR", None)
            import tempfile
            tempfile.tempdir = None
        assert set(os.listdir(tmp_path)) == before

    def test_timeout_kills_process_tree(self):
        psutil = pytest.importorskip("psutil")
        marker = f"bb_orphan_{os.getpid()}"
        body = (
            "import subprocess, sys, time\n"
            f"subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(60)'],"
            f" env={{'BB_MARK': '{marker}', 'PATH': ''}})\n"
            "time.sleep(60)\n"
        )
        cfg = script_cfg(body, timeout=1.0)
        start = time.monotonic()
        result = run_blackbox(cfg, cont_space(1), (0.0,), seed=0)
        assert result.status == "timeout"
        assert time.monotonic() - start < 10
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            alive = [
                p for p in psutil.process_iter(["environ"])
                if (p.info["environ"] or {}).get("BB_MARK") == marker
            ]
            if not alive:
                break
            time.sleep(0.2)
        assert not alive

    def test_parallel_invocations_use_distinct_temp_files(self):
        cfg = script_cfg(
            "import sys; print(float(open(sys.argv[1]).read()))"
        )
        space = cont_space(1)
        points = [(float(i),) for i in range(64)]
        with ThreadPoolExecutor(max_workers=16) as pool:
            results = list(
                pool.map(lambda p: run_blackbox(cfg, space, p, seed=0), points)
            )
        assert all(r.ok for r in results)
        assert [r.objective for r in results] == [p[0] for p in points]


class TestAggregate:
    def test_mean_over_seeds(self):
        cfg = script_cfg("import sys; print(10 * int(sys.argv[2]))", seeds=(1, 2, 3))
        agg = evaluate_aggregate(cfg, cont_space(1), (0.0,))
        assert agg.ok
        assert agg.mean_objective == pytest.approx(20.0)
        assert [r.objective for r in agg.per_seed] == [10.0, 20.0, 30.0]

    def test_one_failure_fails_the_point(self):
        cfg = script_cfg(
            "import sys; sys.exit(1) if sys.argv[2] == '2' else print(50.0)",
            seeds=(1, 2, 3),
        )
        agg = evaluate_aggregate(cfg, cont_space(1), (0.0,))
        assert not agg.ok
        assert agg.mean.objective is None
        assert sum(1 for r in agg.per_seed if r.ok) == 2

    def test_constraints_averaged_elementwise(self):
        cfg = script_cfg(
            "import sys; s = int(sys.argv[2]); print(70 + s, -s, 2 * s)",
            seeds=(0, 2),
        )
        agg = evaluate_aggregate(cfg, cont_space(1), (0.0,))
        assert agg.mean.objective == pytest.approx(71.0)
        assert agg.mean.constraints == pytest.approx((-1.0, 2.0))

    def test_parallel_workers_same_mean(self):
        cfg = script_cfg("import sys; print(5.0 + int(sys.argv[2]))", seeds=(0, 1, 2, 3))
        serial = evaluate_aggregate(cfg, cont_space(1), (0.0,), workers=1)
        parallel = evaluate_aggregate(cfg, cont_space(1), (0.0,), workers=4)
        assert serial.mean_objective == parallel.mean_objective


class TestCheckProtocol:
    def test_good_command_passes(self):
        ok, message = check_protocol(script_cfg("print(42.0)"), cont_space(1), (0.5,))
        assert ok
        assert "objective=42" in message

    def test_silent_command_fails(self):
        ok, message = check_protocol(script_cfg("pass"), cont_space(1), (0.5,))
        assert not ok

    def test_timeout_reported(self):
        ok, message = check_protocol(
            script_cfg("import time; time.sleep(30)", timeout=0.5),
            cont_space(1), (0.5,),
        )
        assert not ok
        assert "timed out" in message


class TestEvalResult:
    def test_feasible_requires_ok_and_nonpositive_constraints(self):
        assert EvalResult(objective=1.0, constraints=(0.0, -1.0)).feasible
        assert not EvalResult(objective=1.0, constraints=(1e-9,)).feasible
        assert not EvalResult(objective=1.0, status="failed").feasible
