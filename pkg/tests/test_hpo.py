import math

import pytest

from madsnas.errors import ConfigError
from madsnas.hpo import (
    BATCH_SIZES,
    INITIAL,
    LR_RANGE,
    OPTIMIZERS,
    REFERENCE_LR,
    WEIGHT_DECAYS,
    decode,
    effective_lr,
    run_hpo,
    search_space,
    wire_space,
)
from madsnas.protocol import EvalResult
from madsnas.surrogates import SurrogateSpec, eval_surrogate

HPO_SPEC = SurrogateSpec("hpo_accuracy")


def surrogate_blackbox(wire_point):
    return EvalResult(objective=eval_surrogate(HPO_SPEC, wire_point))


class TestEffectiveLr:
    def test_sgd_is_identity(self):
        assert effective_lr("SGD", 0.042) == pytest.approx(0.042)

    def test_adam_scaled_down(self):
        assert effective_lr("Adam", 0.1) == pytest.approx(0.01)

    def test_adadelta_scaled_up(self):
        assert effective_lr("Adadelta", 0.1) == pytest.approx(1.0)

    def test_linear_in_sampled_lr(self):
        for opt in OPTIMIZERS:
            assert effective_lr(opt, 0.2) == pytest.approx(2 * effective_lr(opt, 0.1))

    def test_unknown_optimizer(self):
        with pytest.raises(ConfigError):
            effective_lr("RMSprop", 0.1)

    def test_reference_table_complete(self):
        assert set(REFERENCE_LR) == set(OPTIMIZERS)
        assert all(v > 0 for v in REFERENCE_LR.values())


class TestSpaces:
    def test_internal_space_shape(self):
        space = search_space()
        assert space.names == ["lr_log10", "weight_decay", "optimizer", "batch_size"]
        lr = space.variables[0]
        assert lr.lower == pytest.approx(math.log10(LR_RANGE[0]))
        assert lr.upper == pytest.approx(math.log10(LR_RANGE[1]))
        assert space.initial_point() == (math.log10(0.1), 5e-4, "SGD", 128)

    def test_wire_space_covers_effective_lr_range(self):
        wire = wire_space()
        lr = wire.variables[0]
        max_effective = max(
            effective_lr(opt, LR_RANGE[1]) for opt in OPTIMIZERS
        )
        assert lr.lower <= min(
            effective_lr(opt, LR_RANGE[0]) for opt in OPTIMIZERS
        )
        assert lr.upper >= max_effective

    def test_decode_initial(self):
        internal = search_space().initial_point()
        wire_point = decode(internal)
        assert wire_point == (pytest.approx(0.1), 5e-4, OPTIMIZERS.index("SGD"), 128)

    def test_decode_applies_optimizer_rule(self):
        internal = (math.log10(0.1), 0.005, "Adam", 512)
        eff, wd, idx, batch = decode(internal)
        assert eff == pytest.approx(0.01)
        assert idx == 3
        assert (wd, batch) == (0.005, 512)

    def test_decoded_points_always_legal(self):
        wire = wire_space()
        space = search_space()
        internal_points = [
            space.initial_point(),
            (math.log10(0.6), 0.5, "Adadelta", 512),
            (math.log10(1e-3), 0.0, "Adamax", 256),
        ]
        for internal in internal_points:
            assert wire.validate(decode(internal))


class TestRunHpo:
    def test_recovers_surrogate_optimum(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=400, seed=0,
                         min_frame_size=1e-5)
        assert report.weight_decay == 0.005
        assert report.optimizer == "SGD"
        assert report.batch_size == 512
        assert abs(report.effective_lr - 0.042) < 5e-3
        assert abs(report.best_accuracy - 87.8) <= 0.1

    def test_improvement_nonnegative(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=60, seed=5)
        assert report.improvement >= 0
        assert report.initial_accuracy == pytest.approx(
            eval_surrogate(HPO_SPEC, decode(search_space().initial_point()))
        )

    def test_best_is_argmax_of_history(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=150, seed=2)
        best_seen = max(
            r.result.objective for r in report.history if r.result.ok
        )
        assert report.best_accuracy == pytest.approx(best_seen)

    def test_reported_values_are_legal(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=80, seed=7)
        assert report.weight_decay in WEIGHT_DECAYS
        assert report.optimizer in OPTIMIZERS
        assert report.batch_size in BATCH_SIZES
        assert LR_RANGE[0] <= report.sampled_lr <= LR_RANGE[1]
        assert report.effective_lr == pytest.approx(
            effective_lr(report.optimizer, report.sampled_lr)
        )

    def test_budget_respected(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=33, seed=0)
        assert len(report.history) <= 33

    def test_report_text_fields(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=40, seed=1)
        text = report.to_text()
        for key in ("sampled_lr:", "effective_lr:", "weight_decay:", "optimizer:",
                    "batch_size:", "best_accuracy:", "improvement:"):
            assert key in text

    def test_initial_point_matches_declared_default(self):
        report = run_hpo(surrogate_blackbox, max_evaluations=10, seed=0)
        first = report.history.records[0].point
        assert first == (math.log10(INITIAL[0]), INITIAL[1], INITIAL[2], INITIAL[3])
