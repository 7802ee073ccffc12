"""Trainer tests: gradient engine vs finite differences, determinism,
direction-variance bookkeeping, and the weak-to-strong pipeline behaviors."""

import dataclasses

import numpy as np
import pytest

from w2slab.losses import CompositeLossConfig
from w2slab.trainer import (
    LOSS_NAMES,
    LinearProbeModel,
    ProbeConfig,
    SyntheticTask,
    TrainData,
    gdv,
    labels_to_soft,
    loss_grads,
    loss_values,
    numeric_loss_grads,
    param_distance,
    train,
    w2s_pipeline,
)


def small_task(**kw):
    defaults = dict(dim=20, separation=2.0, noise=1.0, n_train=64,
                    n_pseudo=256, n_test=200, seed=1)
    defaults.update(kw)
    return SyntheticTask(**defaults)


def make_model(dim=20, width=0, feature="identity", seed=0, **kw):
    cfg = ProbeConfig(feature=feature, width=width, **kw)
    return LinearProbeModel(dim, cfg, np.random.default_rng(seed))


class TestTask:
    def test_balanced_and_sized(self):
        data = small_task().sample()
        assert data.train_y.sum() == 0.0
        assert data.pseudo_y.sum() == 0.0
        assert data.test_x.shape == (200, 20)

    def test_bayes_accuracy(self):
        assert small_task().bayes_accuracy() == pytest.approx(0.9772, abs=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            small_task(n_train=9)
        with pytest.raises(ValueError):
            small_task(n_test=15)  # odd
        with pytest.raises(ValueError):
            small_task(noise=0.0)

    def test_deterministic_sampling(self):
        a, b = small_task().sample(), small_task().sample()
        np.testing.assert_array_equal(a.train_x, b.train_x)
        np.testing.assert_array_equal(a.test_y, b.test_y)


class TestGradientEngine:
    @pytest.mark.parametrize("name", LOSS_NAMES)
    def test_analytic_matches_numeric(self, name):
        """100 random (batch, parameter) points per loss, 1e-4 relative."""
        rng = np.random.default_rng(3)
        cfg = CompositeLossConfig(cace_threshold=0.2, sl_weights=(0.7, 0.3))
        for _ in range(100):
            n = int(rng.integers(2, 12))
            y1 = rng.uniform(1e-3, 1 - 1e-3, size=n)
            p1 = rng.uniform(1e-3, 1 - 1e-3, size=n)
            y = np.stack([y1, 1 - y1], axis=-1)
            p = np.stack([p1, 1 - p1], axis=-1)
            beta = float(rng.uniform(0, 1))
            a = loss_grads(name, y, p, cfg, beta)
            num = numeric_loss_grads(name, y, p, cfg, beta)
            np.testing.assert_allclose(a, num, rtol=1e-4, atol=1e-7)

    def test_values_match_scalar_losses(self):
        from w2slab import losses as L

        rng = np.random.default_rng(4)
        cfg = CompositeLossConfig(cace_threshold=0.25)
        y1 = rng.uniform(0.05, 0.95, size=6)
        p1 = rng.uniform(0.05, 0.95, size=6)
        y = np.stack([y1, 1 - y1], axis=-1)
        p = np.stack([p1, 1 - p1], axis=-1)
        np.testing.assert_allclose(loss_values("ce", y, p, cfg), L.ce(y, p))
        np.testing.assert_allclose(loss_values("rce", y, p, cfg), L.rce(y, p))
        np.testing.assert_allclose(loss_values("kl", y, p, cfg), L.kl(y, p))
        np.testing.assert_allclose(loss_values("rkl", y, p, cfg), L.rkl(y, p))
        np.testing.assert_allclose(
            loss_values("cace", y, p, cfg), [L.cace(yy, pp, cfg) for yy, pp in zip(y, p)]
        )
        np.testing.assert_allclose(
            loss_values("sl", y, p, cfg), [L.sl(yy, pp, cfg) for yy, pp in zip(y, p)]
        )
        np.testing.assert_allclose(
            loss_values("aux", y, p, cfg, 0.4),
            [L.aux(yy, pp, 0.4, p) for yy, pp in zip(y, p)],
        )


class TestGdv:
    def test_identical_gradients(self):
        g = np.array([1.0, 2.0])
        assert gdv([g, g, g]) == pytest.approx(0.0, abs=1e-12)

    def test_opposite_pair(self):
        g = np.array([1.0, -1.0])
        assert gdv([g, -g]) == pytest.approx(2.0, abs=1e-12)

    def test_orthogonal_pair(self):
        assert gdv([np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == pytest.approx(1.0)

    def test_bounds_and_permutation_invariance(self):
        rng = np.random.default_rng(5)
        grads = [rng.normal(size=7) for _ in range(6)]
        val = gdv(grads)
        assert 0.0 <= val <= 2.0
        perm = [grads[i] for i in rng.permutation(6)]
        assert gdv(perm) == pytest.approx(val, abs=1e-12)

    def test_zero_gradient_excluded_with_warning(self):
        g = np.array([1.0, 0.0])
        with pytest.warns(UserWarning):
            val = gdv([g, g, np.zeros(2)])
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_insufficient_nonzero_rejected(self):
        with pytest.raises(ValueError), pytest.warns(UserWarning):
            gdv([np.zeros(2), np.ones(2)])


class TestParamDistance:
    def test_zero_for_same(self):
        t = np.arange(4.0)
        assert param_distance(t, t) == 0.0

    def test_unit_offset(self):
        t = np.zeros(3)
        u = t.copy()
        u[0] = 1.0
        assert param_distance(u, t) == pytest.approx(1.0)

    def test_pythagorean(self):
        assert param_distance(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            param_distance(np.zeros(2), np.zeros(3))


def gt_train_data(task):
    data = task.sample()
    return TrainData(data.train_x, labels_to_soft(data.train_y),
                     data.test_x, data.test_y)


class TestTrain:
    def test_zero_steps_is_identity(self):
        task = small_task()
        model = make_model()
        before = model.accuracy(task.sample().test_x, task.sample().test_y)
        rep = train(model, gt_train_data(task), "ce", steps=0)
        assert rep.param_distance == 0.0
        assert rep.accuracy == pytest.approx(before)

    def test_separable_task_reaches_bayes_level(self):
        # margin of two noise units: optimal accuracy is at least 0.977
        task = small_task(separation=2.0, noise=1.0, n_train=400)
        assert task.bayes_accuracy() >= 0.97
        model = make_model(seed=2)
        rep = train(model, gt_train_data(task), "ce", steps=500, seed=2)
        assert rep.accuracy >= 0.95

    def test_rce_uniform_labels_is_frozen(self):
        task = small_task()
        data = task.sample()
        uniform = np.full((task.n_train, 2), 0.5)
        model = make_model(seed=3)
        rep = train(
            model,
            TrainData(data.train_x, uniform, data.test_x, data.test_y),
            "rce",
            steps=100,
            seed=3,
        )
        assert rep.param_distance == 0.0
        assert all(np.isnan(g) for g in rep.gdv_trace)

    def test_determinism_bit_identical(self):
        task = small_task()
        reports = []
        for _ in range(2):
            model = make_model(seed=4)
            reports.append(train(model, gt_train_data(task), "sl", steps=60, seed=4))
        a, b = reports
        assert a == b

    def test_divergence_reported_with_step(self):
        # an unbounded step forces non-finite parameters immediately
        from w2slab.trainer import TrainingDiverged

        task = small_task()
        model = make_model(seed=5)
        with pytest.raises(TrainingDiverged) as err, np.errstate(
            over="ignore", invalid="ignore"
        ):
            train(model, gt_train_data(task), "ce", steps=50,
                  learning_rate=float("inf"), seed=5)
        assert err.value.step >= 0

    def test_unknown_loss_rejected(self):
        with pytest.raises(ValueError):
            train(make_model(), gt_train_data(small_task()), "mse")

    @pytest.mark.parametrize("name", LOSS_NAMES)
    def test_every_loss_trains(self, name):
        task = small_task()
        model = make_model(seed=6)
        rep = train(model, gt_train_data(task), name, steps=40, seed=6)
        assert np.isfinite(rep.final_loss)
        assert rep.accuracy >= 0.0


class TestPipeline:
    def test_baseline_wiring(self):
        task = small_task()
        t_rep, s_rep = w2s_pipeline(task, loss_name="ce", alpha=1.0, seed=0)
        assert 0.5 <= t_rep.accuracy <= 1.0
        assert s_rep.loss_name == "ce"
        assert s_rep.alpha == 1.0

    def test_uniform_targets_drive_predictions_to_half(self):
        task = small_task()
        _, s_rep = w2s_pipeline(task, loss_name="ce", alpha=0.0, seed=0)
        assert 0.45 <= s_rep.mean_prediction <= 0.55

    def test_rce_beats_ce_at_low_alpha(self):
        task = SyntheticTask(seed=11)
        accs = {}
        for loss in ("ce", "rce"):
            vals = [
                w2s_pipeline(task, loss_name=loss, alpha=0.01, seed=rep)[1].accuracy
                for rep in range(2)
            ]
            accs[loss] = np.mean(vals)
        assert accs["rce"] > accs["ce"]

    def test_alpha_validated(self):
        with pytest.raises(ValueError):
            w2s_pipeline(small_task(), loss_name="ce", alpha=1.2)

    def test_sweep_summary_cells(self):
        from w2slab.trainer import alpha_sweep, summarize_sweep

        task = small_task()
        rows = alpha_sweep(task, ["ce"], [1.0, 0.5], repeats=2,
                           student_cfg=ProbeConfig(feature="projection", width=40))
        summary = summarize_sweep(rows)
        assert len(summary) == 2
        cell = summary[0]
        assert cell["repeats"] == 2
        group = [r["student_acc"] for r in rows if r["alpha"] == cell["alpha"]]
        assert cell["student_acc_mean"] == pytest.approx(np.mean(group))
        assert cell["student_acc_std"] == pytest.approx(np.std(group, ddof=1))

    def test_smoothing_invariance_of_rce_risk(self):
        """Final reverse risks at alpha 0.3 and 1.0 agree within two
        standard deviations over five repeats."""
        task = SyntheticTask(seed=9)
        risks = {0.3: [], 1.0: []}
        for rep in range(5):
            t = dataclasses.replace(
                task,
                seed=int(np.random.SeedSequence([task.seed, rep]).generate_state(1)[0]),
            )
            for a in (0.3, 1.0):
                _, srep = w2s_pipeline(t, loss_name="rce", alpha=a, seed=rep)
                risks[a].append(srep.test_rce_risk)
        r3, r1 = np.array(risks[0.3]), np.array(risks[1.0])
        spread = 2.0 * np.sqrt(r3.std(ddof=1) ** 2 + r1.std(ddof=1) ** 2)
        assert abs(r3.mean() - r1.mean()) <= spread
