import numpy as np
import pytest

from cortexkit.errors import ConfigError
from cortexkit.fed import (
    FedConfig,
    SiteShard,
    _moon_hook,
    aggregate,
    init_model,
    local_update,
    make_synthetic_sites,
    mlp_forward_backward,
    pfedme_local,
    pretrain,
    proximal_inner_solve,
    run_federation,
    simsiam_loss,
)
from cortexkit.ml import LabeledDataset, cross_validate
from cortexkit.rng import SeededRng
from cortexkit.state import ModelState
from cortexkit.timeseries import TimeSeries
from oracles import central_diff_grad, rel_err


def small_shard(seed: int = 0, n: int = 24, dim: int = 5, site_id: str = "s0",
                local_epochs: int = 2, lr: float = 0.1, batch: int = 8) -> SiteShard:
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (n // 2))
    x = rng.normal(size=(n, dim)) + np.where(y[:, None] == 1, 1.0, -1.0)
    return SiteShard(site_id, LabeledDataset(x, y), local_epochs, lr, batch)


def fresh_state(in_dim: int = 5, hidden: int = 4, arch: str = "mlp1",
                seed: int = 3) -> ModelState:
    return init_model(arch, in_dim, hidden, 2, SeededRng(seed, "init"))


class TestModelZoo:
    def test_zero_weights_balanced_batch_ln2(self):
        state = fresh_state()
        state.params[:] = 0.0
        x = np.random.default_rng(0).normal(size=(8, 5))
        y = np.array([0, 1] * 4)
        loss, _, _ = mlp_forward_backward(state, x, y)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    @pytest.mark.parametrize("arch", ["mlp1", "linear"])
    def test_gradient_matches_finite_differences(self, arch):
        rng = np.random.default_rng(1)
        state = fresh_state(arch=arch)
        x = rng.normal(size=(10, 5))
        y = rng.integers(0, 2, size=10)
        _, grad, _ = mlp_forward_backward(state, x, y)

        def f(p):
            return mlp_forward_backward(ModelState(p, state.layer_map, state.arch), x, y)[0]

        assert rel_err(grad, central_diff_grad(f, state.params.copy())) < 1e-5

    def test_representation_dimension(self):
        state = fresh_state(hidden=7)
        _, _, z = mlp_forward_backward(state, np.zeros((3, 5)), np.zeros(3, dtype=int))
        assert z.shape == (3, 7)

    def test_dim_mismatch_rejected(self):
        from cortexkit.errors import DimensionError
        with pytest.raises(DimensionError):
            mlp_forward_backward(fresh_state(), np.zeros((3, 9)), np.zeros(3, dtype=int))


class TestSimsiam:
    def test_parallel_pairs_loss_minus_two(self):
        z1 = np.array([1.0, 2.0, 3.0])
        z2 = np.array([-1.0, 0.5, 2.0])
        loss, *_ = simsiam_loss(z1, z2, p1=z2, p2=z1)
        assert loss == pytest.approx(-2.0, abs=1e-12)

    def test_orthogonal_pairs_loss_zero(self):
        z1 = np.array([1.0, 0.0])
        z2 = np.array([0.0, 1.0])
        loss, *_ = simsiam_loss(z1, z2, p1=np.array([1.0, 0.0]), p2=np.array([0.0, 1.0]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_stop_gradient_zeros_and_predictor_grad_fd(self):
        rng = np.random.default_rng(2)
        z1, z2, p1, p2 = (rng.normal(size=6) for _ in range(4))
        loss, dz1, dz2, dp1, dp2 = simsiam_loss(z1, z2, p1, p2)
        assert np.all(dz1 == 0) and np.all(dz2 == 0)
        fd_p2 = central_diff_grad(lambda p: simsiam_loss(z1, z2, p1, p)[0], p2.copy())
        fd_p1 = central_diff_grad(lambda p: simsiam_loss(z1, z2, p, p2)[0], p1.copy())
        assert rel_err(dp2.ravel(), fd_p2) < 1e-5
        assert rel_err(dp1.ravel(), fd_p1) < 1e-5

    def test_loss_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            vecs = [rng.normal(size=4) for _ in range(4)]
            loss, *_ = simsiam_loss(*vecs)
            assert -2.0 - 1e-12 <= loss <= 2.0 + 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            simsiam_loss(np.zeros(3), np.ones(3), np.ones(3), np.ones(3))


class TestPretrain:
    def corpus(self, n_subjects: int = 6, t: int = 40, regions: int = 5):
        rng = SeededRng(4, "corpus")
        out = []
        for i in range(n_subjects):
            g = rng.stream(f"subj{i}").gen
            latent = np.sin(2 * np.pi * 0.1 * np.arange(t))[:, None]
            vals = latent @ g.normal(size=(1, regions)) + 0.5 * g.standard_normal((t, regions))
            out.append(TimeSeries(vals))
        return out

    def test_loss_trace_decreases_in_moving_average(self):
        enc = pretrain(self.corpus(), epochs=60, seed=5, hidden=6, lr=0.2)
        trace = np.array(enc.arch["pretrain_loss_trace"])
        window = 5
        ma = np.convolve(trace, np.ones(window) / window, mode="valid")
        assert np.all(np.diff(ma) <= 1e-9)
        assert np.all((trace >= -2 - 1e-12) & (trace <= 2 + 1e-12))

    def test_identical_seeds_identical_encoders(self):
        a = pretrain(self.corpus(), epochs=10, seed=6, hidden=4)
        b = pretrain(self.corpus(), epochs=10, seed=6, hidden=4)
        assert np.array_equal(a.params, b.params)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            pretrain([], epochs=5, seed=0)


class TestLocalUpdate:
    def test_fedprox_mu_zero_equals_fedavg(self):
        shard = small_shard()
        state = fresh_state()
        rng = SeededRng(7, "lu")
        avg, b_avg, l_avg = local_update(shard, state, FedConfig("fedavg"), 0, rng, {})
        prox, b_prox, l_prox = local_update(shard, state,
                                            FedConfig("fedprox", mu=0.0), 0, rng, {})
        assert np.array_equal(avg.params, prox.params)
        assert l_avg == l_prox and b_avg == b_prox

    def test_moon_weight_zero_equals_fedavg(self):
        shard = small_shard()
        state = fresh_state()
        rng = SeededRng(8, "lu")
        avg, _, _ = local_update(shard, state, FedConfig("fedavg"), 0, rng, {})
        moon, _, _ = local_update(shard, state,
                                  FedConfig("moon", moon_weight=0.0), 0, rng, {})
        assert np.array_equal(avg.params, moon.params)

    def test_fedprox_huge_mu_pins_to_global(self):
        shard = small_shard(lr=1e-6, local_epochs=3)
        state = fresh_state()
        rng = SeededRng(9, "lu")
        new, _, _ = local_update(shard, state, FedConfig("fedprox", mu=1e6), 0, rng, {})
        assert np.linalg.norm(new.params - state.params) < 1e-3

    def test_lgfedavg_bytes_are_head_span_only(self):
        shard = small_shard()
        state = fresh_state()
        rng = SeededRng(10, "lu")
        _, bytes_full, _ = local_update(shard, state, FedConfig("fedavg"), 0, rng, {})
        _, bytes_head, _ = local_update(shard, state, FedConfig("lgfedavg"), 0, rng, {})
        head = state.span_size(("head_w", "head_b"))
        assert bytes_full == 8 * state.params.size
        assert bytes_head == 8 * head
        assert bytes_head < bytes_full

    def test_fedprox_augmented_gradient_fd(self):
        rng = np.random.default_rng(11)
        state = fresh_state()
        anchor = state.params + rng.normal(size=state.params.size) * 0.1
        x = rng.normal(size=(6, 5))
        y = rng.integers(0, 2, size=6)
        mu = 0.7

        def f(p):
            work = ModelState(p, state.layer_map, state.arch)
            loss, _, _ = mlp_forward_backward(work, x, y)
            return loss + mu / 2 * float((p - anchor) @ (p - anchor))

        loss, grad, _ = mlp_forward_backward(state, x, y)
        grad = grad + mu * (state.params - anchor)
        assert rel_err(grad, central_diff_grad(f, state.params.copy())) < 1e-5

    def test_moon_augmented_gradient_fd(self):
        rng = np.random.default_rng(12)
        state = fresh_state(seed=20)
        global_state = fresh_state(seed=21)
        prev_state = fresh_state(seed=22)
        hook = _moon_hook(global_state, prev_state, weight=0.8, temp=0.5)
        x = rng.normal(size=(6, 5))
        y = rng.integers(0, 2, size=6)
        _, grad, _ = mlp_forward_backward(state, x, y, rep_hook=hook)

        def f(p):
            work = ModelState(p, state.layer_map, state.arch)
            return mlp_forward_backward(work, x, y, rep_hook=hook)[0]

        assert rel_err(grad, central_diff_grad(f, state.params.copy())) < 1e-5


class TestAggregate:
    def scalar_state(self, value: float) -> ModelState:
        return ModelState(np.array([value]), {"head_w": (0, 1)}, {"kind": "linear"})

    def test_single_site_identity(self):
        s = self.scalar_state(1.7)
        out = aggregate("fedavg", [s], [13], s)
        assert np.array_equal(out.params, s.params)

    def test_equal_sizes_plain_mean(self):
        out = aggregate("fedavg", [self.scalar_state(1.0), self.scalar_state(3.0)],
                        [20, 20], self.scalar_state(0.0))
        assert out.params[0] == pytest.approx(2.0)

    def test_weighted_mean(self):
        out = aggregate("fedavg", [self.scalar_state(1.0), self.scalar_state(3.0)],
                        [10, 30], self.scalar_state(0.0))
        assert out.params[0] == pytest.approx(2.5)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(13)
        states = [fresh_state(seed=s) for s in range(3)]
        sizes = [10, 20, 30]
        base = aggregate("fedavg", states, sizes, states[0])
        perm = aggregate("fedavg", [states[2], states[0], states[1]],
                         [30, 10, 20], states[0])
        assert np.allclose(base.params, perm.params, atol=1e-12)

    def test_lgfedavg_only_head_moves(self):
        states = [fresh_state(seed=s) for s in (30, 31)]
        global_state = fresh_state(seed=32)
        out = aggregate("lgfedavg", states, [5, 5], global_state)
        enc_lo, enc_hi = out.layer_map["encoder_w"]
        assert np.array_equal(out.params[enc_lo:enc_hi],
                              global_state.params[enc_lo:enc_hi])
        lo, hi = out.layer_map["head_w"]
        expected = (states[0].params[lo:hi] + states[1].params[lo:hi]) / 2
        assert np.allclose(out.params[lo:hi], expected)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate("fedavg", [], [], self.scalar_state(0.0))


class TestPfedme:
    def test_quadratic_prox_closed_form(self):
        rng = np.random.default_rng(14)
        c = rng.normal(size=6)
        w = rng.normal(size=6)
        mu = 2.0
        theta = proximal_inner_solve(lambda t: t - c, w, mu, iters=300, lr=0.3)
        closed = (c + mu * w) / (1 + mu)
        assert np.abs(theta - closed).max() < 1e-6

    def test_mu_infinity_sticks_to_anchor(self):
        rng = np.random.default_rng(15)
        c = rng.normal(size=4)
        w = rng.normal(size=4)
        mu = 1e8
        theta = proximal_inner_solve(lambda t: t - c, w, mu, iters=50, lr=1.0 / (1 + mu))
        assert np.abs(theta - w).max() < 1e-6

    def test_mu_small_approaches_minimizer(self):
        rng = np.random.default_rng(16)
        c = rng.normal(size=4)
        w = rng.normal(size=4)
        theta = proximal_inner_solve(lambda t: t - c, w, 1e-8, iters=2000, lr=0.5)
        assert np.abs(theta - c).max() < 1e-6

    def test_pfedme_local_runs_and_personalizes(self):
        shard = small_shard()
        state = fresh_state()
        theta, w_state, bytes_out, loss = pfedme_local(
            shard, state, mu=1.0, inner_iters=5, inner_lr=0.05, round_idx=0,
            rng_fold=SeededRng(17, "pf"))
        assert bytes_out == 8 * state.params.size
        assert not np.array_equal(theta.params, w_state.params)
        assert np.isfinite(loss)

    def test_mu_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            pfedme_local(small_shard(), fresh_state(), mu=0.0, inner_iters=5,
                         inner_lr=0.05, round_idx=0, rng_fold=SeededRng(0))


class TestRunFederation:
    def test_single_site_fedavg_equals_isolated_training(self):
        shard = small_shard(n=30)
        cfg_avg = FedConfig("fedavg", rounds=4, seed=11, hidden=4)
        cfg_single = FedConfig("single", rounds=4, seed=11, hidden=4)
        res_avg = run_federation(cfg_avg, [shard], k_folds=3)
        res_single = run_federation(cfg_single, [shard], k_folds=3)
        assert np.array_equal(res_avg["final_states"]["s0"].params,
                              res_single["final_states"]["s0"].params)
        assert res_avg["site_reports"]["s0"]["summary"] == \
            res_single["site_reports"]["s0"]["summary"]

    def test_identical_seeds_identical_traces(self):
        shards = [small_shard(seed=s, site_id=f"s{s}") for s in range(2)]
        cfg = FedConfig("fedprox", rounds=3, mu=0.1, seed=5, hidden=4)
        rows1 = run_federation(cfg, shards, k_folds=3)["trace"].rows()
        rows2 = run_federation(cfg, shards, k_folds=3)["trace"].rows()
        assert rows1 == rows2

    def test_trace_shape_and_bytes_monotone(self):
        shards = [small_shard(seed=s, site_id=f"s{s}") for s in range(3)]
        cfg = FedConfig("fedavg", rounds=4, seed=6, hidden=4)
        trace = run_federation(cfg, shards, k_folds=3)["trace"]
        assert len(trace.rows()) == 4 * 3
        for site in ("s0", "s1", "s2"):
            assert all(b2 >= b1 for b1, b2 in zip(trace.bytes_cumulative[site],
                                                  trace.bytes_cumulative[site][1:]))

    def test_lgfedavg_bytes_ratio_exact(self):
        shards = [small_shard(seed=s, site_id=f"s{s}") for s in range(2)]
        state = fresh_state(hidden=4)
        full = state.params.size
        head = state.span_size(("head_w", "head_b"))
        cfg = dict(rounds=3, seed=7, hidden=4)
        res_avg = run_federation(FedConfig("fedavg", **cfg), shards, k_folds=3)
        res_lg = run_federation(FedConfig("lgfedavg", **cfg), shards, k_folds=3)
        total_avg = sum(res_avg["trace"].bytes_cumulative[s][-1] for s in ("s0", "s1"))
        total_lg = sum(res_lg["trace"].bytes_cumulative[s][-1] for s in ("s0", "s1"))
        assert total_lg * full == total_avg * head  # exact integer ratio

    def test_single_strategy_matches_registry_mlp(self):
        shard = small_shard(n=30, local_epochs=2, lr=0.1, batch=8)
        cfg = FedConfig("single", rounds=3, seed=9, hidden=4)
        fed_summary = run_federation(cfg, [shard], k_folds=3)["site_reports"]["s0"]["summary"]
        ml_result = cross_validate(
            shard.dataset, "mlp",
            {"rounds": 3, "local_epochs": 2, "lr": 0.1, "batch": 8, "hidden": 4},
            k_folds=3, seed=9)
        assert fed_summary == ml_result["summary"]

    def test_every_strategy_runs(self):
        shards = [small_shard(seed=s, site_id=f"s{s}", n=20) for s in range(2)]
        for strategy in ("fedavg", "fedprox", "moon", "lgfedavg", "pfedme",
                         "single", "mix"):
            cfg = FedConfig(strategy, rounds=2, mu=0.5, seed=3, hidden=4)
            res = run_federation(cfg, shards, k_folds=2)
            for sid in ("s0", "s1"):
                assert 0.0 <= res["site_reports"][sid]["summary"]["accuracy"]["mean"] <= 1.0
            assert "balanced_accuracy" in res["average"]["summary"]

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            FedConfig("gossip")
        with pytest.raises(ConfigError):
            run_federation(FedConfig("fedavg"), [])
        sh = [small_shard(dim=4), small_shard(dim=5, site_id="s1")]
        with pytest.raises(ConfigError):
            run_federation(FedConfig("fedavg"), sh)


class TestPretrainedInit:
    def test_pretrained_encoder_seeds_a_federation(self):
        rng = SeededRng(40, "corpus")
        corpus = []
        for i in range(5):
            g = rng.stream(f"s{i}").gen
            corpus.append(TimeSeries(g.normal(size=(30, 5))))
        enc = pretrain(corpus, epochs=15, seed=41, hidden=4)
        feat_dim = 5 * 4 // 2  # upper triangle of a 5-region network
        assert enc.arch["in_dim"] == feat_dim
        g = np.random.default_rng(42)
        y = np.array([0, 1] * 10)
        x = g.normal(size=(20, feat_dim))
        shard = SiteShard("s0", LabeledDataset(x, y), 1, 0.1, 8)
        cfg = FedConfig("fedavg", rounds=2, seed=43, hidden=4, init_state=enc)
        res = run_federation(cfg, [shard], k_folds=2)
        assert "balanced_accuracy" in res["site_reports"]["s0"]["summary"]
        res2 = run_federation(cfg, [shard], k_folds=2)
        assert np.array_equal(res["final_states"]["__global__"].params,
                              res2["final_states"]["__global__"].params)


class TestSyntheticSites:
    def test_deterministic_and_heterogeneous(self):
        a = make_synthetic_sites(seed=1)
        b = make_synthetic_sites(seed=1)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.dataset.features, sb.dataset.features)
        means = [s.dataset.features.mean(axis=0) for s in a]
        assert np.linalg.norm(means[0] - means[1]) > 0.5

    def test_balanced_labels(self):
        for shard in make_synthetic_sites(seed=2, n_per_site=40):
            assert shard.dataset.targets.sum() == 20
