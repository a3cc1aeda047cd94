"""Tests for the replica-encoding gradient oracles and the full private
margin-loss fit."""

import math

import numpy as np
import pytest

from ldp_erm.datasets import generate_dataset
from ldp_erm.errors import ParameterError, ProtocolError
from ldp_erm.glm_erm import (BallDataset, ReplicaMessage, empirical_risk,
                             general_linear_gradient_sample,
                             general_linear_oracle_config, glm_erm_run,
                             glm_player_encode, hinge_flavor,
                             hinge_gradient_sample, hinge_oracle_config,
                             hinge_via_general_flavor, replica_noise_stds)
from ldp_erm.polyapprox import (SmoothedPlus, SubgradientSampler, abs_sampler,
                                bernstein_poly_eval, hbeta_deriv,
                                hinge_sampler, smoothed_plus_deriv)
from ldp_erm.primitives import PrivacyBudget, Transcript
from ldp_erm.rng import derived_rng

NOISELESS = PrivacyBudget(epsilon=float("inf"))
LOG_TERM = math.log(1.25e5)  # log(1.25/delta) at delta = 1e-5


def _record(rng, dim=3):
    x = rng.normal(size=dim)
    x *= rng.random() / np.linalg.norm(x)
    y = rng.uniform(-1, 1)
    return x, y


def test_ball_dataset_validation():
    with pytest.raises(ParameterError):
        BallDataset(np.array([[2.0, 0.0]]), np.array([0.5]))
    with pytest.raises(ParameterError):
        BallDataset(np.array([[0.5, 0.0]]), np.array([1.5]))
    d = BallDataset(np.array([[0.5, 0.0]]), np.array([1.0]))
    assert d.n == 1 and d.dim == 2


def test_replica_std_formulas():
    head, body = replica_noise_stds(PrivacyBudget(epsilon=1.0, delta=1e-5), 3)
    assert head == pytest.approx(math.sqrt(32 * LOG_TERM), rel=1e-12)
    assert head == pytest.approx(19.379, abs=5e-4)
    assert body == pytest.approx(math.sqrt(8 * LOG_TERM) * 12, rel=1e-12)
    assert body == pytest.approx(116.275, abs=5e-3)
    assert replica_noise_stds(NOISELESS, 3) == (0.0, 0.0)
    with pytest.raises(ParameterError):
        replica_noise_stds(PrivacyBudget(epsilon=1.0, delta=0.0), 3)


def test_encode_noiseless_copies_record():
    x, y = np.array([0.3, -0.2, 0.1]), 0.7
    msg = glm_player_encode((x, y), NOISELESS, 3, derived_rng(0))
    assert np.array_equal(msg.head_x, x) and msg.head_y == y
    assert msg.body_x.shape == (12, 3)
    assert np.all(msg.body_x == x) and np.all(msg.body_y == y)


def test_encode_head_std_empirical():
    budget = PrivacyBudget(epsilon=1.0, delta=1e-5)
    rng = derived_rng(1)
    x, y = np.array([0.5]), 0.2
    heads = np.array([glm_player_encode((x, y), budget, 3, rng).head_y
                      for _ in range(100_000)])
    want = math.sqrt(32 * LOG_TERM)
    assert abs(heads.std() - want) <= 0.02 * want


def test_encode_transcript_accounting():
    t = Transcript()
    x, y = np.array([0.1, 0.2, 0.3, 0.4]), -0.5
    glm_player_encode((x, y), PrivacyBudget(epsilon=1.0, delta=1e-5), 3,
                      derived_rng(2), transcript=t)
    assert t.reals_per_player() == 13 * 5  # (d(d+1)+1) * (p+1)


def test_hinge_sample_d1_expansion():
    beta = 0.3
    cfg = hinge_oracle_config(1, beta)
    rng = derived_rng(3)
    for _ in range(10):
        x, y = _record(rng)
        w = rng.normal(size=3)
        w /= max(1.0, np.linalg.norm(w))
        msg = glm_player_encode((x, y), NOISELESS, 1, rng)
        u = y * float(w @ x)
        want = (smoothed_plus_deriv(beta, 0.0) * (1 - u)
                + smoothed_plus_deriv(beta, 1.0) * u) * y * x
        got = hinge_gradient_sample(w, msg, cfg)
        assert np.max(np.abs(got - want)) < 1e-12


def test_hinge_sample_zero_label():
    cfg = hinge_oracle_config(2, 0.25)
    msg = glm_player_encode((np.array([0.5, 0.1]), 0.0), NOISELESS, 2,
                            derived_rng(4))
    assert np.array_equal(hinge_gradient_sample(np.array([0.3, 0.3]), msg, cfg),
                          np.zeros(2))


def test_replica_count_mismatch_rejected():
    cfg = hinge_oracle_config(3, 0.25)
    msg = glm_player_encode((np.array([0.5]), 0.5), NOISELESS, 2, derived_rng(5))
    with pytest.raises(ProtocolError):
        hinge_gradient_sample(np.array([0.5]), msg, cfg)


def test_gradient_affine_in_each_replica():
    # freshness: every body replica enters exactly one product factor, so
    # the sample is affine in any single replica's contribution
    d = 3
    cfg = hinge_oracle_config(d, 0.25)
    rng = derived_rng(6)
    x, y = _record(rng)
    w = rng.normal(size=3)
    w /= np.linalg.norm(w)
    base = glm_player_encode((x, y), NOISELESS, d, rng)
    for k in (0, 4, 11):
        outs = []
        for t in (0.0, 1.0, 0.5):
            by = base.body_y.copy()
            by[k] = t
            msg = ReplicaMessage(head_x=base.head_x, head_y=base.head_y,
                                 body_x=base.body_x, body_y=by)
            outs.append(hinge_gradient_sample(w, msg, cfg))
        mid = 0.5 * (outs[0] + outs[1])
        assert np.max(np.abs(outs[2] - mid)) < 1e-10


def test_hinge_unbiased_monte_carlo():
    budget = PrivacyBudget(epsilon=1.0, delta=1e-5)
    d, beta = 2, 0.25
    cfg = hinge_oracle_config(d, beta)
    rng = derived_rng(7)
    x = np.array([0.6, -0.3, 0.2])
    y = 0.8
    w = np.array([0.4, 0.4, -0.1])
    u = y * float(w @ x)
    want = bernstein_poly_eval(cfg.coeffs, u) * y * x
    reps = 20_000
    samples = np.empty((reps, 3))
    for i in range(reps):
        msg = glm_player_encode((x, y), budget, d, rng)
        samples[i] = hinge_gradient_sample(w, msg, cfg)
    se = samples.std(axis=0) / math.sqrt(reps)
    assert np.all(np.abs(samples.mean(axis=0) - want) <= 3 * se)


def test_general_abs_d1_hand_formula():
    beta = 0.3
    cfg = general_linear_oracle_config(1, beta, abs_sampler())
    rng = derived_rng(8)
    for _ in range(10):
        x, y = _record(rng)
        w = rng.normal(size=3)
        w /= max(1.0, np.linalg.norm(w))
        msg = glm_player_encode((x, y), NOISELESS, 1, rng)
        u = y * float(w @ x)
        a = u + 0.5  # the kink draw for |.| is the point mass at 0
        c0, c1 = hbeta_deriv(beta, -0.5), hbeta_deriv(beta, 0.5)
        want = (2.0 * (c0 * (1 - a) + c1 * a) - 1.0) * y * x
        got = general_linear_gradient_sample(w, msg, cfg, rng)
        assert np.max(np.abs(got - want)) < 1e-12


def test_general_affine_loss_degenerate():
    cfg = general_linear_oracle_config(
        2, 0.25, SubgradientSampler(lambda x: 0.3, 0.3, 0.3))
    rng = derived_rng(9)
    x, y = np.array([0.5, -0.5]), 0.9
    msg = glm_player_encode((x, y), NOISELESS, 2, rng)
    got = general_linear_gradient_sample(np.array([0.2, 0.2]), msg, cfg, rng)
    assert np.max(np.abs(got - 0.3 * y * x)) < 1e-15


def test_hinge_via_general_collapses_onto_hinge():
    beta, d = 0.25, 3
    hinge_cfg = hinge_oracle_config(d, beta)
    gen_cfg = general_linear_oracle_config(d, beta, hinge_sampler())
    rng = derived_rng(10)
    for _ in range(20):
        x, y = _record(rng)
        w = rng.normal(size=3)
        w /= max(1.0, np.linalg.norm(w))
        msg = glm_player_encode((x, y), NOISELESS, d, rng)
        a = hinge_gradient_sample(w, msg, hinge_cfg)
        b = general_linear_gradient_sample(w, msg, gen_cfg, rng)
        assert np.max(np.abs(a - b)) < 1e-8


def test_general_unbiased_monte_carlo():
    # x^2/2 loss: kink draws are uniform, so the expectation over (noise, s)
    # is the s-average of the shifted Bernstein form, computed by quadrature
    budget = PrivacyBudget(epsilon=1.0, delta=1e-5)
    d, beta = 2, 0.25
    ident = SubgradientSampler(lambda t: np.asarray(t, dtype=float), -1.0, 1.0)
    cfg = general_linear_oracle_config(d, beta, ident)
    rng = derived_rng(11)
    x = np.array([0.5, 0.3, -0.4])
    y = -0.7
    w = np.array([0.1, -0.5, 0.4])
    u = y * float(w @ x)
    sgrid = np.linspace(-1.0, 1.0, 4001)
    pbar = np.mean(bernstein_poly_eval(cfg.coeffs, u - sgrid + 0.5))
    want = (2.0 * pbar - 1.0) * y * x  # spread 2, midpoint 0
    reps = 20_000
    samples = np.empty((reps, 3))
    for i in range(reps):
        msg = glm_player_encode((x, y), budget, d, rng)
        samples[i] = general_linear_gradient_sample(w, msg, cfg, rng)
    se = samples.std(axis=0) / math.sqrt(reps)
    assert np.all(np.abs(samples.mean(axis=0) - want) <= 3 * se)


def test_zero_noise_gradient_bias_bound():
    beta, d = 0.25, 4
    sp = SmoothedPlus(beta)
    cfg = hinge_oracle_config(d, beta)
    rng = derived_rng(12)
    bound = 1.0 / (beta ** 2 * d)
    for _ in range(100):
        x, y = _record(rng, dim=5)
        w = rng.normal(size=5)
        w /= max(1.0, np.linalg.norm(w))
        u = y * float(w @ x)
        bias = abs(bernstein_poly_eval(cfg.coeffs, u) - sp.deriv(u))
        assert bias * abs(y) * np.linalg.norm(x) <= bound


def test_zero_noise_run_excess():
    data = generate_dataset({"family": "separable-two-class", "n": 4000,
                             "dim": 3, "margin": 0.1}, 17)
    rep = glm_erm_run(data, hinge_flavor(), target_alpha=0.4,
                      budget=NOISELESS, rng=derived_rng(18, 2), d_cap=8,
                      iters=30_000)
    assert rep.d == 8 and rep.beta == pytest.approx(0.1)
    assert rep.excess <= 0.08


def test_run_single_player_is_defined():
    data = BallDataset(np.array([[0.6, 0.0]]), np.array([1.0]))
    rep = glm_erm_run(data, hinge_via_general_flavor(), target_alpha=1.0,
                      budget=PrivacyBudget(epsilon=1.0, delta=1e-5),
                      rng=derived_rng(19), d_cap=2)
    assert np.linalg.norm(rep.w_priv) <= 1.0 + 1e-9
    assert rep.iters == 1
    assert rep.d_theory >= rep.d


def test_empirical_risk_matches_direct_mean():
    data = generate_dataset({"family": "separable-two-class", "n": 200,
                             "dim": 2, "margin": 0.2}, 3)
    w = np.array([0.5, 0.1])
    direct = np.mean(np.maximum(0.0, 0.5 - data.labels * (data.features @ w)))
    assert empirical_risk(data, hinge_flavor(), w) == pytest.approx(direct)
