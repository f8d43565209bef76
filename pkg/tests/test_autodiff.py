import numpy as np
import pytest

from levelset import (
    BinaryMask,
    DimensionError,
    FeatureField,
    InstanceHypers,
    ScalarField,
    SoftParams,
    Tsdf,
    backward,
    descent_direction,
    evolve,
    evolve_recorded,
    finite_difference_oracle,
    region_constants,
    run_gradcheck,
    tsdf_loss,
    tsdf_loss_grad,
)


def _instance(seed, h=8, w=8, channels=2, steps=2):
    rng = np.random.default_rng(seed)
    features = FeatureField(rng.uniform(-1, 1, (channels, h, w)))
    phi0 = Tsdf(ScalarField(rng.uniform(-0.9, 0.9, (h, w))), 1.0)
    hyp = InstanceHypers(
        rng.uniform(0.2, 1.8),
        rng.uniform(0.2, 1.8),
        rng.uniform(0.2, 1.8),
        tuple(rng.uniform(0.2, 1.8, steps)),
        tuple(rng.uniform(0.2, 1.8, steps)),
    )
    return features, phi0, hyp


def test_recorded_run_matches_plain_run_bit_for_bit():
    for seed in range(50):
        features, phi0, hyp = _instance(seed)
        plain = evolve(features, phi0, hyp)
        recorded, tape = evolve_recorded(features, phi0, hyp)
        assert np.array_equal(plain.phi_final.data, recorded.phi_final.data)
        assert plain.energies == recorded.energies
        assert len(tape.phis) == hyp.steps + 1


def test_zero_step_tape_and_identity_backward():
    features, phi0, _ = _instance(1)
    hyp = InstanceHypers(1.0, 1.0, 0.5)
    result, tape = evolve_recorded(features, phi0, hyp)
    assert len(tape.phis) == 1
    rng = np.random.default_rng(2)
    cot = ScalarField(rng.uniform(-1, 1, (8, 8)))
    bundle = backward(tape, cot)
    assert np.array_equal(bundle.d_phi0.data, cot.data)
    assert (bundle.d_features.data == 0).all()
    assert bundle.d_lambda1 == 0.0 and bundle.d_lambda2 == 0.0 and bundle.d_mu == 0.0
    assert bundle.d_eps == () and bundle.d_dt == ()


def test_tape_replay_is_bit_exact():
    features, phi0, hyp = _instance(3, steps=3)
    result, tape = evolve_recorded(features, phi0, hyp)
    replayed = tape.replay()
    assert np.array_equal(result.phi_final.data, replayed.phi_final.data)
    assert result.energies == replayed.energies


def test_zero_cotangent_annihilates():
    features, phi0, hyp = _instance(4, steps=3)
    _, tape = evolve_recorded(features, phi0, hyp)
    bundle = backward(tape, np.zeros((8, 8)))
    assert (bundle.d_phi0.data == 0).all()
    assert (bundle.d_features.data == 0).all()
    assert bundle.d_lambda1 == 0.0 and bundle.d_lambda2 == 0.0 and bundle.d_mu == 0.0
    assert all(v == 0.0 for v in bundle.d_eps)
    assert all(v == 0.0 for v in bundle.d_dt)


def test_backward_is_linear_in_the_cotangent():
    features, phi0, hyp = _instance(5, steps=3)
    _, tape = evolve_recorded(features, phi0, hyp)
    rng = np.random.default_rng(6)
    g1 = rng.uniform(-1, 1, (8, 8))
    g2 = rng.uniform(-1, 1, (8, 8))
    a, b = 0.37, -2.11
    lhs = backward(tape, a * g1 + b * g2)
    ba = backward(tape, g1)
    bb = backward(tape, g2)

    def close(x, y):
        return np.allclose(x, y, rtol=1e-12, atol=1e-12)

    assert close(lhs.d_phi0.data, a * ba.d_phi0.data + b * bb.d_phi0.data)
    assert close(lhs.d_features.data, a * ba.d_features.data + b * bb.d_features.data)
    assert close(lhs.d_mu, a * ba.d_mu + b * bb.d_mu)
    assert close(lhs.d_eps, np.multiply(a, ba.d_eps) + np.multiply(b, bb.d_eps))


def test_backward_is_deterministic():
    features, phi0, hyp = _instance(7, steps=3)
    _, tape = evolve_recorded(features, phi0, hyp)
    rng = np.random.default_rng(8)
    cot = rng.uniform(-1, 1, (8, 8))
    b1 = backward(tape, cot)
    b2 = backward(tape, cot)
    assert np.array_equal(b1.d_phi0.data, b2.d_phi0.data)
    assert np.array_equal(b1.d_features.data, b2.d_features.data)
    assert b1.d_eps == b2.d_eps and b1.d_dt == b2.d_dt


def test_backward_rejects_bad_cotangent_shape():
    features, phi0, hyp = _instance(9)
    _, tape = evolve_recorded(features, phi0, hyp)
    with pytest.raises(DimensionError):
        backward(tape, np.zeros((3, 3)))


def test_gradcheck_small():
    report = run_gradcheck(base_seed=100, instances=3, height=8, width=8, channels=2, steps=3)
    assert report.instances == 3
    assert report.max_rel_err < 1e-4


def test_single_step_chain_rule_for_dt():
    # with L = sum(phi_1) and one step, dL/d(dt) is the summed velocity
    features, phi0, hyp = _instance(10, steps=1)
    c = region_constants(features, phi0, SoftParams(hyp.eps_schedule[0]))
    vel = descent_direction(features, phi0, c, hyp, SoftParams(hyp.eps_schedule[0]))
    expected = float(vel.data.sum())
    fd = finite_difference_oracle(
        features, phi0, hyp, lambda phi: float(phi.data.sum()), ("dt", 0)
    )
    assert abs(fd - expected) / max(abs(expected), 1e-9) < 1e-6


def test_oracle_sees_every_feature_pixel():
    features, phi0, hyp = _instance(11, steps=2)
    rng = np.random.default_rng(12)
    target = Tsdf(ScalarField(rng.uniform(-1, 1, (8, 8))), 1.0)
    mask = BinaryMask((rng.uniform(size=(8, 8)) < 0.5).astype(np.uint8))

    def loss(phi):
        return tsdf_loss(phi, target, mask)

    for _ in range(5):
        k = int(rng.integers(0, 2))
        r = int(rng.integers(0, 8))
        c = int(rng.integers(0, 8))
        assert finite_difference_oracle(features, phi0, hyp, loss, ("features", k, r, c)) != 0.0


def test_oracle_zero_for_constant_loss():
    features, phi0, hyp = _instance(13, steps=2)
    assert finite_difference_oracle(features, phi0, hyp, lambda phi: 1.25, ("phi0", 2, 3)) == 0.0


def test_oracle_rejects_unknown_component():
    from levelset import ParameterError

    features, phi0, hyp = _instance(14, steps=1)
    with pytest.raises(ParameterError):
        finite_difference_oracle(features, phi0, hyp, lambda phi: 0.0, ("nope",))


def test_detached_constants_variant_changes_gradients():
    features, phi0, hyp = _instance(15, steps=3)
    result, tape = evolve_recorded(features, phi0, hyp)
    rng = np.random.default_rng(16)
    cot = rng.uniform(-1, 1, (8, 8))
    full = backward(tape, cot)
    detached = backward(tape, cot, detach_constants=True)
    assert not np.allclose(full.d_features.data, detached.d_features.data)
    # the final step sees the same cotangent either way
    assert full.d_dt[-1] == detached.d_dt[-1]
    # earlier steps receive a different cotangent once the constants detach
    assert full.d_dt[0] != detached.d_dt[0]


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    phi = ScalarField(rng.uniform(-1.5, 1.5, (8, 8)))
    target = Tsdf(ScalarField(rng.uniform(-1, 1, (8, 8))), 1.0)
    mask = BinaryMask((rng.uniform(size=(8, 8)) < 0.5).astype(np.uint8))
    grad = tsdf_loss_grad(phi, target, mask).data
    h = 1e-6
    for _ in range(20):
        r = int(rng.integers(0, 8))
        c = int(rng.integers(0, 8))
        plus = phi.data.copy()
        plus[r, c] += h
        minus = phi.data.copy()
        minus[r, c] -= h
        fd = (tsdf_loss(ScalarField(plus), target, mask) - tsdf_loss(ScalarField(minus), target, mask)) / (2 * h)
        assert abs(grad[r, c] - fd) / max(abs(fd), 1e-9) < 1e-6
