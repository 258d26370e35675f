"""Unit tests for RBM energy, enumeration, contrastive divergence and DBNs"""
import itertools
import math

import numpy as np
import pytest

from ecgbench.core.exceptions import EnumerationLimitError, ShapeError
from ecgbench.core.tensor import RngStream, tensor
from ecgbench.models.layers import DenseLayer
from ecgbench.models.network import Sequential
from ecgbench.models.rbm import (
    Dbn,
    Rbm,
    RbmLayer,
    cd1_update,
    cd_update,
    dbn_forward,
    energy,
    hidden_given_visible,
    joint_probability,
    log_partition_function,
    partition_function,
    pretrain_layerwise,
    reconstruction_cross_entropy,
    visible_given_hidden,
)
from ecgbench.services.trainer_service import AdamOptimizer, backward


def _states(n):
    return [np.array(s, dtype=np.float64) for s in itertools.product((0, 1), repeat=n)]


def _random_rbm(rng: RngStream, n_visible: int, n_hidden: int) -> Rbm:
    return Rbm(
        rng.standard_normal((n_visible, n_hidden)),
        rng.standard_normal((n_visible,)),
        rng.standard_normal((n_hidden,)),
    )


def test_energy_value():
    """Test the energy of one joint state by hand"""
    rbm = Rbm(W=[[1.0]], a=[0.5], b=[0.0])
    assert energy(rbm, tensor([1]), tensor([1])) == -1.5
    assert energy(rbm, tensor([0]), tensor([1])) == 0.0


def test_energy_rejects_non_binary():
    """Test energies are defined on binary states only"""
    rbm = Rbm.zeros(2, 1)
    with pytest.raises(ValueError):
        energy(rbm, tensor([0.5, 1]), tensor([1]))
    with pytest.raises(ShapeError):
        energy(rbm, tensor([1]), tensor([1]))


def test_partition_function_zero_parameters():
    """Test Z counts every configuration when all parameters are zero"""
    assert abs(partition_function(Rbm.zeros(2, 1)) - 8.0) < 1e-12


def test_partition_function_single_pair():
    """Test Z = 3 + e for one visible and one hidden unit with w=1"""
    rbm = Rbm(W=[[1.0]], a=[0.0], b=[0.0])
    assert abs(partition_function(rbm) - (3.0 + math.e)) < 1e-12


def test_joint_probability_normalized():
    """Test joint probabilities sum to one on random small machines"""
    rng = RngStream(31)
    for _ in range(50):
        n_v = int(rng.integers(1, 6))
        n_h = int(rng.integers(1, 11 - n_v))
        rbm = _random_rbm(rng, n_v, n_h)
        log_z = log_partition_function(rbm)
        mass = sum(
            math.exp(-energy(rbm, v, h) - log_z) for v in _states(n_v) for h in _states(n_h)
        )
        assert abs(mass - 1.0) < 1e-9
    rbm = _random_rbm(rng, 2, 2)
    assert abs(sum(joint_probability(rbm, v, h) for v in _states(2) for h in _states(2)) - 1.0) < 1e-9


def test_conditionals_match_enumeration():
    """Test p(h_j=1|v) and p(v_i=1|h) against ratios of joint probabilities over 20 random machines"""
    rng = RngStream(4)
    for _ in range(20):
        n_v, n_h = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        rbm = _random_rbm(rng, n_v, n_h)
        for v in _states(n_v):
            joint = np.array([joint_probability(rbm, v, h) for h in _states(n_h)])
            p_h = hidden_given_visible(rbm, v)
            for j in range(n_h):
                on = sum(p for p, h in zip(joint, _states(n_h)) if h[j] == 1.0)
                assert abs(p_h[j] - on / joint.sum()) < 1e-9
        for h in _states(n_h):
            joint = np.array([joint_probability(rbm, v, h) for v in _states(n_v)])
            p_v = visible_given_hidden(rbm, h)
            for i in range(n_v):
                on = sum(p for p, v in zip(joint, _states(n_v)) if v[i] == 1.0)
                assert abs(p_v[i] - on / joint.sum()) < 1e-9



def test_enumeration_limit():
    """Test exhaustive quantities refuse more than 20 units"""
    with pytest.raises(EnumerationLimitError):
        partition_function(Rbm.zeros(11, 10))
    assert partition_function(Rbm.zeros(10, 10)) > 0


def test_energy_invariant_under_hidden_permutation():
    """Test permuting hidden units together with their weights keeps the energy"""
    rng = RngStream(9)
    rbm = _random_rbm(rng, 4, 3)
    perm = [2, 0, 1]
    permuted = Rbm(rbm.W[:, perm], rbm.a, rbm.b[perm])
    for v in _states(4):
        for h in _states(3):
            assert abs(energy(rbm, v, h) - energy(permuted, v, h[perm])) < 1e-12


def test_cd_fixed_point_gives_zero_update():
    """Test a reconstruction equal to the data leaves every parameter unchanged"""
    rbm = _random_rbm(RngStream(2), 4, 3)
    before = (rbm.W.copy(), rbm.a.copy(), rbm.b.copy())
    v0 = tensor([1, 0, 1, 1])
    delta = cd1_update(rbm, v0, 0.1, RngStream(0), reconstruction=v0)
    assert not delta.dW.any() and not delta.da.any() and not delta.db.any()
    assert np.array_equal(rbm.W, before[0])
    assert np.array_equal(rbm.a, before[1])
    assert np.array_equal(rbm.b, before[2])


def test_cd_deterministic():
    """Test equal seeds give identical updates"""
    v0 = tensor([[1, 0, 1, 0], [0, 1, 1, 0]])
    deltas = []
    for _ in range(2):
        rbm = _random_rbm(RngStream(2), 4, 3)
        deltas.append(cd_update(rbm, v0, 0.05, RngStream(17), k=2))
    assert np.array_equal(deltas[0].dW, deltas[1].dW)
    assert np.array_equal(deltas[0].db, deltas[1].db)


def test_cd_rejects_bad_arguments():
    """Test learning rate, step count and data checks"""
    rbm = Rbm.zeros(2, 2)
    with pytest.raises(ValueError):
        cd1_update(rbm, tensor([1, 0]), 0.0, RngStream(0))
    with pytest.raises(ValueError):
        cd_update(rbm, tensor([1, 0]), 0.1, RngStream(0), k=0)
    with pytest.raises(ValueError):
        cd1_update(rbm, tensor([0.3, 0]), 0.1, RngStream(0))


def test_cd_learns_two_patterns():
    """Test reconstruction error falls when training on two complementary patterns"""
    rng = RngStream(5)
    rbm = Rbm.initialize(6, 4, rng)
    data = tensor([[1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]])
    before = reconstruction_cross_entropy(rbm, data)
    for _ in range(500):
        cd1_update(rbm, data, 0.1, rng)
    after = reconstruction_cross_entropy(rbm, data)
    assert after < 0.8 * before


def test_pretrain_zero_epochs_is_noop():
    """Test pretraining for zero epochs leaves the DBN untouched"""
    dbn = Dbn.initialize([6, 4, 3], 2, RngStream(1))
    before = [(rbm.W.copy(), rbm.a.copy(), rbm.b.copy()) for rbm in dbn.layers]
    data = RngStream(2).uniform((10, 6))
    pretrain_layerwise(dbn, data, epochs=0, lr=0.1, rng=RngStream(3))
    for rbm, (W, a, b) in zip(dbn.layers, before):
        assert np.array_equal(rbm.W, W)
        assert np.array_equal(rbm.a, a)
        assert np.array_equal(rbm.b, b)


def test_pretrain_rejects_out_of_range_data():
    """Test pretraining data must be scaled into [0, 1]"""
    dbn = Dbn.initialize([3, 2], 2, RngStream(1))
    with pytest.raises(ValueError):
        pretrain_layerwise(dbn, tensor([[0.0, 1.5, 0.2]]), epochs=1, lr=0.1, rng=RngStream(0))


def test_dbn_forward_uniform_for_zero_head():
    """Test a zero head gives uniform class probabilities"""
    rbm = Rbm.zeros(4, 3)
    dbn = Dbn([rbm], DenseLayer(np.zeros((5, 3)), np.zeros(5), activation="softmax"))
    assert np.allclose(dbn_forward(dbn, tensor([1, 0, 1, 0])), 0.2)


def test_dbn_layer_sizes_must_chain():
    """Test stacked RBMs must agree on their shared layer size"""
    with pytest.raises(ShapeError):
        Dbn([Rbm.zeros(4, 3), Rbm.zeros(2, 2)], DenseLayer(np.zeros((2, 2)), np.zeros(2), "softmax"))


def test_tiny_dbn_separates_orthogonal_patterns():
    """Test a pretrained and fine-tuned DBN classifies noisy orthogonal patterns"""
    rng = RngStream(12)
    patterns = tensor([[1, 1, 1, 1, 0, 0, 0, 0], [0, 0, 0, 0, 1, 1, 1, 1]])
    labels = np.array([k % 2 for k in range(60)])
    flips = rng.uniform((60, 8)) < 0.05
    data = np.abs(patterns[labels] - flips)

    dbn = Dbn.initialize([8, 6], 2, rng)
    pretrain_layerwise(dbn, data, epochs=50, lr=0.1, rng=rng, batch_size=10)
    model = Sequential([RbmLayer(dbn.layers[0]), dbn.head], name="tiny-dbn")
    optimizer = AdamOptimizer(0.05)
    params = model.parameters()
    for _ in range(200):
        _, grads = backward(model, (data, labels))
        optimizer.step(params, grads)

    predicted = model.forward(data).argmax(axis=1)
    assert np.mean(predicted == labels) >= 0.9


def test_rbm_layer_frozen_parameters():
    """Test a frozen RBM layer contributes no trainable parameters"""
    rbm = Rbm.zeros(3, 2)
    model = Sequential([RbmLayer(rbm, trainable=False),
                        DenseLayer(np.zeros((2, 2)), np.zeros(2), "softmax")])
    assert all(".rbm." not in key for key in model.parameters())
    assert any(".rbm." in key for key in model.parameters(trainable_only=False))
