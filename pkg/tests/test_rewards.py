"""Reward family: hand-evaluated cases, endpoint behavior, validation."""
import pytest

from uasnsim.rewards import (RewardWeights, delay_reward, forwarding_reward,
                             hop_reward, noise_reward, snr_to_probability,
                             total_reward)


def test_forwarding_success_full_probability():
    assert forwarding_reward(True, 1.0, 0.0, 1.0, 1.0) == pytest.approx(1.0)


def test_forwarding_loss_hand_value():
    # -gamma_loss * sqrt(p_loss) = -2 * 0.5
    assert forwarding_reward(False, 0.0, 0.25, 1.0, 2.0) == pytest.approx(-1.0)


def test_forwarding_success_zero_probability():
    assert forwarding_reward(True, 0.0, 1.0, 1.0, 1.0) == pytest.approx(0.0)


@pytest.mark.parametrize("p_fwd,p_loss", [(-0.1, 0.0), (1.1, 0.0),
                                          (0.0, -0.1), (0.0, 2.0)])
def test_forwarding_rejects_bad_probabilities(p_fwd, p_loss):
    with pytest.raises(ValueError):
        forwarding_reward(True, p_fwd, p_loss, 1.0, 1.0)


def test_noise_reward_values():
    assert noise_reward(60.0, 0.0, 1.0) == pytest.approx(0.0)
    assert noise_reward(60.0, 0.01, 1.0) == pytest.approx(-0.6)
    assert noise_reward(0.0, 0.5, 1.0) == pytest.approx(0.0)


def test_noise_reward_clamps_negative_spl():
    # negative dB readings floor at zero so fractional exponents stay real
    assert noise_reward(-20.0, 0.5, 0.7) == pytest.approx(0.0)


def test_hop_reward_values():
    assert hop_reward(0, 1.0, 1.0) == pytest.approx(1.0)
    assert hop_reward(1, 1.0, 1.0) == pytest.approx(0.5)
    assert hop_reward(7, 2.0, 3.0) == pytest.approx(0.2)


def test_hop_reward_strictly_decreasing():
    vals = [hop_reward(h, 1.0, 1.0) for h in range(10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_hop_reward_rejects_negative_hops():
    with pytest.raises(ValueError):
        hop_reward(-1, 1.0, 1.0)


def test_delay_reward_endpoints_and_midpoint():
    assert delay_reward(2.0, 2.0, 10.0, 1.0) == pytest.approx(1.0)
    assert delay_reward(10.0, 2.0, 10.0, 1.0) == pytest.approx(0.0)
    assert delay_reward(6.0, 2.0, 10.0, 1.0) == pytest.approx(0.5)


def test_delay_reward_affine_decreasing():
    lo = delay_reward(3.0, 2.0, 10.0, 1.0)
    mid = delay_reward(5.0, 2.0, 10.0, 1.0)
    hi = delay_reward(7.0, 2.0, 10.0, 1.0)
    assert lo > mid > hi
    assert lo - mid == pytest.approx(mid - hi)


def test_delay_reward_clamps_out_of_window():
    assert delay_reward(0.0, 2.0, 10.0, 1.0) == pytest.approx(1.0)
    assert delay_reward(99.0, 2.0, 10.0, 1.0) == pytest.approx(0.0)


def test_delay_reward_degenerate_window_returns_omega():
    # single-node window: every delay is both the best and worst case
    assert delay_reward(5.0, 5.0, 5.0, 0.8) == pytest.approx(0.8)


def test_delay_reward_rejects_inverted_window():
    with pytest.raises(ValueError):
        delay_reward(5.0, 10.0, 2.0, 1.0)


def test_total_reward_zero_weights():
    w = RewardWeights(theta=(0.0, 0.0, 0.0, 0.0))
    assert total_reward([1.0, 2.0, 3.0, 4.0], w) == pytest.approx(0.0)


def test_total_reward_single_component_passthrough():
    w = RewardWeights(theta=(0.0, 1.0, 0.0, 0.0))
    assert total_reward([5.0, -0.25, 9.0, 9.0], w) == pytest.approx(-0.25)


def test_total_reward_dot_product():
    w = RewardWeights(theta=(0.4, 0.2, 0.2, 0.2))
    got = total_reward([1.0, -0.6, 0.5, 0.5], w)
    assert got == pytest.approx(0.4 - 0.12 + 0.1 + 0.1)


def test_total_reward_linear_in_each_component():
    w = RewardWeights(theta=(0.4, 0.2, 0.2, 0.2))
    base = [0.3, -0.1, 0.5, 0.2]
    for idx, theta in enumerate(w.theta):
        bumped = list(base)
        bumped[idx] += 1.0
        assert total_reward(bumped, w) - total_reward(base, w) == \
            pytest.approx(theta)


def test_total_reward_rejects_wrong_arity():
    with pytest.raises(ValueError):
        total_reward([1.0, 2.0, 3.0], RewardWeights())


def test_snr_to_probability_midpoint_and_monotonicity():
    assert snr_to_probability(10.0, 10.0, 0.5) == pytest.approx(0.5)
    lo = snr_to_probability(-20.0, 10.0, 0.5)
    hi = snr_to_probability(40.0, 10.0, 0.5)
    assert 0.0 < lo < 0.5 < hi < 1.0


def test_weights_validation():
    with pytest.raises(ValueError):
        RewardWeights(theta=(0.5, 0.5, 0.5))          # wrong arity
    with pytest.raises(ValueError):
        RewardWeights(theta=(-0.1, 0.4, 0.4, 0.3))    # negative weight
    with pytest.raises(ValueError):
        RewardWeights(beta=0.0)                       # denominator guard
    with pytest.raises(ValueError):
        RewardWeights(chi=-0.5)


def test_default_weights_are_usable():
    w = RewardWeights()
    assert len(w.theta) == 4
    assert w.beta > 0
    assert total_reward([0.5, -0.2, 0.4, 0.6], w) == pytest.approx(
        sum(t * c for t, c in zip(w.theta, [0.5, -0.2, 0.4, 0.6])))
