import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bubblecache.likelihood import detect_single_elephant, exact_detection_likelihood
from bubblecache.sampling import (
    BernoulliSampler,
    CutoffUnreachableError,
    SampleOutcome,
    bernoulli_sample_trace,
    find_cutoff_rate,
    monte_carlo_detection_likelihood,
    quantum_error,
    sample_without_replacement,
    samples_for_rate,
    zero_error_mask,
)
from bubblecache.traffic import SingleElephant, Trace, generate_distribution


def test_samples_for_rate_rounds_half_up():
    assert samples_for_rate(0.01, 1015) == 10
    assert samples_for_rate(0.5, 5) == 3
    assert samples_for_rate(1.0, 300) == 300


def test_sample_without_replacement_basics():
    sizes = [5, 3, 1]
    out = sample_without_replacement(sizes, 6, seed=1)
    assert out.k == 6
    assert all(0 <= c <= s for c, s in zip(out.counts, sizes))
    assert out == sample_without_replacement(sizes, 6, seed=1)
    assert sample_without_replacement(sizes, 9, seed=2).counts == (5, 3, 1)
    with pytest.raises(ValueError):
        sample_without_replacement(sizes, 10)


def test_hypergeometric_aggregate():
    rng = np.random.default_rng(11)
    hits = sum(sample_without_replacement([3, 1, 1], 2, rng).counts == (2, 0, 0) for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.3, abs=0.015)


def test_sample_outcome_validates():
    with pytest.raises(ValueError):
        SampleOutcome((1, -1))
    assert len(SampleOutcome((1, 2))) == 2


def test_quantum_error_examples():
    assert quantum_error([5, 3, 1, 1], [2, 0, 1, 0], 2) == 0.5
    assert quantum_error([3, 1, 1], [0, 1, 0], 1) == 1.0
    assert quantum_error([3, 1, 1], [3, 1, 1], 1) == 0.0
    assert quantum_error([5, 3, 1], SampleOutcome((4, 3, 0)), 2) == 0.0
    # an unseen flow never enters the observed top set
    assert quantum_error([5, 5, 1], [0, 0, 0], 2) == 1.0
    with pytest.raises(ValueError):
        quantum_error([3, 1], [1, 1, 1], 1)


def test_quantum_error_is_a_multiple_of_one_over_alpha():
    rng = np.random.default_rng(0)
    sizes = generate_distribution("cauchy", 30, 400).to_array()
    for _ in range(50):
        counts = rng.multivariate_hypergeometric(sizes, 40)
        q = quantum_error(sizes, counts, 4)
        assert q * 4 == pytest.approx(round(q * 4))
        assert 0 <= q <= 1


def test_zero_error_mask_tie_policies():
    sizes = np.array([5, 3, 3, 1])
    counts = np.array([[2, 1, 1, 0], [2, 1, 0, 1], [2, 0, 1, 0], [3, 2, 0, 0], [1, 1, 1, 1]])
    assert zero_error_mask(counts, sizes, 2, "strict").tolist() == [False, False, False, True, False]
    assert zero_error_mask(counts, sizes, 2, "tolerant").tolist() == [True, False, True, True, False]


def test_monte_carlo_examples():
    q, ci = monte_carlo_detection_likelihood([3, 1, 1], k=3, alpha=1, trials=100_000, seed=1)
    assert abs(q - 0.7) <= 3 * ci
    assert ci == pytest.approx(1.96 * math.sqrt(q * (1 - q) / 100_000))
    assert monte_carlo_detection_likelihood([6, 4, 2, 1], k=13, alpha=2, trials=500, seed=0) == (1.0, 0.0)


def test_monte_carlo_single_elephant():
    ds = generate_distribution(SingleElephant(15, 1000))
    q, ci = monte_carlo_detection_likelihood(ds, p=0.01, alpha=1, trials=50_000, seed=3)
    want = detect_single_elephant(15, 1000, samples_for_rate(0.01, 1015))
    assert abs(q - want) <= 3 * ci


@pytest.mark.parametrize(
    "sizes, alpha, policy",
    [([4, 2, 1], 1, "strict"), ([5, 3, 3, 1], 2, "tolerant"), ([6, 4, 4, 2, 1], 2, "strict"), ([7, 5, 3, 2, 2], 1, "tolerant")],
)
def test_monte_carlo_matches_exact(sizes, alpha, policy):
    for k in range(0, sum(sizes) + 1, 2):
        exact = exact_detection_likelihood(sizes, k, alpha, policy)
        q, ci = monte_carlo_detection_likelihood(sizes, k=k, alpha=alpha, trials=20_000, seed=[k, 7], tie_policy=policy)
        assert abs(q - exact) <= 3 * ci + 1e-3


def test_monte_carlo_argument_errors():
    with pytest.raises(ValueError):
        monte_carlo_detection_likelihood([3, 1], alpha=1)
    with pytest.raises(ValueError):
        monte_carlo_detection_likelihood([3, 1], k=1, p=0.5, alpha=1)
    with pytest.raises(ValueError):
        monte_carlo_detection_likelihood([3, 1], k=5, alpha=1)
    with pytest.raises(ValueError):
        monte_carlo_detection_likelihood([3, 1], k=1, alpha=1, tie_policy="loose")


def test_cutoff_is_the_first_grid_point_reaching_target():
    sizes = [30, 10, 5, 2, 1, 1, 1]
    res = find_cutoff_rate(sizes, 1, 0.95, trials=4000, seed=5, tie_policy="strict", resolution=200)
    total = sum(sizes)
    assert res.k == math.floor(res.p_c * total + 0.5)
    assert res.achieved_likelihood >= 0.95
    below = monte_carlo_detection_likelihood(
        sizes, k=math.floor((res.p_c - 1 / 200) * total + 0.5), alpha=1, trials=4000, seed=[5, math.floor((res.p_c - 1 / 200) * total + 0.5)]
    )[0]
    assert below < 0.95
    exact_at = exact_detection_likelihood(sizes, res.k, 1, max_total=None)
    assert exact_at >= 0.95 - 3 * res.ci_halfwidth


def test_cutoff_unreachable_with_strict_ties():
    with pytest.raises(CutoffUnreachableError) as info:
        find_cutoff_rate([3, 3, 1], 1, 0.99, trials=500, tie_policy="strict")
    assert info.value.max_likelihood == 0.0
    with pytest.raises(ValueError):
        find_cutoff_rate([3, 1], 1, 1.0)


def test_bernoulli_sampling():
    n = 100_000
    tr = Trace(np.arange(n), np.ones(n, dtype=int), np.ones(n, dtype=int))
    kept = bernoulli_sample_trace(tr, 0.05, seed=4)
    assert abs(len(kept) - 5000) <= 3 * math.sqrt(n * 0.05 * 0.95)
    assert kept == bernoulli_sample_trace(tr, 0.05, seed=4)
    assert len(bernoulli_sample_trace(tr, 0.0, seed=4)) == 0
    assert bernoulli_sample_trace(tr, 1.0, seed=4) == tr
    with pytest.raises(ValueError):
        bernoulli_sample_trace(tr, 1.5)


def test_bernoulli_sampler_estimator():
    tr = Trace(np.arange(1000), np.arange(1000) % 7, np.ones(1000, dtype=int))
    sampler = BernoulliSampler(p=0.3, seed=2)
    with pytest.raises(NotFittedError):
        sampler.transform(tr)
    first = sampler.fit(tr).transform(tr)
    assert first == bernoulli_sample_trace(tr, 0.3, seed=2)
    assert sampler.get_params() == {"p": 0.3, "seed": 2}
    again = clone(sampler).fit_transform(tr)
    assert again == first
    with pytest.raises(ValueError):
        BernoulliSampler(p=2).fit(tr)
