import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from boostcd.sampling import SamplingLaw, sample_independent, sample_nice

# chi-square tests fail with probability 1e-4 each under the null
ALPHA = 1e-4


def _law(kind, n, tau, seed=0, **kw):
    return SamplingLaw(kind, tau, seed, np.arange(n), **kw)


def test_nice_full_domain_is_the_only_subset():
    law = _law("nice", 3, 3)
    for t in range(50):
        assert sample_nice(law, t).tolist() == [0, 1, 2]


def test_nice_subsets_uniform():
    law = _law("nice", 4, 2, seed=1)
    out, sizes = law.sample_many(0, 10**6)
    assert np.all(sizes == 2)
    counts = Counter(map(tuple, np.sort(out, axis=1).tolist()))
    subsets = list(itertools.combinations(range(4), 2))
    assert set(counts) == set(subsets)
    freq = np.array([counts[s] for s in subsets])
    assert chisquare(freq).pvalue > ALPHA
    sigma = np.sqrt(10**6 * (1 / 6) * (5 / 6))
    # fixed seed, so the 3-sigma band is a deterministic check
    assert np.all(np.abs(freq - 10**6 / 6) < 3 * sigma)


def test_nice_singletons_uniform():
    law = _law("nice", 5, 1, seed=2)
    out, _ = law.sample_many(0, 10**6)
    freq = np.bincount(out[:, 0], minlength=5)
    assert chisquare(freq).pvalue > ALPHA
    assert np.all(np.abs(freq / 10**6 - 0.2) < 3 * np.sqrt(0.2 * 0.8 / 10**6))


def test_nice_marginal_inclusion():
    n, tau = 30, 7
    out, _ = _law("nice", n, tau, seed=3).sample_many(0, 200_000)
    freq = np.bincount(out.ravel(), minlength=n)
    assert chisquare(freq).pvalue > ALPHA
    np.testing.assert_allclose(freq / 200_000, tau / n, atol=5 * np.sqrt(tau / n / 200_000))


def test_independent_single_coordinate():
    law = _law("independent", 1, 4)
    assert sample_independent(law, 0).tolist() == [0]


def test_independent_expected_size():
    n, tau = 1000, 16
    law = _law("independent", n, tau, seed=4)
    _, sizes = law.sample_many(0, 10**5)
    expected = n * (1 - (1 - 1 / n) ** tau)
    assert abs(expected - 15.88) < 0.01
    assert abs(sizes.mean() - expected) < 0.05
    assert law.expected_size() == pytest.approx(expected)


def test_independent_collision_probability():
    _, sizes = _law("independent", 2, 2, seed=5).sample_many(0, 10**6)
    p1 = np.mean(sizes == 1)
    assert abs(p1 - 0.5) < 3 * np.sqrt(0.25 / 10**6)


def test_independent_with_collisions_keeps_tau_draws():
    law = _law("independent", 3, 8, seed=6, allow_collisions=True)
    _, sizes = law.sample_many(0, 1000)
    assert np.all(sizes == 8)


def test_wrong_law_kind_rejected():
    with pytest.raises(ValueError):
        sample_nice(_law("independent", 4, 2), 0)
    with pytest.raises(ValueError):
        sample_independent(_law("nice", 4, 2), 0)


def test_tau_larger_than_domain():
    with pytest.raises(ValueError):
        _law("nice", 3, 4)


def test_streams_differ():
    law = _law("nice", 1000, 10, seed=9)
    a = law.sample_many(0, 100)[0]
    b = law.for_stream(1).sample_many(0, 100)[0]
    assert not np.array_equal(a, b)


@given(kind=st.sampled_from(["nice", "independent"]), n=st.integers(1, 60), data=st.data(),
       seed=st.integers(0, 2**64 - 1), start=st.integers(0, 10**9))
def test_draws_are_pure_functions_of_seed_and_index(kind, n, data, seed, start):
    tau = data.draw(st.integers(1, n if kind == "nice" else 2 * n))
    domain = np.sort(np.random.default_rng(seed % 2**32).choice(10 * n, size=n, replace=False))
    law = SamplingLaw(kind, tau, seed, domain)
    batch, sizes = law.sample_many(start, 5)
    # reverse order and a fresh law object must not matter
    again = SamplingLaw(kind, tau, seed, domain.copy())
    for k in reversed(range(5)):
        one = again.sample(start + k)
        assert one.tolist() == batch[k, :sizes[k]].tolist()
        assert len(set(one.tolist())) == one.size >= 1
        assert set(one.tolist()) <= set(domain.tolist())
        if kind == "nice":
            assert one.size == tau
        else:
            assert one.size <= tau
