import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermokac.core import (
    ConfigError,
    InitialDistribution,
    MasterVector,
    RngStreamKey,
    SimConfig,
    StreamTag,
    energy,
    moment,
    momentum,
    sample_initial_state,
)

GAUSS = InitialDistribution("gaussian", (0.0, 1.0))


def make(**kw):
    base = dict(n_particles=16, field_strength=1.0, t_final=1.0, sample_times=(0.0, 1.0), initial_distribution=GAUSS)
    base.update(kw)
    return SimConfig(**base)


def test_observables_small_vectors():
    v = MasterVector.of([3.0, 4.0])
    assert momentum(v) == 3.5
    assert energy(v) == 12.5
    assert moment(MasterVector.of([1, 2, 3]), 2) == pytest.approx(14 / 3)
    assert moment(MasterVector.of([1, 2]), 4) == pytest.approx((1 + 16) / 2)


def test_moment_rejects_odd_order():
    with pytest.raises(ValueError):
        moment(MasterVector.of([1.0, 2.0]), 3)


@pytest.mark.parametrize("text", ["gaussian:0:1", "gaussian:0.5:0.75", "uniform:-1:2", "two_point:-1:1:0.5"])
def test_distribution_roundtrip(text):
    d = InitialDistribution.parse(text)
    assert InitialDistribution.parse(str(d)) == d


@pytest.mark.parametrize("text", ["gaussian:0:-1", "uniform:2:1", "two_point:0:1:1.5", "cauchy:0:1", "gaussian:0"])
def test_distribution_rejects_bad_params(text):
    with pytest.raises(ConfigError):
        InitialDistribution.parse(text)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("gaussian:0:1", [1, 0, 1, 0, 3, 0, 15]),
        ("gaussian:0.5:0.75", [1, 0.5, 1.0]),
        ("uniform:-1:1", [1, 0, 1 / 3, 0, 1 / 5, 0, 1 / 7]),
        ("two_point:-1:2:0.25", [1, 1.25, 3.25]),
    ],
)
def test_raw_moments(text, expected):
    d = InitialDistribution.parse(text)
    for p, m in enumerate(expected):
        assert d.raw_moment(p) == pytest.approx(m)


def test_gaussian_sixth_moment_from_samples(rng):
    v = GAUSS.draw(rng, 10_000)
    x = v**6
    assert abs(x.mean() - 15) <= 3 * x.std(ddof=1) / math.sqrt(len(x))


@pytest.mark.parametrize(
    "kw,key",
    [
        (dict(n_particles=1), "n_particles"),
        (dict(field_strength=-1.0), "field_strength"),
        (dict(t_final=0.0), "t_final"),
        (dict(sample_times=(0.5, 0.2)), "sample_times"),
        (dict(sample_times=(0.0, 2.0)), "sample_times"),
        (dict(replicas=0), "replicas"),
        (dict(master_seed=-1), "master_seed"),
        (dict(quenched_init="magic"), "quenched_init"),
        (dict(initial_distribution=InitialDistribution("two_point", (0.0, 0.0, 0.5)), project_to_sphere=True), "initial_distribution"),
    ],
)
def test_config_errors_name_the_key(kw, key):
    with pytest.raises(ConfigError) as info:
        make(**kw)
    assert info.value.key == key


def test_projection_default_depends_on_process():
    cfg = make()
    assert cfg.projection_for("interacting") and cfg.projection_for("coupled")
    assert not cfg.projection_for("quenched")
    assert not make(project_to_sphere=False).projection_for("interacting")


@given(st.integers(2, 300), st.integers(0, 2**32), st.sampled_from(["gaussian:1:2", "uniform:-3:0.5", "two_point:0:1:0.9"]))
def test_projection_lands_on_sphere(n, seed, law):
    cfg = make(n_particles=n, initial_distribution=InitialDistribution.parse(law), project_to_sphere=True)
    v = sample_initial_state(cfg, RngStreamKey(seed, 0, StreamTag.initial_state))
    assert energy(v) == pytest.approx(1.0, abs=1e-12)


def test_streams_are_reproducible_and_distinct():
    a = RngStreamKey(5, 3, StreamTag.initial_state).generator().random(4)
    b = RngStreamKey(5, 3, StreamTag.initial_state).generator().random(4)
    c = RngStreamKey(5, 4, StreamTag.initial_state).generator().random(4)
    d = RngStreamKey(5, 3, StreamTag.collision_history).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_initial_state_needs_initial_stream():
    with pytest.raises(ValueError):
        sample_initial_state(make(), RngStreamKey(0, 0, StreamTag.collision_history))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_cache_refresh_matches_direct_sums(values):
    v = MasterVector.of(values)
    assert v.cached_sum == pytest.approx(sum(values), abs=1e-9)
    assert v.cached_sum_sq == pytest.approx(sum(x * x for x in values), rel=1e-12, abs=1e-9)
