import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thermokac.core import InitialDistribution, SimConfig
from thermokac.diagnostics import (
    DELTA_LOG_FACTOR,
    EmpiricalMeasure,
    ScalingTable,
    chaos_defect,
    current_fluctuation,
    fit_rate,
    fluctuation_samples,
    load_snapshots,
    theorem_bounds,
    wasserstein1,
)
from thermokac.engine import run_ensemble
from thermokac.output import write_snapshots

samples = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6)


def brute_w1(a, b):
    return min(np.mean(np.abs(np.array(a) - np.array(p))) for p in itertools.permutations(b))


def test_w1_examples():
    assert wasserstein1([0.0], [2.5]) == 2.5
    assert wasserstein1([0.0, 2.0], [1.0, 1.0]) == 1.0
    assert brute_w1([0.0, 2.0], [1.0, 1.0]) == 1.0


def test_w1_errors():
    with pytest.raises(ValueError):
        wasserstein1([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        wasserstein1([np.nan], [1.0])


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(*[st.lists(st.floats(-50, 50), min_size=n, max_size=n)] * 3)))
def test_w1_metric_and_brute_force(abc):
    a, b, c = abc
    assert wasserstein1(a, b) == pytest.approx(brute_w1(a, b), abs=1e-9)
    assert wasserstein1(a, b) == wasserstein1(b, a)
    assert wasserstein1(a, a) == 0.0
    assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-9


def test_empirical_measure_sorted():
    m = EmpiricalMeasure([3.0, -1.0, 2.0])
    assert m.sorted_samples.tolist() == [-1.0, 2.0, 3.0] and len(m) == 3


@pytest.mark.parametrize("sym", [False, True])
def test_defect_zero_for_product_law(rng, sym):
    snaps = rng.normal(size=(400, 10))
    d, se = chaos_defect(snaps, symmetrize=sym)
    assert abs(d) <= 3 * se


def test_defect_of_duplicated_coordinate(rng):
    x = rng.normal(size=2000)
    snaps = np.column_stack([x, x])
    d, se = chaos_defect(snaps)
    assert abs(d - 1.0) <= 3 * se


def test_defect_vanishes_after_shuffling_across_replicas(rng):
    base = rng.normal(size=(500, 1)) + rng.normal(size=(500, 6))  # strongly correlated rows
    d0, se0 = chaos_defect(base, symmetrize=True)
    assert d0 > 5 * se0
    shuffled = np.column_stack([rng.permutation(col) for col in base.T])
    d, se = chaos_defect(shuffled, symmetrize=True)
    assert abs(d) <= 3 * se


@pytest.mark.parametrize("phi,psi", [("v2", "sin"), ("tanh", "min1v2")])
def test_defect_other_test_functions(rng, phi, psi):
    d, se = chaos_defect(rng.normal(size=(300, 5)), phi, psi, symmetrize=True)
    assert abs(d) <= 3 * se


def test_defect_needs_replicas(rng):
    with pytest.raises(ValueError, match="30"):
        chaos_defect(rng.normal(size=(29, 4)))
    with pytest.raises(ValueError):
        current_fluctuation(rng.normal(size=(10, 4)), 0.0)


def test_zero_field_pair_correlation_oracle():
    # E=0 from i.i.d. N(mu, s2): every collision zeroes the conditional mean, so
    # E v1 = mu e^{-2t}, E v1 v2 = mu^2 exp(-2 (2N-3) t / (N-1)).
    n, mu, var, t, r = 16, 1.0, 0.25, 0.3, 6000
    cfg = SimConfig(
        n, 0.0, t, (t,), InitialDistribution("gaussian", (mu, var)),
        project_to_sphere=False, replicas=r, master_seed=3, quenched_init="distributional",
    )
    snaps = run_ensemble(cfg, "quenched", snapshots=True).snapshots()[:, 0, :]
    q = mu**2 * math.exp(-2 * (2 * n - 3) * t / (n - 1))
    jhat = mu * math.exp(-2 * t)
    d, se = chaos_defect(snaps, symmetrize=True)
    assert abs(d - (q - jhat**2)) <= 3 * se
    x = fluctuation_samples(snaps, jhat)
    exact = mu**2 + var - jhat**2 + (n - 1) * (q - jhat**2)
    assert abs(x.mean() - exact) <= 3 * x.std(ddof=1) / math.sqrt(r)


def test_fluctuation_examples(rng):
    snaps = rng.normal(size=(2000, 20))
    x = fluctuation_samples(snaps, 0.0)
    assert abs(current_fluctuation(snaps, 0.0) - 1.0) <= 3 * x.std(ddof=1) / math.sqrt(len(x))
    assert current_fluctuation(np.full((40, 5), 0.7), 0.7) == 0.0


def test_bounds_constants():
    b = theorem_bounds(1.0, 1.0, 1.0)
    assert b.delta_t == pytest.approx(0.2320667211259624, abs=1e-12)
    assert DELTA_LOG_FACTOR == pytest.approx(math.log(4.828427124746190 / 3.828427124746190), abs=1e-14)
    assert b.n_of_t == 6
    assert b.lambda_rate == 4.0
    assert b.growth_factor == pytest.approx(math.exp(8 * math.sqrt(2)))


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_bounds_properties(u, e, t):
    b = theorem_bounds(u, e, t)
    assert b.delta_t > 0
    assert b.n_of_t >= t / b.delta_t + 1 > b.n_of_t - 1
    assert theorem_bounds(u, e, t).delta_t / theorem_bounds(u, 2 * e, t).delta_t == pytest.approx(2.0)
    assert b.growth_factor >= 1.0


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, -1)])
def test_bounds_reject_nonpositive(args):
    with pytest.raises(ValueError):
        theorem_bounds(*args)


def table_of(ns, means, rel_se=0.01):
    t = ScalingTable()
    for n, m in zip(ns, means):
        t.add(n, "x", m, rel_se * abs(m), 100)
    return t


def test_fit_exact_power_laws():
    ns = [32, 128, 512, 2048]
    s, _, r2 = fit_rate(table_of(ns, [1 / n for n in ns]), "x")
    assert s == pytest.approx(-1.0) and r2 == pytest.approx(1.0)
    s, _, _ = fit_rate(table_of(ns, [0.3] * 4), "x")
    assert s == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_quarter_power(rng):
    ns = [64, 256, 1024, 4096, 16384]
    means = [n**-0.25 * (1 + 0.01 * rng.normal()) for n in ns]
    s, _, _ = fit_rate(table_of(ns, means), "x")
    assert abs(s + 0.25) <= 0.02


def test_fit_preconditions():
    with pytest.raises(ValueError):
        fit_rate(table_of([1, 2], [1, 1]), "x")
    with pytest.raises(ValueError):
        fit_rate(table_of([1, 2, 3], [1, -1, 1]), "x")
    with pytest.raises(ValueError):
        fit_rate(table_of([1, 2, 3], [1, 1, 1], rel_se=0.5), "x")
    t = ScalingTable()
    t.add(4, "x", 1, 0.1, 1)
    with pytest.raises(ValueError):
        t.add(4, "x", 1, 0.1, 1)
    with pytest.raises(ValueError):
        t.add(8, "x", 1, -0.1, 1)


def test_scaling_csv(tmp_path):
    t = table_of([2, 4, 8], [1.0, 0.5, 0.25])
    t.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "N,metric,mean,stderr,replicas"
    assert lines[1] == "2,x,1.0,0.01,100"


def test_snapshot_roundtrip(tmp_path, rng):
    snaps = rng.normal(size=(3, 2, 5))
    write_snapshots(tmp_path, snaps)
    assert np.array_equal(load_snapshots(tmp_path, 1), snaps[:, 1, :])
    with pytest.raises(FileNotFoundError):
        load_snapshots(tmp_path, 7)
