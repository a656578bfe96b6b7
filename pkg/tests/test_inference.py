import numpy as np
import pytest
from pydantic import ValidationError

from cdftransform.criterion import MinimizeSettings, NuMeasure
from cdftransform.errors import DataError, DomainError, PerturbationWarning, UnsupportedConfigurationError
from cdftransform.inference import (
    TestConfig,
    auto_nu,
    critical_value,
    k_sample_test,
    k_sample_test_sweep,
    p_value,
    scaling_factor,
    two_sample_test,
    two_sample_test_sweep,
)
from cdftransform.samples import MultiSampleSet, PairedSample, UnivariateSample
from cdftransform.transforms import ParamBox, builtin_family
from config import read_sample

from oracle import brute_force_test


def _config(**options):
    options.setdefault('tau', 0.05)
    options.setdefault('n_boot', 40)
    options.setdefault('m_nodes', 32)
    options.setdefault('workers', 1)
    options.setdefault('minimize', MinimizeSettings(resolution=9))
    return TestConfig(**options)


def _assert_same(a, b):
    assert a.statistic == b.statistic
    assert a.critical_value == b.critical_value
    assert a.p_value == b.p_value
    assert a.reject == b.reject
    assert a.boot_stats.tolist() == b.boot_stats.tolist()
    assert [t.tolist() for t in a.theta_hat] == [t.tolist() for t in b.theta_hat]


# ---------------------------------------------------------------------------
# small pieces
# ---------------------------------------------------------------------------

def test_critical_value_order_statistic():
    assert critical_value([1, 2, 3, 4], 0.25) == 3.0
    assert critical_value([4, 3, 2, 1], 0.05) == 4.0
    assert critical_value([5.0], 0.5) == 5.0
    # ⌈0.95·20⌉ = 19 even though 0.95·20 is not exactly 19 in floating point
    assert critical_value(list(range(1, 21)), 0.05) == 19.0
    assert critical_value(list(range(1, 1001)), 0.05) == 950.0


def test_critical_value_errors():
    with pytest.raises(DomainError):
        critical_value([], 0.05)
    with pytest.raises(DomainError):
        critical_value([1.0], 1.0)


def test_p_value_tails():
    boot = [0.5, 1.0, 2.0, 3.0]
    assert p_value(boot, 0.0) == 1.0
    assert p_value(boot, 1.0) == 0.75
    assert p_value(boot, 10.0) == 0.0
    with pytest.raises(DomainError):
        p_value([], 1.0)


def test_scaling_factor():
    assert scaling_factor(100, [100]) == 50.0
    assert scaling_factor(4548, [2517]) == pytest.approx(4548 * 2517 / 7065)
    assert scaling_factor(10, [10, 20]) == pytest.approx(10 * (10 / 40) * (20 / 40))


def test_auto_nu_ages():
    base = UnivariateSample.from_values([18, 30, 64, 41])
    nu = auto_nu(base, padding=0.0)
    assert nu.mean == 41.0
    assert nu.sd == pytest.approx(46 / 6)
    padded = auto_nu(base)
    assert padded.mean == pytest.approx(41.0)
    assert padded.sd == pytest.approx(46 * 1.01 / 6)


def test_auto_nu_needs_a_range():
    with pytest.raises(DomainError):
        auto_nu(UnivariateSample.from_values([3.0, 3.0]))


def test_config_validation():
    with pytest.raises(ValidationError):
        TestConfig(tau=0.0)
    with pytest.raises(ValidationError):
        TestConfig(tau=0.05, alpha=1.0)
    with pytest.raises(ValidationError):
        TestConfig(tau=0.05, n_boot=0)
    with pytest.raises(ValidationError):
        TestConfig(tau=0.05, colour='red')


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv('CDFTRANSFORM_WORKERS', '3')
    assert TestConfig(tau=0.05).workers == 3


# ---------------------------------------------------------------------------
# two-sample test
# ---------------------------------------------------------------------------

def test_identical_samples_give_zero_statistic(hundred_points):
    fam = builtin_family('location')
    box = ParamBox((-1.0,), (1.0,))
    result = two_sample_test(hundred_points, hundred_points, family=fam, box=box, config=_config())
    assert result.statistic == 0.0
    assert result.theta_hat[0].tolist() == [0.0]
    assert result.p_value == 1.0
    assert not result.reject
    assert result.decision == 'fail to reject'
    assert result.t_n == 50.0
    assert result.boot_stats.shape == (40,)


def test_matched_exact_transform():
    x = np.arange(-20.0, 40.0)
    pairs = PairedSample.from_columns(x, (x - 1.0) / 2.0)
    config = _config(pairing='matched', minimize=MinimizeSettings(resolution=21), tau=0.08, m_nodes=256)
    fam = builtin_family('location_scale')
    result = two_sample_test(pairs, family=fam, box=ParamBox((0.0, 1.0), (2.0, 3.0)), config=config)
    assert result.statistic == 0.0
    assert result.theta_hat[0].tolist() == [1.0, 2.0]
    assert not result.reject


def test_matched_argument_checks(hundred_points):
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    with pytest.raises(UnsupportedConfigurationError):
        two_sample_test(hundred_points, hundred_points, family=fam, box=box, config=_config(pairing='matched'))
    pairs = PairedSample.from_columns(hundred_points.values, hundred_points.values)
    with pytest.raises(DataError):
        two_sample_test(pairs, hundred_points, family=fam, box=box, config=_config())
    with pytest.raises(DataError):
        two_sample_test(hundred_points, None, family=fam, box=box, config=_config())


def test_paired_input_under_independent_pairing_uses_both_columns(rng):
    x, y = rng.normal(size=30), rng.normal(size=30)
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    config = _config()
    from_pairs = two_sample_test(PairedSample.from_columns(x, y), family=fam, box=box, config=config)
    from_samples = two_sample_test(UnivariateSample.from_values(x), UnivariateSample.from_values(y),
                                   family=fam, box=box, config=config)
    _assert_same(from_pairs, from_samples)


def test_result_is_deterministic_across_worker_counts(rng):
    x = UnivariateSample.from_values(rng.normal(size=40))
    y = UnivariateSample.from_values(rng.normal(0.2, 1.4, size=45))
    fam, box = builtin_family('location_scale'), ParamBox((-1.0, 0.5), (1.0, 2.0))
    serial = two_sample_test(x, y, family=fam, box=box, config=_config(seed=11))
    again = two_sample_test(x, y, family=fam, box=box, config=_config(seed=11))
    threaded = two_sample_test(x, y, family=fam, box=box, config=_config(seed=11, workers=4))
    _assert_same(serial, again)
    _assert_same(serial, threaded)
    other = two_sample_test(x, y, family=fam, box=box, config=_config(seed=12))
    assert other.boot_stats.tolist() != serial.boot_stats.tolist()


def test_statistic_ignores_observation_order(rng):
    xv, yv = rng.normal(size=60), rng.normal(0.3, 1.2, size=70)
    fam, box = builtin_family('location_scale'), ParamBox((-1.0, 0.5), (1.0, 2.0))
    first = two_sample_test(UnivariateSample.from_values(xv), UnivariateSample.from_values(yv),
                            family=fam, box=box, config=_config(seed=3))
    shuffled = two_sample_test(UnivariateSample.from_values(xv[::-1]),
                               UnivariateSample.from_values(rng.permutation(yv)),
                               family=fam, box=box, config=_config(seed=3))
    assert shuffled.statistic == first.statistic
    assert shuffled.t_n == first.t_n
    assert [t.tolist() for t in shuffled.theta_hat] == [t.tolist() for t in first.theta_hat]


def test_sweep_matches_single_runs(rng):
    x = UnivariateSample.from_values(rng.normal(size=35))
    y = UnivariateSample.from_values(rng.normal(0.5, 1.0, size=30))
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    taus = [0.05, 0.07]
    sweep = two_sample_test_sweep(x, y, fam, box, _config(), taus)
    assert [r.tau for r in sweep] == taus
    for tau, row in zip(taus, sweep):
        _assert_same(row, two_sample_test(x, y, family=fam, box=box, config=_config(tau=tau)))


def test_sweep_rejects_bad_taus(hundred_points):
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    with pytest.raises(DomainError):
        two_sample_test_sweep(hundred_points, hundred_points, fam, box, _config(), [])
    with pytest.raises(DomainError):
        two_sample_test_sweep(hundred_points, hundred_points, fam, box, _config(), [0.05, -1.0])


def test_large_perturbation_weight_is_reported(hundred_points):
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    with pytest.warns(PerturbationWarning):
        result = two_sample_test(hundred_points, hundred_points, family=fam, box=box,
                                 config=_config(tau=0.5))
    assert result.mix == pytest.approx(0.5 * np.sqrt(50.0))
    assert any('perturbation weight' in d for d in result.diagnostics)


def test_to_record_is_json_safe(hundred_points):
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    record = two_sample_test(hundred_points, hundred_points, family=fam, box=box, config=_config()).to_record()
    assert record['decision'] == 'fail to reject'
    assert record['theta_hat'] == [[0.0]]
    assert record['n_boot'] == 40
    assert isinstance(record['reject'], bool)
    assert isinstance(record['statistic'], float)


def test_rejects_a_clear_shape_difference(rng):
    x = UnivariateSample.from_values(rng.normal(size=300))
    y = UnivariateSample.from_values(rng.exponential(size=300) ** 2)
    fam, box = builtin_family('location'), ParamBox((-0.5,), (0.5,))
    config = _config(n_boot=99, tau=0.06, minimize=MinimizeSettings(resolution=21))
    result = two_sample_test(x, y, family=fam, box=box, config=config)
    assert result.reject
    assert result.p_value < 0.05


# ---------------------------------------------------------------------------
# K-sample test
# ---------------------------------------------------------------------------

def test_single_comparison_k_sample_equals_two_sample(rng):
    x = UnivariateSample.from_values(rng.normal(size=40))
    y = UnivariateSample.from_values(rng.normal(0.3, 1.2, size=50))
    fam, box = builtin_family('location_scale'), ParamBox((-1.0, 0.5), (1.0, 2.0))
    two = two_sample_test(x, y, family=fam, box=box, config=_config(seed=3))
    k = k_sample_test(MultiSampleSet(base=x, comparisons=(y,)), [fam], [box], _config(seed=3))
    _assert_same(two, k)
    assert two.t_n == k.t_n


def test_k_sample_exact_images_give_zero(rng):
    x = rng.normal(size=40)
    y1 = UnivariateSample.from_values(x + 0.5)
    y2 = UnivariateSample.from_values(2.0 * x)
    data = MultiSampleSet(base=UnivariateSample.from_values(x), comparisons=(y1, y2))
    families = [builtin_family('location'), builtin_family('scale')]
    boxes = [ParamBox((-1.0,), (0.0,)), ParamBox((0.25,), (0.75,))]
    result = k_sample_test(data, families, boxes, _config(minimize=MinimizeSettings(resolution=5)))
    assert result.statistic == 0.0
    assert [t.tolist() for t in result.theta_hat] == [[-0.5], [0.5]]
    assert result.t_n == pytest.approx(40 * (40 / 120) * (40 / 120))


def test_k_sample_argument_checks(hundred_points):
    data = MultiSampleSet(base=hundred_points, comparisons=(hundred_points, hundred_points))
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    with pytest.raises(UnsupportedConfigurationError):
        k_sample_test(data, [fam, fam], [box, box], _config(pairing='matched'))
    with pytest.raises(DomainError):
        k_sample_test(data, [fam], [box], _config())


def test_k_sample_sweep_rows(hundred_points, rng):
    y = UnivariateSample.from_values(rng.normal(size=60))
    data = MultiSampleSet(base=hundred_points, comparisons=(y, y))
    fam, box = builtin_family('location'), ParamBox((-1.0,), (1.0,))
    rows = k_sample_test_sweep(data, [fam, fam], [box, box], _config(), [0.05, 0.06, 0.07])
    assert [r.tau for r in rows] == [0.05, 0.06, 0.07]
    assert len({r.statistic for r in rows}) == 1


# ---------------------------------------------------------------------------
# brute-force enumeration
# ---------------------------------------------------------------------------

def _random_case(rng):
    n_x, n_y = int(rng.integers(4, 15)), int(rng.integers(4, 15))
    x = rng.normal(size=n_x).round(1).tolist()
    y = (rng.normal(size=n_y) * float(rng.uniform(0.5, 2.0)) + float(rng.normal())).round(1).tolist()
    nodes = sorted(set(rng.normal(scale=1.5, size=int(rng.integers(3, 9))).round(2).tolist()))
    kind = ['location', 'scale', 'location_scale'][int(rng.integers(0, 3))]
    box = {
        'location':       ((-1.0,), (1.0,)),
        'scale':          ((0.5,), (2.0,)),
        'location_scale': ((-1.0, 0.5), (1.0, 2.0)),
    }[kind]
    return x, y, nodes, kind, box


def test_agrees_with_brute_force_enumeration():
    rng = np.random.default_rng(77)
    for case in range(50):
        x, y, nodes, kind, (lower, upper) = _random_case(rng)
        tau, n_boot, resolution, seed = 0.1, 12, 5, 1000 + case
        expected = brute_force_test(x, [y], [kind], [(lower, upper)], resolution=resolution, nodes=nodes,
                                    tau=tau, n_boot=n_boot, alpha=0.05, seed=seed)
        config = TestConfig(tau=tau, n_boot=n_boot, seed=seed, workers=1, audit=False,
                            nu=NuMeasure.explicit(nodes), minimize=MinimizeSettings(resolution=resolution))
        result = two_sample_test(UnivariateSample.from_values(x), UnivariateSample.from_values(y),
                                 family=builtin_family(kind), box=ParamBox(lower, upper), config=config)

        assert result.statistic == expected['statistic']
        assert result.t_n == expected['t_n']
        assert [t.tolist() for t in result.theta_hat] == expected['theta_hat']
        assert result.boot_stats.tolist() == expected['boot_stats']
        assert result.critical_value == expected['critical_value']
        assert result.p_value == expected['p_value']
        assert result.reject == expected['reject']


def test_matched_agrees_with_brute_force_enumeration():
    rng = np.random.default_rng(78)
    for case in range(10):
        n = int(rng.integers(5, 15))
        x = rng.normal(size=n).round(1).tolist()
        y = [round(0.8 * v + float(e), 1) for v, e in zip(x, rng.normal(scale=0.3, size=n))]
        nodes = sorted(set(rng.normal(size=6).round(2).tolist()))
        lower, upper = (-1.0, 0.5), (1.0, 2.0)
        expected = brute_force_test(x, [y], ['location_scale'], [(lower, upper)], resolution=5, nodes=nodes,
                                    tau=0.1, n_boot=10, alpha=0.1, seed=case, matched=True)
        config = TestConfig(tau=0.1, n_boot=10, alpha=0.1, seed=case, workers=1, pairing='matched',
                            nu=NuMeasure.explicit(nodes), minimize=MinimizeSettings(resolution=5))
        result = two_sample_test(PairedSample.from_columns(x, y), family=builtin_family('location_scale'),
                                 box=ParamBox(lower, upper), config=config)

        assert result.statistic == expected['statistic']
        assert result.boot_stats.tolist() == expected['boot_stats']
        assert result.critical_value == expected['critical_value']
        assert result.reject == expected['reject']


def test_k_sample_agrees_with_brute_force_enumeration():
    rng = np.random.default_rng(79)
    for case in range(10):
        x = rng.normal(size=10).round(1).tolist()
        y1 = (rng.normal(size=8) + 0.3).round(1).tolist()
        y2 = (rng.normal(size=12) * 1.5).round(1).tolist()
        nodes = sorted(set(rng.normal(size=7).round(2).tolist()))
        boxes = [((-1.0,), (1.0,)), ((-1.0, 0.5), (1.0, 2.0))]
        expected = brute_force_test(x, [y1, y2], ['location', 'location_scale'], boxes, resolution=5,
                                    nodes=nodes, tau=0.1, n_boot=10, alpha=0.05, seed=case)
        config = TestConfig(tau=0.1, n_boot=10, seed=case, workers=1,
                            nu=NuMeasure.explicit(nodes), minimize=MinimizeSettings(resolution=5))
        data = MultiSampleSet(base=UnivariateSample.from_values(x),
                              comparisons=(UnivariateSample.from_values(y1), UnivariateSample.from_values(y2)))
        result = k_sample_test(data, [builtin_family('location'), builtin_family('location_scale')],
                               [ParamBox(lo, hi) for lo, hi in boxes], config)

        assert result.statistic == expected['statistic']
        assert result.t_n == expected['t_n']
        assert result.boot_stats.tolist() == expected['boot_stats']
        assert result.p_value == expected['p_value']


@pytest.mark.slow
@pytest.mark.parametrize('state', ['ny', 'pa'])
def test_age_p_values_are_stable_in_the_bootstrap_count(state, data_dir):
    before = read_sample(data_dir / f'age_{state}_before.csv', 'age')
    after = read_sample(data_dir / f'age_{state}_after.csv', 'age')
    fam, box = builtin_family('location_scale'), ParamBox((-2.0, 0.5), (0.0, 2.0))
    taus = [0.05, 0.06, 0.07, 0.08]
    small = two_sample_test_sweep(before, after, fam, box, TestConfig(tau=0.05, n_boot=1000, seed=1993), taus)
    large = two_sample_test_sweep(before, after, fam, box, TestConfig(tau=0.05, n_boot=5000, seed=1993), taus)
    for a, b in zip(small, large):
        assert abs(a.p_value - b.p_value) <= 0.02
