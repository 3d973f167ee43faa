import math

import numpy as np
import pytest

from condrisk import (
    CondRiskMeasure,
    ConditionalValue,
    DualVariable,
    ModuleSpec,
    PartitionOfUnity,
    RandomVariable,
    admissible_dual,
    cond_avar,
    cond_entropic,
    cond_worst_case,
    fenchel_consistency,
    module_gauge,
    neg_cond_expectation,
    scalarize,
    transfer_verify,
    young_power,
)
from condrisk.transfer import ScalarizeError

LOG2 = math.log(2.0)


def builtins(space):
    return (
        cond_entropic(space, 1.0),
        cond_worst_case(space),
        neg_cond_expectation(space),
        cond_avar(space, 0.5),
    )


def tilted_measure(space):
    """Entropic with a block-1 tilt that breaks conditional law invariance."""
    base = cond_entropic(space, 1.0)
    i, k = space.block_index_array(1)[:2]

    def ev(x):
        vals = base.evaluate(x).values.copy()
        vals[0] += 0.1 * (x.values[i] - x.values[k])
        return ConditionalValue(vals)

    return CondRiskMeasure(space, ev, "tilted")


def nonlocal_measure(space):
    """Depends cross-block: block-1 figure uses the global mean."""

    def ev(x):
        mu = float(np.dot(space.probs, x.values))
        vals = -space.cond_expect(x).values
        vals[0] += 0.5 * mu
        return ConditionalValue(vals)

    return CondRiskMeasure(space, ev, "crossblock")


def test_scalarize_examples(s4):
    sc = scalarize(cond_entropic(s4, 1.0), 1)
    assert sc.evaluate([-LOG2, -LOG2]) == pytest.approx(LOG2, abs=1e-12)
    sc = scalarize(neg_cond_expectation(s4), 2)
    assert sc.evaluate([1.0, 3.0]) == pytest.approx(-2.0, abs=1e-12)
    # cash invariance of the restriction
    for m in builtins(s4):
        sc = scalarize(m, 1, certify=False)
        base = sc.evaluate([0.0, 0.0])
        assert sc.evaluate([3.0, 3.0]) == pytest.approx(base - 3.0, abs=1e-9)


def test_scalarize_refuses_nonlocal(s4):
    with pytest.raises(ScalarizeError):
        scalarize(nonlocal_measure(s4), 1)


def test_scalarize_range_check(s4):
    with pytest.raises(ValueError):
        scalarize(neg_cond_expectation(s4), 3)


def test_exact_scalarization_identity(s4, space8):
    rng = np.random.default_rng(50)
    for space in (s4, space8):
        for m in builtins(space):
            scalars = [
                scalarize(m, j, certify=False) for j in range(1, space.n_blocks + 1)
            ]
            for _ in range(101 // space.n_blocks):
                x = RandomVariable(rng.normal(0, 2, space.n_atoms))
                direct = m.evaluate(x).values
                for j, sc in enumerate(scalars, start=1):
                    assert abs(direct[j - 1] - sc.evaluate(space.restrict(x, j))) <= 1e-12


def test_gauge_restriction_identity(s4, space8):
    # blockwise module gauges equal the classical gauges on the block space
    rng = np.random.default_rng(51)
    specs = [ModuleSpec.lp(1), ModuleSpec.lp(2), ModuleSpec.lp(math.inf),
             ModuleSpec.orlicz(young_power(2))]
    for space in (s4, space8):
        for _ in range(10):
            x = RandomVariable(rng.normal(0, 2, space.n_atoms))
            for spec in specs:
                whole = module_gauge(spec, x, space).values
                for j in range(1, space.n_blocks + 1):
                    piece = module_gauge(
                        spec, RandomVariable(space.restrict(x, j)), space.block_space(j)
                    ).values[0]
                    assert whole[j - 1] == piece


def test_mixture_coherence(s4, a2):
    rng = np.random.default_rng(52)
    parts = PartitionOfUnity([a2.atom(1), a2.atom(2)])
    for m in builtins(s4):
        for _ in range(10):
            xs = [RandomVariable(rng.normal(0, 2, 4)) for _ in range(2)]
            mixed = m.evaluate(s4.indicator_mix(parts, xs)).values
            paste = [m.evaluate(xs[0]).values[0], m.evaluate(xs[1]).values[1]]
            assert np.array_equal(mixed, paste)


def test_fenchel_consistency_examples(s4):
    ne = neg_cond_expectation(s4)
    rep = fenchel_consistency(ne, [DualVariable([-1, -1, -1, -1])])
    assert rep.passed and rep.max_deviation == 0.0

    ent = cond_entropic(s4, 1.0)
    rep = fenchel_consistency(ent, [DualVariable([-2, 0, -1, -1])], tol=1e-6)
    assert rep.passed
    by_atom = {(c.dual_index, c.atom): c for c in rep.comparisons}
    assert by_atom[(0, 1)].conditional == pytest.approx(LOG2, abs=1e-9)
    assert by_atom[(0, 1)].classical == pytest.approx(LOG2, abs=1e-6)

    wc = cond_worst_case(s4)
    bad = DualVariable([-0.5, -0.5, -1, -1])  # block-1 mean is -0.5, not -1
    rep = fenchel_consistency(wc, [bad])
    assert rep.passed and rep.infinities_agree
    blk1 = {(c.dual_index, c.atom): c for c in rep.comparisons}[(0, 1)]
    assert math.isinf(blk1.conditional) and math.isinf(blk1.classical)


def test_fenchel_consistency_seeded(s4):
    rng = np.random.default_rng(53)
    duals = [admissible_dual(s4, rng.uniform(0.05, 2.0, 4)) for _ in range(12)]
    duals.append(DualVariable([-2, 0, -1, -1]))
    duals.append(DualVariable([-3, -1, -1, -1]))  # inadmissible on block 1
    for m in builtins(s4):
        rep = fenchel_consistency(m, duals, tol=1e-6)
        assert rep.passed, (m.label, rep.max_deviation)


def test_transfer_verify_builtins(s4):
    rng = np.random.default_rng(54)
    payoffs = [RandomVariable(rng.normal(0, 2, 4)) for _ in range(8)]
    for m in builtins(s4):
        rep = transfer_verify(m, [1, 2, 3, 4, 5, 6, 7], payoffs)
        assert rep.all_equivalences_hold, m.label
        for item in rep.items.values():
            assert item.conditional and all(item.per_atom)
        assert rep.items[6].qualifier == "vacuous at finite scale"
        assert rep.items[7].qualifier == "at probe resolution"


def test_transfer_tilt_localizes(s4):
    rng = np.random.default_rng(55)
    payoffs = [RandomVariable(rng.normal(0, 2, 4)) for _ in range(6)]
    rep = transfer_verify(tilted_measure(s4), [5], payoffs)
    item = rep.items[5]
    assert not item.conditional
    assert item.per_atom == [False, True]
    assert item.equivalence  # both sides fail together


def test_transfer_verify_guards(s4):
    payoffs = [RandomVariable([1, 3, 2, 6])]
    with pytest.raises(ValueError):
        transfer_verify(neg_cond_expectation(s4), [8], payoffs)
    with pytest.raises(ValueError):
        transfer_verify(neg_cond_expectation(s4), [1], [])
    with pytest.raises(ScalarizeError):
        transfer_verify(nonlocal_measure(s4), [1], payoffs)


def test_uneven_blocks_and_singletons():
    from condrisk import FiniteProbSpace, verify_representation

    space = FiniteProbSpace([0.2, 0.3, 0.5], [[1], [2, 3]])
    x = RandomVariable([1.0, -2.0, 0.7])
    dual = admissible_dual(space, np.array([1.0, 0.5, 1.3]))
    for m in builtins(space):
        assert verify_representation(m, [x], tol=1e-6).attained_all
        assert fenchel_consistency(m, [dual], tol=1e-6).passed
    rep = transfer_verify(cond_entropic(space, 1.0), [1, 2, 3, 4, 5, 6, 7], [x])
    assert rep.all_equivalences_hold


def test_transfer_report_shape(s4):
    payoffs = [RandomVariable([1, 3, 2, 6])]
    rep = transfer_verify(neg_cond_expectation(s4), [1, 6], payoffs)
    d = rep.to_dict()
    assert set(d) == {"measure", "items", "all_equivalences_hold"}
    assert set(d["items"]) == {"1", "6"}
    assert set(d["items"]["1"]) == {"name", "conditional", "per_atom", "equivalence"}
    assert d["items"]["6"]["qualifier"] == "vacuous at finite scale"
