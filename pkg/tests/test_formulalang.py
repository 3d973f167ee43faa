import numpy as np
import pytest

from _helpers import random_formula, random_name
from condrisk import (
    BooleanAlgebra,
    PartitionOfUnity,
    Universe,
    collapse_eval,
    evaluate,
    free_variables,
    parse,
    print_formula,
    witness,
)
from condrisk.errors import ParseError
from condrisk.formulalang import (
    And,
    Eq,
    ForallIn,
    FormulaError,
    Lit,
    Not,
    Or,
    UnboundVariableError,
    Var,
)


def test_parse_examples(u2):
    f = parse("empty = empty", u2)
    assert isinstance(f, Eq) and isinstance(f.left, Lit)
    assert f.left.name is u2.empty

    f = parse("forall x in u . x = empty", u2, free_names={"u"})
    assert isinstance(f, ForallIn) and f.var == "x"
    assert f.body == Eq(Var("x"), Lit(u2.empty))

    with pytest.raises(UnboundVariableError):
        parse("x = empty", u2)


def test_parse_errors_carry_position(u2):
    with pytest.raises(ParseError) as err:
        parse("empty = ", u2)
    assert err.value.pos == 8
    with pytest.raises(ParseError):
        parse("forall in u . x = empty", u2, free_names={"u"})
    with pytest.raises(ParseError):
        parse("empty empty", u2)
    with pytest.raises(ParseError):
        parse("(empty = empty", u2)


def test_evaluate_examples(u2, a2):
    assert evaluate(parse("empty = empty", u2)) == a2.one
    u = u2.make_name({u2.empty: a2.atom(1)})
    env = {"u": u}
    f = parse("forall x in u . x = empty", u2, free_names=env)
    assert evaluate(f, env) == a2.one
    f = parse("exists x in u . x = empty", u2, free_names=env)
    assert evaluate(f, env) == a2.atom(1)


def test_connective_identities(u2, a2):
    rng = np.random.default_rng(40)
    for _ in range(40):
        f = random_formula(u2, rng, 2)
        g = random_formula(u2, rng, 1)
        vf, vg = evaluate(f), evaluate(g)
        assert evaluate(Not(Not(f))) == vf
        from condrisk.formulalang import Implies

        assert evaluate(Implies(f, g)) == evaluate(Or(Not(f), g))
        assert evaluate(And(f, g)) == (vf & vg)


def test_factorization_property(u2, a2):
    rng = np.random.default_rng(41)
    for _ in range(60):
        f = random_formula(u2, rng, 2)
        truth = evaluate(f)
        for atom in (1, 2):
            assert (atom in truth.atoms) == collapse_eval(f, atom)


def test_factorization_three_atoms():
    uni = Universe(BooleanAlgebra(3))
    rng = np.random.default_rng(42)
    for _ in range(40):
        f = random_formula(uni, rng, 2)
        truth = evaluate(f)
        for atom in (1, 2, 3):
            assert (atom in truth.atoms) == collapse_eval(f, atom)


def test_equivalent_literal_substitution(u2, a2):
    # hash-consing makes equivalent literal spellings the same name object
    rng = np.random.default_rng(43)
    single = u2.canonical_name([[]])
    via_mix = u2.mix(PartitionOfUnity([a2.atom(1), a2.atom(2)]), [single, single])
    assert via_mix is single
    f1 = parse("check({{}}) in u", u2, free_names={"u"})
    f2 = parse("mix[{1}: check({{}}); {2}: check({{}})] in u", u2, free_names={"u"})
    assert f1 == f2
    for _ in range(10):
        env = {"u": random_name(u2, rng, 2)}
        assert evaluate(f1, env) == evaluate(f2, env)


def test_print_parse_roundtrip(u2):
    rng = np.random.default_rng(44)
    corpus = [random_formula(u2, rng, 2) for _ in range(20)]
    corpus += [
        parse("empty = empty", u2),
        parse("forall x in u . x = empty", u2, free_names={"u"}),
        parse("exists x in u . (x = empty | x in u)", u2, free_names={"u"}),
        parse("!(empty in empty) -> empty = empty", u2),
    ]
    for f in corpus:
        text = print_formula(f)
        again = parse(text, u2, free_names=free_variables(f))
        assert again == f, text


def test_quantifier_body_extends_right(u2, a2):
    env = {"u": u2.make_name({u2.empty: a2.atom(1)})}
    f = parse("forall x in u . x = empty & empty in u", u2, free_names=env)
    # the body is the whole conjunction, which pins [[empty in u]] = {1}
    assert isinstance(f, ForallIn) and isinstance(f.body, And)
    assert evaluate(f, env) == a2.atom(1).complement() | a2.atom(1)


def test_witness_via_formula(u2, a2):
    env = {"v": u2.make_name({u2.empty: a2.atom(1), u2.canonical_name([[]]): a2.atom(2)})}
    phi = parse("x = empty", u2, free_names={"x"})
    wit = witness(phi, "x", env["v"], {})
    assert evaluate(phi, {"x": wit}) == a2.atom(1)
    with pytest.raises(FormulaError):
        witness(parse("x = y", u2, free_names={"x", "y"}), "x", env["v"], {})
    with pytest.raises(FormulaError):
        witness(parse("empty = empty", u2), "x", env["v"], {})


def test_free_variables(u2):
    f = parse("forall x in u . (x = y | x in z)", u2, free_names={"u", "y", "z"})
    assert free_variables(f) == {"u", "y", "z"}
