from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rasill.core import (
    Add, CLog, Const, Constraint, IChoice, IVar, Mul, One, Sub, TVar, TypeDef, clog, eval_pot, instantiate,
    show_pot, type_equal, unfold,
)
from rasill.errors import DomainViolation, UnboundIndexVar, UnknownType
from rasill.parser import parse_pot, parse_type
from rasill.typechecker import domain_samples


def brute_clog(n: int) -> int:
    # smallest k with 2^k >= n + 1
    k = 0
    while (1 << k) < n + 1:
        k += 1
    return k


def test_clog_matches_brute_force_up_to_a_million():
    k, bound = 0, 1
    for n in range(10**6 + 1):
        while bound < n + 1:
            k, bound = k + 1, bound * 2
        assert clog(n) == k
    assert all(clog(n) == brute_clog(n) for n in (0, 1, 2, 3, 7, 8, 1023, 1024, 10**6))


def test_eval_pot_examples():
    assert eval_pot(CLog(Const(0))) == 0
    ann = Add(Mul(Const(2), CLog(IVar("n"))), Const(2))
    assert eval_pot(ann, {"n": 5}) == 8
    assert eval_pot(CLog(Const(8))) == 4


def test_monus_truncates_at_zero():
    assert eval_pot(Sub(Const(2), Const(5))) == 0
    assert eval_pot(Sub(IVar("n"), Const(1)), {"n": 3}) == 2


def test_unbound_index_var():
    with pytest.raises(UnboundIndexVar):
        eval_pot(IVar("n"), {})


def test_negative_constant_rejected():
    with pytest.raises(ValueError):
        Const(-1)


@given(st.integers(min_value=1, max_value=10**9))
def test_clog_doubling_identity(n):
    assert clog(2 * n) == clog(n) + 1


@given(st.integers(min_value=0, max_value=10**9))
def test_clog_odd_identity(n):
    assert clog(2 * n + 1) == clog(n) + 1


@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=0, max_value=10**6))
def test_clog_monotone(a, b):
    lo, hi = sorted((a, b))
    assert clog(lo) <= clog(hi)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_pot_roundtrip_through_text(a, b, n):
    e = Add(Mul(Const(a), CLog(IVar("n"))), Sub(Const(b), IVar("n")))
    again = parse_pot(show_pot(e))
    assert eval_pot(again, {"n": n}) == eval_pot(e, {"n": n})


def test_unfold_counter_and_bits(corpus):
    sig = corpus("counter")
    t = unfold(TVar("ctr", (Const(0),)), sig)
    assert t.labels() == ["inc", "val"]
    inc_pot, inc_cont = t.branch("inc")
    assert eval_pot(inc_pot) == 1
    assert type_equal(inc_cont, TVar("ctr", (Const(1),)), sig)
    assert eval_pot(t.branch("val")[0]) == 2
    bits = unfold(TVar("bits", ()), sig)
    assert isinstance(bits, IChoice) and bits.labels() == ["zero", "one", "dollar"]
    assert unfold(One(Const(0)), sig) == One(Const(0))


def test_unfold_errors(corpus):
    sig = corpus("counter")
    with pytest.raises(UnknownType):
        unfold(TVar("nope", ()), sig)
    bounded = TypeDef("pos", ("n",), (Constraint(IVar("n"), ">=", Const(1)),), One(Const(0)))
    sig2 = type(sig)({**sig.type_defs, "pos": bounded}, sig.proc_defs)
    with pytest.raises(DomainViolation):
        unfold(TVar("pos", (Const(0),)), sig2)


def test_contractiveness():
    with pytest.raises(ValueError):
        TypeDef("loop", (), (), TVar("loop", ()))


def test_type_equal_examples(corpus):
    sig = corpus("counter")
    one = TVar("ctr", (Const(1),))
    assert type_equal(one, unfold(one, sig), sig)
    assert not type_equal(TVar("bits", ()), TVar("ctr", (Const(0),)), sig)
    both = corpus("stack").merged(corpus("queue"))
    assert not type_equal(TVar("stack", ()), TVar("queue", (Const(0),)), both)
    assert type_equal(parse_type("1^0"), One(Const(0)), sig)


@pytest.mark.parametrize("name", ["counter", "stack", "queue", "fqueue", "list", "map", "fold"])
def test_every_corpus_type_equals_its_unfolding(corpus, name):
    sig = corpus(name)
    for td in sig.type_defs.values():
        for env in domain_samples(td, 64):
            t = TVar(td.name, tuple(Const(env[p]) for p in td.index_params))
            assert type_equal(t, unfold(t, sig), sig)
            assert type_equal(unfold(t, sig), instantiate(td.body, env), sig)
