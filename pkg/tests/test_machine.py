from fractions import Fraction

import pytest

from ppcf.machine import (
    CountEstimate, State, enumerate_paths, estimate_conditional_count,
    init_state, run, sample, split_seed, state_type,
)
from ppcf.progen import gen_corpus
from ppcf.syntax import NAT, App, Mark, make_mq, num, parse_term


def enum(src, **kw):
    return enumerate_paths(init_state(parse_term(src)), **kw)


def test_numeral_zero():
    res = enum("0")
    assert len(res.paths) == 1
    assert res.paths[0].choices == ""
    assert res.paths[0].weight == 1
    assert res.converged_mass == 1
    assert res.open_mass == res.rejected_mass == res.diverged_mass == 0


def test_nonzero_numeral_rejects():
    res = enum("succ 0")
    assert res.paths == [] and res.rejected_mass == 1


def test_pred_of_succ():
    res = enum("pred (succ 0)")
    assert res.converged_mass == 1
    # predecessor on zero stays at zero
    assert enum("pred 0").converged_mass == 1


def test_dice_splits_mass():
    res = enum("dice(1/3)")
    assert res.converged_mass == Fraction(1, 3)
    assert res.rejected_mass == Fraction(2, 3)
    assert [p.choices for p in res.paths] == ["0"]


def test_loop_detected_as_divergent():
    res = enum("fix (\\x:nat. x)")
    assert res.paths == []
    assert res.diverged_mass == 1
    assert res.open_mass == 0


def test_letpair_exact_masses():
    src = """
        let x = dice(1/3) in
        ifz x then mark[a] 0
        else ifz mark[b] dice(2/5) then 0 else succ x
    """
    res = enum(src)
    assert res.converged_mass == Fraction(3, 5)
    assert res.rejected_mass == Fraction(2, 5)
    assert res.open_mass == 0
    by_choices = {p.choices: p for p in res.paths}
    assert by_choices["0"].weight == Fraction(1, 3)
    assert by_choices["0"].labels == {"a": 1}
    assert by_choices["10"].weight == Fraction(4, 15)
    assert by_choices["10"].labels == {"b": 1}


def test_paths_in_dfs_order():
    res = enum("let x = dice(1/2) in let y = dice(1/2) in ifz x then 0 else y")
    assert [p.choices for p in res.paths] == ["00", "01", "10"]


def test_zero_rate_branches_pruned():
    # dice(1) never produces the 1 branch, dice(0) never the 0 branch
    res = enum("dice(1)")
    assert [p.choices for p in res.paths] == ["0"]
    assert res.converged_mass == 1
    res = enum("ifz dice(0) then fix (\\x:nat. x) else 0")
    assert res.converged_mass == 1
    assert [p.choices for p in res.paths] == ["1"]


def test_mass_partition_on_generated_corpus():
    for t in gen_corpus(40, 321):
        res = enumerate_paths(init_state(t), max_steps=400, max_choices=8)
        total = (res.converged_mass + res.open_mass
                 + res.rejected_mass + res.diverged_mass)
        assert total == 1


def test_run_agrees_with_enumeration():
    for t in gen_corpus(25, 99):
        state = init_state(t)
        res = enumerate_paths(state, max_steps=1000, max_choices=10)
        for p in res.paths[:8]:
            rec = run(state, p.choices)
            assert rec is not None
            assert rec.weight == p.weight
            assert rec.labels == p.labels
            assert rec.steps == p.steps
            # a true prefix or an extension of an accepted sequence rejects
            assert run(state, p.choices + "0") is None
            if p.choices:
                assert run(state, p.choices[:-1]) is None


def test_run_is_deterministic():
    state = init_state(parse_term("let x = dice(1/2) in ifz x then 0 else 1"))
    a = run(state, "0")
    b = run(state, "0")
    assert a == b and a is not None


def test_run_choice_list_form():
    state = init_state(parse_term("dice(1/2)"))
    assert run(state, [0]) == run(state, "0")


def test_states_stay_at_observation_type():
    seen = []

    def watch(focus, stack):
        frames = []
        while stack is not None:
            f, stack = stack
            frames.append(f)
        seen.append(state_type(State(focus, tuple(frames))))

    state = init_state(App(make_mq(Fraction(1, 4)), num(0)))
    rec = run(state, "1", on_state=watch)
    assert rec is not None
    assert seen and all(ty == NAT for ty in seen)


def test_sample_reproducible():
    state = init_state(parse_term("let x = dice(1/2) in ifz x then 0 else 1"))
    a = sample(state, seed=11)
    b = sample(state, seed=11)
    assert a == b
    assert a.value in (0, 1)


def test_sample_frequency_matches_rate():
    state = init_state(parse_term("dice(3/10)"))
    hits = sum(sample(state, split_seed(8, i)).converged
               for i in range(4000))
    # binomial(4000, 0.3): five sigma is about 145
    assert abs(hits - 1200) < 150


def test_sample_divergent_run_cut():
    rec = sample(init_state(parse_term("fix (\\x:nat. x)")), seed=1,
                 max_steps=100)
    assert not rec.converged and rec.value is None


def test_split_seed_distinct():
    seeds = {split_seed(7, i) for i in range(10000)}
    assert len(seeds) == 10000
    assert seeds != {split_seed(8, i) for i in range(10000)}


def test_conditional_count_estimate():
    t = App(make_mq(Fraction(1, 4)), Mark(num(0), "t"))
    est = estimate_conditional_count(t, "t", 4000, max_steps=2000, seed=5)
    assert isinstance(est, CountEstimate)
    assert est.n_converged == 4000          # q = 1/4 always converges
    assert est.p_conv == 1.0
    assert abs(est.mean - 3.0) <= 3 * est.stderr
    again = estimate_conditional_count(t, "t", 4000, max_steps=2000, seed=5)
    assert again.mean == est.mean and again.stderr == est.stderr


def test_estimate_requires_samples():
    with pytest.raises(Exception):
        estimate_conditional_count(num(0), "t", 0)
