import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from wfsolve.core import (
    Instance,
    InstanceError,
    InfeasibleSequenceError,
    Sequence,
    SequenceFormatError,
    SplitMix64,
    derive_seed,
    dist,
    evaluate,
    format_instance,
    format_sequence,
    generate_instance,
    max_circular_gaps,
    parse_instance,
    parse_sequence,
    trivial_solution,
    validate,
)

from conftest import EXAMPLE, EXAMPLE_A, EXAMPLE_B


# -- parsing ----------------------------------------------------------------


def test_parse_example():
    inst = parse_instance("5 10\n10 10 7 6 3\n1 1 1 1 1\n")
    assert inst == Instance(n=5, T=10, w=(10, 10, 7, 6, 3), f=(1, 1, 1, 1, 1))


def test_parse_smallest():
    assert parse_instance("1 1\n1\n1") == Instance(1, 1, (1,), (1,))


def test_parse_tolerates_comments_and_blank_lines():
    text = "# header\n\n  5   10 \n10 10 7 6 3  # weights\n\n1 1 1 1 1\n"
    assert parse_instance(text) == EXAMPLE


@pytest.mark.parametrize(
    "text, reason",
    [
        ("2 1\n1 1\n1 1\n", "horizon"),
        ("5 10\n10 10 7 6\n1 1 1 1 1\n", "count"),
        ("2 4\n1 2\n1\n", "count"),
        ("2 4\n1 0\n1 1\n", "non-positive"),
        ("2 4\n1 2\n1 -1\n", "non-positive"),
        ("2\n1 2\n1 1\n", "header"),
        ("2 x\n1 2\n1 1\n", "token"),
        ("2 4\n1 2\n", "lines"),
        ("0 4\n1\n1\n", "header"),
    ],
)
def test_parse_errors_are_distinct(text, reason):
    with pytest.raises(InstanceError) as exc:
        parse_instance(text)
    assert exc.value.reason == reason


def test_format_parse_roundtrip():
    assert parse_instance(format_instance(EXAMPLE)) == EXAMPLE


def test_sequence_file_roundtrip():
    assert parse_sequence(format_sequence(EXAMPLE_B)) == EXAMPLE_B


@pytest.mark.parametrize("text", ["8\n1 2 3\n", "3\n", "x\n1 2 3\n", "3\n1 2 a\n", ""])
def test_sequence_parse_errors(text):
    with pytest.raises(SequenceFormatError):
        parse_sequence(text)


# -- generation -------------------------------------------------------------


def test_generate_example_shape():
    inst = generate_instance(5, 10, 7)
    assert inst.n == 5 and inst.T == 10
    assert all(1 <= w <= 10 for w in inst.w)
    assert inst.f == (1,) * 5


@pytest.mark.parametrize("seed", range(20))
def test_generate_single_symbol(seed):
    inst = generate_instance(1, 2, seed)
    assert inst.w[0] in (1, 2) and inst.f == (1,)


def test_generate_deterministic():
    assert generate_instance(5, 10, 42) == generate_instance(5, 10, 42)


def test_generate_rejects_short_horizon():
    with pytest.raises(InstanceError):
        generate_instance(5, 4, 1)


def test_splitmix_reference_values():
    # first outputs for seed 0 published with the reference implementation
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_weights_cover_interval():
    seen = set()
    for s in range(400):
        seen.update(generate_instance(3, 3, derive_seed(5, s)).w)
    assert seen == set(range(1, 7))


def test_derive_seed_distinct():
    seeds = {derive_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000


# -- distance and evaluation -----------------------------------------------


@pytest.mark.parametrize("t, t2, L, expected", [(3, 1, 8, 2), (1, 3, 8, 6), (4, 4, 8, 8), (1, 8, 8, 1)])
def test_dist_examples(t, t2, L, expected):
    assert dist(t, t2, L) == expected


@pytest.mark.parametrize("t, t2, L", [(0, 1, 3), (1, 4, 3), (2, 1, 0)])
def test_dist_rejects_out_of_range(t, t2, L):
    with pytest.raises(ValueError):
        dist(t, t2, L)


def test_example_a():
    ev = evaluate(EXAMPLE, EXAMPLE_A)
    assert ev.D == (5, 5, 5, 5, 5)
    assert ev.objective == 50
    assert ev.binding == [1, 2]


def test_example_b():
    ev = evaluate(EXAMPLE, EXAMPLE_B)
    assert ev.objective == 48
    assert ev.products[3] == 6 * 8
    assert ev.binding == [4]


def test_single_symbol_repeated():
    ev = evaluate(Instance(1, 3, (5,), (1,)), Sequence((1, 1, 1)))
    assert ev.D == (1,) and ev.objective == 5


def test_evaluate_rejects_infeasible():
    with pytest.raises(InfeasibleSequenceError) as exc:
        evaluate(EXAMPLE, Sequence((1,)))
    assert exc.value.violations


def test_validate_ok():
    assert validate(EXAMPLE, EXAMPLE_B) == []


def test_validate_missing_symbols():
    v = validate(EXAMPLE, Sequence((1,)))
    assert len(v) == 4
    assert all(f"a{i}" in " ".join(v) for i in range(2, 6))


def test_validate_too_long():
    v = validate(EXAMPLE, Sequence((1, 2, 3, 4, 5, 1, 2, 3, 4, 5, 1)))
    assert len(v) == 1 and "11" in v[0]


def test_validate_symbol_range():
    assert validate(EXAMPLE, Sequence((1, 2, 3, 4, 6)))


def test_partial_scoring_allows_missing_symbols():
    assert validate(EXAMPLE, Sequence((1, 2)), partial=True) == []
    ev = evaluate(EXAMPLE, Sequence((1, 2)), partial=True)
    assert ev.objective == 20


def test_trivial_solution_example():
    seq = trivial_solution(EXAMPLE)
    assert seq.symbols == (1, 2, 3, 4, 5)
    assert evaluate(EXAMPLE, seq).objective == 50


def test_trivial_solution_repeats():
    assert trivial_solution(Instance(2, 5, (1, 1), (2, 1))).symbols == (1, 1, 2)


# -- properties ------------------------------------------------------------


@st.composite
def instance_and_sequence(draw, max_n=5, max_len=12):
    n = draw(st.integers(1, max_n))
    w = draw(st.lists(st.integers(1, 12), min_size=n, max_size=n))
    f = draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    extra = draw(st.integers(0, 4))
    body = [i + 1 for i in range(n) for _ in range(f[i])]
    body += draw(st.lists(st.integers(1, n), min_size=extra, max_size=extra))
    body = draw(st.permutations(body))
    assume(len(body) <= max_len + 4)
    inst = Instance(n=n, T=len(body) + draw(st.integers(0, 3)), w=tuple(w), f=tuple(f))
    return inst, Sequence(tuple(body))


@given(instance_and_sequence(), st.integers(0, 30))
def test_rotation_invariance(pair, r):
    inst, seq = pair
    assert evaluate(inst, seq.rotate(r)).objective == evaluate(inst, seq).objective


@given(instance_and_sequence(), st.data())
def test_relabel_invariance(pair, data):
    inst, seq = pair
    tied = [(i, j) for i in range(inst.n) for j in range(i + 1, inst.n)
            if inst.w[i] == inst.w[j] and inst.f[i] == inst.f[j]]
    assume(tied)
    i, j = data.draw(st.sampled_from(tied))
    swap = {i + 1: j + 1, j + 1: i + 1}
    relabelled = Sequence(tuple(swap.get(s, s) for s in seq.symbols))
    assert evaluate(inst, relabelled).objective == evaluate(inst, seq).objective


@given(st.integers(1, 15), st.data())
def test_wrap_identity(length, data):
    t = data.draw(st.integers(1, length))
    symbols = [2] * length
    symbols[t - 1] = 1
    assert max_circular_gaps(symbols, 2)[0] == length


@given(st.integers(1, 30), st.data())
def test_dist_totality(L, data):
    t = data.draw(st.integers(1, L))
    t2 = data.draw(st.integers(1, L))
    assert 1 <= dist(t, t2, L) <= L
    if t != t2:
        assert dist(t, t2, L) + dist(t2, t, L) == L


@given(instance_and_sequence())
def test_objective_is_a_weight_multiple(pair):
    inst, seq = pair
    ev = evaluate(inst, seq)
    assert ev.objective == max(ev.products)
    assert any(ev.objective == w * d for w, d in zip(inst.w, ev.D))
    assert all(1 <= d <= seq.length for d in ev.D)


@given(instance_and_sequence())
def test_trivial_solution_always_feasible(pair):
    inst, _ = pair
    seq = trivial_solution(inst)
    assert validate(inst, seq) == []
    assert seq.length == inst.min_length
