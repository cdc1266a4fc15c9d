import numpy as np
import pytest
from hypothesis import given, strategies as st

from polarcicc.codec import (
    FrameTranscript, decode_rx, draw_randomness, encode_frames, layer_prior, message_errors,
    randomness_consumed, sc_decode_layer, sc_encode_layer, transmit,
)
from polarcicc.construction import (
    FROZEN, LAYERS, MSG, SEED, SPECIAL, RateInfeasible, build_chaining_plan, build_construction,
)
from polarcicc.field import polar_transform
from polarcicc.dist import CiccInstance
from polarcicc.fixtures import bsc, case_fixture, identity_fixture, layered_design, split_channel

CASES = ["1", "2", "3", "4"]


def plan_for(con, m, backoff=1.0):
    try:
        return build_chaining_plan(con, m=m, backoff=backoff, secrecy=True)
    except RateInfeasible:
        return build_chaining_plan(con, m=m, backoff=backoff, secrecy=False)


@pytest.fixture(scope="module")
def cons():
    return {c: build_construction(case_fixture(c), 64, 0.05, samples=1000, seed=1) for c in CASES}


def replay_chain_equalities(plan, u):
    """Count chained positions whose value differs from their source."""
    bad = 0
    for ln in plan.links:
        dst = u[ln.dst_layer][:, ln.dst_block][:, ln.dst_pos]
        src = u[ln.src_layer][:, ln.src_block][:, ln.src_pos]
        bad += int((dst != src).sum())
    return bad


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("m", [1, 2, 4])
def test_transcript_replay(cons, case, m):
    plan = plan_for(cons[case], m)
    rnd = draw_randomness(plan, 3, range(4))
    u, x = encode_frames(case_fixture(case), plan, rnd)
    assert replay_chain_equalities(plan, u) == 0
    for L in LAYERS:
        k = plan.kinds[L]
        for b in range(m):
            fz = k[b] == FROZEN
            assert np.array_equal(u[L][:, b][:, fz], rnd.frozen[L][:, fz])
            sp = k[b] == SPECIAL
            assert np.array_equal(u[L][:, b][:, sp], rnd.special[L][:, b][:, sp])
            assert np.array_equal(polar_transform(x[L][:, b], plan.q[L]), u[L][:, b])
    sd = plan.kinds["V"] == SEED
    assert np.array_equal(u["V"][:, sd], np.broadcast_to(rnd.seed[:, None], u["V"].shape)[:, sd])


@pytest.mark.parametrize("q", [2, 3])
def test_identity_channel_is_error_free(q):
    inst = identity_fixture(q)
    con = build_construction(inst, 32, 0.05, samples=500, seed=0)
    plan = build_chaining_plan(con, m=2, secrecy=False)
    rnd = draw_randomness(plan, 0, range(20))
    u, x = encode_frames(inst, plan, rnd)
    y1, y2 = transmit(inst, x, rnd.chan)
    for r, y in ((1, y1), (2, y2)):
        du, _ = decode_rx(inst, plan, rnd, u, y, r)
        assert not message_errors(plan, u, du, r).any()
    assert plan.part_count("M1") > 0


def test_frames_are_independent_of_batching(cons):
    plan = plan_for(cons["1"], 2)
    a = draw_randomness(plan, 9, range(6))
    b = draw_randomness(plan, 9, [4])
    assert np.array_equal(a.msg["V"][4], b.msg["V"][0])
    assert np.array_equal(a.chan[4], b.chan[0])
    ua, _ = encode_frames(case_fixture("1"), plan, a)
    ub, _ = encode_frames(case_fixture("1"), plan, b)
    for L in LAYERS:
        assert np.array_equal(ua[L][4], ub[L][0])


def test_randomness_count_matches_roles(cons):
    for c in CASES:
        for m in (1, 3):
            plan = plan_for(cons[c], m)
            assert randomness_consumed(plan) == plan.randomness_count()


def test_message_errors_flags_only_messages(cons):
    plan = plan_for(cons["1"], 2)
    rnd = draw_randomness(plan, 0, range(3))
    u, _ = encode_frames(case_fixture("1"), plan, rnd)
    du = {L: u[L].copy() for L in ("X1", "U", "V")}
    assert not message_errors(plan, u, du, 2).any()
    b, j = np.argwhere(plan.kinds["X1"] == MSG)[0]
    du["X1"][1, b, j] ^= 1
    assert message_errors(plan, u, du, 1).tolist() == [False, True, False]


def test_transcript_round_trip(cons):
    plan = plan_for(cons["2"], 2)
    rnd = draw_randomness(plan, 0, range(2))
    u, x = encode_frames(case_fixture("2"), plan, rnd)
    y1, y2 = transmit(case_fixture("2"), x, rnd.chan)
    t = FrameTranscript(u=u, x=x, y1=y1, y2=y2, frames=np.arange(2), decoded={(1, "X1"): u["X1"]})
    s = FrameTranscript.from_bytes(t.to_bytes())
    assert all(np.array_equal(s.u[L], u[L]) for L in LAYERS)
    assert np.array_equal(s.decoded[(1, "X1")], u["X1"])
    assert np.array_equal(s.y2, y2)


def test_transmit_frequencies():
    ch = split_channel(bsc(0.1), bsc(0.3), bsc(0.2), bsc(0.0))
    inst = CiccInstance(ch, layered_design())
    r = np.random.default_rng(0)
    x = {"X1": np.zeros((1, 1, 40000), dtype=int), "X2": np.ones((1, 1, 40000), dtype=int)}
    y1, y2 = transmit(inst, x, r.random((1, 1, 40000)))
    # Y1 symbol = 2 * (x1 out) + (x2 out)
    assert np.mean(y1 // 2 == 1) == pytest.approx(0.1, abs=0.01)
    assert np.mean(y1 % 2 == 0) == pytest.approx(0.3, abs=0.01)
    assert np.all(y2 % 2 == 1)


@given(seed=st.integers(0, 2**31), n=st.integers(1, 5))
def test_encode_with_everything_known(seed, n):
    r = np.random.default_rng(seed)
    N = 1 << n
    vals = r.integers(0, 3, (2, N))
    prior = r.dirichlet(np.ones(3), size=(2, N))
    u, _ = sc_encode_layer(prior, np.ones(N, bool), vals, r.random((2, N)))
    assert np.array_equal(u, vals)


def test_decode_noiseless_prior():
    x = np.array([[0, 1, 1, 0, 1, 0, 0, 0]])
    u, xh = sc_decode_layer(np.eye(2)[x], np.zeros(8, bool), np.zeros((1, 8), int))
    assert np.array_equal(xh, x)


def test_layer_prior_shapes():
    inst = case_fixture("1")
    p = layer_prior(inst, "X1", (), {}, (3, 8))
    assert p.shape == (3, 8, 2)
    v = {"X1": np.zeros((3, 8), int), "U": np.ones((3, 8), int)}
    p = layer_prior(inst, "V", ("X1", "U"), v)
    np.testing.assert_allclose(p.sum(-1), 1.0)


def test_seed_chain_replay(seed_plan):
    inst, plan = seed_plan
    assert any(ln.dst_layer == "V" for ln in plan.links)
    rnd = draw_randomness(plan, 0, range(10))
    u, x = encode_frames(inst, plan, rnd)
    assert replay_chain_equalities(plan, u) == 0
    r2 = sorted(plan.sets["V"]["R2"])
    assert np.array_equal(u["V"][:, -1][:, r2], rnd.seed[:, r2])
