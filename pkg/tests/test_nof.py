import itertools

import numpy as np
import pytest

from noflab.functions import LiftedFn, Params, make_two_party
from noflab.nof import (
    CallableRule,
    Disj3Target,
    LiftedTarget,
    NofDomain,
    Protocol,
    Transcript,
    Turn,
    as_target,
    build_eq_rand,
    build_ind_two_round,
    build_lift_upper,
    consistent_set,
    estimate_rand_error,
    min_occ_nof_exact,
    occ_two_party,
    row_classes,
    search_one_way_protocol,
    simulate,
    slice_cylinders,
    verify_protocol,
)


def broadcast_z_protocol(params):
    """Player 1 announces z; the last player compares it to the gadget."""
    from noflab.functions import gip_batch_encoded, gip_eval_encoded

    dom = NofDomain((params.n_per_player,) * params.k, params.q)
    bits = max(1, (params.q - 1).bit_length())
    rule = CallableRule(lambda vis, prior, rand: vis.z,
                        lambda xs, z, p, r: z, name="z")
    out = CallableRule(
        lambda vis, tr, rand: int(int(tr, 2) == gip_eval_encoded(params, vis.xs)),
        lambda xs, z, p, r: (p == gip_batch_encoded(params, xs)).astype(np.int64),
        name="z-equals-gadget",
    )
    return Protocol(dom, [Turn(1, bits, rule)], out, name="bcast-z")


def constant_protocol(dom, bit):
    return Protocol(dom, [], CallableRule(
        lambda vis, tr, rand: bit,
        lambda xs, z, p, r: np.full(len(z), bit, dtype=np.int64),
        name=f"const-{bit}"), name=f"const-{bit}")


@pytest.fixture
def eq2_lift():
    p = Params(2, 1, 2)
    return p, LiftedFn(make_two_party("eq", 2), p)


def test_simulate_broadcast_example(eq2_lift):
    params, _ = eq2_lift
    p = broadcast_z_protocol(params)
    tr, _ = p.simulate([0, 1], 0)
    assert tr.bits == "0"
    tr, _ = p.simulate([1, 1], 1)
    assert tr.bits == "1"


def test_simulate_empty_protocol(eq2_lift):
    params, _ = eq2_lift
    dom = NofDomain((2, 2), 2)
    p = constant_protocol(dom, 1)
    tr, out = p.simulate([0, 0], 0)
    assert tr.bits == "" and out == 1


def test_randomized_needs_randomness():
    params = Params(2, 1, 2)
    p = build_eq_rand(params, 2)
    with pytest.raises(ValueError):
        p.simulate([0, 0], 0)
    with pytest.raises(ValueError):
        p.simulate([0, 0], 0, randomness="01")  # wrong length


def test_deterministic_rejects_randomness(eq2_lift):
    params, _ = eq2_lift
    p = broadcast_z_protocol(params)
    with pytest.raises(ValueError):
        p.simulate([0, 0], 0, randomness="0")


def test_module_level_simulate(eq2_lift):
    params, _ = eq2_lift
    p = broadcast_z_protocol(params)
    tr, out = simulate(p, (1, 1, 1))
    assert tr.bits == "1" and out == 1


def test_verify_broadcast_correct(eq2_lift):
    params, lf = eq2_lift
    res = verify_protocol(broadcast_z_protocol(params), lf)
    assert res.correct and res.max_cost == 1 and res.counterexample is None


def test_verify_constant_counterexample(eq2_lift):
    params, lf = eq2_lift
    res = verify_protocol(constant_protocol(lf and LiftedTarget(lf).domain, 0), lf)
    assert not res.correct and res.max_cost == 0
    x1, x2, z = res.counterexample
    assert z == (x1 * x2) % 2  # a yes-instance answered 0


def test_verify_scalar_path_matches_batch(eq2_lift):
    params, lf = eq2_lift
    p = broadcast_z_protocol(params)
    # strip the batch functions to force the per-input path
    slow_rule = CallableRule(p.turns[0].rule.fn, name="z")
    slow_out = CallableRule(p.output_rule.fn, name="out")
    slow = Protocol(p.domain, [Turn(1, 1, slow_rule)], slow_out)
    assert not slow.supports_batch
    assert verify_protocol(slow, lf).correct


def test_occ_examples():
    for q, want in [(2, 1), (3, 2), (5, 3), (17, 5), (101, 7)]:
        assert occ_two_party(make_two_party("eq", q)) == want
    assert occ_two_party(make_two_party("ind", 16)) == 4
    constant = make_two_party("eq", 2)
    from noflab.functions import TwoPartyFn

    assert occ_two_party(TwoPartyFn(np.zeros((4, 4)), "zero")) == 0


def test_row_classes_first_occurrence():
    from noflab.functions import TwoPartyFn

    m = TwoPartyFn(np.array([[0, 1], [0, 1], [1, 1]]), "dup")
    ids, reps = row_classes(m)
    assert list(ids) == [0, 0, 1]
    assert list(reps) == [0, 2]


def test_consistent_set_partitions(eq2_lift):
    params, lf = eq2_lift
    p = broadcast_z_protocol(params)
    zero = consistent_set(p, "0")
    one = consistent_set(p, "1")
    assert zero == {(x1, x2, 0) for x1 in range(2) for x2 in range(2)}
    assert one == {(x1, x2, 1) for x1 in range(2) for x2 in range(2)}
    assert len(zero | one) == p.domain.points
    with pytest.raises(ValueError):
        consistent_set(p, "00")


def test_slice_cylinders_broadcast(eq2_lift):
    params, lf = eq2_lift
    p = broadcast_z_protocol(params)
    ci, verified = slice_cylinders(p, lf, "0", 0)
    assert verified
    assert all(ci.member([x1, x2]) for x1 in range(2) for x2 in range(2))
    ci, verified = slice_cylinders(p, lf, "0", 1)
    assert verified
    assert not any(ci.member([x1, x2]) for x1 in range(2) for x2 in range(2))


def test_slice_cylinders_two_turn():
    params = Params(2, 1, 2)
    lf = LiftedFn(make_two_party("eq", 2), params)
    dom = NofDomain((2, 2), 2)
    r1 = CallableRule(lambda vis, prior, rand: vis.z ^ vis.xs[1], name="z^x2")
    r2 = CallableRule(lambda vis, prior, rand: vis.z & vis.xs[0], name="z&x1")
    out = CallableRule(lambda vis, tr, rand: 0, name="zero")
    p = Protocol(dom, [Turn(1, 1, r1), Turn(2, 1, r2)], out)
    for z in range(2):
        for bits in ("00", "01", "10", "11"):
            ci, verified = slice_cylinders(p, lf, bits, z)
            assert verified


def test_slice_cylinders_requires_one_way(eq2_lift):
    params, lf = eq2_lift
    p = build_ind_two_round(Params(5, 1, 2))
    with pytest.raises(ValueError):
        slice_cylinders(p, LiftedFn(make_two_party("ind", 5), Params(5, 1, 2)), "0000", 0)


def test_visibility_soundness():
    # one-way protocols: block i never depends on x_i
    params = Params(3, 1, 2)
    lf = LiftedFn(make_two_party("eq", 3), params)
    p = build_lift_upper(lf.base, params)
    for x1 in range(3):
        for x2 in range(3):
            for z in range(3):
                base, _ = p.simulate([x1, x2], z)
                for alt in range(3):
                    t, _ = p.simulate([alt, x2], z)
                    assert t.bits == base.bits  # player 1's message ignores x_1


def test_build_lift_upper_examples():
    p3 = Params(3, 1, 2)
    lf3 = LiftedFn(make_two_party("eq", 3), p3)
    proto = build_lift_upper(lf3.base, p3)
    assert proto.cost == 2
    assert verify_protocol(proto, lf3).correct

    p2 = Params(2, 2, 2)
    lf2 = LiftedFn(make_two_party("eq", 2), p2)
    proto = build_lift_upper(lf2.base, p2)
    assert proto.cost == 1
    assert verify_protocol(proto, lf2).correct


def test_build_lift_upper_constant():
    from noflab.functions import TwoPartyFn

    p = Params(3, 1, 2)
    const = TwoPartyFn(np.ones((3, 3)), "one")
    proto = build_lift_upper(const, p)
    assert proto.cost == 0
    assert verify_protocol(proto, LiftedFn(const, p)).correct


def test_min_occ_constant():
    dom = NofDomain((2, 2), 2)
    from noflab.nof import CallableTarget

    t = CallableTarget(dom, lambda xs, z: 1, name="one")
    assert min_occ_nof_exact(t, 2) == 0


def test_min_occ_eq2():
    lf = LiftedFn(make_two_party("eq", 2), Params(2, 1, 2))
    assert min_occ_nof_exact(lf, 4) == 1


def test_min_occ_eq3():
    lf = LiftedFn(make_two_party("eq", 3), Params(3, 1, 2))
    assert min_occ_nof_exact(lf, 4) == 2


def test_min_occ_exceeds_budget():
    lf = LiftedFn(make_two_party("eq", 3), Params(3, 1, 2))
    assert min_occ_nof_exact(lf, 1) is None


def test_searched_protocol_is_correct():
    lf = LiftedFn(make_two_party("eq", 3), Params(3, 1, 2))
    cost, proto = search_one_way_protocol(lf, 2)
    assert cost == 2
    assert verify_protocol(proto, lf).correct
    assert proto.is_one_way
    spec = proto.to_json_dict()
    assert spec["cost"] == 2 and spec["turns"]


def test_min_occ_never_exceeds_two_party_cost():
    for kind, q in [("eq", 2), ("eq", 3), ("ind", 2), ("ind", 3)]:
        params = Params(q, 1, 2)
        lf = LiftedFn(make_two_party(kind, q), params)
        occ = occ_two_party(lf.base)
        got = min_occ_nof_exact(lf, min(occ, 4))
        assert got is not None and 1 <= got <= occ


def test_search_limits():
    lf = LiftedFn(make_two_party("eq", 5), Params(5, 2, 2))
    with pytest.raises(ValueError):
        search_one_way_protocol(lf, 2)  # domain too large
    small = LiftedFn(make_two_party("eq", 2), Params(2, 1, 2))
    with pytest.raises(ValueError):
        search_one_way_protocol(small, 5)  # budget too large


def test_build_eq_rand_one_sided_exhaustive():
    for q in (2, 3, 5):
        params = Params(q, 1, 2)
        proto = build_eq_rand(params, 2)
        B = (q - 1).bit_length()
        for x1 in range(q):
            for x2 in range(q):
                s = (x1 * x2) % q
                for rbits in range(1 << (2 * B)):
                    rand = format(rbits, f"0{2 * B}b")
                    _, out = proto.simulate([x1, x2], s, rand)
                    assert out == 1  # never errs on yes-instances


def test_build_eq_rand_exact_quarter():
    params = Params(5, 1, 2)
    proto = build_eq_rand(params, 2)
    B = 3
    errors = 0
    # gadget value is 2 on (x_1, x_2) = (2, 1); z = 1 is a no-instance
    for rbits in range(1 << (2 * B)):
        rand = format(rbits, f"0{2 * B}b")
        _, out = proto.simulate([2, 1], 1, rand)
        errors += out
    assert errors / (1 << (2 * B)) == 0.25


def test_build_eq_rand_cost():
    assert build_eq_rand(Params(5, 1, 2), 6).cost == 6


def test_estimate_rand_error_yes_is_zero():
    params = Params(5, 1, 2)
    lf = LiftedFn(make_two_party("eq", 5), params)
    proto = build_eq_rand(params, 6)
    rate, _ = estimate_rand_error(proto, lf, 2000, seed=1, instance_filter="yes")
    assert rate == 0.0


def test_estimate_rand_error_no_matches_collision_rate():
    params = Params(5, 1, 2)
    lf = LiftedFn(make_two_party("eq", 5), params)
    proto = build_eq_rand(params, 2)
    rate, se = estimate_rand_error(proto, lf, 20000, seed=3, instance_filter="no")
    assert abs(rate - 0.25) <= 3 * se


def test_estimate_rand_error_validation():
    params = Params(5, 1, 2)
    lf = LiftedFn(make_two_party("eq", 5), params)
    proto = build_eq_rand(params, 2)
    with pytest.raises(ValueError):
        estimate_rand_error(proto, lf, 0, seed=1)
    with pytest.raises(ValueError):
        estimate_rand_error(broadcast_z_protocol(params), lf, 10, seed=1)


def test_estimate_rand_error_deterministic():
    params = Params(5, 1, 2)
    lf = LiftedFn(make_two_party("eq", 5), params)
    proto = build_eq_rand(params, 3)
    a = estimate_rand_error(proto, lf, 5000, seed=9, instance_filter="no")
    b = estimate_rand_error(proto, lf, 5000, seed=9, instance_filter="no")
    assert a == b


def test_build_ind_two_round_cost_and_rounds():
    p = build_ind_two_round(Params(17, 2, 2))
    assert p.cost == 4
    assert p.num_rounds == 2
    assert not p.is_one_way  # the last player opens the conversation


def test_build_ind_two_round_exhaustive_small():
    params = Params(5, 1, 2)
    lf = LiftedFn(make_two_party("ind", 5), params)
    assert verify_protocol(build_ind_two_round(params), lf).correct


def test_two_round_beats_one_round_base_cost():
    params = Params(17, 2, 2)
    occ = occ_two_party(make_two_party("ind", 17))
    assert occ == 5
    assert build_ind_two_round(params).cost == 4 < occ


def test_transcript_blocks():
    t = Transcript("01101", (2, 5))
    assert t.block(0) == "01" and t.block(1) == "101"
    with pytest.raises(ValueError):
        Transcript("01x")
