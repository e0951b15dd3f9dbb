import itertools
import math

import numpy as np
import pytest

from noflab.functions import (
    LiftedFn,
    Params,
    cor35_params,
    disj3_eval,
    disj3_eval_masks,
    exactly_n_eval,
    g_mod2_eval,
    gip_batch_encoded,
    gip_eval,
    gip_eval_encoded,
    gip_value_distribution,
    ind_index,
    lifted_eval,
    make_two_party,
    two_party_from_csv,
)


def brute_distribution(params):
    """Oracle: enumerate every input tuple and tally gadget values."""
    counts = [0] * params.q
    coords = list(itertools.product(range(params.q), repeat=params.r))
    for combo in itertools.product(coords, repeat=params.k):
        counts[gip_eval(params, combo)] += 1
    return counts


def test_gip_examples():
    assert gip_eval(Params(3, 2, 2), [(1, 2), (2, 2)]) == 0
    assert gip_eval(Params(3, 2, 2), [(0, 0), (0, 0)]) == 0
    assert gip_eval(Params(5, 1, 3), [(2,), (3,), (4,)]) == 4


def test_gip_arity_checks():
    with pytest.raises(ValueError):
        gip_eval(Params(3, 2, 2), [(1, 2)])
    with pytest.raises(ValueError):
        gip_eval(Params(3, 2, 2), [(1, 2, 0), (2, 2)])
    with pytest.raises(ValueError):
        gip_eval(Params(3, 2, 2), [(1, 3), (2, 2)])


def test_gip_encoded_round_trip():
    p = Params(5, 3, 2)
    xs = [(1, 4, 2), (0, 3, 3)]
    enc = [p.encode_input(v) for v in xs]
    assert [p.decode_input(e) for e in enc] == [tuple(v) for v in xs]
    assert gip_eval_encoded(p, enc) == gip_eval(p, xs)
    batch = gip_batch_encoded(p, [np.array([enc[0]]), np.array([enc[1]])])
    assert int(batch[0]) == gip_eval(p, xs)


def test_distribution_examples():
    assert gip_value_distribution(Params(2, 1, 2)) == [3, 1]
    assert gip_value_distribution(Params(3, 1, 2)) == [5, 2, 2]
    assert gip_value_distribution(Params(3, 2, 2)) == [33, 24, 24]


def test_distribution_matches_enumeration():
    for q, r, k in [(2, 1, 2), (2, 2, 2), (3, 1, 2), (3, 2, 2), (2, 1, 3),
                    (3, 1, 3), (5, 1, 2), (2, 3, 2)]:
        p = Params(q, r, k)
        counts = gip_value_distribution(p)
        assert counts == brute_distribution(p)
        assert sum(counts) == q ** (r * k)


def test_gip_affine_in_each_player():
    rng = np.random.default_rng(11)
    p = Params(7, 3, 3)
    for _ in range(50):
        xs = [tuple(int(v) for v in rng.integers(0, p.q, p.r)) for _ in range(p.k)]
        i = int(rng.integers(0, p.k))
        u = tuple(int(v) for v in rng.integers(0, p.q, p.r))
        v = tuple(int(v) for v in rng.integers(0, p.q, p.r))
        uv = tuple((a + b) % p.q for a, b in zip(u, v))
        zero = (0,) * p.r

        def at(vec):
            sub = list(xs)
            sub[i] = vec
            return gip_eval(p, sub)

        assert (at(uv) + at(zero)) % p.q == (at(u) + at(v)) % p.q


def test_theorem_regime_flag():
    assert Params(5, 8, 2).theorem_regime
    assert not Params(5, 7, 2).theorem_regime
    assert not Params(5, 8, 1).theorem_regime


def test_eq_matrix():
    eq = make_two_party("eq", 3)
    assert (eq.matrix == np.eye(3, dtype=np.uint8)).all()


def test_disj2_example():
    d = make_two_party("disj2", 4)
    assert d.entry(0b01, 0b10) == 1
    assert d.entry(0b01, 0b01) == 0
    with pytest.raises(ValueError):
        make_two_party("disj2", 6)


def test_file_matrix(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("0,1,0\n1,0,1\n")
    f = two_party_from_csv(path)
    assert f.rows == 2 and f.cols == 3 and not f.is_square
    with pytest.raises(ValueError):
        LiftedFn(f, Params(2, 1, 2))  # lifting needs a q x q matrix


def test_file_matrix_rejections(tmp_path):
    ragged = tmp_path / "r.csv"
    ragged.write_text("0,1\n1\n")
    with pytest.raises(ValueError):
        two_party_from_csv(ragged)
    nonbit = tmp_path / "n.csv"
    nonbit.write_text("0,2\n1,0\n")
    with pytest.raises(ValueError):
        two_party_from_csv(nonbit)


def test_ind_index_examples():
    assert ind_index(17, 6) == 1
    assert ind_index(17, 31) == 2
    assert ind_index(16, 0) == 0
    with pytest.raises(ValueError):
        ind_index(17, 32)


def test_ind_distinct_rows_match_hashing():
    for q in (5, 16, 17, 101):
        f = make_two_party("ind", q)
        direct = {f.matrix[z].tobytes() for z in range(q)}
        from noflab.nof import row_classes

        _, reps = row_classes(f)
        assert len(direct) == len(reps)


def test_lifted_eval_examples():
    p = Params(3, 2, 2)
    lf = LiftedFn(make_two_party("eq", 3), p)
    xs = [(1, 2), (2, 2)]
    assert lifted_eval(lf, xs, 0) == 1
    assert lifted_eval(lf, xs, 1) == 0
    p17 = Params(17, 1, 2)
    lf17 = LiftedFn(make_two_party("ind", 17), p17)
    with pytest.raises(ValueError):
        lifted_eval(lf17, [(0,), (0,)], 18)


def test_lifted_eq_iff_gadget_matches():
    p = Params(3, 2, 2)
    lf = LiftedFn(make_two_party("eq", 3), p)
    for x1 in itertools.product(range(3), repeat=2):
        for x2 in itertools.product(range(3), repeat=2):
            g = gip_eval(p, [x1, x2])
            for z in range(3):
                assert lf.eval([x1, x2], z) == int(z == g)


def test_disj3_examples():
    assert disj3_eval("1010", "0110", "0100") == 1
    assert disj3_eval("1010", "0110", "0010") == 0
    assert disj3_eval("1010", "0110", "0000") == 1
    with pytest.raises(ValueError):
        disj3_eval("10", "100", "100")


def test_disj3_equals_two_party_on_intersection():
    for n in range(1, 9):
        size = 1 << n
        d2 = make_two_party("disj2", size)
        masks = np.arange(size, dtype=np.int64)
        x, y, z = np.meshgrid(masks, masks, masks, indexing="ij")
        direct = ((x & y & z) == 0).astype(np.uint8)
        via_matrix = d2.matrix[z.ravel(), (x & y).ravel()].reshape(direct.shape)
        assert (direct == via_matrix).all()


def test_g_mod2_examples():
    p = Params(5, 1, 2)
    assert g_mod2_eval(p, [(3,), (4,)]) == 0
    assert g_mod2_eval(p, [(0,), (0,)]) == 0
    assert g_mod2_eval(p, [(2,), (3,)]) == 1


def test_cor35_examples():
    p = cor35_params(48, 2, seed=0)
    assert p.r == 8
    assert p.q.bit_length() == 6
    assert p.r * p.q.bit_length() == 48

    p = cor35_params(32, 1, seed=0)
    assert p.r == 4 and p.q.bit_length() == 8

    with pytest.raises(ValueError):
        cor35_params(48, 5, seed=0)


def test_cor35_rounds_down_with_warning():
    with pytest.warns(UserWarning, match="rounded down"):
        p = cor35_params(50, 2, seed=0)
    assert p.r * p.q.bit_length() == 48


def test_exactly_n_demo():
    hits = 0
    for x in range(6):
        for y in range(6):
            for z in range(6):
                got = exactly_n_eval(x, y, z, target=7, size=6)
                assert got == int(x + y + z == 7)
                hits += got
    assert hits > 0
