import cmath

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noflab.core_math import (
    FieldElem,
    PrimeModulus,
    bits_to_int,
    char_value,
    derive_seed,
    field_arith,
    gen_prime,
    hamming_distance,
    int_to_bits,
    is_prime,
)

SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 101, 257]


def trial_division_prime(n: int, bound: int = 1 << 16) -> bool:
    """Independent oracle: trial division up to the bound."""
    if n < 2:
        return False
    d = 2
    while d * d <= n and d <= bound:
        if n % d == 0:
            return False
        d += 1
    return True


def test_field_mul_example():
    q = PrimeModulus(7)
    assert int(field_arith("mul", q.element(3), q.element(5))) == 1


def test_field_inv_example():
    q = PrimeModulus(7)
    assert int(field_arith("inv", q.element(3))) == 5


def test_inv_zero_rejected():
    q = PrimeModulus(7)
    with pytest.raises(ZeroDivisionError):
        field_arith("inv", q.element(0))


def test_modulus_mismatch_rejected():
    with pytest.raises(ValueError):
        field_arith("add", PrimeModulus(7).element(1), PrimeModulus(5).element(1))


def test_nonprime_modulus_rejected():
    for bad in (0, 1, 4, 9, 15, 1 << 64):
        with pytest.raises(ValueError):
            PrimeModulus(bad)


@given(st.sampled_from(SMALL_PRIMES), st.data())
def test_inverse_property(q, data):
    a = data.draw(st.integers(1, q - 1))
    qm = PrimeModulus(q)
    assert int(qm.element(a) * qm.element(a).inv()) == 1


@given(st.sampled_from(SMALL_PRIMES), st.data())
def test_field_ring_identities(q, data):
    qm = PrimeModulus(q)
    a = qm.element(data.draw(st.integers(0, q - 1)))
    b = qm.element(data.draw(st.integers(0, q - 1)))
    assert int(a + b) == (int(a) + int(b)) % q
    assert int(a * b) == (int(a) * int(b)) % q
    assert int(a + (-a)) == 0


def test_gen_prime_two_bits():
    for seed in range(10):
        assert gen_prime(2, seed).q in (2, 3)


def test_gen_prime_range_and_oracle():
    for bits in (2, 3, 6, 10, 16, 31):
        for seed in (0, 1, 7, 123456):
            p = gen_prime(bits, seed).q
            assert 1 << (bits - 1) <= p < 1 << bits
            assert trial_division_prime(p) or (p >> 32 and is_prime(p))
            assert is_prime(p)


def test_gen_prime_deterministic():
    assert gen_prime(20, 42).q == gen_prime(20, 42).q


def test_gen_prime_bits_out_of_range():
    with pytest.raises(ValueError):
        gen_prime(1, 0)
    with pytest.raises(ValueError):
        gen_prime(62, 0)


def test_miller_rabin_matches_trial_division():
    for n in range(2, 3000):
        assert is_prime(n) == trial_division_prime(n)


def test_char_trivial():
    assert char_value(7, 0, 5) == pytest.approx(1 + 0j, abs=1e-12)


def test_char_parity():
    assert char_value(2, 1, 1) == pytest.approx(-1 + 0j, abs=1e-12)


def test_char_unit_modulus():
    for q in (3, 5, 17):
        for alpha in range(q):
            for z in range(q):
                assert abs(abs(char_value(q, alpha, z)) - 1) < 1e-12


def test_nontrivial_character_sums_vanish():
    for q in (2, 3, 5, 7, 17):
        for alpha in range(1, q):
            total = sum(char_value(q, alpha, z) for z in range(q))
            assert abs(total) <= 1e-9


def test_char_multiplicative():
    for q in (3, 5, 17):
        for alpha in range(q):
            for a in range(q):
                for b in range(q):
                    lhs = char_value(q, alpha, (a + b) % q)
                    rhs = char_value(q, alpha, a) * char_value(q, alpha, b)
                    assert abs(lhs - rhs) < 1e-9


def test_char_range_checks():
    with pytest.raises(ValueError):
        char_value(5, 5, 0)
    with pytest.raises(ValueError):
        char_value(5, 0, 5)


def test_hamming_examples():
    assert hamming_distance("1010", "0110") == 2
    assert hamming_distance("0110", "1010") == 2
    assert hamming_distance("0000", "1111") == 4
    assert hamming_distance("", "") == 0


@given(st.text(alphabet="01", max_size=40))
def test_hamming_identity(s):
    assert hamming_distance(s, s) == 0


def test_hamming_length_mismatch():
    with pytest.raises(ValueError):
        hamming_distance("01", "011")


def test_bit_string_round_trip():
    for v, w in [(0, 0), (0, 3), (5, 3), (255, 8)]:
        assert bits_to_int(int_to_bits(v, w)) == v
    with pytest.raises(ValueError):
        int_to_bits(4, 2)


def test_derive_seed_spreads():
    seeds = {derive_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(3, 1, 2) == derive_seed(3, 1, 2)
    assert derive_seed(3, 1, 2) != derive_seed(3, 2, 1)
