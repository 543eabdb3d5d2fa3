import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from mpcbench.field import (
    DecodeError, FieldError, KNOWN_IRREDUCIBLES, Poly, binary_field, decode_with_errors,
    field_arith, field_from_name, gf2_is_irreducible, interpolate_at, is_prime,
    lagrange_interpolate, mat_det, mat_inv, mat_mul, mat_identity, mat_rank, prime_field,
    robust_interpolate, solve_linear,
)


def test_prime_inverse_and_division():
    F = prime_field(7)
    assert F.inv(3) == 5
    assert F.div(6, 3) == 2
    with pytest.raises(ZeroDivisionError):
        F.inv(0)


def test_every_nonzero_element_has_an_inverse():
    for p in (2, 3, 5, 7, 11, 13):
        F = prime_field(p)
        for a in range(1, p):
            assert F.mul(a, F.inv(a)) == 1


def test_binary_field_reduction():
    F = binary_field(8)
    assert F.mul(2, 0x80) == 0x1D
    for a in range(1, 256, 7):
        assert F.mul(a, F.inv(a)) == 1


def test_known_irreducibles_are_irreducible():
    for k, m in KNOWN_IRREDUCIBLES.items():
        assert gf2_is_irreducible(m), k
    assert not gf2_is_irreducible(0b101)   # x^2 + 1 = (x + 1)^2


def test_irreducible_test_against_brute_force_degree_4():
    def brute(m):
        for d in range(2, 1 << 4):
            # trial division by every polynomial of degree 1..3
            a, b = m, d
            while a.bit_length() >= b.bit_length():
                a ^= b << (a.bit_length() - b.bit_length())
            if a == 0:
                return False
        return True
    for m in range(16, 32):
        assert gf2_is_irreducible(m) == brute(m), bin(m)


def test_primality():
    primes = [p for p in range(2, 200) if all(p % d for d in range(2, p))]
    assert [p for p in range(2, 200) if is_prime(p)] == primes
    assert is_prime(2 ** 61 - 1)


def test_field_names():
    assert field_from_name("GF(7)").order == 7
    assert field_from_name("2^8").order == 256
    with pytest.raises(FieldError):
        field_from_name("3^2")


def test_scalar_wrapper():
    F = prime_field(7)
    a, b = F(3), F(5)
    assert int(field_arith("add", a, b)) == 1
    assert int(field_arith("inv", a)) == 5
    with pytest.raises(FieldError):
        field_arith("add", a, prime_field(5)(1))


def test_poly_evaluation_example():
    F = prime_field(7)
    p = Poly(F, [5, 2])
    assert [p(x) for x in (1, 2, 3)] == [0, 2, 4]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=6), st.lists(st.integers(0, 12), min_size=1, max_size=6))
def test_poly_divmod_identity(a, b):
    F = prime_field(13)
    A, B = Poly(F, a), Poly(F, b)
    if B.degree < 0:
        return
    q, r = A.divmod(B)
    assert q * B + r == A
    assert r.degree < B.degree


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=5), st.integers(0, 10))
def test_interpolation_recovers_polynomial(coeffs, at):
    F = prime_field(11)
    p = Poly(F, coeffs)
    pts = [(x, p(x)) for x in range(1, len(coeffs) + 1)]
    assert lagrange_interpolate(F, pts) == p
    assert interpolate_at(F, pts, at) == p(at)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_berlekamp_welch_corrects_up_to_budget(seed):
    rng = random.Random(seed)
    F = prime_field(13)
    t, n = rng.randint(0, 3), rng.randint(4, 12)
    e = (n - t - 1) // 2
    if e < 0:
        return
    p = Poly(F, [rng.randrange(13) for _ in range(t + 1)])
    pts = [(x, p(x)) for x in range(1, n + 1)]
    for k in rng.sample(range(n), e):
        x, y = pts[k]
        pts[k] = (x, (y + rng.randrange(1, 13)) % 13)
    assert decode_with_errors(F, pts, t, e) == p


def test_decoding_example_and_failure():
    F = prime_field(7)
    p = Poly(F, [5, 1])
    pts = [(x, p(x)) for x in range(1, 5)]
    pts[2] = (3, 0)
    assert robust_interpolate(F, pts, 1) == 5
    pts[1] = (2, 0)
    with pytest.raises(FieldError):
        decode_with_errors(F, pts, 1, 2)
    with pytest.raises(DecodeError):
        decode_with_errors(F, [(1, 1), (2, 2), (3, 4)], 1, 0)


def test_linear_algebra_against_brute_force():
    F = prime_field(5)
    rng = random.Random(3)
    for _ in range(40):
        A = [[rng.randrange(5) for _ in range(3)] for _ in range(3)]
        det = mat_det(F, A)
        # Leibniz expansion
        ref = 0
        for perm in itertools.permutations(range(3)):
            sign = (-1) ** sum(1 for i in range(3) for j in range(i) if perm[j] > perm[i])
            term = sign
            for i in range(3):
                term *= A[i][perm[i]]
            ref += term
        assert det == ref % 5
        assert (mat_rank(F, A) == 3) == (det != 0)
        if det:
            assert mat_mul(F, A, mat_inv(F, A)) == mat_identity(3)
            b = [rng.randrange(5) for _ in range(3)]
            x = solve_linear(F, A, b)
            assert [F.dot(row, x) for row in A] == b
