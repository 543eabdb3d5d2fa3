"""Finite fields, polynomials, interpolation and error-corrected decoding.

Protocol code works on plain ints (canonical residues) through a Field
object; FieldElement is a thin immutable wrapper for callers that want
operator syntax and mixed-field checks.
"""

from dataclasses import dataclass
from functools import lru_cache

MAX_PRIME = 2 ** 61

# Irreducible polynomials for the word-sized binary fields.
KNOWN_IRREDUCIBLES = {
    8: 0x11D,                      # x^8+x^4+x^3+x^2+1
    16: (1 << 16) | 0x100B,        # x^16+x^12+x^3+x+1
    32: (1 << 32) | (1 << 22) | 0x7,  # x^32+x^22+x^2+x+1
    64: (1 << 64) | 0x1B,          # x^64+x^4+x^3+x+1
}


class FieldError(ValueError):
    pass


class DecodeError(FieldError):
    pass


def is_prime(n):
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# -- GF(2)[x] helpers on int bitmasks --------------------------------------

def clmul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def gf2_mod(a, m):
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def gf2_gcd(a, b):
    while b:
        a, b = b, gf2_mod(a, b)
    return a


def gf2_is_irreducible(m):
    """Rabin's irreducibility test for a polynomial over GF(2)."""
    k = m.bit_length() - 1
    if k < 1:
        return False
    if k == 1:
        return True

    def x_pow_2i(i):
        r = 2
        for _ in range(i):
            r = gf2_mod(clmul(r, r), m)
        return r

    if x_pow_2i(k) != 2:
        return False
    for q in _prime_factors(k):
        h = x_pow_2i(k // q) ^ 2
        if gf2_gcd(m, h) != 1:
            return False
    return True


def _prime_factors(n):
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


# -- fields ----------------------------------------------------------------

@dataclass(frozen=True)
class FieldSpec:
    kind: str      # "prime" or "binary"
    modulus: int   # prime p, or irreducible bitmask for GF(2^k)
    order: int


class Field:
    """Arithmetic on canonical int residues of one finite field."""

    def __init__(self, spec):
        if spec.order <= 1:
            raise FieldError("field order must exceed 1")
        if spec.kind == "prime":
            if spec.modulus != spec.order or not is_prime(spec.modulus):
                raise FieldError(f"{spec.modulus} is not prime")
            if spec.modulus > MAX_PRIME:
                raise FieldError("prime fields above 2^61 are not supported")
        elif spec.kind == "binary":
            k = spec.modulus.bit_length() - 1
            if spec.order != 1 << k:
                raise FieldError("order does not match modulus degree")
            if KNOWN_IRREDUCIBLES.get(k) != spec.modulus and not gf2_is_irreducible(spec.modulus):
                raise FieldError(f"{spec.modulus:#x} is not irreducible over GF(2)")
        else:
            raise FieldError(f"unknown field kind {spec.kind!r}")
        self.spec = spec
        self.kind = spec.kind
        self.order = spec.order
        self.modulus = spec.modulus
        self.bits = (spec.order - 1).bit_length()
        self.char = spec.modulus if spec.kind == "prime" else 2
        self._exp = self._log = None
        if spec.kind == "binary" and self.bits <= 16:
            self._build_tables()

    def __repr__(self):
        if self.kind == "prime":
            return f"GF({self.order})"
        return f"GF(2^{self.bits}, {self.modulus:#x})"

    def __eq__(self, other):
        return isinstance(other, Field) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    def _build_tables(self):
        # find a generator of the multiplicative group, then tabulate
        q = self.order - 1
        factors = _prime_factors(q)
        for g in range(2, self.order):
            if all(self._slow_pow(g, q // f) != 1 for f in factors):
                break
        exp = [0] * (2 * q)
        log = [0] * self.order
        x = 1
        for i in range(q):
            exp[i] = x
            log[x] = i
            x = self._slow_mul(x, g)
        for i in range(q, 2 * q):
            exp[i] = exp[i - q]
        self._exp, self._log = exp, log

    def _slow_mul(self, a, b):
        return gf2_mod(clmul(a, b), self.modulus)

    def _slow_pow(self, a, e):
        r = 1
        while e:
            if e & 1:
                r = self._slow_mul(r, a)
            a = self._slow_mul(a, a)
            e >>= 1
        return r

    # arithmetic on ints
    def __call__(self, v):
        return FieldElement(self, self.reduce(v))

    def reduce(self, v):
        if self.kind == "prime":
            return v % self.order
        if not 0 <= v < self.order:
            raise FieldError(f"{v} is not an element of {self}")
        return v

    def add(self, a, b):
        if self.kind == "prime":
            return (a + b) % self.order
        return a ^ b

    def sub(self, a, b):
        if self.kind == "prime":
            return (a - b) % self.order
        return a ^ b

    def neg(self, a):
        if self.kind == "prime":
            return -a % self.order
        return a

    def mul(self, a, b):
        if self.kind == "prime":
            return a * b % self.order
        if a == 0 or b == 0:
            return 0
        if self._exp is not None:
            return self._exp[self._log[a] + self._log[b]]
        return self._slow_mul(a, b)

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        if self.kind == "prime":
            return pow(a, -1, self.order)
        if self._exp is not None:
            return self._exp[(self.order - 1 - self._log[a]) % (self.order - 1)]
        return self._slow_pow(a, self.order - 2)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, e):
        if e < 0:
            a, e = self.inv(a), -e
        if self.kind == "prime":
            return pow(a, e, self.order)
        if a == 0:
            return 1 if e == 0 else 0
        if self._exp is not None:
            return self._exp[(self._log[a] * e) % (self.order - 1)]
        return self._slow_pow(a, e)

    def from_int(self, v):
        """Map a small integer into the field (mod p, or bit pattern in GF(2^k))."""
        if self.kind == "prime":
            return v % self.order
        if v < 0:
            raise FieldError("negative integers have no binary-field image")
        return v

    def random(self, rng):
        return rng.randrange(self.order)

    def random_nonzero(self, rng):
        return rng.randrange(1, self.order)

    def sum(self, values):
        if self.kind == "prime":
            return sum(values) % self.order
        r = 0
        for v in values:
            r ^= v
        return r

    def dot(self, xs, ys):
        if self.kind == "prime":
            return sum(x * y for x, y in zip(xs, ys)) % self.order
        r = 0
        for x, y in zip(xs, ys):
            r ^= self.mul(x, y)
        return r

    def points(self, n):
        """Default evaluation points alpha_i = i for i = 1..n."""
        if n >= self.order:
            raise FieldError(f"{self} has too few nonzero elements for {n} points")
        return [self.from_int(i) for i in range(1, n + 1)]

    def root_of_unity(self, n):
        q = self.order - 1
        if q % n:
            raise FieldError(f"{n} does not divide {q}")
        factors = _prime_factors(q)
        for g in range(2, self.order):
            if all(self.pow(g, q // f) != 1 for f in factors):
                return self.pow(g, q // n)
        raise FieldError("no generator found")

    def root_points(self, n):
        w = self.root_of_unity(n)
        return [self.pow(w, i) for i in range(n)]


@lru_cache(maxsize=None)
def prime_field(p):
    return Field(FieldSpec("prime", p, p))


@lru_cache(maxsize=None)
def binary_field(k, modulus=None):
    if modulus is None:
        if k not in KNOWN_IRREDUCIBLES:
            raise FieldError(f"no default modulus for GF(2^{k}); pass one")
        modulus = KNOWN_IRREDUCIBLES[k]
    return Field(FieldSpec("binary", modulus, 1 << k))


def field_from_name(name):
    """Parse 'GF(7)', 'GF(2^8)', '7' or '2^16'."""
    s = str(name).strip().upper().replace(" ", "")
    if s.startswith("GF(") and s.endswith(")"):
        s = s[3:-1]
    if "^" in s:
        base, k = s.split("^", 1)
        if base != "2":
            raise FieldError("only characteristic-2 extensions are supported")
        return binary_field(int(k))
    return prime_field(int(s))


@dataclass(frozen=True)
class FieldElement:
    field: Field
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.field.order:
            raise FieldError("value out of range")

    def _coerce(self, other):
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldError("operands come from different fields")
            return other.value
        if isinstance(other, int):
            return self.field.from_int(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.add(self.value, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.sub(self.value, o))

    def __rsub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.sub(o, self.value))

    def __mul__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.mul(self.value, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.div(self.value, o))

    def __neg__(self):
        return FieldElement(self.field, self.field.neg(self.value))

    def __pow__(self, e):
        return FieldElement(self.field, self.field.pow(self.value, e))

    def inv(self):
        return FieldElement(self.field, self.field.inv(self.value))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value}@{self.field!r}"


def field_arith(op, a, b=None):
    """Single entry point for scalar arithmetic on FieldElements."""
    if b is not None and isinstance(b, FieldElement) and b.field != a.field:
        raise FieldError("operands come from different fields")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    if op == "pow":
        return a ** (b if isinstance(b, int) else b.value)
    raise FieldError(f"unknown op {op!r}")


# -- polynomials -------------------------------------------------------------

class Poly:
    """Univariate polynomial, coefficients low-degree first."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        c = [int(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.field = field
        self.coeffs = tuple(c)

    @classmethod
    def random(cls, field, degree, free, rng):
        return cls(field, [free] + [field.random(rng) for _ in range(degree)])

    @property
    def degree(self):
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def __call__(self, x):
        F = self.field
        r = 0
        if F.kind == "prime":
            p = F.order
            for c in reversed(self.coeffs):
                r = (r * x + c) % p
            return r
        for c in reversed(self.coeffs):
            r = F.mul(r, x) ^ c
        return r

    def evaluate(self, xs):
        return [self(x) for x in xs]

    def __eq__(self, other):
        return isinstance(other, Poly) and self.field == other.field and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Poly({list(self.coeffs)} over {self.field!r})"

    def __add__(self, other):
        F = self.field
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return Poly(F, [F.add(a[i] if i < len(a) else 0, b[i] if i < len(b) else 0) for i in range(n)])

    def __sub__(self, other):
        return self + other.scale(self.field.neg(1))

    def scale(self, c):
        F = self.field
        return Poly(F, [F.mul(c, x) for x in self.coeffs])

    def __mul__(self, other):
        F = self.field
        if not self.coeffs or not other.coeffs:
            return Poly(F, [])
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = F.add(out[i + j], F.mul(a, b))
        return Poly(F, out)

    def shift(self, k):
        """Multiply by u^k."""
        return Poly(self.field, [0] * k + list(self.coeffs)) if self.coeffs else self

    def truncate(self, k):
        """Reduce modulo u^k."""
        return Poly(self.field, self.coeffs[:k])

    def divmod(self, other):
        F = self.field
        if not other.coeffs:
            raise ZeroDivisionError("division by zero polynomial")
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0:
            return Poly(F, []), self
        quo = [0] * (dq + 1)
        lead_inv = F.inv(other.coeffs[-1])
        for k in range(dq, -1, -1):
            c = F.mul(rem[k + len(other.coeffs) - 1], lead_inv)
            quo[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] = F.sub(rem[k + j], F.mul(c, b))
        return Poly(F, quo), Poly(F, rem[:len(other.coeffs) - 1])


def poly_eval(p, points):
    return [p(x) for x in points]


def lagrange_weights(field, xs, at=0):
    """Weights w_i with p(at) = sum w_i p(x_i) for deg p < len(xs)."""
    F = field
    if len(set(xs)) != len(xs):
        raise FieldError("interpolation points must be distinct")
    out = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i != j:
                num = F.mul(num, F.sub(at, xj))
                den = F.mul(den, F.sub(xi, xj))
        out.append(F.div(num, den))
    return out


def lagrange_basis(field, xs):
    """The basis polynomials L_i with L_i(x_j) = [i == j]."""
    F = field
    if len(set(xs)) != len(xs):
        raise FieldError("interpolation points must be distinct")
    basis = []
    for i, xi in enumerate(xs):
        p = Poly(F, [1])
        den = 1
        for j, xj in enumerate(xs):
            if i != j:
                p = p * Poly(F, [F.neg(xj), 1])
                den = F.mul(den, F.sub(xi, xj))
        basis.append(p.scale(F.inv(den)))
    return basis


def lagrange_interpolate(field, points):
    """The unique polynomial of degree < len(points) through the points."""
    xs = [x for x, _ in points]
    if len(set(xs)) != len(xs):
        raise FieldError("duplicate x-coordinates")
    acc = Poly(field, [])
    for L, (_, y) in zip(lagrange_basis(field, xs), points):
        acc = acc + L.scale(y)
    return acc


def interpolate_at(field, points, at=0):
    xs = [x for x, _ in points]
    return field.dot(lagrange_weights(field, xs, at), [y for _, y in points])


# -- linear algebra ----------------------------------------------------------

def solve_linear(field, A, b):
    """One solution of A x = b, or None when inconsistent."""
    F = field
    rows = len(A)
    cols = len(A[0]) if rows else 0
    M = [list(A[i]) + [b[i]] for i in range(rows)]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = F.inv(M[r][c])
        M[r] = [F.mul(inv, v) for v in M[r]]
        for i in range(rows):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [F.sub(v, F.mul(f, w)) for v, w in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    for i in range(r, rows):
        if M[i][cols]:
            return None
    x = [0] * cols
    for i, c in enumerate(pivots):
        x[c] = M[i][cols]
    return x


def mat_mul(field, A, B):
    F = field
    Bt = list(zip(*B))
    return [[F.dot(row, col) for col in Bt] for row in A]


def mat_identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_rank(field, A):
    F = field
    M = [list(r) for r in A]
    rank = 0
    cols = len(M[0]) if M else 0
    for c in range(cols):
        piv = next((i for i in range(rank, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        inv = F.inv(M[rank][c])
        for i in range(rank + 1, len(M)):
            if M[i][c]:
                f = F.mul(M[i][c], inv)
                M[i] = [F.sub(v, F.mul(f, w)) for v, w in zip(M[i], M[rank])]
        rank += 1
    return rank


def mat_det(field, A):
    F = field
    M = [list(r) for r in A]
    n = len(M)
    det = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = F.neg(det)
        det = F.mul(det, M[c][c])
        inv = F.inv(M[c][c])
        for i in range(c + 1, n):
            if M[i][c]:
                f = F.mul(M[i][c], inv)
                M[i] = [F.sub(v, F.mul(f, w)) for v, w in zip(M[i], M[c])]
    return det


def mat_inv(field, A):
    F = field
    n = len(A)
    M = [list(A[i]) + mat_identity(n)[i] for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c]), None)
        if piv is None:
            raise FieldError("matrix is singular")
        M[c], M[piv] = M[piv], M[c]
        inv = F.inv(M[c][c])
        M[c] = [F.mul(inv, v) for v in M[c]]
        for i in range(n):
            if i != c and M[i][c]:
                f = M[i][c]
                M[i] = [F.sub(v, F.mul(f, w)) for v, w in zip(M[i], M[c])]
    return [row[n:] for row in M]


# -- error-corrected decoding -------------------------------------------------

def decode_with_errors(field, values, degree, max_errors):
    """Berlekamp-Welch: the degree-<=degree polynomial through all but
    max_errors of the (x, y) pairs."""
    F = field
    xs = [x for x, _ in values]
    if len(set(xs)) != len(xs):
        raise FieldError("duplicate x-coordinates")
    n = len(values)
    if n < degree + 1 + 2 * max_errors:
        raise FieldError("too few values for the requested error budget")
    e = max_errors
    # error-free fast path; with n >= degree + 1 + 2e the answer is unique
    p = lagrange_interpolate(F, values[:degree + 1])
    if all(p(x) == y for x, y in values[degree + 1:]):
        return p
    if e == 0:
        raise DecodeError("values do not lie on one polynomial")
    # unknowns: q_0..q_{e+degree}, E_0..E_{e-1}; E monic of degree e
    nq = e + degree + 1
    A, b = [], []
    for x, y in values:
        row = []
        xp = 1
        for _ in range(nq):
            row.append(xp)
            xp = F.mul(xp, x)
        xp = 1
        for _ in range(e):
            row.append(F.neg(F.mul(y, xp)))
            xp = F.mul(xp, x)
        A.append(row)
        b.append(F.mul(y, xp))  # y * x^e
    sol = solve_linear(F, A, b)
    if sol is None:
        raise DecodeError("no polynomial within the error budget")
    Q = Poly(F, sol[:nq])
    E = Poly(F, sol[nq:] + [1])
    P, rem = Q.divmod(E)
    if rem.coeffs or P.degree > degree:
        raise DecodeError("no polynomial within the error budget")
    bad = sum(1 for x, y in values if P(x) != y)
    if bad > max_errors:
        raise DecodeError("no polynomial within the error budget")
    return P


def robust_interpolate(field, values, degree, at=0):
    """Decode with the largest error budget the number of values allows."""
    e = max(0, (len(values) - degree - 1) // 2)
    return decode_with_errors(field, values, degree, e)(at)
