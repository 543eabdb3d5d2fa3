"""Shamir threshold sharing and additive (sum) sharing."""

from dataclasses import dataclass, field as dc_field

from .field import (Poly, FieldError, decode_with_errors, interpolate_at)


class SharingError(ValueError):
    pass


@dataclass
class ShareSet:
    scheme: str                 # "shamir" or "sum"
    t: int
    n: int
    pieces: dict                # player index (1-based) -> int residue
    field: object
    eval_points: list = dc_field(default_factory=list)

    def subset(self, players):
        return ShareSet(self.scheme, self.t, self.n,
                        {i: self.pieces[i] for i in players if i in self.pieces},
                        self.field, self.eval_points)

    def point(self, i):
        return self.eval_points[i - 1]

    def with_pieces(self, pieces):
        return ShareSet(self.scheme, self.t, self.n, dict(pieces), self.field, self.eval_points)


def random_poly(field, t, s, rng):
    """A draw from UPoly(t, s): degree <= t, free term s, other coefficients uniform."""
    return Poly(field, [s] + [field.random(rng) for _ in range(t)])


def shamir_share(field, s, t, n, rng, eval_points=None, poly=None):
    if t < 0 or t >= n:
        raise SharingError(f"threshold t={t} must satisfy 0 <= t < n={n}")
    pts = list(eval_points) if eval_points is not None else field.points(n)
    if len(pts) != n or len(set(pts)) != n or 0 in pts:
        raise SharingError("evaluation points must be n distinct nonzero elements")
    p = poly if poly is not None else random_poly(field, t, field.reduce(s), rng)
    return ShareSet("shamir", t, n, {i + 1: p(a) for i, a in enumerate(pts)}, field, pts)


def shamir_reconstruct(shares, robust=False):
    F = shares.field
    t = shares.t
    pts = [(shares.point(i), v) for i, v in sorted(shares.pieces.items()) if v is not None]
    if len(pts) < t + 1:
        raise SharingError(f"need at least {t + 1} pieces, have {len(pts)}")
    if not robust:
        return interpolate_at(F, pts[:t + 1], 0)
    e = (len(pts) - t - 1) // 2
    try:
        return decode_with_errors(F, pts, t, e)(0)
    except FieldError as exc:
        raise SharingError(f"robust reconstruction failed: {exc}") from exc


def sum_share(field, s, n, rng):
    if n < 2:
        raise SharingError("sum sharing needs n >= 2")
    pieces = {i: field.random(rng) for i in range(1, n)}
    pieces[n] = field.sub(field.reduce(s), field.sum(pieces.values()))
    return ShareSet("sum", n - 1, n, pieces, field)


def sum_reconstruct(shares):
    missing = [i for i in range(1, shares.n + 1) if shares.pieces.get(i) is None]
    if missing:
        raise SharingError(f"sum reconstruction missing pieces from {missing}")
    return shares.field.sum(shares.pieces.values())
