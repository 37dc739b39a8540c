"""Exact piecewise Laurent-polynomial radial functions.

A piece on ``(lo, hi]`` stores ``sum_m P_m(t) * s**(-m)`` where ``t = s - anchor``
and each ``P_m`` is an ordinary polynomial in ``t``. Keeping the local variable
means a factor like ``(s-1)**k`` is stored as the single coefficient of ``t**k``
and evaluates to full relative precision right next to ``s = 1``, where an
expansion in powers of ``s`` would cancel catastrophically.

Differentiation, division by ``s`` and the radial Laplacian are exact
coefficient operations. On a piece anchored at 0 we have ``t = s``, so
negative powers are folded back into the polynomial; this resolves removable
singularities such as ``(2s)/s`` symbolically.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P


def _trim(c):
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    return c if c.size else np.zeros(1)


class LaurentPiece:
    __slots__ = ("anchor", "terms")

    def __init__(self, anchor, terms):
        self.anchor = float(anchor)
        self.terms = {}
        for m, c in terms.items():
            c = _trim(c)
            if np.any(c != 0):
                self.terms[int(m)] = c
        if self.anchor == 0.0:
            self._fold()

    @classmethod
    def poly(cls, anchor, coeffs):
        return cls(anchor, {0: coeffs})

    def _fold(self):
        # t == s: collect everything as powers of s, then split sign
        powers = {}
        for m, c in self.terms.items():
            for j, cj in enumerate(c):
                if cj != 0:
                    powers[j - m] = powers.get(j - m, 0.0) + cj
        pos = [e for e in powers if e >= 0]
        terms = {}
        if pos:
            c = np.zeros(max(pos) + 1)
            for e in pos:
                c[e] = powers[e]
            terms[0] = c
        for e, v in powers.items():
            if e < 0 and v != 0:
                terms[-e] = np.array([v])
        self.terms = {m: _trim(c) for m, c in terms.items() if np.any(_trim(c) != 0)}

    def __add__(self, other):
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = P.polyadd(terms[m], c) if m in terms else c
        return LaurentPiece(self.anchor, terms)

    def __neg__(self):
        return LaurentPiece(self.anchor, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, a):
        return LaurentPiece(self.anchor, {m: a * c for m, c in self.terms.items()})

    def deriv(self):
        terms = {}
        for m, c in self.terms.items():
            if c.size > 1:
                d = P.polyder(c)
                terms[m] = P.polyadd(terms[m], d) if m in terms else d
            if m != 0:
                e = -m * c
                terms[m + 1] = P.polyadd(terms[m + 1], e) if m + 1 in terms else e
        return LaurentPiece(self.anchor, terms)

    def div_s(self):
        return LaurentPiece(self.anchor, {m + 1: c for m, c in self.terms.items()})

    def integral(self, value_at_anchor=0.0):
        if any(m != 0 for m in self.terms):
            raise ValueError("only polynomial pieces can be integrated")
        c = self.terms.get(0, np.zeros(1))
        return LaurentPiece(self.anchor, {0: P.polyint(c, k=[value_at_anchor])})

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        t = s - self.anchor
        out = np.zeros_like(s)
        for m, c in self.terms.items():
            v = P.polyval(t, c)
            out = out + (v if m == 0 else v / s ** m)
        return out


class RadialFunction:
    """Piecewise function of ``s >= 0``; piece ``i`` owns ``(breaks[i], breaks[i+1]]``."""

    def __init__(self, breaks, pieces):
        self.breaks = np.asarray(breaks, dtype=float)
        self.pieces = list(pieces)
        if len(self.pieces) != len(self.breaks) - 1:
            raise ValueError("need one piece per interval")

    def _map(self, fn):
        return RadialFunction(self.breaks, [fn(p) for p in self.pieces])

    def _zip(self, other, fn):
        return RadialFunction(self.breaks, [fn(a, b) for a, b in zip(self.pieces, other.pieces)])

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return self._map(lambda p: -p)

    def scale(self, a):
        return self._map(lambda p: p.scale(a))

    def deriv(self, n=1):
        out = self
        for _ in range(n):
            out = out._map(LaurentPiece.deriv)
        return out

    def div_s(self, n=1):
        out = self
        for _ in range(n):
            out = out._map(LaurentPiece.div_s)
        return out

    def identity_like(self, coef=1.0):
        """``coef * s`` on every piece, written in the local variable."""
        return self._map(lambda p: LaurentPiece.poly(p.anchor, [coef * p.anchor, coef]))

    def constant_like(self, value):
        return self._map(lambda p: LaurentPiece.poly(p.anchor, [value]))

    def laplacian(self, N):
        """Radial Laplacian ``f'' + (N-1) f'/s``."""
        d1 = self.deriv()
        return d1.deriv() + d1.div_s().scale(N - 1)

    def hessian_parts(self):
        """``(f'/s, (f'' - f'/s)/s^2)`` so that ``∂_jk f = δ_jk A + x_j x_k B``."""
        d1 = self.deriv()
        a = d1.div_s()
        return a, (d1.deriv() - a).div_s(2)

    def piece_index(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks, s, side="left") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        idx = self.piece_index(flat)
        out = np.empty_like(flat)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, p in enumerate(self.pieces):
                sel = idx == i
                if sel.any():
                    out[sel] = p(flat[sel])
        return out.reshape(s.shape)
