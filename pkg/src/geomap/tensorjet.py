"""Array-valued second-order jets over a batch of points.

A :class:`Jet` holds ``val`` with shape ``(P, *S)``, first derivatives ``d1``
with shape ``(P, n, *S)`` and, at order 2, second derivatives ``d2`` with
shape ``(P, n, n, *S)``.  Products, inverses and determinants propagate the
derivatives exactly, so fields derived from expression-backed metrics keep
exact jets.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "d1", "d2", "flags")

    def __init__(self, val, d1, d2=None, flags=None):
        self.val = np.asarray(val, dtype=float)
        self.d1 = np.asarray(d1, dtype=float)
        self.d2 = None if d2 is None else np.asarray(d2, dtype=float)
        P = self.val.shape[0]
        self.flags = np.zeros(P, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)

    @classmethod
    def constant(cls, value, npoints, dimension, order=2):
        value = np.asarray(value, dtype=float)
        val = np.broadcast_to(value, (npoints,) + value.shape).copy()
        d1 = np.zeros((npoints, dimension) + value.shape)
        d2 = np.zeros((npoints, dimension, dimension) + value.shape) if order >= 2 else None
        return cls(val, d1, d2)

    @property
    def order(self):
        return 1 if self.d2 is None else 2

    @property
    def npoints(self):
        return self.val.shape[0]

    @property
    def dimension(self):
        return self.d1.shape[1]

    @property
    def shape(self):
        return self.val.shape[1:]

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.val, self.d1, None, self.flags)

    def __neg__(self):
        return Jet(-self.val, -self.d1, None if self.d2 is None else -self.d2, self.flags)

    def __add__(self, other):
        order = min(self.order, other.order)
        d2 = self.d2 + other.d2 if order >= 2 else None
        return Jet(self.val + other.val, self.d1 + other.d1, d2, self.flags | other.flags)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return Jet(c * self.val, c * self.d1, None if self.d2 is None else c * self.d2, self.flags)

    def __getitem__(self, index):
        """Index the component axes only."""
        if not isinstance(index, tuple):
            index = (index,)
        v = self.val[(slice(None),) + index]
        d1 = self.d1[(slice(None), slice(None)) + index]
        d2 = None if self.d2 is None else self.d2[(slice(None),) * 3 + index]
        return Jet(v, d1, d2, self.flags)

    def apply(self, f, df, ddf=None):
        """Elementwise ``f`` with derivative callables ``df`` and ``ddf``."""
        v = self.val
        f1 = df(v)
        d1 = f1[:, None] * self.d1
        d2 = None
        if self.d2 is not None and ddf is not None:
            f2 = ddf(v)
            d2 = f1[:, None, None] * self.d2 + f2[:, None, None] * (
                self.d1[:, :, None] * self.d1[:, None, :]
            )
        return Jet(f(v), d1, d2, self.flags)

    def exp(self):
        return self.apply(np.exp, np.exp, np.exp)

    def inv(self):
        """Matrix inverse of a jet with component shape ``(m, m)``."""
        A = np.linalg.inv(self.val)
        d1 = -np.einsum("zab,zkbc,zcd->zkad", A, self.d1, A)
        d2 = None
        if self.d2 is not None:
            # A (dA_k A dA_l + dA_l A dA_k - d2A_kl) A
            t = np.einsum("zkab,zbc,zlcd->zklad", self.d1, A, self.d1)
            inner = t + t.transpose(0, 2, 1, 3, 4) - self.d2
            d2 = np.einsum("zab,zklbc,zcd->zklad", A, inner, A)
        return Jet(A, d1, d2, self.flags)

    def logabsdet(self):
        """``ln|det|`` of a matrix jet, differentiated via ``tr(A^-1 dA)``."""
        _, logdet = np.linalg.slogdet(self.val)
        A = np.linalg.inv(self.val)
        d1 = np.einsum("zab,zkba->zk", A, self.d1)
        d2 = None
        if self.d2 is not None:
            d2 = np.einsum("zab,zklba->zkl", A, self.d2) - np.einsum(
                "zab,zlbc,zcd,zkda->zkl", A, self.d1, A, self.d1
            )
        return Jet(logdet, d1, d2, self.flags)

    def trace(self):
        return Jet(
            np.einsum("zii->z", self.val),
            np.einsum("zkii->zk", self.d1),
            None if self.d2 is None else np.einsum("zklii->zkl", self.d2),
            self.flags,
        )


def jeinsum(spec, a, b):
    """Bilinear contraction of two jets; ``spec`` uses lowercase component subscripts.

    ``jeinsum("ij,jk->ik", A, B)`` is the matrix product with the product rule
    applied to both derivative orders.  A plain array operand is taken as a
    point-independent constant.
    """
    if not isinstance(a, Jet):
        ref = b
        a = Jet.constant(a, ref.npoints, ref.dimension, ref.order)
    if not isinstance(b, Jet):
        b = Jet.constant(b, a.npoints, a.dimension, a.order)
    ins, out = spec.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    val = np.einsum(f"Z{sa},Z{sb}->Z{out}", a.val, b.val)
    d1 = np.einsum(f"ZY{sa},Z{sb}->ZY{out}", a.d1, b.val) + np.einsum(
        f"Z{sa},ZY{sb}->ZY{out}", a.val, b.d1
    )
    d2 = None
    if a.order >= 2 and b.order >= 2:
        cross = np.einsum(f"ZY{sa},ZX{sb}->ZYX{out}", a.d1, b.d1)
        d2 = (
            np.einsum(f"ZYX{sa},Z{sb}->ZYX{out}", a.d2, b.val)
            + cross
            + np.swapaxes(cross, 1, 2)
            + np.einsum(f"Z{sa},ZYX{sb}->ZYX{out}", a.val, b.d2)
        )
    return Jet(val, d1, d2, a.flags | b.flags)
