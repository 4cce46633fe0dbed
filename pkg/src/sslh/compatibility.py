"""Compatibility matrices and their free-parameter coordinates.

A symmetric doubly stochastic k x k matrix has k(k-1)/2 degrees of freedom.
We use the upper triangle (row-major, diagonal included) of the leading
(k-1) x (k-1) block as coordinates ``h``; the last row and column follow from
the unit row sums.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import DimensionError, RepresentationError

TOL = 1e-12


class Form(str, Enum):
    DOUBLY_STOCHASTIC = "doubly_stochastic"
    RESIDUAL = "residual"


def n_free_params(k):
    return k * (k - 1) // 2


def from_h(h, k):
    """Symmetric doubly stochastic matrix with free coordinates ``h``."""
    h = np.asarray(h, dtype=float)
    if h.shape != (n_free_params(k),):
        raise DimensionError(f"expected {n_free_params(k)} coordinates for k={k}, got {h.shape}")
    H = np.zeros((k, k))
    if k == 1:
        H[0, 0] = 1.0
        return H
    iu = np.triu_indices(k - 1)
    B = np.zeros((k - 1, k - 1))
    B[iu] = h
    B = B + np.triu(B, 1).T
    H[:-1, :-1] = B
    H[:-1, -1] = 1.0 - B.sum(axis=1)
    H[-1, :-1] = H[:-1, -1]
    H[-1, -1] = B.sum() - (k - 2)
    return H


def to_h(H):
    H = np.asarray(H, dtype=float)
    k = H.shape[0]
    return H[:-1, :-1][np.triu_indices(k - 1)].copy()


@lru_cache(maxsize=None)
def _affine_basis(k):
    H0 = from_h(np.zeros(n_free_params(k)), k)
    E = np.stack([from_h(e, k) - H0 for e in np.eye(n_free_params(k))]) if k > 1 else np.zeros((0, 1, 1))
    H0.flags.writeable = False
    E.flags.writeable = False
    return H0, E


def affine_basis(k):
    """Return ``(H0, E)`` with ``H(h) = H0 + sum_p h[p] * E[p]``."""
    return _affine_basis(k)


def grad_to_h(grad_H):
    """Chain rule: map a gradient w.r.t. the k x k matrix to h-space."""
    k = grad_H.shape[0]
    _, E = affine_basis(k)
    return np.tensordot(E, grad_H, axes=([1, 2], [0, 1]))


def planted_pattern(h, k=3):
    """The experiments' three-class potential: one swapped pair plus a fixed class.

    ``h`` is the ratio between the large and small entries, e.g. h=8 gives
    0.8 / 0.1 entries.
    """
    if k != 3:
        raise DimensionError("the planted pattern is defined for k=3")
    P = np.array([[1.0, h, 1.0], [h, 1.0, 1.0], [1.0, 1.0, h]])
    return P / (h + 2.0)


@dataclass(frozen=True)
class CompatibilityMatrix:
    values: np.ndarray
    form: Form = Form.DOUBLY_STOCHASTIC

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionError(f"compatibility matrix must be square, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "form", Form(self.form))

    @property
    def k(self):
        return self.values.shape[0]

    @property
    def h(self):
        """Free coordinates, always taken from the doubly stochastic form."""
        return to_h(self.doubly_stochastic().values)

    def is_symmetric(self, tol=TOL):
        return bool(np.abs(self.values - self.values.T).max() <= tol)

    def check(self, tol=TOL):
        """Raise if the declared form's row/column sums or symmetry do not hold."""
        target = 1.0 if self.form is Form.DOUBLY_STOCHASTIC else 0.0
        if not self.is_symmetric(tol):
            raise RepresentationError("compatibility matrix is not symmetric")
        if (np.abs(self.values.sum(axis=1) - target).max() > tol
                or np.abs(self.values.sum(axis=0) - target).max() > tol):
            raise RepresentationError(f"row/column sums are not {target:g}")
        return self

    def residual(self):
        if self.form is Form.RESIDUAL:
            return self
        return CompatibilityMatrix(self.values - 1.0 / self.k, Form.RESIDUAL)

    def doubly_stochastic(self):
        if self.form is Form.DOUBLY_STOCHASTIC:
            return self
        return CompatibilityMatrix(self.values + 1.0 / self.k, Form.DOUBLY_STOCHASTIC)

    @classmethod
    def from_h(cls, h, k, form=Form.DOUBLY_STOCHASTIC):
        H = cls(from_h(h, k), Form.DOUBLY_STOCHASTIC)
        return H if Form(form) is Form.DOUBLY_STOCHASTIC else H.residual()

    @classmethod
    def identity(cls, k, form=Form.RESIDUAL):
        return cls(np.eye(k), Form.DOUBLY_STOCHASTIC) if Form(form) is Form.DOUBLY_STOCHASTIC \
            else cls(np.eye(k), Form.DOUBLY_STOCHASTIC).residual()

    @classmethod
    def planted(cls, h, k=3):
        return cls(planted_pattern(h, k), Form.DOUBLY_STOCHASTIC)

    def to_dict(self):
        return {
            "k": self.k,
            "form": self.form.value,
            "values": self.values.tolist(),
            "h": self.h.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        """Accepts nested rows or a flat row-major list (the latter needs ``k``)."""
        vals = np.asarray(d["values"], dtype=float)
        if vals.ndim == 1:
            k = int(d.get("k", round(vals.size ** 0.5)))
            vals = vals.reshape(k, k)
        return cls(vals, Form(d.get("form", "doubly_stochastic")))


def center_compatibility(H):
    """Residual form of a doubly stochastic matrix (subtract 1/k entrywise)."""
    if H.form is not Form.DOUBLY_STOCHASTIC:
        raise RepresentationError("center_compatibility expects a doubly stochastic matrix")
    return H.residual()
