"""Root-system and Chevalley-basis data for split real simple Lie algebras.

Type A_N (sl(N+1, R)) is fully supported; the builder is table-driven so a new
series only needs its own constructor registered in ``build_algebra``.

Conventions used throughout the package:

* Cartan elements (positions q or x, momenta p, derivative directions) are
  length-N coordinate vectors on the orthonormal basis ``x_i`` of the Cartan
  subalgebra.  The invariant form restricted to these coordinates is the
  Euclidean dot product.
* Roots are stored as integer coordinate vectors in the simple-root basis and
  enumerated by height, then lexicographically.  ``a(h)`` for a root ``a`` and
  Cartan vector ``h`` is ``coroot_h[a] @ h``.
* The invariant form is the defining-representation trace form.  Root vectors
  are the elementary matrices E_ij, so (e_a, e_{-a}) = 1, [e_a, e_{-a}] = H_a
  and all structure constants are exactly +-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DimensionError, UnsupportedAlgebraError


@dataclass(frozen=True)
class LieAlgebraData:
    """Immutable bundle of root-system data plus precomputed bracket tables."""

    series: str
    rank: int
    n: int                          # dimension of the defining representation
    roots: tuple                    # integer coordinate vectors, height-then-lex order
    root_index: dict                # coords tuple -> enumeration index
    idx_pairs: np.ndarray           # (R, 2) matrix positions (i, j) with e_a = E_ij
    heights: np.ndarray             # (R,) integer heights
    neg: np.ndarray                 # (R,) index of -a
    simple_idx: np.ndarray          # (N,) enumeration indices of the simple roots
    cartan_matrix: np.ndarray       # (N, N) integers
    cartan_inverse: np.ndarray      # (N, N) floats
    h_basis: np.ndarray             # (N, n, n) orthonormal Cartan matrices x_i
    h_diag: np.ndarray              # (N, n) diagonals of x_i
    root_vectors: np.ndarray        # (R, n, n) matrices e_a
    coroot_h: np.ndarray            # (R, N) coordinates of H_a on the x_i basis
    nmat: np.ndarray                # (R, R) structure constants, 0 where inapplicable
    # COO tables for the structure-constant bracket
    rr_i: np.ndarray = field(repr=False, default=None)
    rr_j: np.ndarray = field(repr=False, default=None)
    rr_k: np.ndarray = field(repr=False, default=None)
    rr_n: np.ndarray = field(repr=False, default=None)

    @property
    def num_roots(self) -> int:
        return len(self.roots)

    @property
    def positive_mask(self) -> np.ndarray:
        return self.heights > 0

    def root_key(self, i: int) -> str:
        return ",".join(str(int(m)) for m in self.roots[i])

    def key_to_index(self, key: str) -> int:
        coords = tuple(int(s) for s in key.split(","))
        if len(coords) != self.rank or coords not in self.root_index:
            raise DimensionError(f"'{key}' is not a root of {self.series}{self.rank}")
        return self.root_index[coords]

    def alpha_values(self, h: np.ndarray) -> np.ndarray:
        """Evaluate every root on a Cartan coordinate vector at once."""
        return self.coroot_h @ np.asarray(h, dtype=float)

    def h_to_diag(self, h: np.ndarray) -> np.ndarray:
        """Diagonal entries of the matrix realising Cartan coordinates ``h``."""
        return self.h_diag.T @ np.asarray(h, dtype=float)

    def diag_to_h(self, d: np.ndarray) -> np.ndarray:
        """Invariant-form projection of a diagonal (as entries) onto the x_i basis."""
        return self.h_diag @ np.asarray(d, dtype=float)


def _build_type_a(rank: int) -> LieAlgebraData:
    n = rank + 1
    # roots eps_i - eps_j, i != j, with simple-root coordinates = run of ones
    raw = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            coords = np.zeros(rank, dtype=int)
            if i < j:
                coords[i:j] = 1
            else:
                coords[j:i] = -1
            raw.append((tuple(coords), (i, j)))
    raw.sort(key=lambda item: (sum(item[0]), item[0]))
    roots = tuple(coords for coords, _ in raw)
    idx_pairs = np.array([pair for _, pair in raw], dtype=int)
    root_index = {coords: k for k, coords in enumerate(roots)}
    heights = np.array([sum(c) for c in roots], dtype=int)
    neg = np.array([root_index[tuple(-m for m in c)] for c in roots], dtype=int)
    simple_idx = np.empty(rank, dtype=int)
    for k in range(rank):
        coords = tuple(1 if t == k else 0 for t in range(rank))
        simple_idx[k] = root_index[coords]

    root_vectors = np.zeros((len(roots), n, n))
    for k, (i, j) in enumerate(idx_pairs):
        root_vectors[k, i, j] = 1.0

    # orthonormal Cartan basis under the trace form
    h_basis = np.zeros((rank, n, n))
    for k in range(1, rank + 1):
        d = np.zeros(n)
        d[:k] = 1.0
        d[k] = -float(k)
        h_basis[k - 1] = np.diag(d / np.sqrt(k * (k + 1)))
    h_diag = np.array([np.diag(m) for m in h_basis])

    coroot_h = np.zeros((len(roots), rank))
    for k, (i, j) in enumerate(idx_pairs):
        d = np.zeros(n)
        d[i], d[j] = 1.0, -1.0
        coroot_h[k] = h_diag @ d

    cartan = np.zeros((rank, rank), dtype=int)
    for a in range(rank):
        for b in range(rank):
            cartan[a, b] = round(coroot_h[simple_idx[a]] @ coroot_h[simple_idx[b]])
    cartan_inverse = np.linalg.inv(cartan.astype(float))

    nmat = np.zeros((len(roots), len(roots)))
    rr_i, rr_j, rr_k, rr_n = [], [], [], []
    for a, ca in enumerate(roots):
        for b, cb in enumerate(roots):
            s = tuple(x + y for x, y in zip(ca, cb))
            if s in root_index:
                comm = root_vectors[a] @ root_vectors[b] - root_vectors[b] @ root_vectors[a]
                k = root_index[s]
                val = float(np.tensordot(comm, root_vectors[neg[k]].T, axes=2))
                nmat[a, b] = val
                rr_i.append(a)
                rr_j.append(b)
                rr_k.append(k)
                rr_n.append(val)

    return LieAlgebraData(
        series="A",
        rank=rank,
        n=n,
        roots=roots,
        root_index=root_index,
        idx_pairs=idx_pairs,
        heights=heights,
        neg=neg,
        simple_idx=simple_idx,
        cartan_matrix=cartan,
        cartan_inverse=cartan_inverse,
        h_basis=h_basis,
        h_diag=h_diag,
        root_vectors=root_vectors,
        coroot_h=coroot_h,
        nmat=nmat,
        rr_i=np.array(rr_i, dtype=int),
        rr_j=np.array(rr_j, dtype=int),
        rr_k=np.array(rr_k, dtype=int),
        rr_n=np.array(rr_n),
    )


_BUILDERS = {"A": _build_type_a}


def build_algebra(series: str, rank: int) -> LieAlgebraData:
    """Construct the algebra data for the given series and rank.

    Raises UnsupportedAlgebraError for series outside the implemented set.
    """
    if series not in _BUILDERS:
        raise UnsupportedAlgebraError(f"series '{series}' is not supported (have: {sorted(_BUILDERS)})")
    if rank < 1:
        raise UnsupportedAlgebraError(f"rank must be >= 1, got {rank}")
    return _BUILDERS[series](rank)


class GElement:
    """Algebra element stored as Cartan coordinates plus per-root coefficients."""

    __slots__ = ("algebra", "h", "r")

    def __init__(self, algebra: LieAlgebraData, h=None, r=None):
        self.algebra = algebra
        self.h = np.zeros(algebra.rank) if h is None else np.asarray(h, dtype=float).copy()
        self.r = np.zeros(algebra.num_roots) if r is None else np.asarray(r, dtype=float).copy()
        if self.h.shape != (algebra.rank,) or self.r.shape != (algebra.num_roots,):
            raise DimensionError(
                f"coefficient shapes {self.h.shape}/{self.r.shape} do not match rank {algebra.rank}"
            )

    def copy(self) -> "GElement":
        return GElement(self.algebra, self.h, self.r)

    def __add__(self, other: "GElement") -> "GElement":
        _check_same(self, other)
        return GElement(self.algebra, self.h + other.h, self.r + other.r)

    def __sub__(self, other: "GElement") -> "GElement":
        _check_same(self, other)
        return GElement(self.algebra, self.h - other.h, self.r - other.r)

    def __mul__(self, c: float) -> "GElement":
        return GElement(self.algebra, c * self.h, c * self.r)

    __rmul__ = __mul__

    def __neg__(self) -> "GElement":
        return GElement(self.algebra, -self.h, -self.r)

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector (not the invariant form)."""
        return float(np.sqrt(self.h @ self.h + self.r @ self.r))

    def to_matrix(self) -> np.ndarray:
        m = np.tensordot(self.h, self.algebra.h_basis, axes=1)
        m += np.tensordot(self.r, self.algebra.root_vectors, axes=1)
        return m

    def __repr__(self):
        nz = {self.algebra.root_key(i): round(v, 6) for i, v in enumerate(self.r) if abs(v) > 1e-14}
        return f"GElement(h={np.round(self.h, 6)}, r={nz})"


def _check_same(x: GElement, y: GElement) -> None:
    if x.algebra is not y.algebra and (
        x.algebra.series != y.algebra.series or x.algebra.rank != y.algebra.rank
    ):
        raise DimensionError("elements belong to different algebras")


def gelement(algebra: LieAlgebraData, h=None, r=None) -> GElement:
    return GElement(algebra, h, r)


def root_element(algebra: LieAlgebraData, index: int, coeff: float = 1.0) -> GElement:
    r = np.zeros(algebra.num_roots)
    r[index] = coeff
    return GElement(algebra, None, r)


def from_matrix(algebra: LieAlgebraData, m: np.ndarray) -> GElement:
    """Inverse of GElement.to_matrix for traceless matrices.

    General input is projected: the coefficient on e_a is (m, e_{-a}) and the
    Cartan part is the form projection onto the x_i.
    """
    m = np.asarray(m, dtype=float)
    h = algebra.diag_to_h(np.diag(m))
    i, j = algebra.idx_pairs[:, 0], algebra.idx_pairs[:, 1]
    return GElement(algebra, h, m[i, j])


def bracket(x: GElement, y: GElement) -> GElement:
    """Structure-constant evaluation of [x, y]."""
    _check_same(x, y)
    alg = x.algebra
    ax = alg.coroot_h @ x.h          # a(x_h) for every root a
    ay = alg.coroot_h @ y.h
    zr = ax * y.r - ay * x.r
    if alg.rr_i.size:
        np.add.at(zr, alg.rr_k, alg.rr_n * x.r[alg.rr_i] * y.r[alg.rr_j])
    zh = alg.coroot_h.T @ (x.r * y.r[alg.neg])
    return GElement(alg, zh, zr)


def pairing(x: GElement, y: GElement) -> float:
    """Invariant bilinear form (trace form in the defining representation)."""
    _check_same(x, y)
    return float(x.h @ y.h + x.r @ y.r[x.algebra.neg])


def project_h(x: GElement) -> GElement:
    return GElement(x.algebra, x.h, None)


def project_h_perp(x: GElement) -> GElement:
    return GElement(x.algebra, None, x.r)


def weyl_vector_w(algebra: LieAlgebraData) -> np.ndarray:
    """Cartan vector w with a(w) equal to the height of a for every root."""
    pos = algebra.positive_mask
    norms = np.einsum("ij,ij->i", algebra.coroot_h[pos], algebra.coroot_h[pos])
    return (algebra.coroot_h[pos] / norms[:, None]).sum(axis=0)


def torus_diag(algebra: LieAlgebraData, h: np.ndarray) -> np.ndarray:
    """Diagonal entries of exp(h) for a Cartan coordinate vector h."""
    return np.exp(algebra.h_to_diag(h))


def ad_torus(algebra: LieAlgebraData, log_diag: np.ndarray, x: GElement) -> GElement:
    """Adjoint action of the torus element with diagonal log entries ``log_diag``.

    Cartan parts are fixed; the coefficient on e_a scales by exp(a(log_diag)).
    """
    i, j = algebra.idx_pairs[:, 0], algebra.idx_pairs[:, 1]
    scale = np.exp(log_diag[i] - log_diag[j])
    return GElement(algebra, x.h, scale * x.r)


def random_gelement(algebra: LieAlgebraData, rng: np.random.Generator, scale: float = 1.0,
                    cartan: bool = True) -> GElement:
    h = scale * rng.standard_normal(algebra.rank) if cartan else None
    r = scale * rng.standard_normal(algebra.num_roots)
    return GElement(algebra, h, r)


def spin_from_dict(algebra: LieAlgebraData, h: Iterable[float] | None,
                   coeffs: dict | None) -> GElement:
    """Assemble a spin element from Cartan coordinates and keyed root coefficients."""
    x = GElement(algebra, None if h is None else np.asarray(list(h), dtype=float), None)
    if coeffs:
        for key, val in coeffs.items():
            x.r[algebra.key_to_index(str(key))] = float(val)
    return x
