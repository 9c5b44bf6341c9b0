"""Truncated matrix realizations of Weyl operators on the torus Fourier basis.

The basis is ``e_k, |k|_inf <= N`` (multi-indices flattened in C order).  The
quantization convention is pinned by two requirements that also fix the sign
in the Moyal phase of `symbols.moyal`:

* a pure angle harmonic ``exp(i k0.x)`` quantizes to the shift ``e_k -> e_{k+k0}``,
* an action multiplier ``f(xi)`` quantizes to ``diag f(hbar*k)``.

A general plane-wave mode ``(k0, eta0, A)`` then contributes
``A * exp(i eta0 . hbar (k + k0/2))`` to the entry ``[k + k0, k]``, and matrix
composition reproduces the Moyal product exactly on interior blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class BandExceedsTruncationError(ValueError):
    """A symbol mode shifts farther than the truncated basis can represent."""


@lru_cache(maxsize=32)
def basis_k(n_trunc: int, d: int):
    """Integer multi-indices of the truncated basis, shape ((2N+1)^d, d)."""
    axes = [np.arange(-n_trunc, n_trunc + 1)] * d
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _flat_index(k, n_trunc, d):
    dims = (2 * n_trunc + 1,) * d
    return np.ravel_multi_index(tuple((k[:, i] + n_trunc) for i in range(d)), dims)


@dataclass
class TorusOperator:
    """Dense matrix of an operator on the truncated torus Fourier basis.

    ``mat[j, k]`` is the coefficient of ``e_j`` in the image of ``e_k``.
    Entries with source or target outside the index box are lost to
    truncation, so quantitative statements are made on interior blocks only.
    """

    n_trunc: int
    d: int
    hbar: float
    mat: np.ndarray

    @property
    def size(self):
        return (2 * self.n_trunc + 1) ** self.d

    def interior_indices(self, margin: int):
        if margin < 0 or margin > self.n_trunc:
            raise ValueError("margin must lie in [0, n_trunc]")
        k = basis_k(self.n_trunc, self.d)
        mask = np.max(np.abs(k), axis=1) <= self.n_trunc - margin
        return np.nonzero(mask)[0]

    def interior_block(self, margin: int):
        idx = self.interior_indices(margin)
        return self.mat[np.ix_(idx, idx)]

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.mat - self.mat.conj().T)))

    def is_hermitian(self, tol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.mat))))
        return self.hermiticity_defect() <= tol * scale


def weyl_matrix(symbol, hbar: float, n_trunc: int) -> TorusOperator:
    """Quantize a ModeSymbol on the truncated basis.

    Each mode ``(k0, m0, A)`` adds ``A * exp(i eta0.(hbar k) + i eta0.(hbar k0)/2)``
    at ``[k + k0, k]`` for all source indices k with both endpoints in the box.
    """
    d = symbol.d
    if symbol.angle_band_inf() > 2 * n_trunc:
        raise BandExceedsTruncationError(
            f"symbol band {symbol.angle_band_inf()} exceeds 2*N = {2 * n_trunc}"
        )
    size = (2 * n_trunc + 1) ** d
    mat = np.zeros((size, size), dtype=complex)
    kbox = basis_k(n_trunc, d)
    src = np.arange(size)
    for (k0, m0), amp in symbol.modes.items():
        k0a = np.asarray(k0, dtype=np.int64)
        eta0 = symbol.dxi * np.asarray(m0, dtype=float)
        target = kbox + k0a
        valid = np.max(np.abs(target), axis=1) <= n_trunc
        phase = np.exp(1j * hbar * (kbox @ eta0 + 0.5 * float(eta0 @ k0a)))
        rows = _flat_index(target[valid], n_trunc, d)
        mat[rows, src[valid]] += amp * phase[valid]
    return TorusOperator(n_trunc=n_trunc, d=d, hbar=hbar, mat=mat)


def weyl_matrix_sparse(symbol, hbar: float, n_trunc: int):
    """CSR version of `weyl_matrix` (one band per mode; useful at d = 2)."""
    import scipy.sparse

    d = symbol.d
    if symbol.angle_band_inf() > 2 * n_trunc:
        raise BandExceedsTruncationError(
            f"symbol band {symbol.angle_band_inf()} exceeds 2*N = {2 * n_trunc}"
        )
    size = (2 * n_trunc + 1) ** d
    kbox = basis_k(n_trunc, d)
    src = np.arange(size)
    rows, cols, vals = [], [], []
    for (k0, m0), amp in symbol.modes.items():
        k0a = np.asarray(k0, dtype=np.int64)
        eta0 = symbol.dxi * np.asarray(m0, dtype=float)
        target = kbox + k0a
        valid = np.max(np.abs(target), axis=1) <= n_trunc
        phase = np.exp(1j * hbar * (kbox @ eta0 + 0.5 * float(eta0 @ k0a)))
        rows.append(_flat_index(target[valid], n_trunc, d))
        cols.append(src[valid])
        vals.append(amp * phase[valid])
    if not rows:
        return scipy.sparse.csr_matrix((size, size), dtype=complex)
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )
    return mat.tocsr()


def transport_matrix(omega, hbar: float, n_trunc: int, d=None) -> TorusOperator:
    """Quantization of the transport symbol omega.xi: diag(hbar * omega.k)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    d = len(omega) if d is None else d
    k = basis_k(n_trunc, d)
    diag = hbar * (k @ omega)
    return TorusOperator(n_trunc=n_trunc, d=d, hbar=hbar, mat=np.diag(diag.astype(complex)))


def operator_norm(mat) -> float:
    """Largest singular value."""
    mat = mat.mat if isinstance(mat, TorusOperator) else mat
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def spectrum(op, with_vectors=False, hermitian_tol=1e-10):
    """Eigenvalues sorted ascending; eigenvectors only on the Hermitian path."""
    mat = op.mat if isinstance(op, TorusOperator) else op
    defect = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if with_vectors:
        if defect > hermitian_tol * scale:
            raise ValueError(f"eigenvector path requires a Hermitian matrix (defect {defect:.2e})")
        vals, vecs = np.linalg.eigh(mat)
        return vals, vecs
    if defect <= hermitian_tol * scale:
        return np.linalg.eigvalsh(mat)
    vals = np.linalg.eigvals(mat)
    return np.sort_complex(vals)


@dataclass(frozen=True)
class WindowEigenpair:
    eigenvalue: float
    k_label: tuple
    label_value: float
    gap: float
    vector: np.ndarray


def window_spectrum(op: TorusOperator, center: float, width: float, omega):
    """Hermitian eigenpairs with |lambda - center| <= width.

    Each pair is tagged with the integer vector k whose transport eigenvalue
    hbar*omega.k (searched over the truncation box) lies closest, and with
    the gap to that label.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    vals, vecs = spectrum(op, with_vectors=True)
    k = basis_k(op.n_trunc, op.d)
    labels = op.hbar * (k @ omega)
    out = []
    for i, lam in enumerate(vals):
        if abs(lam - center) <= width:
            j = int(np.argmin(np.abs(labels - lam)))
            out.append(
                WindowEigenpair(
                    eigenvalue=float(lam),
                    k_label=tuple(int(c) for c in k[j]),
                    label_value=float(labels[j]),
                    gap=float(abs(lam - labels[j])),
                    vector=vecs[:, i],
                )
            )
    return out


# ----------------------------------------------------------------------
# CSV export
# ----------------------------------------------------------------------


def matrix_to_csv_rows(op: TorusOperator):
    """Rows of (re, im) interleaved entries, one matrix row per line."""
    rows = []
    for row in op.mat:
        cells = []
        for z in row:
            cells.append(repr(float(z.real)))
            cells.append(repr(float(z.imag)))
        rows.append(cells)
    return rows


def spectrum_to_csv_rows(pairs):
    rows = [["k_label", "eigenvalue", "label_value", "gap"]]
    for p in pairs:
        rows.append(
            [
                " ".join(str(c) for c in p.k_label),
                repr(p.eigenvalue),
                repr(p.label_value),
                repr(p.gap),
            ]
        )
    return rows
