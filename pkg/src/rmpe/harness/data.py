"""Dataset loading (libsvm text format) and synthetic logistic datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..errors import EmptyDatasetError, ParseError, StructuralError

__all__ = ["Dataset", "parse_libsvm", "synth_dataset"]


@dataclass
class Dataset:
    """Sparse design matrix ``Z`` (CSR), labels in {-1, +1} and a name."""

    Z: sp.csr_matrix
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.Z = sp.csr_matrix(self.Z, dtype=float)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.Z.shape[0] != self.y.size:
            raise StructuralError(f"{self.Z.shape[0]} rows but {self.y.size} labels")
        if not np.isin(self.y, (-1.0, 1.0)).all():
            raise StructuralError("labels must be in {-1, +1}")

    @property
    def shape(self):
        return self.Z.shape


def _label(tok, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"bad label {tok!r}", lineno) from None
    if v == 1.0:
        return 1.0
    if v in (0.0, -1.0):
        return -1.0
    raise ParseError(f"label {tok!r} not in {{0, 1, -1, +1}}", lineno)


def parse_libsvm(path, name=None) -> Dataset:
    """Read ``label idx:val idx:val ...`` lines with 1-based ascending indices.

    Blank lines and ``#`` comments are ignored.  Labels ``0`` map to ``-1``.
    The column count is the largest index seen.

    Raises
    ------
    ParseError
        On a malformed line, with its 1-based line number.
    EmptyDatasetError
        If the file holds no data rows.
    """
    labels, indptr, indices, data = [], [0], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            labels.append(_label(toks[0], lineno))
            prev = 0
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected idx:val, got {tok!r}", lineno)
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise ParseError(f"bad feature {tok!r}", lineno) from None
                if j < 1:
                    raise ParseError(f"feature index {j} must be >= 1", lineno)
                if j <= prev:
                    raise ParseError(f"feature indices must be ascending ({prev} then {j})", lineno)
                if not np.isfinite(v):
                    raise ParseError(f"non-finite feature value {tok!r}", lineno)
                prev = j
                indices.append(j - 1)
                data.append(v)
            indptr.append(len(indices))
    if not labels:
        raise EmptyDatasetError(f"{path} contains no data rows")
    n = max(indices) + 1 if indices else 0
    Z = sp.csr_matrix((data, indices, indptr), shape=(len(labels), n))
    return Dataset(Z, np.array(labels), name or str(path))


def synth_dataset(seed: int, m: int, n: int, separability: float = 30.0, *, decay: float = 1.0) -> Dataset:
    """Gaussian features with a planted separator and logistic label noise.

    Labels are drawn as ``P(y = +1) = expit(separability * z^T w0)`` with the
    margins ``z^T w0`` normalized to unit spread, so large ``separability``
    means little noise.  Nearly separable data push the minimizer far out,
    where the logistic Hessian flattens and the problem becomes as badly
    conditioned as ``L / tau``.  Column ``j`` is additionally scaled by
    ``decay ** (j / (n - 1))``.
    """
    if m < 1 or n < 1:
        raise StructuralError(f"need m, n >= 1, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    scales = decay ** (np.arange(n) / max(n - 1, 1))
    Z = rng.standard_normal((m, n)) * scales
    w0 = rng.standard_normal(n)
    margins = Z @ w0
    s = np.std(margins) if m > 1 else abs(margins[0])
    margins = margins / (s if s > 0 else 1.0)
    p = expit(separability * margins)
    y = np.where(rng.random(m) < p, 1.0, -1.0)
    return Dataset(sp.csr_matrix(Z), y, f"synth-{m}x{n}-s{seed}")
