"""Datasets: LIBSVM text files and seeded synthetic generators."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

__all__ = ["Dataset", "load_libsvm", "synth_lasso", "synth_logistic"]

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Feature rows ``A`` (dense or CSR), targets ``labels`` and an optional ground truth."""

    A: object
    labels: np.ndarray
    x_true: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.A.shape[1]


def load_libsvm(path, n_features=None):
    """Parse ``label idx:val ...`` lines (1-indexed features) into a CSR matrix.

    Labels in {0, 1} are mapped to {-1, +1}. Blank lines and ``#`` comments
    are skipped.
    """
    rows, cols, vals, labels = [], [], [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
        r = len(labels)
        labels.append(label)
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad feature {tok!r}") from None
            if not sep or j < 1:
                raise ValidationError(f"{path}:{lineno}: feature index must be >= 1 in {tok!r}")
            if not np.isfinite(v):
                raise ValidationError(f"{path}:{lineno}: non-finite value in {tok!r}")
            rows.append(r)
            cols.append(j - 1)
            vals.append(v)
    if not labels:
        raise ValidationError(f"{path}: no samples")
    q = max(cols) + 1 if cols else 0
    if n_features is not None:
        if n_features < q:
            raise ValidationError(f"{path}: feature index {q} exceeds n_features={n_features}")
        q = n_features
    labels = np.asarray(labels)
    values = set(np.unique(labels).tolist())
    if values <= {0.0, 1.0} and 0.0 in values:
        log.info("%s: mapping labels {0, 1} to {-1, +1}", path)
        labels = np.where(labels == 0.0, -1.0, 1.0)
    elif not values <= {-1.0, 1.0}:
        raise ValidationError(f"{path}: labels must be in {{-1, +1}} or {{0, 1}}, got {sorted(values)}")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), q))
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty.size:
        log.warning("%s: %d all-zero feature rows", path, empty.size)
    return Dataset(A, labels)


def _sparse_truth(rng, q, k):
    if not 0 <= k <= q:
        raise ValidationError(f"sparsity k={k} must lie in [0, q={q}]")
    x = np.zeros(q)
    support = rng.choice(q, size=k, replace=False)
    x[support] = rng.standard_normal(k)
    return x


def _check_shape(m, q):
    if m <= 0 or q <= 0:
        raise ValidationError(f"need m > 0 and q > 0, got m={m}, q={q}")


def synth_lasso(seed, m, q, k, noise):
    """Gaussian design, ``k``-sparse truth, ``b = A x + noise * N(0, 1)``."""
    _check_shape(m, q)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, q))
    x = _sparse_truth(rng, q, k)
    b = A @ x + noise * rng.standard_normal(m)
    return Dataset(A, b, x)


def synth_logistic(seed, m, q, k, noise):
    """Gaussian design, labels ``sign(A x + noise * N(0, 1))``.

    The latent noise keeps the classes overlapping so the unregularised
    problem has a bounded solution.
    """
    _check_shape(m, q)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, q))
    x = _sparse_truth(rng, q, k)
    t = A @ x + noise * rng.standard_normal(m)
    labels = np.where(t >= 0, 1.0, -1.0)
    return Dataset(A, labels, x)
