"""Soft-margin SVM trained by sequential minimal optimization, with kernel
evaluation, prediction, and stratified k-fold cross-validation.

Labels are +1 (fatigued) and -1 (alert). A decision value of exactly zero
classifies as fatigued: in a safety system a false alarm beats a missed
detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFinite,
    ParseError,
    SingleClass,
    TooFewSamples,
    VersionMismatch,
)

FATIGUED = 1
ALERT = -1

_SV_EPS = 1e-8
_KERNEL_CACHE_LIMIT = 4096


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family: "linear" (dot product) or "rbf" (exp(-gamma ||u-v||^2)).

    gamma may be None for rbf, meaning "resolve at training time" with the
    scale heuristic 1 / (n_features * var(X)).
    """

    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")


def _resolve_gamma(kernel: KernelSpec, x: np.ndarray) -> KernelSpec:
    if kernel.kind != "rbf" or kernel.gamma is not None:
        return kernel
    var = float(x.var())
    gamma = 1.0 / (x.shape[1] * var) if var > 0 else 1.0 / x.shape[1]
    return KernelSpec("rbf", gamma)


def kernel_matrix(kernel: KernelSpec, a: np.ndarray,
                  b: np.ndarray) -> np.ndarray:
    """Pairwise kernel values, shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if kernel.kind == "linear":
        return a @ b.T
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] \
        - 2.0 * (a @ b.T)
    return np.exp(-kernel.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray = field(repr=False)
    dual_coef: np.ndarray = field(repr=False)  # alpha_i * y_i
    bias: float
    kernel: KernelSpec
    C: float

    def __post_init__(self):
        m, _ = self.support_vectors.shape
        if m < 1 or self.dual_coef.shape != (m,):
            raise ValueError("support vectors and dual coefficients disagree")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if np.any(np.abs(self.dual_coef) > self.C + 1e-9):
            raise ValueError("dual coefficients exceed the box constraint")
        if abs(float(self.dual_coef.sum())) > 1e-6:
            raise ValueError("dual coefficients do not satisfy the "
                             "equality constraint")
        self.support_vectors.setflags(write=False)
        self.dual_coef.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


def dual_objective(x: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                   kernel: KernelSpec) -> float:
    """Soft-margin dual value: sum(a) - 0.5 a^T (yy^T * K) a."""
    k = kernel_matrix(kernel, x, x)
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ k @ ay)


def _bias_from_state(alpha: np.ndarray, y: np.ndarray, g: np.ndarray,
                     c: float) -> float:
    """Average over free support vectors; midpoint of the KKT interval
    when every multiplier sits on a box bound."""
    free = (alpha > _SV_EPS) & (alpha < c - _SV_EPS)
    if np.any(free):
        return float(np.mean(y[free] - g[free]))
    lo, hi = -np.inf, np.inf
    for i in range(len(alpha)):
        bound = y[i] - g[i]
        at_lower = alpha[i] <= _SV_EPS
        # y(g+b) >= 1 at alpha=0; y(g+b) <= 1 at alpha=C
        if (y[i] > 0) == at_lower:
            lo = max(lo, bound)
        else:
            hi = min(hi, bound)
    if not np.isfinite(lo):
        lo = hi
    if not np.isfinite(hi):
        hi = lo
    if not np.isfinite(lo):
        return 0.0
    return float((lo + hi) / 2.0)


def svm_train(x: np.ndarray, y: Sequence[int], C: float = 1.0,
              kernel: KernelSpec = KernelSpec(), tol: float = 1e-3,
              max_passes: int = 200,
              on_step: Callable[[np.ndarray, float], None] | None = None,
              ) -> SvmModel:
    """Solve the soft-margin dual with SMO.

    Each outer pass scans every index; a KKT violator i is paired with the
    j maximizing |E_i - E_j| (falling back to a sequential scan when that
    pair makes no progress). The bias is recomputed from free support
    vectors after every successful step. Training stops when a full pass
    makes no update, or after max_passes passes.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("x must be (n, k) with matching labels")
    if not np.all(np.isfinite(x)):
        raise NonFinite("training data contains non-finite values")
    if not np.all(np.isin(y, (1.0, -1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.all(y > 0) or np.all(y < 0):
        raise SingleClass("training data contains a single class")
    if C <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")

    n = x.shape[0]
    kernel = _resolve_gamma(kernel, x)
    if n <= _KERNEL_CACHE_LIMIT:
        kmat = kernel_matrix(kernel, x, x)

        def krow(i: int) -> np.ndarray:
            return kmat[i]
    else:
        def krow(i: int) -> np.ndarray:
            return kernel_matrix(kernel, x[i:i + 1], x)[0]

    alpha = np.zeros(n)
    g = np.zeros(n)  # sum_j alpha_j y_j K(x_j, x_i), bias excluded
    b = 0.0

    def try_pair(i: int, j: int, e_i: float) -> bool:
        nonlocal b, g
        if i == j:
            return False
        ki, kj = krow(i), krow(j)
        e_j = g[j] + b - y[j]
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(C, C + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - C)
            hi = min(C, alpha[i] + alpha[j])
        if lo >= hi:
            return False
        eta = ki[i] + kj[j] - 2.0 * ki[j]
        if eta <= 0:
            return False
        aj_new = float(np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, lo, hi))
        d_j = aj_new - alpha[j]
        if abs(d_j) < 1e-12:
            return False
        d_i = -y[i] * y[j] * d_j
        alpha[i] = float(np.clip(alpha[i] + d_i, 0.0, C))
        alpha[j] = aj_new
        g += d_i * y[i] * ki + d_j * y[j] * kj
        b = _bias_from_state(alpha, y, g, C)
        assert np.all(alpha >= -1e-12) and np.all(alpha <= C + 1e-9)
        assert abs(float(alpha @ y)) <= 1e-6
        if on_step is not None:
            on_step(alpha.copy(), b)
        return True

    for _ in range(max_passes):
        changed = 0
        for i in range(n):
            e_i = float(g[i] + b - y[i])
            r_i = y[i] * e_i
            violating = (r_i < -tol and alpha[i] < C) or \
                        (r_i > tol and alpha[i] > 0)
            if not violating:
                continue
            errors = g + b - y
            j = int(np.argmax(np.abs(e_i - errors)))
            if try_pair(i, j, e_i):
                changed += 1
                continue
            for j in range(n):
                if try_pair(i, j, e_i):
                    changed += 1
                    break
        if changed == 0:
            break

    sv = alpha > _SV_EPS
    if not np.any(sv):
        # converged with an empty active set; keep the largest multiplier
        # so the model stays well-formed
        sv[int(np.argmax(alpha))] = True
    coef = (alpha * y)[sv]
    coef -= coef.sum() / len(coef)  # remove roundoff drift in the constraint
    return SvmModel(support_vectors=x[sv].copy(), dual_coef=coef,
                    bias=b, kernel=kernel, C=C)


def svm_decision(model: SvmModel, x: np.ndarray) -> float:
    """Signed distance surrogate: sum_i coef_i K(sv_i, x) + b."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(
            f"expected length {model.n_features}, got {x.shape}")
    k = kernel_matrix(model.kernel, model.support_vectors, x[None, :])[:, 0]
    return float(model.dual_coef @ k + model.bias)


def svm_decision_many(model: SvmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"expected (n, {model.n_features}), got {x.shape}")
    k = kernel_matrix(model.kernel, x, model.support_vectors)
    return k @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, x: np.ndarray) -> int:
    """+1 when the decision value is >= 0, else -1."""
    return FATIGUED if svm_decision(model, x) >= 0 else ALERT


# ---------------------------------------------------------------------------
# Cross-validation

@dataclass
class CvReport:
    fold_accuracies: list[float]
    mean_accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int
    fold_test_indices: list[list[int]]


def stratified_folds(y: np.ndarray, folds: int,
                     seed: int) -> list[list[int]]:
    """Seeded stratified fold assignment.

    Each class is shuffled and split into chunks whose sizes differ by at
    most one; remainders rotate across folds so overall fold sizes also
    differ by at most one.
    """
    rng = np.random.default_rng(seed)
    assignments: list[list[int]] = [[] for _ in range(folds)]
    start = 0
    for label in (1, -1):
        idx = np.flatnonzero(y == label)
        rng.shuffle(idx)
        base, rem = divmod(len(idx), folds)
        pos = 0
        for i in range(folds):
            size = base + (1 if i < rem else 0)
            fold = (start + i) % folds
            assignments[fold].extend(int(v) for v in idx[pos:pos + size])
            pos += size
        start = (start + rem) % folds
    return [sorted(fold) for fold in assignments]


def run_folds(x: np.ndarray, y: np.ndarray, fold_indices: list[list[int]],
              C: float, kernel: KernelSpec, tol: float = 1e-3,
              max_passes: int = 200) -> CvReport:
    """Train on the complement of each fold, test on the fold, pool counts."""
    accs: list[float] = []
    tp = fp = tn = fn = 0
    for test_idx in fold_indices:
        test = np.asarray(test_idx, dtype=int)
        mask = np.ones(len(y), dtype=bool)
        mask[test] = False
        model = svm_train(x[mask], y[mask], C=C, kernel=kernel, tol=tol,
                          max_passes=max_passes)
        dec = svm_decision_many(model, x[test])
        pred = np.where(dec >= 0, 1, -1)
        truth = y[test]
        accs.append(float(np.mean(pred == truth)))
        tp += int(np.sum((pred == 1) & (truth == 1)))
        fp += int(np.sum((pred == 1) & (truth == -1)))
        tn += int(np.sum((pred == -1) & (truth == -1)))
        fn += int(np.sum((pred == -1) & (truth == 1)))
    return CvReport(fold_accuracies=accs,
                    mean_accuracy=float(np.mean(accs)),
                    tp=tp, fp=fp, tn=tn, fn=fn,
                    fold_test_indices=[list(f) for f in fold_indices])


def cross_validate(x: np.ndarray, y: Sequence[int], folds: int,
                   C: float = 1.0, kernel: KernelSpec = KernelSpec(),
                   seed: int = 0, tol: float = 1e-3,
                   max_passes: int = 200) -> CvReport:
    """Stratified k-fold cross-validation; deterministic for a given seed."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise TooFewSamples(f"{n} samples cannot fill {folds} folds")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("cross-validation needs both classes")
    if n_pos < 2 or n_neg < 2:
        raise TooFewSamples("need at least 2 samples per class")
    fold_indices = stratified_folds(y, folds, seed)
    return run_folds(x, y, fold_indices, C, kernel, tol=tol,
                     max_passes=max_passes)


# ---------------------------------------------------------------------------
# SVM1 text format

def save_svm(model: SvmModel) -> str:
    head = f"SVM1 {model.n_features} {len(model.dual_coef)} " \
           f"{model.C!r} {model.kernel.kind}"
    if model.kernel.kind == "rbf":
        head += f" {model.kernel.gamma!r}"
    lines = [head, repr(float(model.bias))]
    for coef, sv in zip(model.dual_coef, model.support_vectors):
        lines.append(" ".join([repr(float(coef))]
                              + [repr(float(v)) for v in sv]))
    return "\n".join(lines) + "\n"


def load_svm(text: str) -> SvmModel:
    lines = text.splitlines()
    if not lines:
        raise ParseError("line 1: empty SVM file")
    head = lines[0].split()
    if not head or head[0] != "SVM1":
        if head and head[0].startswith("SVM"):
            raise VersionMismatch(f"unsupported version {head[0]!r}")
        raise ParseError("line 1: expected SVM1 header")
    try:
        k, m, c = int(head[1]), int(head[2]), float(head[3])
        kind = head[4]
    except (IndexError, ValueError):
        raise ParseError("line 1: malformed SVM1 header") from None
    if kind == "linear":
        kernel = KernelSpec("linear")
    elif kind == "rbf":
        try:
            kernel = KernelSpec("rbf", float(head[5]))
        except (IndexError, ValueError):
            raise ParseError("line 1: rbf kernel needs a gamma") from None
    else:
        raise ParseError(f"line 1: unknown kernel token {kind!r}")
    if len(lines) < 2 + m:
        raise ParseError(f"line {len(lines)}: expected {2 + m} lines")
    try:
        bias = float(lines[1])
    except ValueError:
        raise ParseError("line 2: bad bias") from None
    coef = np.empty(m)
    sv = np.empty((m, k))
    for i in range(m):
        try:
            row = [float(v) for v in lines[2 + i].split()]
        except ValueError:
            raise ParseError(f"line {3 + i}: bad support vector row") from None
        if len(row) != k + 1:
            raise ParseError(f"line {3 + i}: expected {k + 1} values, "
                             f"got {len(row)}")
        coef[i] = row[0]
        sv[i] = row[1:]
    try:
        return SvmModel(support_vectors=sv, dual_coef=coef, bias=bias,
                        kernel=kernel, C=c)
    except ValueError as exc:
        raise ParseError(f"invalid SVM model: {exc}") from None
