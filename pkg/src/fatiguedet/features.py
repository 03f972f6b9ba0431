"""ROI geometry (face normalization, eye/mouth windows), feature vector
assembly, and PCA compression.

The feature vector layout is eye ROI pixels row-major (2400 entries for the
default 80x30 window) followed by mouth ROI pixels row-major (1600 for
40x40), each scaled into [0, 1]. With the default geometry that is exactly
4000 entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadK, DegenerateData, DimensionMismatch, ParseError, \
    VersionMismatch, WrongDimensions
from .imaging import Image, Rect, crop, resize_bilinear


@dataclass(frozen=True)
class RoiGeometry:
    """Fixed windows cut from the normalized face image."""

    face_side: int = 100
    eye: Rect = Rect(10, 20, 80, 30)
    mouth: Rect = Rect(30, 60, 40, 40)

    def __post_init__(self):
        for name, r in (("eye", self.eye), ("mouth", self.mouth)):
            if r.x < 0 or r.y < 0 or r.x2 > self.face_side \
                    or r.y2 > self.face_side:
                raise ValueError(f"{name} window {r} does not fit in "
                                 f"{self.face_side}x{self.face_side} face")

    @property
    def vector_length(self) -> int:
        return self.eye.area + self.mouth.area


DEFAULT_GEOMETRY = RoiGeometry()
assert DEFAULT_GEOMETRY.vector_length == 4000


def normalize_face(img: Image, box: Rect,
                   face_side: int = 100) -> Image:
    """Crop the face box and rescale it to the square working size."""
    return resize_bilinear(crop(img, box), face_side, face_side)


def extract_rois(face: Image,
                 geometry: RoiGeometry = DEFAULT_GEOMETRY) -> tuple[Image, Image]:
    """Cut the eye and mouth windows out of a normalized face (pure crops)."""
    side = geometry.face_side
    if face.channels != 1 or face.width != side or face.height != side:
        raise WrongDimensions(
            f"expected {side}x{side} grayscale face, got "
            f"{face.width}x{face.height} with {face.channels} channel(s)")
    return crop(face, geometry.eye), crop(face, geometry.mouth)


def assemble(eye: Image, mouth: Image,
             geometry: RoiGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """Concatenate eye then mouth pixels row-major, scaled by 1/255."""
    if (eye.width, eye.height) != (geometry.eye.w, geometry.eye.h):
        raise WrongDimensions(f"eye ROI must be {geometry.eye.w}x"
                              f"{geometry.eye.h}, got {eye.width}x{eye.height}")
    if (mouth.width, mouth.height) != (geometry.mouth.w, geometry.mouth.h):
        raise WrongDimensions(
            f"mouth ROI must be {geometry.mouth.w}x{geometry.mouth.h}, "
            f"got {mouth.width}x{mouth.height}")
    return np.concatenate([eye.pixels.ravel(), mouth.pixels.ravel()]) / 255.0


def frame_features(img: Image, box: Rect,
                   geometry: RoiGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """normalize_face -> extract_rois -> assemble for one frame."""
    face = normalize_face(img, box, geometry.face_side)
    eye, mouth = extract_rois(face, geometry)
    return assemble(eye, mouth, geometry)


# ---------------------------------------------------------------------------
# Eigensolver

def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-10,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Sweeps Givens rotations over all (p, q) pairs until the off-diagonal
    Frobenius norm drops below tol. Returns (eigenvalues, eigenvectors) with
    eigenvectors in columns, unordered.
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v
    skip = tol / (2.0 * n)
    for _ in range(max_sweeps):
        off = a - np.diag(np.diag(a))
        if float(np.sqrt((off * off).sum())) < tol:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    off = a - np.diag(np.diag(a))
    if float(np.sqrt((off * off).sum())) >= tol:
        raise RuntimeError(f"Jacobi eigensolver did not converge to {tol} "
                           f"within {max_sweeps} sweeps")
    return np.diag(a).copy(), v


# ---------------------------------------------------------------------------
# PCA

@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean vector plus k orthonormal components (rows) with eigenvalues."""

    mean: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    def __post_init__(self):
        k, d = self.components.shape
        if k < 1 or self.mean.shape != (d,) or self.eigenvalues.shape != (k,):
            raise ValueError("inconsistent PCA model shapes")
        if np.any(self.eigenvalues < 0):
            raise ValueError("eigenvalues must be non-negative")
        if np.any(np.diff(self.eigenvalues) > 1e-12):
            raise ValueError("eigenvalues must be non-increasing")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise ValueError("components are not orthonormal")
        self.mean.setflags(write=False)
        self.components.setflags(write=False)
        self.eigenvalues.setflags(write=False)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each component made positive, so model
    # files are reproducible
    out = components.copy()
    for row in out:
        idx = int(np.argmax(np.abs(row)))
        if row[idx] < 0:
            row *= -1.0
    return out


def pca_fit(samples: np.ndarray, k: int | None = None,
            variance: float | None = None) -> PcaModel:
    """Fit a PCA basis to rows of `samples`.

    Exactly one of k (component count) or variance (fraction of total
    variance to retain, in (0, 1]) selects the output dimension; with
    neither given, variance defaults to 0.95. For n <= d the n x n Gram
    eigenproblem is solved and eigenvectors mapped back to d-space; the
    covariance convention divides by n - 1 throughout.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D sample matrix with at least 2 rows")
    if k is not None and variance is not None:
        raise BadK("give either k or variance, not both")
    if k is None and variance is None:
        variance = 0.95
    n, d = x.shape
    k_max = min(n - 1, d)
    if k is not None and not 1 <= k <= k_max:
        raise BadK(f"k must be in [1, {k_max}], got {k}")
    if variance is not None and not 0.0 < variance <= 1.0:
        raise BadK(f"variance fraction must be in (0, 1], got {variance}")

    mean = x.mean(axis=0)
    centered = x - mean
    if not np.any(centered):
        raise DegenerateData("all samples are identical")

    if n <= d:
        gram = centered @ centered.T / (n - 1)
        scale = float(np.abs(gram).max())
        lam, vecs = jacobi_eigh(gram / scale)
        lam = lam * scale
    else:
        cov = centered.T @ centered / (n - 1)
        scale = float(np.abs(cov).max())
        lam, vecs = jacobi_eigh(cov / scale)
        lam = lam * scale

    order = np.argsort(lam)[::-1]
    lam = np.maximum(lam[order], 0.0)
    vecs = vecs[:, order]
    cutoff = lam[0] * 1e-12
    rank = int(np.count_nonzero(lam > cutoff))
    lam[lam <= cutoff] = 0.0

    if k is not None and k > rank:
        raise BadK(f"k={k} exceeds the data rank {rank}")
    if n <= d:
        # Gram trick: only eigenvectors with positive eigenvalue map back
        # to unit d-space directions
        back = centered.T @ vecs[:, :rank]
        back /= np.sqrt((back * back).sum(axis=0))
        components_full = back.T
    else:
        components_full = vecs.T[:rank]
    lam_avail = lam[:rank]

    if k is None:
        cum = np.cumsum(lam_avail)
        total = cum[-1] if len(cum) else 0.0
        if total <= 0:
            raise DegenerateData("total variance is zero")
        k = int(np.searchsorted(cum, variance * total) + 1)
        k = min(k, len(lam_avail))

    return PcaModel(mean=mean.copy(),
                    components=_fix_signs(components_full[:k]),
                    eigenvalues=lam_avail[:k].copy())


def pca_project(model: PcaModel, v: np.ndarray) -> np.ndarray:
    """Coordinates of v in the component basis: components @ (v - mean)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.d,):
        raise DimensionMismatch(f"expected length {model.d}, got {v.shape}")
    return model.components @ (v - model.mean)


def pca_project_many(model: PcaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise DimensionMismatch(f"expected (n, {model.d}), got {x.shape}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Back-projection into d-space: mean + components.T @ z."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.k,):
        raise DimensionMismatch(f"expected length {model.k}, got {z.shape}")
    return model.mean + model.components.T @ z


# ---------------------------------------------------------------------------
# PCA1 text format

def save_pca(model: PcaModel) -> str:
    lines = [f"PCA1 {model.d} {model.k}",
             " ".join(repr(float(v)) for v in model.mean)]
    for lam, comp in zip(model.eigenvalues, model.components):
        lines.append(" ".join([repr(float(lam))]
                              + [repr(float(v)) for v in comp]))
    return "\n".join(lines) + "\n"


def load_pca(text: str) -> PcaModel:
    lines = text.splitlines()
    if not lines:
        raise ParseError("line 1: empty PCA file")
    head = lines[0].split()
    if not head or head[0] != "PCA1":
        if head and head[0].startswith("PCA"):
            raise VersionMismatch(f"unsupported version {head[0]!r}")
        raise ParseError("line 1: expected PCA1 header")
    try:
        d, k = int(head[1]), int(head[2])
    except (IndexError, ValueError):
        raise ParseError("line 1: malformed PCA1 header") from None
    if len(lines) < 2 + k:
        raise ParseError(f"line {len(lines)}: expected {2 + k} lines")
    try:
        mean = np.array([float(v) for v in lines[1].split()])
    except ValueError:
        raise ParseError("line 2: bad mean vector") from None
    if mean.shape != (d,):
        raise ParseError(f"line 2: mean has {mean.size} entries, expected {d}")
    eigenvalues = np.empty(k)
    components = np.empty((k, d))
    for i in range(k):
        try:
            row = [float(v) for v in lines[2 + i].split()]
        except ValueError:
            raise ParseError(f"line {3 + i}: bad component row") from None
        if len(row) != d + 1:
            raise ParseError(f"line {3 + i}: expected {d + 1} values, "
                             f"got {len(row)}")
        eigenvalues[i] = row[0]
        components[i] = row[1:]
    try:
        return PcaModel(mean=mean, components=components,
                        eigenvalues=eigenvalues)
    except ValueError as exc:
        raise ParseError(f"invalid PCA model: {exc}") from None
