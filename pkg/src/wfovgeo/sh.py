"""Real spherical-harmonics ray representation.

A camera's pencil of rays is compressed into one 3-vector coefficient per
harmonic: each Cartesian ray component is expanded separately over a real,
orthonormal SH basis and the reconstruction is re-normalized to unit rays.

Evaluation angles come from a fixed identity equirectangular chart over the
pixel grid (``grid_angles``): theta = pi * (v + .5) / H from the +y pole,
phi = 2 pi * (u + .5) / W. The canonical direction for chart angles is

    dir(theta, phi) = (-sin t sin p, cos t, -sin t cos p)

which makes the ray field of an equirectangular camera coincide exactly with
the chart's own direction field.

Basis convention: real spherical harmonics in (l, m) order, l = 0..L,
m = -l..l, orthonormal over the sphere, built from the Condon-Shortley-phase
complex harmonics as sqrt(2) (-1)^m Re/Im(Y_l^m) for m > 0 / m < 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg as sla
from scipy.special import sph_harm_y

from .camera import CameraClass, RayField
from .errors import InputError, NumericalError

_MAX_DEGREE = 8
_COND_LIMIT = 1e12
_RECON_NORM_EPS = 1e-6
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SHBasis:
    """Real SH basis truncated at degree L; size (L+1)^2."""

    degree: int

    def __post_init__(self):
        if not (0 <= self.degree <= _MAX_DEGREE):
            raise InputError(f"degree must be between 0 and {_MAX_DEGREE}")

    @property
    def size(self) -> int:
        return (self.degree + 1) ** 2


@dataclass(frozen=True)
class SHCoeffs:
    """Fitted coefficients: one 3-vector per harmonic, keyed by camera class."""

    degree: int
    coeffs: np.ndarray
    camera_class: CameraClass

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        expected = ((self.degree + 1) ** 2, 3)
        if c.shape != expected:
            raise InputError(f"coefficient array must have shape {expected}")
        object.__setattr__(self, "coeffs", c)

    def to_dict(self) -> dict:
        return {"degree": self.degree,
                "camera_class": self.camera_class.value,
                "coeffs": self.coeffs.tolist()}

    @staticmethod
    def from_dict(data: dict) -> "SHCoeffs":
        try:
            return SHCoeffs(int(data["degree"]), np.asarray(data["coeffs"], dtype=float),
                            CameraClass(data["camera_class"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"malformed coefficient record: {exc}") from exc


class CoeffBank:
    """Immutable store of coefficient sets, retrieved exactly by class label."""

    def __init__(self, entries: Iterable[SHCoeffs]):
        table = {}
        for entry in entries:
            if entry.camera_class in table:
                raise InputError(f"duplicate coefficients for {entry.camera_class}")
            table[entry.camera_class] = entry
        self._table = table

    def labels(self):
        return tuple(self._table.keys())

    def get(self, label: CameraClass) -> SHCoeffs:
        try:
            return self._table[label]
        except KeyError:
            raise InputError(f"no coefficients stored for {label}") from None


def sh_eval(basis: SHBasis, theta, phi) -> np.ndarray:
    """Evaluate all basis functions; output shape is theta.shape + (B,)."""
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    if th.shape != ph.shape:
        raise InputError("theta and phi must have the same shape")
    if np.any(th < -1e-12) or np.any(th > np.pi + 1e-12):
        raise InputError("theta outside [0, pi]")
    if np.any(ph < -1e-12) or np.any(ph >= 2.0 * np.pi + 1e-12):
        raise InputError("phi outside [0, 2*pi)")
    th = np.clip(th, 0.0, np.pi)

    out = np.empty(th.shape + (basis.size,))
    for l in range(basis.degree + 1):
        base = l * l + l
        out[..., base] = sph_harm_y(l, 0, th, ph).real
        for m in range(1, l + 1):
            y = sph_harm_y(l, m, th, ph)
            sign = -1.0 if m % 2 else 1.0
            out[..., base + m] = _SQRT2 * sign * y.real
            out[..., base - m] = _SQRT2 * sign * y.imag
    return out


def grid_angles(width: int, height: int):
    """Chart angles for every pixel of a W x H grid, each shaped (H, W)."""
    if width < 1 or height < 1:
        raise InputError("grid dimensions must be at least 1")
    v, u = np.mgrid[0:height, 0:width].astype(float)
    theta = np.pi * (v + 0.5) / height
    phi = 2.0 * np.pi * (u + 0.5) / width
    return theta, phi


def dir_from_angles(theta, phi) -> np.ndarray:
    """Canonical unit direction for chart angles, shape (..., 3)."""
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    st = np.sin(th)
    return np.stack([-st * np.sin(ph), np.cos(th), -st * np.cos(ph)], axis=-1)


def angles_from_dir(dirs) -> tuple:
    """Inverse of dir_from_angles; phi lands in [0, 2*pi)."""
    d = np.asarray(dirs, dtype=float)
    theta = np.arccos(np.clip(d[..., 1], -1.0, 1.0))
    phi = np.mod(np.arctan2(-d[..., 0], -d[..., 2]), 2.0 * np.pi)
    return theta, phi


def fit_coeffs(basis: SHBasis, rays: RayField, cls: CameraClass) -> SHCoeffs:
    """Least-squares fit of raw ray components on the identity chart.

    Solves, per Cartesian channel, min_k sum_masked || A k - d ||^2 with A the
    basis evaluated at grid_angles. QR factorization; a design-matrix condition
    estimate above 1e12 raises NumericalError naming the deficient degree.
    """
    mask = rays.mask
    n = int(mask.sum())
    if n < basis.size:
        raise InputError(f"need at least {basis.size} masked pixels, have {n}")
    theta, phi = grid_angles(rays.width, rays.height)
    design = sh_eval(basis, theta[mask], phi[mask])
    q, r = np.linalg.qr(design)
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[0] == 0.0 or not np.isfinite(sv).all() or sv[0] / max(sv[-1], 1e-300) > _COND_LIMIT:
        _, _, vt = np.linalg.svd(r)
        weak = int(np.argmax(np.abs(vt[-1])))
        degree = int(np.floor(np.sqrt(weak)))
        raise NumericalError(
            f"rank-deficient SH design matrix (deficient at degree {degree})")
    coeffs = sla.solve_triangular(r, q.T @ rays.dirs[mask])
    return SHCoeffs(basis.degree, coeffs, cls)


def reconstruct_rays(coeffs: SHCoeffs, width: int, height: int) -> RayField:
    """Evaluate the expansion on the chart and normalize to unit rays.

    Pixels whose pre-normalization norm falls below 1e-6 are masked out.
    """
    theta, phi = grid_angles(width, height)
    values = sh_eval(SHBasis(coeffs.degree), theta, phi) @ coeffs.coeffs
    norms = np.linalg.norm(values, axis=-1)
    mask = norms >= _RECON_NORM_EPS
    dirs = np.zeros_like(values)
    dirs[mask] = values[mask] / norms[mask][..., None]
    return RayField(dirs, mask)


def unit_vector_angle(a, b) -> np.ndarray:
    """Angle between unit vectors: arccos(clamp(a.b)) evaluated stably.

    2 atan2(|a-b|, |a+b|) equals the arccos form but returns exactly 0 for
    identical vectors instead of arccos(1 - ulp) ~ 1.5e-8.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(a - b, axis=-1),
                            np.linalg.norm(a + b, axis=-1))


def angular_error(a: RayField, b: RayField) -> tuple:
    """(RMS, max) angle in radians between two fields on their mask overlap."""
    if a.dirs.shape != b.dirs.shape:
        raise InputError("ray fields have different dimensions")
    both = a.mask & b.mask
    if not both.any():
        raise InputError("mask intersection is empty")
    ang = unit_vector_angle(a.dirs[both], b.dirs[both])
    return float(np.sqrt(np.mean(ang ** 2))), float(ang.max())
