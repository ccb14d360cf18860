"""Scenes, measurement matrices, speckle simulation and PGD initialization.

Complex Gaussian convention: w ~ CN(0, sigma^2) means the real and
imaginary parts are independent N(0, sigma^2 / 2), so E|w|^2 = sigma^2.

All randomness flows through numpy's SeedSequence so per-look streams
are independent, reproducible, and independent of any parallel
schedule.  The generator id recorded in serialized ensembles is
"numpy-pcg64".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import StructuralError, ValidationError

RNG_ID = "numpy-pcg64"
FORMAT_VERSION = 1
DEFAULT_X_MIN = 1e-3


@dataclass
class Scene:
    """A real-valued image with pixels in [x_min, 1]."""

    pixels: np.ndarray  # (H, W) float64
    x_min: float = DEFAULT_X_MIN

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2:
            raise StructuralError("scene pixels must be 2-D")
        if self.x_min <= 0:
            raise ValidationError("x_min must be positive")
        self.pixels = np.clip(self.pixels, self.x_min, 1.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def n(self) -> int:
        return self.pixels.size

    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)


def load_scene(path, x_min: float = DEFAULT_X_MIN) -> Scene:
    """Read an 8-bit grayscale PNG/PGM and map to [x_min, 1] via v/255."""
    img = Image.open(path).convert("L")
    arr = np.asarray(img, dtype=float) / 255.0
    return Scene(pixels=arr, x_min=x_min)


def save_image(path, pixels: np.ndarray) -> None:
    """Write pixels in [0,1] as an 8-bit grayscale PNG/PGM."""
    arr = np.clip(np.asarray(pixels, dtype=float), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8)).save(path)


def synthetic_scene(height: int, width: int, seed: int = 0,
                    x_min: float = DEFAULT_X_MIN) -> Scene:
    """A deterministic piecewise-smooth test scene (blobs, bars, a disc).

    Gives natural-image-like structure (smooth regions with edges) for
    experiments that need a ground truth without shipping photographs.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    yv = yy / max(height - 1, 1)
    xv = xx / max(width - 1, 1)
    img = 0.25 + 0.35 * xv + 0.15 * np.sin(2 * np.pi * yv * 1.5)
    # a bright disc and a dark rectangle
    cy, cx, r = 0.35, 0.3, 0.18
    img[(yv - cy) ** 2 + (xv - cx) ** 2 < r ** 2] = 0.9
    img[(yv > 0.55) & (yv < 0.8) & (xv > 0.55) & (xv < 0.85)] = 0.15
    # a few random soft blobs for texture
    for _ in range(4):
        by, bx = rng.uniform(0.1, 0.9, size=2)
        amp = rng.uniform(-0.25, 0.25)
        sig = rng.uniform(0.05, 0.12)
        img = img + amp * np.exp(-((yv - by) ** 2 + (xv - bx) ** 2) / (2 * sig ** 2))
    return Scene(pixels=np.clip(img, 0.0, 1.0), x_min=x_min)


@dataclass
class MeasurementEnsemble:
    """A fixed sensing matrix plus L independent speckled looks."""

    a: np.ndarray                 # (m, n) complex
    looks: list[np.ndarray] = field(default_factory=list)  # L vectors (m,) complex
    sigma_w: float = 1.0
    sigma_z: float = 0.0
    seed: int = 0

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def num_looks(self) -> int:
        return len(self.looks)

    def validate(self) -> None:
        for y in self.looks:
            if y.shape != (self.m,):
                raise StructuralError("look length does not match sensing matrix")
        if self.m > self.n:
            raise StructuralError("ensemble requires m <= n")

    def save(self, path) -> None:
        """Serialize to a single npz archive (header + float64 Re/Im arrays)."""
        y = np.stack(self.looks) if self.looks else np.zeros((0, self.m), complex)
        np.savez(
            path,
            format_version=np.int64(FORMAT_VERSION),
            rng_id=np.bytes_(RNG_ID.encode()),
            m=np.int64(self.m), n=np.int64(self.n), num_looks=np.int64(self.num_looks),
            sigma_w=np.float64(self.sigma_w), sigma_z=np.float64(self.sigma_z),
            seed=np.int64(self.seed),
            a_re=np.ascontiguousarray(self.a.real, dtype="<f8"),
            a_im=np.ascontiguousarray(self.a.imag, dtype="<f8"),
            y_re=np.ascontiguousarray(y.real, dtype="<f8"),
            y_im=np.ascontiguousarray(y.imag, dtype="<f8"),
        )

    @classmethod
    def load(cls, path) -> "MeasurementEnsemble":
        with np.load(path) as z:
            if int(z["format_version"]) != FORMAT_VERSION:
                raise ValidationError("unknown ensemble format version")
            a = z["a_re"] + 1j * z["a_im"]
            y = z["y_re"] + 1j * z["y_im"]
            return cls(a=a, looks=[y[i] for i in range(y.shape[0])],
                       sigma_w=float(z["sigma_w"]), sigma_z=float(z["sigma_z"]),
                       seed=int(z["seed"]))


def complex_gaussian(rng: np.random.Generator, size, sigma: float) -> np.ndarray:
    """CN(0, sigma^2) samples: Re, Im each N(0, sigma^2/2)."""
    scale = sigma / np.sqrt(2.0)
    return rng.normal(scale=scale, size=size) + 1j * rng.normal(scale=scale, size=size)


def haar_partial(m: int, n: int, seed: int) -> np.ndarray:
    """First m rows of a Haar-distributed n x n unitary matrix.

    QR of an iid complex Gaussian square matrix with the phase of the R
    diagonal absorbed into Q, which makes the distribution exactly Haar.
    """
    if m > n:
        raise ValidationError(f"haar_partial requires m <= n (got m={m}, n={n})")
    if m < 1 or n < 1:
        raise ValidationError("matrix dimensions must be positive")
    rng = np.random.default_rng(seed)
    g = complex_gaussian(rng, (n, n), 1.0)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    q = q * (d / np.abs(d))[np.newaxis, :]
    return np.ascontiguousarray(q[:m, :])


def gaussian_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """iid N(0,1) real m x n matrix, deterministic under seed."""
    if m < 1 or n < 1:
        raise ValidationError("matrix dimensions must be positive")
    return np.random.default_rng(seed).standard_normal((m, n))


def simulate(scene: Scene, a: np.ndarray, num_looks: int, sigma_w: float,
             sigma_z: float, seed: int) -> MeasurementEnsemble:
    """Generate y_l = A X w_l + z_l for l = 1..L with independent per-look noise."""
    x = scene.flat()
    if x.size != a.shape[1]:
        raise StructuralError(
            f"scene has {x.size} pixels but sensing matrix has {a.shape[1]} columns")
    ax = a * x[np.newaxis, :]
    looks = []
    children = np.random.SeedSequence(seed).spawn(num_looks)
    for ss in children:
        rng = np.random.default_rng(ss)
        w = complex_gaussian(rng, x.size, sigma_w)
        y = ax @ w
        if sigma_z > 0:
            y = y + complex_gaussian(rng, a.shape[0], sigma_z)
        looks.append(y)
    return MeasurementEnsemble(a=a, looks=looks, sigma_w=sigma_w,
                               sigma_z=sigma_z, seed=seed)


def init_estimate(ens: MeasurementEnsemble, x_min: float = DEFAULT_X_MIN) -> np.ndarray:
    """x_0 = (1/L) sum_l |conj(A)^T y_l|, clipped to [x_min, 1]."""
    ens.validate()
    acc = np.zeros(ens.n)
    ah = ens.a.conj().T
    for y in ens.looks:
        acc += np.abs(ah @ y)
    acc /= max(ens.num_looks, 1)
    return np.clip(acc, x_min, 1.0)
