"""Free-space angular-spectrum propagation between object and sensor planes.

Fields are plain 2-D complex128 arrays indexed [row, col] = [y, x].  The
propagation kernel is the exact scalar free-space transfer function: a
phase-only factor inside the propagating band and zero on the evanescent
frequencies.  All spectra use standard DFT ordering (DC in the corner,
no fftshift).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class OpticalConfig:
    """Geometry of a single object-to-sensor propagation.

    All lengths are in meters.  ``refractive_index`` is fixed at 1.0:
    the kernel implemented here is the free-space one.
    """

    wavelength: float
    distance_z: float
    pixel_pitch: float
    width: int
    height: int
    refractive_index: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.distance_z >= 0:
            raise ValueError(f"distance_z must be >= 0, got {self.distance_z}")
        if not self.pixel_pitch > 0:
            raise ValueError(f"pixel_pitch must be > 0, got {self.pixel_pitch}")
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if self.refractive_index != 1.0:
            raise ValueError("only refractive_index=1.0 (free space) is supported")

    @property
    def k0(self) -> float:
        """Vacuum wave number 2*pi/wavelength (rad/m)."""
        return 2.0 * np.pi / self.wavelength

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class FrequencyGrid:
    """Spatial frequencies (cycles/m) for each spectrum sample, DFT-ordered."""

    vx: np.ndarray
    vy: np.ndarray

    @property
    def radial_sq(self) -> np.ndarray:
        return self.vx**2 + self.vy**2


@dataclass(frozen=True)
class TransferFunction:
    """Band-limited phase-only propagation kernel on the discrete frequency grid.

    ``values`` is unit-modulus wherever ``band_mask`` is true and exactly
    zero elsewhere.
    """

    width: int
    height: int
    values: np.ndarray
    band_mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class SamplingReport:
    """Result of the sampling-rate check against the evanescent cutoff."""

    ok: bool
    fraction_evanescent: float = 0.0


def frequency_grid(config: OpticalConfig) -> FrequencyGrid:
    """Discrete spatial-frequency coordinates for the config's grid.

    Follows numpy's DFT ordering: sample k of an N-point axis sits at
    k/(N*pitch) for k <= N/2, then the negative frequencies.
    """
    fx = np.fft.fftfreq(config.width, d=config.pixel_pitch)
    fy = np.fft.fftfreq(config.height, d=config.pixel_pitch)
    vx, vy = np.meshgrid(fx, fy)
    return FrequencyGrid(vx=vx, vy=vy)


def build_otf(config: OpticalConfig) -> TransferFunction:
    """Free-space transfer function for the configured wavelength and distance.

    In the propagating band (vx^2 + vy^2 strictly below 1/wavelength^2) the
    kernel is exp(j*k0*z*sqrt(1 - (lam*vx)^2 - (lam*vy)^2)); outside it is 0.
    Band-edge samples fall on the strict inequality and map to 0.
    """
    grid = frequency_grid(config)
    lam = config.wavelength
    band = grid.radial_sq < 1.0 / lam**2

    arg = 1.0 - (lam * grid.vx) ** 2 - (lam * grid.vy) ** 2
    # clip guards roundoff just inside the band edge; out-of-band values are discarded
    axial = np.sqrt(np.clip(arg, 0.0, None), where=band, out=np.zeros_like(arg))
    values = np.where(band, np.exp(1j * config.k0 * config.distance_z * axial), 0.0 + 0.0j)

    if not np.all(np.isfinite(values)):
        raise FloatingPointError("transfer function contains non-finite values")
    return TransferFunction(width=config.width, height=config.height, values=values, band_mask=band)


def propagate(field: np.ndarray, otf: TransferFunction, direction: str = "forward") -> np.ndarray:
    """Propagate a field through the kernel by pointwise spectral multiplication.

    ``forward`` maps object plane to sensor plane.  ``backward`` multiplies
    by the conjugate kernel, which inverts the forward step exactly on the
    propagating band (the kernel is unit-modulus there) and zeroes the
    evanescent content, where inversion by division would be undefined.
    """
    if field.shape != otf.shape:
        raise ValueError(f"field shape {field.shape} does not match OTF shape {otf.shape}")
    if direction == "forward":
        kernel = otf.values
    elif direction == "backward":
        kernel = np.conj(otf.values)
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    return np.fft.ifft2(np.fft.fft2(field) * kernel)


def validate_sampling(config: OpticalConfig) -> SamplingReport:
    """Check whether the sampled band lies inside the evanescent cutoff.

    Returns ok when every sampled frequency propagates; otherwise reports
    the fraction of spectrum samples that the kernel will zero out.  A
    capped configuration is usable — reconstruction simply cannot recover
    the zeroed content.
    """
    grid = frequency_grid(config)
    band = grid.radial_sq < 1.0 / config.wavelength**2
    n_out = int(np.count_nonzero(~band))
    if n_out == 0:
        return SamplingReport(ok=True)
    return SamplingReport(ok=False, fraction_evanescent=n_out / band.size)
