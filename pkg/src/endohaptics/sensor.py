"""Three-spring optoelectronic force/torque sensor.

The sensor measures only Fz, Mx and My. Three springs sit at radius ``d``
from the centre, 120 degrees apart; spring 1 has the full moment arm ``d``
about x, springs 2 and 3 sit at -d/2 (x lever) and +/- sqrt(3)/2 d (y lever).
A positive spring deflection is an elongation. Each photo sensor faces its
spring diametrically, so it reads the negated deflection.

Units throughout are N, mm and N*mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)

# Physical envelope of the prototype; documentation only, enters no equation.
OUTER_DIAMETER_MM = 40.0
HEIGHT_MM = 28.0
THROUGH_HOLE_MM = 8.5

SPRING_ANGLES_DEG = (90.0, 210.0, 330.0)

# Printed calibration matrix for k = 0.196 N/mm, d = 16 mm; the sensor
# reports wrench = -PRINTED_CALIBRATION @ readings. Values are 3-decimal.
PRINTED_CALIBRATION = np.array(
    [
        [0.196, 0.196, 0.196],
        [3.135, -1.567, -1.567],
        [0.0, 2.717, -2.717],
    ]
)


class SensorError(ValueError):
    """Invalid sensor input or parameters."""


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise SensorError(f"{name} must be finite, got {values}")


@dataclass(frozen=True)
class SensorParams:
    k: float = 0.196
    d: float = 16.0
    deflection_limit: float = 5.6
    spring_angles: tuple[float, float, float] = SPRING_ANGLES_DEG

    def __post_init__(self) -> None:
        _check_finite("SensorParams", self.k, self.d, self.deflection_limit)
        if self.k <= 0 or self.d <= 0 or self.deflection_limit <= 0:
            raise SensorError(
                f"k, d and deflection_limit must be > 0 (k={self.k}, d={self.d}, "
                f"deflection_limit={self.deflection_limit})"
            )
        if tuple(float(a) for a in self.spring_angles) != SPRING_ANGLES_DEG:
            raise SensorError(
                f"spring_angles must be {SPRING_ANGLES_DEG}, got {self.spring_angles}"
            )


@dataclass(frozen=True)
class Wrench3:
    fz: float = 0.0
    mx: float = 0.0
    my: float = 0.0

    def __post_init__(self) -> None:
        _check_finite("Wrench3", self.fz, self.mx, self.my)

    def as_array(self) -> np.ndarray:
        return np.array([self.fz, self.mx, self.my])

    def __iter__(self):
        return iter((self.fz, self.mx, self.my))

    def scaled(self, factor: float) -> "Wrench3":
        return Wrench3(self.fz * factor, self.mx * factor, self.my * factor)


@dataclass(frozen=True)
class SpringDeflections:
    d1: float
    d2: float
    d3: float
    saturated: bool = False

    def __post_init__(self) -> None:
        _check_finite("SpringDeflections", self.d1, self.d2, self.d3)

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3])


@dataclass(frozen=True)
class PhotoReadings:
    dA: float
    dB: float
    dC: float

    def __post_init__(self) -> None:
        _check_finite("PhotoReadings", self.dA, self.dB, self.dC)

    def as_array(self) -> np.ndarray:
        return np.array([self.dA, self.dB, self.dC])


@dataclass(frozen=True)
class CalibrationMatrix:
    """Linear map from photo readings (mm) to wrench (N, N*mm).

    ``m`` already carries the leading minus sign: ``wrench = m @ readings``.
    ``residual`` is the least-squares residual norm when the matrix was fit
    from data, ``None`` for the analytic matrix.
    """

    m: np.ndarray
    residual: float | None = None

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float)
        if m.shape != (3, 3):
            raise SensorError(f"calibration matrix must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SensorError("calibration matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.m))

    @property
    def printed_form(self) -> np.ndarray:
        """Matrix P with wrench = -P @ readings (the layout usually tabulated)."""
        return -self.m


@dataclass
class PhotoNoiseModel:
    """Additive Gaussian noise followed by uniform quantization.

    Owns its RNG; two instances built with the same seed produce the same
    sequence. Do not share one instance between threads.
    """

    sigma: float = 0.0
    quantization_step: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _check_finite("PhotoNoiseModel", self.sigma, self.quantization_step)
        if self.sigma < 0 or self.quantization_step < 0:
            raise SensorError("sigma and quantization_step must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=float)
        if self.sigma > 0:
            out = out + self._rng.normal(0.0, self.sigma, size=out.shape)
        if self.quantization_step > 0:
            out = np.round(out / self.quantization_step) * self.quantization_step
        return out


def forward_deflections(w: Wrench3, p: SensorParams) -> SpringDeflections:
    """Superpose the Fz, Mx and My spring deflections; clamp at the limit."""
    fz, mx, my = w.fz, w.mx, w.my
    _check_finite("wrench", fz, mx, my)
    k, d = p.k, p.d
    from_fz = fz / (3.0 * k)
    d1 = from_fz + 2.0 * mx / (3.0 * k * d)
    d2 = from_fz - mx / (3.0 * k * d) + my / (SQRT3 * k * d)
    d3 = from_fz - mx / (3.0 * k * d) - my / (SQRT3 * k * d)
    lim = p.deflection_limit
    saturated = abs(d1) > lim or abs(d2) > lim or abs(d3) > lim
    if saturated:
        d1 = min(max(d1, -lim), lim)
        d2 = min(max(d2, -lim), lim)
        d3 = min(max(d3, -lim), lim)
    return SpringDeflections(d1, d2, d3, saturated)


def photo_from_springs(
    s: SpringDeflections, noise: PhotoNoiseModel | None = None
) -> PhotoReadings:
    if noise is None:
        return PhotoReadings(-s.d1, -s.d2, -s.d3)
    a, b, c = noise.apply(np.array([-s.d1, -s.d2, -s.d3]))
    return PhotoReadings(float(a), float(b), float(c))


def compliance_matrix(p: SensorParams) -> np.ndarray:
    """C with readings = -C @ wrench."""
    k, d = p.k, p.d
    return np.array(
        [
            [1.0 / (3 * k), 2.0 / (3 * k * d), 0.0],
            [1.0 / (3 * k), -1.0 / (3 * k * d), 1.0 / (SQRT3 * k * d)],
            [1.0 / (3 * k), -1.0 / (3 * k * d), -1.0 / (SQRT3 * k * d)],
        ]
    )


def calibration_matrix(p: SensorParams) -> CalibrationMatrix:
    """Closed-form -C^-1.

    Fz is k times the summed spring elongations, Mx the moment balance about
    x, My the moment balance about y.
    """
    k, kd = p.k, p.k * p.d
    inv = np.array(
        [
            [k, k, k],
            [kd, -0.5 * kd, -0.5 * kd],
            [0.0, 0.5 * SQRT3 * kd, -0.5 * SQRT3 * kd],
        ]
    )
    if not np.all(np.isfinite(inv)) or abs(np.linalg.det(inv)) == 0.0:
        raise ArithmeticError(f"compliance matrix is singular for {p}")
    return CalibrationMatrix(-inv)


def estimate_wrench(r: PhotoReadings, cal: CalibrationMatrix) -> Wrench3:
    m = cal.m
    a, b, c = r.dA, r.dB, r.dC
    return Wrench3(
        m[0, 0] * a + m[0, 1] * b + m[0, 2] * c,
        m[1, 0] * a + m[1, 1] * b + m[1, 2] * c,
        m[2, 0] * a + m[2, 1] * b + m[2, 2] * c,
    )


def sense(
    w: Wrench3,
    p: SensorParams,
    cal: CalibrationMatrix,
    noise: PhotoNoiseModel | None = None,
) -> tuple[Wrench3, bool]:
    """Full pipeline: wrench -> springs -> photo readings -> estimated wrench.

    Returns the estimate and whether the springs saturated.
    """
    springs = forward_deflections(w, p)
    return estimate_wrench(photo_from_springs(springs, noise), cal), springs.saturated
