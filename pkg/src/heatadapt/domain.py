"""Core value types shared by every other module.

Physical/controller constants, grid geometry, spatial profiles, run
configuration, reference signals and the time-indexed trace record.
All types are immutable after construction and validate their own
invariants, so no partially valid value can escape this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "CflViolation",
    "NonPositiveGain",
    "ZeroCoefficient",
    "SignMismatch",
    "Params",
    "EstimatorParams",
    "Grid",
    "GridFunction",
    "SimConfig",
    "ReferenceSignal",
    "Trace",
    "validate_config",
]


class ConfigError(ValueError):
    """A constructed value violates one of the documented invariants."""


class CflViolation(ConfigError):
    """Time step exceeds the explicit-scheme stability bound dt <= dx^2/2."""


class NonPositiveGain(ConfigError):
    """A gain or step parameter that must be positive is not."""


class ZeroCoefficient(ConfigError):
    """The control coefficient b must be nonzero."""


class SignMismatch(ConfigError):
    """Declared sign of b disagrees with the supplied value of b."""


@dataclass(frozen=True)
class EstimatorParams:
    """Constants visible to the observer and the adaptive controller.

    Deliberately does not carry the control coefficient b.  Only its
    sign is assumed known on this side of the loop; everything built
    from an EstimatorParams is guaranteed by construction never to
    read b itself.
    """

    q: float
    sign_b: int
    c0: float
    c1: float

    def __post_init__(self) -> None:
        if not (self.q > 0):
            raise NonPositiveGain(f"q must be > 0, got {self.q}")
        if not (self.c0 > 0):
            raise NonPositiveGain(f"c0 must be > 0, got {self.c0}")
        if not (self.c1 > 0):
            raise NonPositiveGain(f"c1 must be > 0, got {self.c1}")
        if self.sign_b not in (-1, 1):
            raise SignMismatch(f"sign_b must be +1 or -1, got {self.sign_b}")


@dataclass(frozen=True)
class Params:
    """Full parameter set of the plant: the "plant view".

    q : boundary convection gain (> 0), the destabilizing term
    b : true control coefficient (!= 0); hidden from estimator paths
    c0 : controller gain (> 0)
    c1 : observer injection gain (> 0)
    sign_b : declared sign of b; defaults to sign(b), validated if given

    Simulation code that plays the role of the physical plant receives
    this type.  Observer and controller code must go through
    :meth:`estimator_view`, which strips b.
    """

    q: float
    b: float
    c0: float
    c1: float
    sign_b: int = 0

    def __post_init__(self) -> None:
        if not (self.q > 0):
            raise NonPositiveGain(f"q must be > 0, got {self.q}")
        if not (self.c0 > 0):
            raise NonPositiveGain(f"c0 must be > 0, got {self.c0}")
        if not (self.c1 > 0):
            raise NonPositiveGain(f"c1 must be > 0, got {self.c1}")
        if self.b == 0 or not math.isfinite(self.b):
            raise ZeroCoefficient(f"b must be nonzero and finite, got {self.b}")
        true_sign = 1 if self.b > 0 else -1
        if self.sign_b == 0:
            object.__setattr__(self, "sign_b", true_sign)
        elif self.sign_b != true_sign:
            raise SignMismatch(
                f"sign_b={self.sign_b} contradicts b={self.b}"
            )

    def estimator_view(self) -> EstimatorParams:
        """Parameters with b redacted; all that the estimator may see."""
        return EstimatorParams(q=self.q, sign_b=self.sign_b, c0=self.c0, c1=self.c1)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with n nodes, x_i = i/(n-1)."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ConfigError(f"grid needs at least 3 nodes, got {self.n}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        # linspace pins both endpoints exactly and matches i*dx to <= 2 ulp
        x = np.linspace(0.0, 1.0, self.n)
        x.flags.writeable = False
        return x

    @classmethod
    def from_dx(cls, dx: float) -> "Grid":
        n_float = 1.0 / dx + 1.0
        n = int(round(n_float))
        if abs(n_float - n) > 1e-9:
            raise ConfigError(f"dx={dx} does not divide [0,1] into whole cells")
        return cls(n)


class GridFunction:
    """A real-valued spatial profile sampled on a :class:`Grid`.

    Values are copied on construction, checked finite, and frozen.
    Instances are safe to share between runs and threads.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values) -> None:
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.n,):
            raise ConfigError(
                f"values shape {arr.shape} does not match grid with {grid.n} nodes"
            )
        if not np.isfinite(arr).all():
            raise ConfigError("GridFunction values must all be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def _wrap(cls, grid: Grid, arr: np.ndarray) -> "GridFunction":
        # internal fast path: arr is freshly allocated, finite by caller's check
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", arr)
        return obj

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls._wrap(grid, np.zeros(grid.n))

    @property
    def left(self) -> float:
        """Value at x = 0."""
        return float(self.values[0])

    @property
    def right(self) -> float:
        """Value at x = 1."""
        return float(self.values[-1])

    def __repr__(self) -> str:
        return f"GridFunction(n={self.grid.n}, range=[{self.values.min():.3g}, {self.values.max():.3g}])"


@dataclass(frozen=True)
class SimConfig:
    """Discretization, horizon and diagnostic settings for one run.

    dt must satisfy the explicit-scheme stability bound dt <= dx^2/2.
    snapshot_stride == 0 disables field snapshots entirely.
    """

    dt: float
    t_final: float
    grid: Grid
    servo_truncation_J: int = 12
    pe_window_tau: float = 1.0
    pe_threshold: float = 1e-3
    sample_stride: int = 100
    snapshot_stride: int = 0

    def __post_init__(self) -> None:
        dx = self.grid.dx
        if not (self.dt > 0):
            raise NonPositiveGain(f"dt must be > 0, got {self.dt}")
        if self.dt > dx * dx / 2.0:
            raise CflViolation(
                f"dt={self.dt} violates dt <= dx^2/2 = {dx * dx / 2.0}"
            )
        if self.t_final < self.dt:
            raise ConfigError(f"t_final={self.t_final} shorter than one step")
        if not (self.pe_window_tau > 0):
            raise NonPositiveGain(f"pe_window_tau must be > 0, got {self.pe_window_tau}")
        if self.pe_window_tau > self.t_final:
            raise ConfigError(
                f"pe_window_tau={self.pe_window_tau} exceeds t_final={self.t_final}"
            )
        if not (self.pe_threshold > 0):
            raise NonPositiveGain(f"pe_threshold must be > 0, got {self.pe_threshold}")
        if self.servo_truncation_J < 0:
            raise ConfigError("servo_truncation_J must be >= 0")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")
        if self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


def validate_config(p: Params, c: SimConfig) -> None:
    """Re-check every Params/SimConfig invariant, raising on the first violation.

    Construction already enforces these; this entry point exists so
    callers holding possibly stale or externally deserialized values can
    re-validate explicitly.  Raises CflViolation, NonPositiveGain,
    ZeroCoefficient or SignMismatch accordingly; returns None when valid.
    """
    Params(q=p.q, b=p.b, c0=p.c0, c1=p.c1, sign_b=p.sign_b)
    SimConfig(
        dt=c.dt,
        t_final=c.t_final,
        grid=c.grid,
        servo_truncation_J=c.servo_truncation_J,
        pe_window_tau=c.pe_window_tau,
        pe_threshold=c.pe_threshold,
        sample_stride=c.sample_stride,
        snapshot_stride=c.snapshot_stride,
    )


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference r(t) with all time derivatives available in closed form.

    kinds:
      zero                 r(t) = 0
      constant             r(t) = value
      sinusoid             r(t) = amplitude * sin(omega * t)

    derivative(j, t) returns r^(j)(t); the built-ins keep every
    derivative uniformly bounded in t.  For sinusoids with omega > 1 the
    supremum over all derivative orders is unbounded; that case is still
    computable for any finite truncation and is flagged by
    :attr:`uniformly_bounded` so callers can surface the caveat.
    """

    kind: str
    value: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant", "sinusoid"):
            raise ConfigError(f"unknown reference kind {self.kind!r}")
        if self.kind == "sinusoid" and not (
            math.isfinite(self.amplitude) and math.isfinite(self.omega)
        ):
            raise ConfigError("sinusoid parameters must be finite")
        if self.kind == "constant" and not math.isfinite(self.value):
            raise ConfigError("constant reference value must be finite")

    @classmethod
    def zero(cls) -> "ReferenceSignal":
        return cls(kind="zero")

    @classmethod
    def constant(cls, value: float) -> "ReferenceSignal":
        return cls(kind="constant", value=value)

    @classmethod
    def sinusoid(cls, amplitude: float, omega: float) -> "ReferenceSignal":
        return cls(kind="sinusoid", amplitude=amplitude, omega=omega)

    def derivative(self, j: int, t: float) -> float:
        """j-th time derivative of the reference at time t (j = 0 is r itself)."""
        if j < 0:
            raise ValueError("derivative order must be >= 0")
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.value if j == 0 else 0.0
        return self.amplitude * self.omega**j * math.sin(self.omega * t + j * math.pi / 2.0)

    @property
    def uniformly_bounded(self) -> bool:
        """True when sup over t and over all derivative orders is finite."""
        if self.kind == "sinusoid":
            return abs(self.omega) <= 1.0 or self.amplitude == 0.0
        return True

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "sinusoid":
            d["amplitude"] = self.amplitude
            d["omega"] = self.omega
        return d


#: scalar columns recorded at every sample instant, in CSV order
TRACE_COLUMNS = ("u0", "u", "zeta", "w0", "w1", "wnorm", "obs_err_norm", "E", "F")


@dataclass
class Trace:
    """Time-indexed record of one simulation run.

    times are strictly increasing and every recorded scalar is finite.
    ``scalars`` holds one array per name in :data:`TRACE_COLUMNS`;
    ``extras`` carries scenario-specific series (e.g. tracking error,
    servo boundary slope) that are not part of the CSV contract.
    ``snapshots`` is a list of (t, {field_name: values}) pairs.
    """

    times: np.ndarray
    scalars: dict[str, np.ndarray]
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    snapshots: list[tuple[float, dict[str, np.ndarray]]] = field(default_factory=list)
    final_state: object | None = None
    blown_up: bool = False
    blow_up_time: float | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size == 0:
            raise ConfigError("Trace needs at least one sample")
        if self.times.size > 1 and not (np.diff(self.times) > 0).all():
            raise ConfigError("Trace times must be strictly increasing")
        for name in TRACE_COLUMNS:
            if name not in self.scalars:
                raise ConfigError(f"Trace missing scalar column {name!r}")
        for name, arr in list(self.scalars.items()) + list(self.extras.items()):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != self.times.shape:
                raise ConfigError(f"column {name!r} length mismatch")
            if not np.isfinite(arr).all():
                raise ConfigError(f"column {name!r} contains non-finite samples")

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t":
            return self.times
        if name == "V":
            return self.scalars["F"]
        if name in self.scalars:
            return self.scalars[name]
        return self.extras[name]

    @property
    def V(self) -> np.ndarray:
        """Alias: the run Lyapunov functional and the energy F coincide."""
        return self.scalars["F"]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def terminal(self, name: str) -> float:
        return float(self[name][-1])
