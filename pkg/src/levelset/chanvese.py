"""Two-region segmentation energy on feature grids, with the unrolled
alternating solver.

The energy of a level set phi against a C-channel feature grid F is

    lambda1 * sum |F - c1|^2 H(phi) + lambda2 * sum |F - c2|^2 (1 - H(phi))
      + mu * sum dirac(phi) |grad phi|

where H and dirac are the soft step/impulse relaxations, c1/c2 are the
soft per-channel means inside and outside the current level set, and
sums run over pixels with unit area (so energies scale with resolution).
Minimization alternates the closed-form constant update with one
explicit Euler step on phi per iteration; the relaxation sharpness and
step size may change per step. The whole run is a fixed feedforward
computation that `autodiff` differentiates exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .diffops import _sobel_pair, _sobel_x, _sobel_y
from .errors import DimensionError, DivergenceError, ParameterError
from .fields import Array, BinaryMask, FeatureField, ScalarField, Tsdf, scalar_data
from .tsdf import SoftParams, _dirac, _heaviside, mask_from_tsdf

# sigmoid-scaled prediction heads emit hyperparameters in (0, 2); values
# beyond that are accepted but worth flagging
HEAD_RANGE = 2.0


class HyperRangeWarning(UserWarning):
    """Hyperparameters left the (0, 2) range that prediction heads emit."""


@dataclass(frozen=True)
class InstanceHypers:
    """Per-instance energy weights plus per-step optimization schedules.

    lambda1/lambda2 weigh the inside/outside data terms and mu the
    contour-length penalty (mu = 0 disables it). eps_schedule and
    dt_schedule carry one relaxation sharpness and one step size per
    evolution step; their shared length is the step count N. Empty
    schedules (N = 0) are allowed and leave the input unchanged, as are
    zero step sizes.
    """

    lambda1: float
    lambda2: float
    mu: float
    eps_schedule: tuple[float, ...] = ()
    dt_schedule: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        lam1 = float(self.lambda1)
        lam2 = float(self.lambda2)
        mu = float(self.mu)
        eps = tuple(float(e) for e in self.eps_schedule)
        dts = tuple(float(t) for t in self.dt_schedule)
        for name, value in (("lambda1", lam1), ("lambda2", lam2)):
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")
        if not (math.isfinite(mu) and mu >= 0):
            raise ParameterError(f"mu must be nonnegative, got {mu}")
        if len(eps) != len(dts):
            raise ParameterError(
                f"schedules must have equal length, got {len(eps)} eps and {len(dts)} dt entries"
            )
        if any(not (math.isfinite(e) and e > 0) for e in eps):
            raise ParameterError("eps_schedule entries must be positive")
        if any(not (math.isfinite(t) and t >= 0) for t in dts):
            raise ParameterError("dt_schedule entries must be nonnegative")
        object.__setattr__(self, "lambda1", lam1)
        object.__setattr__(self, "lambda2", lam2)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "eps_schedule", eps)
        object.__setattr__(self, "dt_schedule", dts)
        peak = max((lam1, lam2, mu, *eps, *dts))
        if peak >= HEAD_RANGE:
            warnings.warn(
                f"hyperparameter {peak:g} is outside the (0, {HEAD_RANGE:g}) head range",
                HyperRangeWarning,
                stacklevel=2,
            )

    @property
    def steps(self) -> int:
        return len(self.eps_schedule)

    @classmethod
    def constant(
        cls,
        steps: int,
        *,
        lambda1: float = 1.0,
        lambda2: float = 1.0,
        mu: float = 0.05,
        eps: float = 1.0,
        dt: float = 0.5,
    ) -> "InstanceHypers":
        """Schedules that repeat a single eps/dt for every step."""
        return cls(lambda1, lambda2, mu, (float(eps),) * steps, (float(dt),) * steps)


@dataclass(frozen=True, eq=False)
class RegionConstants:
    """Soft per-channel feature means inside (c1) and outside (c2)."""

    c1: Array
    c2: Array

    def __post_init__(self) -> None:
        c1 = np.array(self.c1, dtype=np.float64, copy=True).reshape(-1)
        c2 = np.array(self.c2, dtype=np.float64, copy=True).reshape(-1)
        if c1.size != c2.size:
            raise DimensionError(f"c1 and c2 must have equal length, got {c1.size} and {c2.size}")
        if not (np.isfinite(c1).all() and np.isfinite(c2).all()):
            raise ParameterError("region constants must be finite")
        c1.setflags(write=False)
        c2.setflags(write=False)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def channels(self) -> int:
        return int(self.c1.size)


@dataclass(frozen=True)
class EvolveOptions:
    """Numerical guards and bookkeeping knobs for the solver."""

    # guards the possibly-empty-region denominator of the constant update
    eta_div: float = 1e-8
    # smooths |grad phi| inside the curvature term
    eta_curv: float = 1e-8
    # relaxation used for the recorded initial energy when no steps run
    initial_energy_eps: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta_div", "eta_curv", "initial_energy_eps"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)


DEFAULT_OPTIONS = EvolveOptions()


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Final level set plus the per-step energy and constants trace.

    phi_final is the raw evolved field: steps never re-clamp it to
    [-1, 1], so use `normalized()` to recover a TSDF-range field.
    energies holds one entry for the initial state and one per step,
    each evaluated with that step's relaxation and constants.
    """

    phi_final: ScalarField
    energies: tuple[float, ...]
    constants: tuple[RegionConstants, ...]
    truncation_radius: float

    @property
    def steps(self) -> int:
        return len(self.constants)

    def final_mask(self) -> BinaryMask:
        return mask_from_tsdf(self.phi_final)

    def normalized(self) -> Tsdf:
        return Tsdf(ScalarField(np.clip(self.phi_final.data, -1.0, 1.0)), self.truncation_radius)


@dataclass(eq=False)
class _StepRecord:
    """Forward intermediates of one step, kept for the adjoint pass."""

    eps: float
    dt: float
    hn: Array
    hc: Array
    a1: float
    a2: float
    c1: Array
    c2: Array
    r1: Array
    r2: Array
    gx: Array
    gy: Array
    m: Array
    kappa: Array
    dirac: Array
    drive: Array
    vel: Array


def _constants_raw(fd: Array, phi: Array, eps: float, eta_div: float):
    hn = _heaviside(phi, eps)
    hc = _heaviside(-phi, eps)  # 1 - hn analytically; this form keeps sign swaps exact
    a1 = float(hn.sum())
    a2 = float(hc.sum())
    c1 = (fd * hn).sum(axis=(1, 2)) / (a1 + eta_div)
    c2 = (fd * hc).sum(axis=(1, 2)) / (a2 + eta_div)
    return hn, hc, a1, a2, c1, c2


def _residual(fd: Array, c: Array) -> Array:
    d = fd - c[:, None, None]
    return (d * d).sum(axis=0)


def _energy_raw(
    fd: Array, phi: Array, c1: Array, c2: Array, lam1: float, lam2: float, mu: float, eps: float
) -> float:
    hn = _heaviside(phi, eps)
    hc = _heaviside(-phi, eps)
    total = lam1 * float((_residual(fd, c1) * hn).sum()) + lam2 * float((_residual(fd, c2) * hc).sum())
    if mu != 0.0:
        gx, gy = _sobel_pair(phi)
        total += mu * float((_dirac(phi, eps) * np.sqrt(gx * gx + gy * gy)).sum())
    return total


def _step(
    fd: Array,
    phi: Array,
    lam1: float,
    lam2: float,
    mu: float,
    eps: float,
    dt: float,
    options: EvolveOptions,
    keep: bool,
):
    hn, hc, a1, a2, c1, c2 = _constants_raw(fd, phi, eps, options.eta_div)
    r1 = _residual(fd, c1)
    r2 = _residual(fd, c2)
    gx, gy = _sobel_pair(phi)
    m = np.sqrt(gx * gx + gy * gy + options.eta_curv * options.eta_curv)
    kappa = _sobel_x(gx / m) + _sobel_y(gy / m)
    dirac = _dirac(phi, eps)
    drive = mu * kappa - lam1 * r1 + lam2 * r2
    vel = dirac * drive
    phi_new = phi + dt * vel
    rec = None
    if keep:
        rec = _StepRecord(eps, dt, hn, hc, a1, a2, c1, c2, r1, r2, gx, gy, m, kappa, dirac, drive, vel)
    return phi_new, c1, c2, rec


def _forward(
    fd: Array,
    phi0: Array,
    hypers: InstanceHypers,
    options: EvolveOptions,
    keep_tape: bool,
    record: bool,
):
    """Shared solver loop. `record` adds energies and constants; `keep_tape`
    keeps per-step intermediates. Neither changes the phi iterates."""
    phi = phi0
    phis = [phi]
    records: list[_StepRecord] = []
    constants: list[RegionConstants] = []
    energies: list[float] = []
    lam1, lam2, mu = hypers.lambda1, hypers.lambda2, hypers.mu
    # overflow shows up as non-finite phi and raises DivergenceError below
    with np.errstate(over="ignore", invalid="ignore"):
        if record:
            eps0 = hypers.eps_schedule[0] if hypers.steps else options.initial_energy_eps
            _, _, _, _, c1, c2 = _constants_raw(fd, phi, eps0, options.eta_div)
            energies.append(_energy_raw(fd, phi, c1, c2, lam1, lam2, mu, eps0))
        for n in range(hypers.steps):
            eps = hypers.eps_schedule[n]
            dt = hypers.dt_schedule[n]
            phi_new, c1, c2, rec = _step(fd, phi, lam1, lam2, mu, eps, dt, options, keep_tape)
            if not np.isfinite(phi_new).all():
                raise DivergenceError(n + 1)
            if record:
                constants.append(RegionConstants(c1, c2))
                energies.append(_energy_raw(fd, phi_new, c1, c2, lam1, lam2, mu, eps))
            if keep_tape:
                records.append(rec)
            phis.append(phi_new)
            phi = phi_new
    return phis, records, constants, energies


def _check_spatial(fd: Array, phi: Array) -> None:
    if fd.shape[1:] != phi.shape:
        raise DimensionError(f"features {fd.shape} and phi {phi.shape} disagree on the grid size")


def region_constants(
    features: FeatureField,
    phi: ScalarField | Tsdf,
    params: SoftParams,
    options: EvolveOptions | None = None,
) -> RegionConstants:
    """Closed-form minimizers of the data terms for a fixed phi.

    c1 is the H(phi)-weighted mean of each feature channel, c2 the
    complementary mean; an eta_div guard keeps empty regions finite.
    """
    opts = options or DEFAULT_OPTIONS
    fd = features.data
    p = scalar_data(phi)
    _check_spatial(fd, p)
    _, _, _, _, c1, c2 = _constants_raw(fd, p, params.epsilon, opts.eta_div)
    return RegionConstants(c1, c2)


def energy(
    features: FeatureField,
    phi: ScalarField | Tsdf,
    constants: RegionConstants,
    hypers: InstanceHypers,
    params: SoftParams,
) -> float:
    """Evaluate the segmentation energy at the given constants; always >= 0."""
    fd = features.data
    p = scalar_data(phi)
    _check_spatial(fd, p)
    if constants.channels != features.channels:
        raise DimensionError(
            f"constants carry {constants.channels} channels, features {features.channels}"
        )
    return _energy_raw(fd, p, constants.c1, constants.c2, hypers.lambda1, hypers.lambda2, hypers.mu, params.epsilon)


def descent_direction(
    features: FeatureField,
    phi: ScalarField | Tsdf,
    constants: RegionConstants,
    hypers: InstanceHypers,
    params: SoftParams,
    options: EvolveOptions | None = None,
) -> ScalarField:
    """Pixelwise descent velocity of phi for fixed constants.

    dirac(phi) * (mu * curvature(phi) - lambda1 |F - c1|^2 + lambda2 |F - c2|^2)
    """
    opts = options or DEFAULT_OPTIONS
    fd = features.data
    p = scalar_data(phi)
    _check_spatial(fd, p)
    if constants.channels != features.channels:
        raise DimensionError(
            f"constants carry {constants.channels} channels, features {features.channels}"
        )
    r1 = _residual(fd, constants.c1)
    r2 = _residual(fd, constants.c2)
    gx, gy = _sobel_pair(p)
    m = np.sqrt(gx * gx + gy * gy + opts.eta_curv * opts.eta_curv)
    kappa = _sobel_x(gx / m) + _sobel_y(gy / m)
    vel = _dirac(p, params.epsilon) * (hypers.mu * kappa - hypers.lambda1 * r1 + hypers.lambda2 * r2)
    return ScalarField(vel)


def evolve(
    features: FeatureField,
    phi0: Tsdf,
    hypers: InstanceHypers,
    options: EvolveOptions | None = None,
) -> EvolutionResult:
    """Run the alternating constant/level-set updates for the scheduled steps.

    Every step recomputes the region constants from the current phi with
    that step's relaxation, then takes one explicit Euler step. The
    energy is recorded before the first step and after each step, always
    with the step's own relaxation and constants. Intermediate phi values
    are plain additive updates and are not re-clamped to [-1, 1].

    Raises DivergenceError, naming the step, if phi leaves the finite range.
    """
    opts = options or DEFAULT_OPTIONS
    fd = features.data
    p0 = phi0.field.data
    _check_spatial(fd, p0)
    phis, _, constants, energies = _forward(fd, p0, hypers, opts, keep_tape=False, record=True)
    return EvolutionResult(ScalarField(phis[-1]), tuple(energies), tuple(constants), phi0.truncation_radius)


def classic_chanvese(
    image: ScalarField,
    phi0: Tsdf,
    hypers: InstanceHypers,
    options: EvolveOptions | None = None,
) -> EvolutionResult:
    """Single-channel intensity segmentation; identical to `evolve` on a
    C=1 feature field holding the image."""
    return evolve(FeatureField.from_scalar(image), phi0, hypers, options)
