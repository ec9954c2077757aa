"""Time evolution of the controlled oscillator equation.

The evolution law used everywhere is

    d/dt psi = i H psi - i u(t) K(x) psi + i sigma |psi|^2 psi,

with sigma = 0 (bilinear), +1 (defocusing cubic) or -1 (focusing cubic).
Two independent integrators are provided: a Strang split-step scheme
alternating exact free-flow phases with the exact pointwise
potential/nonlinear phase, and a fixed-point iteration of the integral
(Duhamel) form of the equation, which serves as a cross-check oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .controls import ControlSignal, PotentialSpec
from .hermite import (
    GridField,
    HermiteBasis,
    SpectralField,
    _analyze_array,
    _analyze_batch,
    _synth_array,
    _synth_batch,
    spectral_field,
)
from .operators import eigenvalues, free_propagate, lp_norm, sobolev_norm

H1_DIVERGENCE_LIMIT = 1.0e6


class SimulationDiverged(RuntimeError):
    """H1 norm passed the divergence guard (possible focusing blow-up)."""

    def __init__(self, t: float, h1: float):
        super().__init__(
            f"H1 norm {h1:.3e} exceeded {H1_DIVERGENCE_LIMIT:.0e} at t = {t:.6g}"
        )
        self.t = t
        self.h1 = h1


class PicardDidNotConverge(RuntimeError):
    """Fixed-point iteration failed to contract within the iteration budget."""

    def __init__(self, n_iter: int, last_ratio: float):
        super().__init__(
            f"no contraction after {n_iter} iterations "
            f"(last ratio {last_ratio:.3g}); shrink the time window"
        )
        self.n_iter = n_iter
        self.last_ratio = last_ratio


@dataclass(frozen=True)
class InitialState:
    """Named initial data: an eigenstate, a coherent state, or a random
    field with power-law coefficient decay."""

    kind: str
    mode: tuple = (0,)
    displacement: complex = 1.0
    decay: float = 2.0
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    dim: int
    n_modes: int
    sigma: int
    t_final: float
    dt: float
    initial_state: InitialState
    potential: PotentialSpec
    control: ControlSignal
    quad_factor: int = 2
    record_times: tuple = ()
    sobolev_s: tuple = (0.0, 1.0, 2.0)
    residual_k: int = 0
    residual_beta: float = 0.4
    integrator: str = "strang"
    picard_tol: float = 1e-10
    picard_max_iter: int = 60
    picard_window: float = 0.1

    def validate(self) -> None:
        if self.sigma not in (-1, 0, 1):
            raise ValueError(f"sigma must be -1, 0 or 1, got {self.sigma}")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.integrator not in ("strang", "picard"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        for t in self.record_times:
            if not 0.0 <= t <= self.t_final + 1e-12:
                raise ValueError(f"record time {t} outside [0, {self.t_final}]")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    state: SpectralField
    l2: float
    energy: float
    sobolev: dict
    residual_sobolev: float
    linf: float


@dataclass(frozen=True)
class Trajectory:
    cfg: SimConfig
    dt: float
    psi0: SpectralField
    records: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def final_state(self) -> SpectralField:
        return self.records[-1].state


def make_initial_state(basis: HermiteBasis, spec: InitialState) -> SpectralField:
    """Realize a named initial state as a unit-L2 coefficient array."""
    n, d = basis.n_modes, basis.dim
    shape = (n,) * d
    if spec.kind == "eigenstate":
        mode = tuple(spec.mode) if not np.isscalar(spec.mode) else (spec.mode,)
        if len(mode) != d:
            raise ValueError("eigenstate mode index does not match dim")
        c = np.zeros(shape, dtype=complex)
        c[mode] = 1.0
        return spectral_field(basis, c)
    if spec.kind == "coherent":
        alpha = complex(spec.displacement)
        k = np.arange(n)
        log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n)))))
        axis = np.exp(k * np.log(np.abs(alpha) + 1e-300) - 0.5 * log_fact) * np.exp(
            1j * k * np.angle(alpha)
        )
        c = axis
        for _ in range(d - 1):
            c = np.multiply.outer(c, axis)
        c = c / np.sqrt(np.sum(np.abs(c) ** 2))
        return spectral_field(basis, c)
    if spec.kind == "random_decay":
        rng = np.random.default_rng(spec.seed)
        lam = eigenvalues(d, n)
        rho = lam ** -(spec.decay + 0.5)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        c = rho * np.exp(1j * theta)
        c = c / np.sqrt(np.sum(np.abs(c) ** 2))
        return spectral_field(basis, c)
    raise ValueError(f"unknown initial state kind {spec.kind!r}")


def grid_nonlinear_phase(
    values: GridField, sigma: int, k_values: np.ndarray, u_integral: float, dt: float
) -> GridField:
    """Exact flow of the pointwise phase equation over one step.

    values -> exp(-i (K * U - sigma |values|^2 * dt)) * values, with
    U the integral of u over the step.  Moduli are unchanged exactly.
    """
    v = values.values
    phase = k_values * u_integral - sigma * np.abs(v) ** 2 * dt
    return GridField(values.dim, v * np.exp(-1j * phase))


def _phase_kernel(v: np.ndarray, sigma: int, k_values: np.ndarray, u_int: float, dt: float):
    return v * np.exp(-1j * (k_values * u_int - sigma * np.abs(v) ** 2 * dt))


class _StrangStepper:
    """Precomputed tables for repeated steps of fixed size."""

    def __init__(self, basis: HermiteBasis, cfg: SimConfig, dt: float):
        self.basis = basis
        self.cfg = cfg
        self.dt = dt
        lam = eigenvalues(basis.dim, basis.n_modes)
        self.lam = lam
        self.half_phase = np.exp(0.5j * lam * dt)
        self.k_values = cfg.potential.grid_values

    def step(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        c = self.half_phase * coeffs
        v = _synth_array(self.basis, c)
        u_int = self.cfg.control.integral(t, t + self.dt)
        v = _phase_kernel(v, self.cfg.sigma, self.k_values, u_int, self.dt)
        c = _analyze_array(self.basis, v)
        return self.half_phase * c


def strang_step(
    basis: HermiteBasis, state: SpectralField, t: float, dt: float, cfg: SimConfig
) -> SpectralField:
    """One split step: half free flow, exact pointwise phase, half free flow."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = _StrangStepper(basis, cfg, dt)
    return SpectralField(state.dim, state.n_modes, stepper.step(state.coeffs, t))


def energy(basis: HermiteBasis, state: SpectralField) -> float:
    """E = <psi, H psi> + |psi|_L2^2 + 0.5 |psi|_L4^4.

    Invariant of the exact flow for the defocusing equation with u = 0.
    """
    lam = eigenvalues(basis.dim, basis.n_modes)
    a2 = np.abs(state.coeffs) ** 2
    quad_part = float(np.sum(lam * a2) + np.sum(a2))
    v = np.abs(_synth_array(basis, state.coeffs)) ** 4
    for _ in range(basis.dim):
        v = np.tensordot(v, basis.phys_weights, axes=(0, 0))
    return quad_part + 0.5 * float(v)


def _record(
    basis: HermiteBasis,
    cfg: SimConfig,
    t: float,
    coeffs: np.ndarray,
    psi0: SpectralField,
) -> TrajectoryRecord:
    state = SpectralField(basis.dim, basis.n_modes, coeffs.copy())
    l2 = float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))
    sob = {s: sobolev_norm(basis, state, s) for s in cfg.sobolev_s}
    free = free_propagate(basis, psi0, t)
    diff = SpectralField(basis.dim, basis.n_modes, coeffs - free.coeffs)
    res = sobolev_norm(basis, diff, cfg.residual_k + cfg.residual_beta)
    linf = lp_norm(basis, GridField(basis.dim, _synth_array(basis, coeffs)), np.inf)
    return TrajectoryRecord(t, state, l2, energy(basis, state), sob, res, linf)


def _snap_records(cfg: SimConfig, n_steps: int, dt: float) -> dict:
    times = cfg.record_times if cfg.record_times else (0.0, cfg.t_final)
    idx = {}
    for t in times:
        j = int(round(t / dt))
        idx[min(max(j, 0), n_steps)] = True
    return idx


def simulate(basis: HermiteBasis, cfg: SimConfig) -> Trajectory:
    """March the state from 0 to t_final, recording diagnostics.

    Record times snap to the nearest integrator step.  Deterministic for a
    given config (the only randomness is the seeded initial state).
    Raises SimulationDiverged when the H1 norm passes the guard.
    """
    cfg.validate()
    psi0 = make_initial_state(basis, cfg.initial_state)
    n_steps = max(1, int(round(cfg.t_final / cfg.dt)))
    dt = cfg.t_final / n_steps
    record_at = _snap_records(cfg, n_steps, dt)
    records = []

    if cfg.integrator == "picard":
        return _simulate_picard(basis, cfg, psi0, n_steps, dt, record_at)

    stepper = _StrangStepper(basis, cfg, dt)
    lam = stepper.lam
    c = psi0.coeffs.copy()
    if 0 in record_at:
        records.append(_record(basis, cfg, 0.0, c, psi0))
    for j in range(n_steps):
        c = stepper.step(c, j * dt)
        h1 = float(np.sqrt(np.sum(lam * np.abs(c) ** 2)))
        if not np.isfinite(h1) or h1 > H1_DIVERGENCE_LIMIT:
            raise SimulationDiverged((j + 1) * dt, h1)
        if (j + 1) in record_at:
            records.append(_record(basis, cfg, (j + 1) * dt, c, psi0))
    return Trajectory(cfg, dt, psi0, records)


@dataclass(frozen=True)
class PicardResult:
    """Fixed point of the integral map plus contraction diagnostics."""

    state: SpectralField
    n_iter: int
    distances: tuple
    ratios: tuple


def picard_solve(
    basis: HermiteBasis,
    cfg: SimConfig,
    t_final: float,
    psi0: SpectralField | None = None,
    t_offset: float = 0.0,
) -> PicardResult:
    """Iterate the integral form of the equation to its fixed point.

    psi(t) = e^{itH} psi0
             - i int_0^t u(s) e^{i(t-s)H} (K psi)(s) ds
             + i sigma int_0^t e^{i(t-s)H} (|psi|^2 psi)(s) ds

    on a uniform s-grid of spacing cfg.dt, integrals by the composite
    trapezoid rule, seeded with the free evolution.  t_final must be small
    enough for the map to contract; callers restart in windows otherwise.
    Successive iterates are compared in the sup-over-time L2 distance.
    """
    cfg.validate()
    if psi0 is None:
        psi0 = make_initial_state(basis, cfg.initial_state)
    n = max(1, int(round(t_final / cfg.dt)))
    h = t_final / n
    ts = np.arange(n + 1) * h
    lam_flat = eigenvalues(basis.dim, basis.n_modes).reshape(-1)
    shape = (n + 1,) + (basis.n_modes,) * basis.dim

    phases = np.exp(1j * np.outer(ts, lam_flat))
    free = (phases * psi0.coeffs.reshape(-1)).reshape(shape)
    u_vals = cfg.control(t_offset + ts)
    k_grid = cfg.potential.grid_values
    gshape = (-1,) + (1,) * basis.dim

    psi = free.copy()
    dists, ratios = [], []
    for it in range(cfg.picard_max_iter):
        grids = _synth_batch(basis, psi)
        f = (
            -1j * u_vals.reshape(gshape) * k_grid * grids
            + 1j * cfg.sigma * np.abs(grids) ** 2 * grids
        )
        fc = _analyze_batch(basis, f).reshape(n + 1, -1)
        fc *= np.conj(phases)
        integral = np.zeros_like(fc)
        integral[1:] = np.cumsum(0.5 * h * (fc[:-1] + fc[1:]), axis=0)
        new = free + (phases * integral).reshape(shape)
        dist = float(np.max(np.sqrt(np.sum(np.abs(new - psi) ** 2, axis=tuple(range(1, basis.dim + 1))))))
        if dists and dists[-1] > 0.0:
            ratios.append(dist / dists[-1])
        dists.append(dist)
        psi = new
        if dist <= cfg.picard_tol:
            state = SpectralField(basis.dim, basis.n_modes, psi[-1].copy())
            return PicardResult(state, it + 1, tuple(dists), tuple(ratios))
    raise PicardDidNotConverge(cfg.picard_max_iter, ratios[-1] if ratios else np.inf)


def _simulate_picard(basis, cfg, psi0, n_steps, dt, record_at) -> Trajectory:
    """Windowed fixed-point marching used by simulate(integrator='picard')."""
    window_steps = max(1, int(round(cfg.picard_window / dt)))
    records = []
    c = psi0.coeffs.copy()
    if 0 in record_at:
        records.append(_record(basis, cfg, 0.0, c, psi0))
    boundaries = sorted(j for j in record_at if j > 0)
    j0 = 0
    for j1 in boundaries + ([n_steps] if n_steps not in boundaries else []):
        while j0 < j1:
            jn = min(j0 + window_steps, j1)
            span = (jn - j0) * dt
            start = SpectralField(basis.dim, basis.n_modes, c)
            res = picard_solve(basis, cfg, span, psi0=start, t_offset=j0 * dt)
            c = res.state.coeffs
            j0 = jn
        if j1 in record_at:
            records.append(_record(basis, cfg, j1 * dt, c, psi0))
    return Trajectory(cfg, dt, psi0, records)


def config_with(cfg: SimConfig, **kwargs) -> SimConfig:
    """Convenience copy-with-changes for experiment sweeps."""
    return replace(cfg, **kwargs)
