"""Time integration of 2D incompressible Euler in vorticity form.

State is the vorticity spectrum; velocity is recovered through Biot-Savart
each stage. Classical RK4 with the 2/3 dealiasing rule on the nonlinear
product. Particle positions can be co-integrated with the same RK4 stages,
which is how flow maps are produced without storing the solution path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .fields import Grid, ScalarField, SobolevIndex, VectorField, TWO_PI
from .spectral import FieldEvaluator, biot_savart, divergence, sobolev_norm, vorticity_of

DIV_FREE_RTOL = 1e-10


class CFLError(RuntimeError):
    """Step exceeded the Courant guard; carries the measured number."""

    def __init__(self, courant: float, limit: float):
        super().__init__(
            f"CFL violation: Courant number {courant:.3f} exceeds limit {limit:.3f}"
        )
        self.courant = courant
        self.limit = limit


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float = 1e-3
    t_end: float = 1.0
    dealias: bool = True
    k: SobolevIndex = SobolevIndex(3.0)
    cfl_factor: float = 0.5

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        self.k.require_solution_space()

    def steps(self) -> int:
        return max(1, round(self.t_end / self.dt))

    def effective_dt(self) -> float:
        return self.t_end / self.steps()


@dataclass(frozen=True)
class SolutionSnapshot:
    t: float
    omega: ScalarField
    u: VectorField
    energy: float
    enstrophy: float


def assert_divergence_free(u: VectorField, rtol: float = DIV_FREE_RTOL) -> None:
    scale = u.max_abs()
    if scale == 0.0:
        return
    div = divergence(u).max_abs()
    if div > rtol * scale:
        raise ValueError(
            f"field is not divergence free: max|div u| = {div:.3e} "
            f"> {rtol:g} * max|u| = {rtol * scale:.3e}"
        )


class VorticityStepper:
    """RK4 stepper on the half-complex vorticity spectrum.

    Holds the wavenumber multipliers and dealias mask for one grid, and
    optionally advects particles through the same Runge-Kutta stages.
    """

    def __init__(self, grid: Grid, dealias: bool = True, cfl_factor: float = 0.5,
                 particle_order: int = 5, particle_upsample: int = 1):
        self.grid = grid
        n = grid.n
        k1 = sfft.fftfreq(n, 1.0 / n)[:, None]
        k2 = sfft.rfftfreq(n, 1.0 / n)[None, :]
        ksq = k1 * k1 + k2 * k2
        k1d = k1.copy()
        k1d[n // 2, 0] = 0.0  # Nyquist derivative zeroed
        k2d = k2.copy()
        k2d[0, -1] = 0.0
        self._ik1 = 1j * k1d
        self._ik2 = 1j * k2d
        with np.errstate(divide="ignore", invalid="ignore"):
            self._inv_ksq = np.where(ksq > 0, 1.0 / ksq, 0.0)
        cutoff = n // 3
        self._mask = (np.abs(k1) <= cutoff) & (k2 <= cutoff) if dealias else None
        self.cfl_factor = cfl_factor
        self._porder = particle_order
        self._pupsample = particle_upsample
        self.last_courant = 0.0

    # -- representation helpers ------------------------------------------

    def to_spectrum(self, omega: ScalarField) -> np.ndarray:
        return sfft.rfft2(omega.values)

    def to_field(self, wh: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, sfft.irfft2(wh, s=(self.grid.n, self.grid.n)))

    def velocity_grids(self, wh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = -wh * self._inv_ksq
        n = self.grid.n
        u1 = sfft.irfft2(-self._ik2 * psi, s=(n, n))
        u2 = sfft.irfft2(self._ik1 * psi, s=(n, n))
        return u1, u2

    def _particle_velocity(self, u1: np.ndarray, u2: np.ndarray):
        e1 = FieldEvaluator(ScalarField(self.grid, u1),
                            upsample=self._pupsample, order=self._porder)
        e2 = FieldEvaluator(ScalarField(self.grid, u2),
                            upsample=self._pupsample, order=self._porder)

        def vel(pts):
            return np.column_stack([e1(pts), e2(pts)])

        return vel

    def rhs(self, wh: np.ndarray, need_velocity: bool = False):
        """-u . grad(omega) in spectral space; optionally return u grids."""
        n = self.grid.n
        u1, u2 = self.velocity_grids(wh)
        wx = sfft.irfft2(self._ik1 * wh, s=(n, n))
        wy = sfft.irfft2(self._ik2 * wh, s=(n, n))
        out = -sfft.rfft2(u1 * wx + u2 * wy)
        if self._mask is not None:
            out *= self._mask
        if need_velocity:
            return out, u1, u2
        return out

    # -- stepping ----------------------------------------------------------

    def step(self, wh: np.ndarray, dt: float, particles: np.ndarray | None = None):
        """One classical RK4 step; particles ride the same stages."""
        track = particles is not None
        k1, u1g, u2g = self.rhs(wh, need_velocity=True)
        umax = float(np.hypot(u1g, u2g).max())
        self.last_courant = dt * umax / self.grid.spacing
        if self.last_courant > self.cfl_factor:
            raise CFLError(self.last_courant, self.cfl_factor)
        if track:
            p1 = self._particle_velocity(u1g, u2g)(particles)

        if track:
            k2w, a, b = self.rhs(wh + 0.5 * dt * k1, need_velocity=True)
            p2 = self._particle_velocity(a, b)(particles + 0.5 * dt * p1)
            k3w, a, b = self.rhs(wh + 0.5 * dt * k2w, need_velocity=True)
            p3 = self._particle_velocity(a, b)(particles + 0.5 * dt * p2)
            k4w, a, b = self.rhs(wh + dt * k3w, need_velocity=True)
            p4 = self._particle_velocity(a, b)(particles + dt * p3)
            new_wh = wh + (dt / 6.0) * (k1 + 2.0 * k2w + 2.0 * k3w + k4w)
            new_p = particles + (dt / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
            return new_wh, new_p
        k2w = self.rhs(wh + 0.5 * dt * k1)
        k3w = self.rhs(wh + 0.5 * dt * k2w)
        k4w = self.rhs(wh + dt * k3w)
        return wh + (dt / 6.0) * (k1 + 2.0 * k2w + 2.0 * k3w + k4w), None

    def particle_step(self, wh_start, wh_mid, wh_end, particles: np.ndarray,
                      h: float) -> np.ndarray:
        """RK4 particle step over [t, t+h] from spectra at t, t+h/2, t+h.

        Used when particles ride a coarser step than the vorticity (the
        classical two-rate scheme); accuracy stays fourth order in h.
        """
        v0 = self._particle_velocity(*self.velocity_grids(wh_start))
        vm = self._particle_velocity(*self.velocity_grids(wh_mid))
        v1 = self._particle_velocity(*self.velocity_grids(wh_end))
        k1 = v0(particles)
        k2 = vm(particles + 0.5 * h * k1)
        k3 = vm(particles + 0.5 * h * k2)
        k4 = v1(particles + h * k3)
        return particles + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # -- diagnostics --------------------------------------------------------

    def _mode_weights(self) -> np.ndarray:
        n = self.grid.n
        w = np.full((n, n // 2 + 1), 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    def invariants(self, wh: np.ndarray) -> tuple[float, float]:
        """(energy, enstrophy) = (int |u|^2 dx, int omega^2 dx)."""
        n = self.grid.n
        amp2 = np.abs(wh / n**2) ** 2 * self._mode_weights()
        enstrophy = TWO_PI**2 * amp2.sum()
        energy = TWO_PI**2 * (amp2 * self._inv_ksq).sum()
        return float(energy), float(enstrophy)

    def velocity_hk_norm(self, wh: np.ndarray, s: float) -> float:
        n = self.grid.n
        amp2 = np.abs(wh / n**2) ** 2 * self._mode_weights()
        k1 = sfft.fftfreq(n, 1.0 / n)[:, None]
        k2 = sfft.rfftfreq(n, 1.0 / n)[None, :]
        ksq = k1 * k1 + k2 * k2
        w = (1.0 + ksq) ** s * self._inv_ksq
        return float(np.sqrt(TWO_PI**2 * (amp2 * w).sum()))


def _snapshot(stepper: VorticityStepper, t: float, wh: np.ndarray) -> SolutionSnapshot:
    omega = stepper.to_field(wh)
    u = biot_savart(omega)
    energy, enstrophy = stepper.invariants(wh)
    return SolutionSnapshot(t=t, omega=omega, u=u, energy=energy, enstrophy=enstrophy)


def step_vorticity(omega: ScalarField, dt: float, config: SolverConfig) -> ScalarField:
    """One RK4 step of omega_t = -u . grad(omega), u = biot_savart(omega)."""
    if omega.grid.n != config.grid.n:
        raise ValueError("vorticity grid does not match config grid")
    scale = omega.max_abs()
    if scale > 0 and abs(omega.mean()) > 1e-8 * scale:
        raise ValueError("vorticity must have zero mean on the torus")
    stepper = VorticityStepper(config.grid, config.dealias, config.cfl_factor)
    wh, _ = stepper.step(stepper.to_spectrum(omega), dt)
    return stepper.to_field(wh)


def integrate_vorticity(
    omega0: ScalarField,
    config: SolverConfig,
    particles: np.ndarray | None = None,
    observer=None,
    observe_every: int | None = None,
    particle_order: int = 5,
    particle_upsample: int = 1,
    particle_stride: int = 1,
):
    """Drive the stepper from t=0 to t_end.

    observer(t, omega_field, positions) is called after every
    ``observe_every`` steps and at the final time. particle_stride > 1
    advances particles once per that many vorticity steps (two-rate RK4;
    must be even and divide the step count, else it falls back to 1).
    Returns the stepper, final spectrum, and final particle positions.
    """
    stepper = VorticityStepper(
        config.grid, config.dealias, config.cfl_factor,
        particle_order=particle_order, particle_upsample=particle_upsample,
    )
    wh = stepper.to_spectrum(omega0)
    pos = None if particles is None else np.array(particles, dtype=np.float64)
    steps = config.steps()
    dt = config.effective_dt()
    stride = int(particle_stride)
    if pos is None or stride < 2 or stride % 2 or steps % stride:
        stride = 1
    wh_start = wh_mid = None
    for i in range(steps):
        if stride == 1:
            wh, pos = stepper.step(wh, dt, pos)
        else:
            offset = i % stride
            if offset == 0:
                wh_start = wh
            wh, _ = stepper.step(wh, dt, None)
            if offset + 1 == stride // 2:
                wh_mid = wh
            elif offset + 1 == stride:
                pos = stepper.particle_step(wh_start, wh_mid, wh, pos,
                                            stride * dt)
        t = (i + 1) * dt
        if observer is not None and (
            (observe_every and (i + 1) % observe_every == 0) or i == steps - 1
        ):
            observer(t, stepper.to_field(wh), pos)
    return stepper, wh, pos


def solve(u0: VectorField, config: SolverConfig, observer=None,
          observe_every: int | None = None) -> SolutionSnapshot:
    """Time-T solution map: integrate from u0 to config.t_end.

    The input must be divergence free with zero mean; the run aborts with
    CFLError when the Courant guard trips.
    """
    if u0.grid.n != config.grid.n:
        raise ValueError("initial data grid does not match config grid")
    assert_divergence_free(u0)
    omega0 = vorticity_of(u0)
    stepper, wh, _ = integrate_vorticity(
        omega0, config, observer=observer, observe_every=observe_every
    )
    return _snapshot(stepper, config.t_end, wh)


def apply_scaling_map(u0: VectorField, T: float, config: SolverConfig) -> SolutionSnapshot:
    """Phi_T(u0) computed through the unit-time map of rescaled data.

    Runs the T=1 solve on T*u0 and scales the result back by 1/T; a
    cross-check of solve(u0, t_end=T) through the scaling symmetry.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    inner = replace(config, t_end=1.0)
    snap = solve(T * u0, inner)
    s = 1.0 / T
    # every snapshot component scales linearly (quadratically for the
    # integrals), so no re-derivation is needed
    return SolutionSnapshot(
        t=T,
        omega=s * snap.omega,
        u=s * snap.u,
        energy=s * s * snap.energy,
        enstrophy=s * s * snap.enstrophy,
    )


def pressure_from_velocity(u: VectorField) -> ScalarField:
    """Zero-mean pressure from -Lap(p) = sum_ij di(u_j) dj(u_i)."""
    from .spectral import spectral_derivative, solve_poisson_zero_mean

    d1u1 = spectral_derivative(u.u1, 1).values
    d2u1 = spectral_derivative(u.u1, 2).values
    d1u2 = spectral_derivative(u.u2, 1).values
    d2u2 = spectral_derivative(u.u2, 2).values
    source = d1u1 * d1u1 + 2.0 * d1u2 * d2u1 + d2u2 * d2u2
    src = ScalarField(u.grid, source - source.mean())
    return solve_poisson_zero_mean(-1.0 * src)


# ---------------------------------------------------------------------------
# Builtin initial velocity fields (CLI and experiment defaults).
# ---------------------------------------------------------------------------


def _random_streamfunction(grid: Grid, kmax: int, seed: int) -> ScalarField:
    rng = np.random.default_rng(seed)
    x1, x2 = grid.nodes()
    psi = np.zeros((grid.n, grid.n))
    for j1 in range(-kmax, kmax + 1):
        for j2 in range(-kmax, kmax + 1):
            if j1 == 0 and j2 == 0:
                continue
            if (j1, j2) < (-j1, -j2):
                continue  # one representative per conjugate pair
            a, b = rng.standard_normal(2)
            decay = (1.0 + j1 * j1 + j2 * j2) ** -2.0
            psi += decay * (a * np.cos(j1 * x1 + j2 * x2) + b * np.sin(j1 * x1 + j2 * x2))
    return ScalarField(grid, psi)


def random_divergence_free(grid: Grid, kmax: int = 8, seed: int = 0,
                           hk_norm: float = 1.0, k: float = 3.0) -> VectorField:
    """Seeded band-limited divergence-free field with prescribed H^k norm."""
    from .spectral import grad_perp

    u = grad_perp(_random_streamfunction(grid, kmax, seed))
    norm = sobolev_norm(u, k)
    if norm == 0:
        raise ValueError("degenerate random field")
    return (hk_norm / norm) * u


def builtin_velocity(name: str, grid: Grid) -> VectorField:
    """Named initial fields: zero, taylor-green, shear, base, random<kmax>:<seed>."""
    from .spectral import biot_savart as bs

    x1, x2 = grid.nodes()
    if name == "zero":
        return VectorField.zeros(grid)
    if name == "taylor-green":
        return bs(ScalarField(grid, 2.0 * np.sin(x1) * np.sin(x2)))
    if name == "shear":
        return bs(ScalarField(grid, np.cos(x2)))
    if name == "base":
        # default witness base: smooth low-mode mix, small H^3 norm
        omega = ScalarField(
            grid,
            2.0 * np.sin(x1) * np.sin(x2)
            + 0.8 * np.cos(x2)
            + 0.5 * np.cos(2.0 * x1 + x2),
        )
        u = bs(omega)
        return (0.25 / sobolev_norm(u, 3.0)) * u
    if name.startswith("random"):
        head, _, seed = name.partition(":")
        kmax = int(head[len("random"):] or 8)
        return random_divergence_free(grid, kmax=kmax, seed=int(seed or 0))
    raise ValueError(f"unknown builtin field {name!r}")
