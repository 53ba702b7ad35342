"""Constructive objects for the nearby-initial-data experiments.

Builds compactly supported divergence-free bumps with prescribed Sobolev
norm, locates a witness point/direction where the time-1 flow map responds
measurably, estimates the Lipschitz and composition constants on a small
ball, and assembles the paired initial-data sequences whose members differ
by a shrinking multiple of the witness direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField, SobolevIndex, VectorField
from .flowmaps import FlowMap, exp_map, invert_map, compose_scalar_with_map
from .solver import SolverConfig, random_divergence_free
from .spectral import grad_perp, resample, resample_vector, sobolev_norm


class ResolvabilityError(ValueError):
    """Requested bump radius is below the grid guard; names the minimal N."""

    def __init__(self, radius: float, grid: Grid):
        n_min = int(np.ceil(16.0 * np.pi / radius))
        n_min += n_min % 2
        super().__init__(
            f"bump radius {radius:.4g} is under-resolved on N={grid.n} "
            f"(needs radius >= 8 * spacing); use N >= {n_min}"
        )
        self.n_min = n_min


@dataclass(frozen=True)
class BumpSpec:
    center: tuple[float, float]
    radius: float
    target_hk_norm: float
    k: float = 3.0
    mode_seed: int = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        if self.target_hk_norm < 0:
            raise ValueError("target norm must be nonnegative")


@dataclass(frozen=True)
class Witness:
    """Direction and point where the flow-map derivative is visibly nonzero.

    shift_direction is the unit vector of the measured derivative at
    x_star: the direction nearby flow maps drift apart in.
    """

    u_base: VectorField
    w_star: VectorField
    x_star: tuple[float, float]
    m: float
    epsilon_fd: float
    shift_direction: tuple[float, float] = (1.0, 0.0)

    def scaled(self, factor: float) -> "Witness":
        """Rescale the direction; m scales linearly with it."""
        return Witness(self.u_base, factor * self.w_star,
                       self.x_star, factor * self.m, self.epsilon_fd,
                       self.shift_direction)


@dataclass(frozen=True)
class EstimatedConstants:
    C1: float | None
    C2: float | None
    sample_count: int
    radius: float

    def merged(self, other: "EstimatedConstants") -> "EstimatedConstants":
        return EstimatedConstants(
            C1=self.C1 if self.C1 is not None else other.C1,
            C2=self.C2 if self.C2 is not None else other.C2,
            sample_count=max(self.sample_count, other.sample_count),
            radius=max(self.radius, other.radius),
        )


@dataclass(frozen=True)
class SequencePair:
    n: int
    u0: VectorField
    u0_tilde: VectorField
    r_n: float
    v_n: VectorField


# ---------------------------------------------------------------------------
# Bumps
# ---------------------------------------------------------------------------

# mode_seed -> (oscillation pattern, phase radians across the radius)
_BUMP_SHAPES = (
    ("radial", 3.0),
    ("plane0", 3.0),
    ("plane60", 5.0),
    ("radial", 8.0),
    ("radial", 12.0),
    ("cross", 10.0),
)


def _bump_profile(grid: Grid, spec: BumpSpec, oscillation: float | None,
                  direction=None):
    """Envelope/oscillation factors and their closed-form gradients."""
    pattern, q = _BUMP_SHAPES[spec.mode_seed % len(_BUMP_SHAPES)]
    if oscillation is not None:
        q = float(oscillation)
    rho = spec.radius
    x1, x2 = grid.nodes()
    d1 = x1 - spec.center[0]
    d2 = x2 - spec.center[1]
    d1 = (d1 + np.pi) % (2.0 * np.pi) - np.pi
    d2 = (d2 + np.pi) % (2.0 * np.pi) - np.pi
    r2 = d1 * d1 + d2 * d2
    inside = r2 < rho * rho

    env = np.zeros_like(r2)
    env[inside] = np.exp(-rho**2 / (rho**2 - r2[inside]))
    env_fac = np.zeros_like(r2)  # dE/dx_i = env_fac * d_i
    env_fac[inside] = env[inside] * (-2.0 * rho**2 / (rho**2 - r2[inside]) ** 2)

    r = np.sqrt(r2)
    if direction is not None:
        # plane carrier along an explicit unit vector (strongest response
        # to displacements in that direction)
        e1, e2 = np.asarray(direction, dtype=float) / np.hypot(*direction)
        t = d1 * e1 + d2 * e2
        g = np.cos(q * t / rho)
        dg = -np.sin(q * t / rho) * q / rho
        return inside, env, env_fac, (d1, d2), g, (dg * e1, dg * e2)
    if pattern == "radial":
        arg = q * r / rho
        g = np.cos(arg)
        dgdr_over_r = np.zeros_like(r)
        np.divide(-np.sin(arg) * q / rho, r, out=dgdr_over_r, where=r > 0)
        g1 = dgdr_over_r * d1
        g2 = dgdr_over_r * d2
    elif pattern in ("plane0", "plane60"):
        theta = 0.0 if pattern == "plane0" else np.pi / 3.0
        e1, e2 = np.cos(theta), np.sin(theta)
        t = d1 * e1 + d2 * e2
        g = np.cos(q * t / rho)
        dg = -np.sin(q * t / rho) * q / rho
        g1, g2 = dg * e1, dg * e2
    elif pattern == "cross":
        s = np.sqrt(0.5)
        ta = (d1 + d2) * s
        tb = (d1 - d2) * s
        ca, cb = np.cos(q * ta / rho), np.cos(q * tb / rho)
        sa, sb = np.sin(q * ta / rho), np.sin(q * tb / rho)
        g = ca * cb
        g1 = (-sa * cb - ca * sb) * (q / rho) * s
        g2 = (-sa * cb + ca * sb) * (q / rho) * s
    else:  # pragma: no cover
        raise AssertionError(pattern)
    return inside, env, env_fac, (d1, d2), g, (g1, g2)


def make_bump(spec: BumpSpec, grid: Grid, derivative: str = "spectral",
              oscillation: float | None = None, direction=None) -> VectorField:
    """Divergence-free bump v = grad_perp(psi) with prescribed H^k norm.

    psi is a smooth compactly supported mollifier times a mode_seed-selected
    oscillation (or a plane carrier along an explicit direction). With
    derivative="spectral" the curl is taken by Fourier multipliers, making
    the spectral divergence exactly zero; with "analytic" the closed-form
    gradient is sampled, making the support exact at the nodes instead.
    The two agree up to spectral truncation.
    """
    if spec.radius < 8.0 * grid.spacing:
        raise ResolvabilityError(spec.radius, grid)
    inside, env, env_fac, (d1, d2), g, (g1, g2) = _bump_profile(
        grid, spec, oscillation, direction)
    if derivative == "spectral":
        psi = ScalarField(grid, env * g)
        v = grad_perp(psi)
    elif derivative == "analytic":
        dpsi1 = env_fac * d1 * g + env * g1
        dpsi2 = env_fac * d2 * g + env * g2
        dpsi1[~inside] = 0.0
        dpsi2[~inside] = 0.0
        v = VectorField.from_values(grid, -dpsi2, dpsi1)
    else:
        raise ValueError(f"unknown derivative mode {derivative!r}")
    if spec.target_hk_norm == 0.0:
        return VectorField.zeros(grid)
    norm = sobolev_norm(v, spec.k)
    if norm == 0.0:
        raise ValueError("bump collapsed to zero; radius too small on this grid")
    return (spec.target_hk_norm / norm) * v


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------


def _default_config(grid: Grid, dt: float = 2e-2) -> SolverConfig:
    return SolverConfig(grid, dt=dt)


def _fd_derivative(u_base: VectorField, w: VectorField, eps: float,
                   base_map: FlowMap, config: SolverConfig) -> np.ndarray:
    """Nodewise (exp(u + eps w) - exp(u)) / eps, shape (N*N, 2)."""
    pert = exp_map(u_base + eps * w, config)
    return (pert.node_positions() - base_map.node_positions()) / eps


def _peaked_streamfunctions(grid: Grid):
    """Stream functions whose rotated gradients peak strongly at one point.

    Mass on the |xi| = 1 modes maximizes pointwise amplitude per unit H^k
    norm, which is what the witness magnitude rewards.
    """
    x1, x2 = grid.nodes()
    return [
        np.cos(x1) + np.cos(x2),
        np.cos(x1) - np.cos(x2),
        np.sin(x1) + np.cos(x2),
        np.cos(x1) + np.sin(x2) + 0.3 * np.cos(x1 + x2),
    ]


def witness_candidates(grid: Grid, count: int, seed: int, k: float):
    """Designed peaked directions first, then seeded random low-mode fields."""
    designed = _peaked_streamfunctions(grid)
    out = []
    for i in range(count):
        if i < len(designed):
            w = grad_perp(ScalarField(grid, designed[i]))
            norm = sobolev_norm(w, k)
            out.append((1.0 / norm) * w)
        else:
            out.append(random_divergence_free(grid, kmax=3, seed=seed + 1000 * i,
                                              hk_norm=1.0, k=k))
    return out


def find_witness(u_base: VectorField, candidate_count: int = 8,
                 epsilon_fd: float = 1e-3, config: SolverConfig | None = None,
                 seed: int = 0, k: float = 3.0,
                 min_m: float = 1e-6) -> Witness:
    """Scan low-mode directions for the largest finite-difference response.

    Differentiates the time-1 flow map at u_base along normalized candidate
    directions, takes the node with the strongest response, and guards the
    step size with a Richardson consistency check at epsilon/2.
    """
    if candidate_count < 1:
        raise ValueError("need at least one candidate")
    grid = u_base.grid
    cfg = config or _default_config(grid)
    base_map = exp_map(u_base, cfg)

    best = None  # (m, flat_index, derivative_vector, w)
    for w in witness_candidates(grid, candidate_count, seed, k):
        deriv = _fd_derivative(u_base, w, epsilon_fd, base_map, cfg)
        mags = np.linalg.norm(deriv, axis=1)
        idx = int(np.argmax(mags))
        m = float(mags[idx])
        if best is None or m > best[0]:
            best = (m, idx, deriv[idx], w)

    m, idx, vec, w = best
    if m < min_m:
        raise ValueError(
            f"degenerate base point: best |d exp| = {m:.2e} < {min_m:g}; "
            "perturb the base field and retry"
        )
    deriv_half = _fd_derivative(u_base, w, 0.5 * epsilon_fd, base_map, cfg)
    m_half = float(np.linalg.norm(deriv_half[idx]))
    if abs(m - m_half) > 0.2 * max(m, m_half):
        raise ValueError(
            f"finite-difference step eps={epsilon_fd:g} is not converged "
            f"(m={m:.4g} vs m={m_half:.4g} at eps/2); reduce epsilon_fd"
        )
    nodes = grid.node_array()
    x_star = (float(nodes[idx, 0]), float(nodes[idx, 1]))
    return Witness(u_base=u_base, w_star=w, x_star=x_star, m=m,
                   epsilon_fd=epsilon_fd,
                   shift_direction=(float(vec[0] / m), float(vec[1] / m)))


# ---------------------------------------------------------------------------
# Constants on a small ball
# ---------------------------------------------------------------------------


def _ball_samples(u_base: VectorField, radius: float, count: int, seed: int,
                  k: float):
    """u_base first, then random low-mode perturbations inside the ball."""
    yield u_base
    rng = np.random.default_rng(seed)
    for i in range(count - 1):
        if radius == 0.0:
            yield u_base
            continue
        r = radius * rng.uniform(0.2, 1.0)
        delta = random_divergence_free(
            u_base.grid, kmax=4, seed=int(rng.integers(2**31)), hk_norm=r, k=k
        )
        yield u_base + delta


SAFETY_FACTOR = 1.5


def estimate_lipschitz_C2(u_base: VectorField, R2: float, sample_count: int = 5,
                          config: SolverConfig | None = None, seed: int = 0,
                          k: float = 3.0) -> EstimatedConstants:
    """C2 with |phi(x)-phi(y)| <= C2 |x-y| over maps of the R2-ball.

    Measures the largest nodal operator norm of D(phi) over exp of sampled
    fields and applies a 1.5x safety factor.
    """
    if sample_count < 5:
        raise ValueError("sample_count must be at least 5")
    cfg = config or _default_config(u_base.grid)
    worst = 0.0
    for u in _ball_samples(u_base, R2, sample_count, seed, k):
        phi = exp_map(u, cfg)
        worst = max(worst, phi.jacobian_opnorm_max())
    return EstimatedConstants(C1=None, C2=SAFETY_FACTOR * worst,
                              sample_count=sample_count, radius=R2)


def estimate_composition_C1(u_base: VectorField, R1: float, sample_count: int = 5,
                            config: SolverConfig | None = None, seed: int = 0,
                            k: float = 3.0, fields_per_map: int = 3) -> EstimatedConstants:
    """Two-sided composition constant for f -> f o phi^{-1} in H^{k-1}."""
    if sample_count < 5:
        raise ValueError("sample_count must be at least 5")
    cfg = config or _default_config(u_base.grid)
    s = k - 1.0
    rng = np.random.default_rng(seed + 77)
    grid = u_base.grid
    tests = []
    for _ in range(fields_per_map):
        f = random_divergence_free(grid, kmax=5, seed=int(rng.integers(2**31)),
                                   hk_norm=1.0, k=s).u1
        tests.append((f, sobolev_norm(f, s)))
    worst = 1.0
    for u in _ball_samples(u_base, R1, sample_count, seed, k):
        inv = invert_map(exp_map(u, cfg))
        for f, ref in tests:
            ratio = sobolev_norm(compose_scalar_with_map(f, inv), s) / ref
            worst = max(worst, ratio, 1.0 / ratio)
    return EstimatedConstants(C1=SAFETY_FACTOR * worst, C2=None,
                              sample_count=sample_count, radius=R1)


# ---------------------------------------------------------------------------
# Paired sequences
# ---------------------------------------------------------------------------


def sequence_radius(n: float, witness: Witness, constants: EstimatedConstants,
                    radius_scale: float = 1.0) -> float:
    if constants.C2 is None:
        raise ValueError("constants must carry C2")
    return radius_scale * witness.m / (8.0 * n * constants.C2)


def build_sequence_pair(n: int, R: float, witness: Witness,
                        constants: EstimatedConstants, grid: Grid,
                        radius_scale: float = 1.0, mode_seed: int = 0,
                        oscillation: float | None = None,
                        direction=None, k: float = 3.0,
                        radius_override: float | None = None) -> SequencePair:
    """Paired initial data u0 = base + bump and u0_tilde = u0 + w_star/n.

    The bump is centered at the witness point with radius m/(8 n C2) (times
    an optional documented inflation for desk-scale resolvability, or an
    explicit override) and H^k norm R/2. Raises ResolvabilityError naming
    the minimal N when the grid cannot carry the bump.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if radius_override is not None:
        r_n = float(radius_override)
    else:
        r_n = sequence_radius(n, witness, constants, radius_scale)
    if r_n < 8.0 * grid.spacing:
        raise ResolvabilityError(r_n, grid)
    spec = BumpSpec(center=witness.x_star, radius=r_n, target_hk_norm=R / 2.0,
                    k=k, mode_seed=mode_seed)
    v_n = make_bump(spec, grid, oscillation=oscillation, direction=direction)
    u_base = resample_vector(witness.u_base, grid)
    w_star = resample_vector(witness.w_star, grid)
    u0 = u_base + v_n
    u0_tilde = u0 + (1.0 / n) * w_star
    return SequencePair(n=n, u0=u0, u0_tilde=u0_tilde, r_n=r_n, v_n=v_n)
