"""Flow maps of torus velocity fields and the time-1 exponential map.

A diffeomorphism close to a shear of the identity is stored as
phi(x) = x + d(x) with periodic displacement d, the only representation in
which spectral calculus applies. Displacements are kept unwrapped so they
stay smooth; positions are reduced modulo 2*pi only when sampling fields.
"""

from __future__ import annotations

import numpy as np

from .fields import Grid, ScalarField, VectorField, wrap_torus
from .solver import SolverConfig, integrate_vorticity
from .spectral import (
    FieldEvaluator,
    VectorEvaluator,
    gradient,
    sobolev_norm,
    solve_poisson_zero_mean,
    spectral_derivative,
    vorticity_of,
)


class MapInversionError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"map inversion did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.residual = residual


class FlowMap:
    """Orientation-preserving diffeomorphism phi(x) = x + displacement(x)."""

    __slots__ = ("grid", "displacement")

    def __init__(self, grid: Grid, displacement: VectorField):
        if displacement.grid.n != grid.n:
            raise ValueError("displacement grid does not match map grid")
        self.grid = grid
        self.displacement = displacement

    @classmethod
    def identity(cls, grid: Grid) -> "FlowMap":
        return cls(grid, VectorField.zeros(grid))

    @classmethod
    def from_positions(cls, grid: Grid, positions: np.ndarray) -> "FlowMap":
        """Build from mapped node positions in node (row-major) order."""
        n = grid.n
        disp = positions.reshape(n, n, 2) - np.stack(grid.nodes(), axis=-1)
        return cls(grid, VectorField.from_values(grid, disp[..., 0], disp[..., 1]))

    def node_positions(self) -> np.ndarray:
        """Images of the grid nodes, shape (N*N, 2), unwrapped."""
        x = self.grid.node_array()
        return x + np.column_stack(
            [self.displacement.u1.values.ravel(), self.displacement.u2.values.ravel()]
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the map at arbitrary points (off-grid displacement)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ev = VectorEvaluator(self.displacement, upsample=2, order=5)
        return points + ev(points)

    def jacobian(self) -> np.ndarray:
        """D(phi) at the nodes, shape (N, N, 2, 2)."""
        d = self.displacement
        j = np.empty((self.grid.n, self.grid.n, 2, 2))
        j[..., 0, 0] = 1.0 + spectral_derivative(d.u1, 1).values
        j[..., 0, 1] = spectral_derivative(d.u1, 2).values
        j[..., 1, 0] = spectral_derivative(d.u2, 1).values
        j[..., 1, 1] = 1.0 + spectral_derivative(d.u2, 2).values
        return j

    def jacobian_det(self) -> np.ndarray:
        j = self.jacobian()
        return j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]

    def jacobian_opnorm_max(self) -> float:
        """Largest spectral norm of D(phi) over the nodes."""
        j = self.jacobian()
        fro2 = (j * j).sum(axis=(-2, -1))
        det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        inner = np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0)
        sig2 = 0.5 * (fro2 + np.sqrt(inner))
        return float(np.sqrt(sig2.max()))

    def max_displacement(self) -> float:
        return self.displacement.max_abs()


def map_gap(a: FlowMap, b: FlowMap) -> float:
    """Largest nodal distance between two maps of the same grid."""
    return float(
        np.linalg.norm(a.node_positions() - b.node_positions(), axis=1).max()
    )


def compose_maps(outer: FlowMap, inner: FlowMap) -> FlowMap:
    """(outer o inner)(x) = outer(inner(x))."""
    pos = outer(inner.node_positions())
    return FlowMap.from_positions(inner.grid, pos)


# ---------------------------------------------------------------------------
# Flow-map integration
# ---------------------------------------------------------------------------


class _PathAdapter:
    """Normalizes a velocity provider and caches per-time evaluators."""

    def __init__(self, u_path, order: int = 5, upsample: int = 2):
        if isinstance(u_path, VectorField):
            self._fn = lambda t: u_path
        elif callable(u_path):
            self._fn = u_path
        elif hasattr(u_path, "velocity_at"):
            self._fn = u_path.velocity_at
        else:
            raise TypeError("u_path must be a VectorField, callable, or provider")
        self._order = order
        self._upsample = upsample
        self._cache: dict[float, VectorEvaluator] = {}

    def evaluator(self, t: float) -> VectorEvaluator:
        ev = self._cache.get(t)
        if ev is None:
            ev = VectorEvaluator(self._fn(t), upsample=self._upsample, order=self._order)
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[t] = ev
        return ev


class SnapshotVelocityPath:
    """Dense-in-time velocity from stored vorticity snapshots.

    Interpolation is cubic in t (4-point Lagrange on the snapshot times);
    the velocity field is recovered from the interpolated vorticity.
    """

    def __init__(self, times, omegas):
        if len(times) < 2:
            raise ValueError("need at least two snapshots")
        self.times = np.asarray(times, dtype=float)
        self.omegas = list(omegas)

    def velocity_at(self, t: float) -> VectorField:
        from .spectral import biot_savart

        idx = np.searchsorted(self.times, t)
        lo = max(0, min(idx - 2, len(self.times) - 4))
        sel = slice(lo, lo + 4) if len(self.times) >= 4 else slice(None)
        ts = self.times[sel]
        fields = self.omegas[sel]
        vals = 0.0
        for i, (ti, fi) in enumerate(zip(ts, fields)):
            w = 1.0
            for j, tj in enumerate(ts):
                if j != i:
                    w *= (t - tj) / (ti - tj)
            vals = vals + w * fi.values
        grid = fields[0].grid
        return biot_savart(ScalarField(grid, vals))


def advect_points(u_path, points: np.ndarray, t_end: float, dt: float,
                  t_start: float = 0.0, order: int = 5, upsample: int = 2) -> np.ndarray:
    """RK4 particle advection of arbitrary positions along a velocity path."""
    path = _PathAdapter(u_path, order=order, upsample=upsample)
    x = np.array(points, dtype=np.float64)
    steps = max(1, round((t_end - t_start) / dt))
    h = (t_end - t_start) / steps
    half_domain = np.pi
    for i in range(steps):
        t = t_start + i * h
        v1 = path.evaluator(t)(x)
        step_size = float(np.abs(v1).max()) * h
        if step_size > half_domain:
            raise RuntimeError(
                f"trajectory step {step_size:.3f} exceeds half the domain; "
                "reduce dt"
            )
        v2 = path.evaluator(t + 0.5 * h)(x + 0.5 * h * v1)
        v3 = path.evaluator(t + 0.5 * h)(x + 0.5 * h * v2)
        v4 = path.evaluator(t + h)(x + h * v3)
        x = x + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    return x


def integrate_flow_map(u_path, t_end: float, dt: float, grid: Grid) -> FlowMap:
    """phi(t_end) from phi_t = u o phi, phi(0) = id, by RK4 on node paths."""
    pos = advect_points(u_path, grid.node_array(), t_end, dt)
    return FlowMap.from_positions(grid, pos)


# ---------------------------------------------------------------------------
# Exponential map
# ---------------------------------------------------------------------------


def exp_map(u0: VectorField, config: SolverConfig) -> FlowMap:
    """Time-1 flow map of the Euler solution with u(0) = u0.

    The Euler solve and the node trajectories share RK4 stages, so no
    solution path is stored. exp(0) is the identity exactly.
    """
    if u0.max_abs() == 0.0:
        return FlowMap.identity(u0.grid)
    omega0 = vorticity_of(u0)
    nodes = u0.grid.node_array()
    _, _, pos = integrate_vorticity(omega0, config, particles=nodes)
    return FlowMap.from_positions(u0.grid, pos)


def exp_map_with_solution(u0: VectorField, config: SolverConfig):
    """exp_map that also returns the final vorticity field."""
    omega0 = vorticity_of(u0)
    nodes = u0.grid.node_array()
    stepper, wh, pos = integrate_vorticity(omega0, config, particles=nodes)
    return FlowMap.from_positions(u0.grid, pos), stepper.to_field(wh)


# ---------------------------------------------------------------------------
# Inversion and composition
# ---------------------------------------------------------------------------


def invert_map(phi: FlowMap, tol: float = 1e-9, max_iter: int = 50,
               initial: FlowMap | None = None) -> FlowMap:
    """psi with phi(psi(x)) = x at every node, by damped Newton iteration.

    Requires an orientation-preserving map with displacement below pi/2.
    A nearby inverse can be passed as the starting point (warm start).
    """
    det = phi.jacobian_det()
    if det.min() <= 0.0:
        raise ValueError(
            f"map is not orientation preserving: min det(Dphi) = {det.min():.3e}"
        )
    if phi.max_displacement() >= np.pi / 2:
        raise ValueError("displacement too large for inversion (>= pi/2)")

    d = phi.displacement
    ev_d = VectorEvaluator(d, upsample=2, order=5)
    j11 = FieldEvaluator(spectral_derivative(d.u1, 1), upsample=2, order=5)
    j12 = FieldEvaluator(spectral_derivative(d.u1, 2), upsample=2, order=5)
    j21 = FieldEvaluator(spectral_derivative(d.u2, 1), upsample=2, order=5)
    j22 = FieldEvaluator(spectral_derivative(d.u2, 2), upsample=2, order=5)

    x = phi.grid.node_array()
    if initial is not None:
        e = np.column_stack([initial.displacement.u1.values.ravel(),
                             initial.displacement.u2.values.ravel()])
    else:
        e = np.zeros_like(x)

    def residual(e_arr):
        return e_arr + ev_d(x + e_arr)

    r = residual(e)
    rmax = float(np.abs(r).max())
    for iteration in range(max_iter):
        if rmax <= tol:
            disp = VectorField.from_values(
                phi.grid,
                e[:, 0].reshape(phi.grid.n, phi.grid.n),
                e[:, 1].reshape(phi.grid.n, phi.grid.n),
            )
            return FlowMap(phi.grid, disp)
        p = x + e
        a = 1.0 + j11(p)
        b = j12(p)
        c = j21(p)
        dd = 1.0 + j22(p)
        det_j = a * dd - b * c
        delta1 = (dd * r[:, 0] - b * r[:, 1]) / det_j
        delta2 = (-c * r[:, 0] + a * r[:, 1]) / det_j
        step = np.column_stack([delta1, delta2])
        alpha = 1.0
        while alpha > 1.0 / 64.0:
            e_new = e - alpha * step
            r_new = residual(e_new)
            rmax_new = float(np.abs(r_new).max())
            if rmax_new < rmax:
                break
            alpha *= 0.5
        e, r, rmax = e_new, r_new, rmax_new
    raise MapInversionError(max_iter, rmax)


def compose_scalar_with_map(f: ScalarField, phi: FlowMap) -> ScalarField:
    """Nodal values of f(phi(x)); off-grid sampling of f at the node images."""
    ev = FieldEvaluator(f, upsample=2, order=5)
    vals = ev(wrap_torus(phi.node_positions()))
    return ScalarField(phi.grid, vals.reshape(phi.grid.n, phi.grid.n))


def compose_vector_with_map(u: VectorField, phi: FlowMap) -> VectorField:
    return VectorField(
        compose_scalar_with_map(u.u1, phi), compose_scalar_with_map(u.u2, phi)
    )


# ---------------------------------------------------------------------------
# Frozen-in vorticity
# ---------------------------------------------------------------------------


def frozen_vorticity_residual(u0: VectorField, config: SolverConfig,
                              checkpoints: int = 4,
                              map_stride: int = 4) -> float:
    """max over checkpoint times of ||omega(t) o phi(t) - omega0|| / ||omega0||
    in H^{k-1}.

    The node trajectories ride the vorticity integration at map_stride
    vorticity steps per map step (both fourth order), and checkpoints are
    aligned to map steps so positions are always current.
    """
    if u0.max_abs() == 0.0:
        return 0.0
    s = config.k.k - 1.0
    omega0 = vorticity_of(u0)
    ref = sobolev_norm(omega0, s)
    nodes = u0.grid.node_array()
    steps = config.steps()
    if map_stride < 2 or map_stride % 2 or steps % map_stride:
        map_stride = 1
    stride = max(1, steps // max(1, checkpoints))
    stride = max(map_stride, (stride // map_stride) * map_stride)
    worst = 0.0

    def observer(t, omega_t, pos):
        nonlocal worst
        phi = FlowMap.from_positions(u0.grid, pos)
        composed = compose_scalar_with_map(omega_t, phi)
        worst = max(worst, sobolev_norm(composed - omega0, s) / ref)

    integrate_vorticity(omega0, config, particles=nodes,
                        observer=observer, observe_every=stride,
                        particle_stride=map_stride)
    return worst


# ---------------------------------------------------------------------------
# Second-order Lagrangian ODE (independent route to the exponential map)
# ---------------------------------------------------------------------------


def lagrangian_rhs(phi: FlowMap, phi_t: VectorField,
                   inverse_guess: FlowMap | None = None,
                   return_inverse: bool = False):
    """Acceleration F(phi, phi_t) of the Lagrangian form of the equations.

    Pull the label velocity back to Eulerian form, form the pressure
    source, invert the Laplacian, take the gradient, and push the result
    back to the labels.
    """
    if phi_t.max_abs() == 0.0:
        out = VectorField.zeros(phi.grid)
        return (out, None) if return_inverse else out
    inv = invert_map(phi, initial=inverse_guess)
    u = compose_vector_with_map(phi_t, inv)
    d1u1 = spectral_derivative(u.u1, 1).values
    d2u1 = spectral_derivative(u.u1, 2).values
    d1u2 = spectral_derivative(u.u2, 1).values
    d2u2 = spectral_derivative(u.u2, 2).values
    source = d1u1 * d1u1 + 2.0 * d1u2 * d2u1 + d2u2 * d2u2
    src = ScalarField(phi.grid, source - source.mean())
    minus_grad_p = gradient(solve_poisson_zero_mean(src))
    out = compose_vector_with_map(minus_grad_p, phi)
    return (out, inv) if return_inverse else out


def exp_map_via_ode(u0: VectorField, config: SolverConfig) -> FlowMap:
    """exp(u0) by direct RK4 on the first-order system (phi, phi_t).

    Independent of the vorticity solver: cross-validation oracle for
    exp_map.
    """
    if u0.max_abs() == 0.0:
        return FlowMap.identity(u0.grid)
    grid = u0.grid
    last_inverse = None

    def as_map(disp_pair):
        return FlowMap(grid, VectorField.from_values(grid, disp_pair[0], disp_pair[1]))

    def rhs(disp_pair, vel_pair):
        nonlocal last_inverse
        vel = VectorField.from_values(grid, vel_pair[0], vel_pair[1])
        acc, last_inverse = lagrangian_rhs(as_map(disp_pair), vel,
                                           inverse_guess=last_inverse,
                                           return_inverse=True)
        return (
            (vel_pair[0], vel_pair[1]),
            (acc.u1.values, acc.u2.values),
        )

    d = (np.zeros((grid.n, grid.n)), np.zeros((grid.n, grid.n)))
    v = (u0.u1.values.copy(), u0.u2.values.copy())
    steps = config.steps()
    h = config.t_end / steps

    def axpy(y, a, k):
        return (y[0] + a * k[0], y[1] + a * k[1])

    for _ in range(steps):
        kd1, kv1 = rhs(d, v)
        kd2, kv2 = rhs(axpy(d, 0.5 * h, kd1), axpy(v, 0.5 * h, kv1))
        kd3, kv3 = rhs(axpy(d, 0.5 * h, kd2), axpy(v, 0.5 * h, kv2))
        kd4, kv4 = rhs(axpy(d, h, kd3), axpy(v, h, kv3))
        d = (
            d[0] + (h / 6.0) * (kd1[0] + 2 * kd2[0] + 2 * kd3[0] + kd4[0]),
            d[1] + (h / 6.0) * (kd1[1] + 2 * kd2[1] + 2 * kd3[1] + kd4[1]),
        )
        v = (
            v[0] + (h / 6.0) * (kv1[0] + 2 * kv2[0] + 2 * kv3[0] + kv4[0]),
            v[1] + (h / 6.0) * (kv1[1] + 2 * kv2[1] + 2 * kv3[1] + kv4[1]),
        )
    return as_map(d)
