"""Inversion of the multiplexed forward model.

At the Nyquist point (as many independent codes as unknowns per sensor
row) the scene follows from a pseudoinverse.  Below it the inverse problem
is regularized by small total variation under a hard data-fidelity
constraint:

    minimize TV(X)   subject to   || Y - X @ Phi ||_F <= epsilon,

with the isotropic TV norm ``sum_ij sqrt(Gx^2 + Gy^2)`` built from
forward differences (replicate boundary).  Video recovery couples the
frames of a block-grouped acquisition through an additional forward
temporal difference inside the same isotropic norm.

The solver is a first-order primal-dual scheme over the stacked operator
K = [gradients; sensing].  Both dual proximal steps are closed-form: the
TV dual is a pointwise projection onto unit balls, and the conjugate of
the epsilon-ball indicator around Y is ``<q, Y> + eps * ||q||_F``, whose
prox shifts by the data and block-shrinks in Frobenius norm.  Each dual
block gets its own step matched to its operator: ``sigma = 1 / ||block||^2``
(the analytic bound 8 for the 2D gradient, a 20-iteration power-iteration
estimate with a 5% margin for the sensing part), with primal step 1/2, so
``tau * (sigma_tv ||D||^2 + sigma_data ||A||^2) <= 1`` holds and the
iteration converges; a single scalar step pair stalls badly here because
the sensing norm grows like sqrt(order) while the gradient norm stays
near sqrt(8).  The returned iterate is the lowest-TV one seen inside the
constraint ball; if no iterate ever entered it, the last iterate is
returned with ``feasible=False`` rather than failing silently.

The feasibility test allows an absolute slack of ``tolerance * ||Y||_F``
on top of ``epsilon * (1 + tolerance)``: with ``epsilon = 0`` the
constraint is an equality that an iterative method can only approach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .simulator import MeasurementBlock

__all__ = [
    "RecoveryParams",
    "RecoveredImage",
    "RecoveredVideo",
    "spatial_gradients",
    "spatial_gradients_adjoint",
    "video_gradients",
    "video_gradients_adjoint",
    "tv_isotropic",
    "tv_spatiotemporal",
    "noise_epsilon",
    "recover_pinv",
    "recover_tv2d",
    "recover_tv2d_spc",
    "recover_tv3d",
    "median3",
]


# --------------------------------------------------------------------------
# gradients and TV norms
# --------------------------------------------------------------------------

def spatial_gradients(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference spatial gradients with replicate boundary.

    ``gx[i, j] = x[i, j+1] - x[i, j]`` (zero in the last column) and
    ``gy[i, j] = x[i+1, j] - x[i, j]`` (zero in the last row).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(f"expected a 2D array of at least 2x2, got shape {x.shape}")
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gx[:, :-1] = x[:, 1:] - x[:, :-1]
    gy[:-1, :] = x[1:, :] - x[:-1, :]
    return gx, gy


def spatial_gradients_adjoint(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`spatial_gradients` (a negative divergence)."""
    gx = np.asarray(gx, dtype=float)
    gy = np.asarray(gy, dtype=float)
    out = np.zeros_like(gx)
    out[:, 1:] += gx[:, :-1]
    out[:, :-1] -= gx[:, :-1]
    out[1:, :] += gy[:-1, :]
    out[:-1, :] -= gy[:-1, :]
    return out


def tv_isotropic(x: np.ndarray) -> float:
    """Isotropic total variation: ``sum_ij sqrt(gx^2 + gy^2)``."""
    gx, gy = spatial_gradients(x)
    return float(np.sum(np.hypot(gx, gy)))


def video_gradients(v: np.ndarray, weights: tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    """Weighted forward differences of a (frames, rows, cols) volume.

    Returns a (3, frames, rows, cols) stack of (spatial x, spatial y,
    temporal) differences; ``weights`` scales the (spatial, temporal)
    channels.  Replicate boundary as in :func:`spatial_gradients`.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 3:
        raise ValueError(f"expected a (frames, rows, cols) volume, got shape {v.shape}")
    ws, wt = weights
    g = np.zeros((3,) + v.shape)
    g[0][:, :, :-1] = ws * (v[:, :, 1:] - v[:, :, :-1])
    g[1][:, :-1, :] = ws * (v[:, 1:, :] - v[:, :-1, :])
    g[2][:-1] = wt * (v[1:] - v[:-1])
    return g


def video_gradients_adjoint(g: np.ndarray, weights: tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    """Adjoint of :func:`video_gradients` for the same weights."""
    g = np.asarray(g, dtype=float)
    ws, wt = weights
    gx, gy, gt = g
    out = np.zeros(g.shape[1:])
    out[:, :, 1:] += ws * gx[:, :, :-1]
    out[:, :, :-1] -= ws * gx[:, :, :-1]
    out[:, 1:, :] += ws * gy[:, :-1, :]
    out[:, :-1, :] -= ws * gy[:, :-1, :]
    out[1:] += wt * gt[:-1]
    out[:-1] -= wt * gt[:-1]
    return out


def tv_spatiotemporal(v: np.ndarray, weights: tuple[float, float] = (1.0, 1.0)) -> float:
    """Isotropic spatio-temporal TV of a (frames, rows, cols) volume."""
    g = video_gradients(v, weights)
    return float(np.sum(np.sqrt(np.sum(g * g, axis=0))))


def noise_epsilon(sigma: float, n_entries: int) -> float:
    """Discrepancy-principle fidelity radius: expected noise Frobenius norm.

    For i.i.d. Gaussian noise of deviation ``sigma`` over ``n_entries``
    measurement values, ``E ||E||_F^2 = sigma^2 * n_entries``.
    """
    if sigma < 0 or n_entries < 1:
        raise ValueError("sigma must be non-negative and n_entries positive")
    return sigma * math.sqrt(n_entries)


# --------------------------------------------------------------------------
# parameters and results
# --------------------------------------------------------------------------

@dataclass
class RecoveryParams:
    """Settings for constrained TV recovery.

    ``epsilon`` is the data-fidelity radius (measurement units; see
    :func:`noise_epsilon` for the noise-matched default), ``tolerance``
    the relative-change stopping threshold, and ``tv_weights`` the
    (spatial, temporal) gradient weights used by video recovery.
    """

    epsilon: float = 0.0
    max_iterations: int = 2000
    tolerance: float = 1e-6
    tv_weights: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        ws, wt = self.tv_weights
        if ws <= 0 or wt <= 0:
            raise ValueError(f"tv_weights must be positive, got {self.tv_weights}")


@dataclass
class RecoveredImage:
    """One recovered frame with solver diagnostics.

    ``history`` records (iteration, residual, tv) per iteration for the
    diagnostics CSV; ``feasible`` reports whether the returned iterate
    satisfied the epsilon-ball constraint.
    """

    image: np.ndarray
    iterations: int
    residual: float
    tv: float
    converged: bool
    feasible: bool
    history: list = field(repr=False, default_factory=list)


@dataclass
class RecoveredVideo:
    """Q recovered frames with per-frame and aggregate diagnostics."""

    frames: np.ndarray
    iterations: int
    residual: float
    block_residuals: np.ndarray
    frame_tv: np.ndarray
    converged: bool
    feasible: bool
    history: list = field(repr=False, default_factory=list)


# --------------------------------------------------------------------------
# sensing operators
# --------------------------------------------------------------------------

class _RowSensing:
    """x (N1, N2) -> x @ phi with phi the (N2, B) pattern-column matrix."""

    def __init__(self, phi: np.ndarray):
        self.phi = np.asarray(phi, dtype=float)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.phi

    def adjoint(self, q: np.ndarray) -> np.ndarray:
        return q @ self.phi.T


class _FrameSensing:
    """x (N1, N2) -> vector of inner products with (B, N1, N2) patterns."""

    def __init__(self, patterns: np.ndarray):
        self.patterns = np.asarray(patterns, dtype=float)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(self.patterns, x, axes=([1, 2], [0, 1]))

    def adjoint(self, q: np.ndarray) -> np.ndarray:
        return np.tensordot(q, self.patterns, axes=(0, 0))


class _StackSensing:
    """Per-frame sensing of a (Q, N1, N2) volume, flattened to one vector.

    Concatenating the raveled per-block outputs makes the aggregate
    epsilon-ball constraint a plain Frobenius ball on one array.
    """

    def __init__(self, ops: list):
        self.ops = ops
        self._sizes = None

    def forward(self, v: np.ndarray) -> np.ndarray:
        outs = [op.forward(v[k]).ravel() for k, op in enumerate(self.ops)]
        if self._sizes is None:
            self._sizes = [o.size for o in outs]
        return np.concatenate(outs)

    def adjoint(self, q: np.ndarray) -> np.ndarray:
        pieces = []
        start = 0
        for op, size in zip(self.ops, self._sizes):
            pieces.append(op.adjoint(q[start:start + size].reshape(self._out_shape(op))))
            start += size
        return np.stack(pieces)

    @staticmethod
    def _out_shape(op):
        if isinstance(op, _RowSensing):
            return (-1, op.phi.shape[1])
        return (-1,)


class _BatchRowSensing:
    """Row sensing of a (Q, N1, N2) volume when every block has equal size.

    One broadcast matmul per apply; mathematically identical to stacking
    Q :class:`_RowSensing` operators.
    """

    def __init__(self, phis: np.ndarray):
        self.phis = np.asarray(phis, dtype=float)          # (Q, N2, B)
        self.phis_t = np.swapaxes(self.phis, 1, 2).copy()  # (Q, B, N2)

    def forward(self, v: np.ndarray) -> np.ndarray:
        return v @ self.phis

    def adjoint(self, q: np.ndarray) -> np.ndarray:
        return q @ self.phis_t


class _BatchFrameSensing:
    """Full-frame sensing of a (Q, N1, N2) volume with equal block sizes."""

    def __init__(self, patterns: np.ndarray):
        self.patterns = np.asarray(patterns, dtype=float)  # (Q, B, N1, N2)

    def forward(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("qbij,qij->qb", self.patterns, v, optimize=True)

    def adjoint(self, q: np.ndarray) -> np.ndarray:
        return np.einsum("qb,qbij->qij", q, self.patterns, optimize=True)


# --------------------------------------------------------------------------
# primal-dual core
# --------------------------------------------------------------------------

def _power_norm(apply_ktk, shape: tuple, iters: int = 20, seed: int = 0) -> float:
    """Largest eigenvalue of the PSD operator ``apply_ktk`` by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply_ktk(v)
        lam = float(np.linalg.norm(w.ravel()))
        if lam <= 0:
            return 0.0
        v = w / lam
    return lam


def _channel_tv(g: np.ndarray) -> float:
    return float(np.sum(np.sqrt(np.sum(g * g, axis=0))))


@dataclass
class _SolveStats:
    iterations: int
    residual: float
    tv: float
    converged: bool
    feasible: bool
    best_iteration: int
    history: list


def _tv_ball_solve(
    sense, y, shape, grad, grad_adj, params, x0=None, grad_norm_sq=8.0,
) -> tuple[np.ndarray, _SolveStats]:
    y = np.asarray(y, dtype=float)
    eps = params.epsilon
    tol = params.tolerance

    sense_norm_sq = 1.05 * _power_norm(
        lambda v: sense.adjoint(sense.forward(v)), shape
    )
    sigma_tv = 1.0 / grad_norm_sq
    sigma_data = 1.0 / max(sense_norm_sq, 1e-12)
    tau = 0.5

    x = np.zeros(shape) if x0 is None else np.array(x0, dtype=float)
    xbar = x.copy()
    p = np.zeros_like(grad(x))
    q = np.zeros_like(y)

    ynorm = float(np.linalg.norm(y))
    feas_limit = eps * (1.0 + tol) + tol * max(ynorm, 1.0)

    best = None
    best_tv = math.inf
    best_res = math.inf
    best_iter = 0
    history = []
    converged = False
    it = 0
    residual = float(np.linalg.norm(sense.forward(x) - y))
    tv_val = _channel_tv(grad(x))

    for it in range(1, params.max_iterations + 1):
        # TV dual: pointwise projection onto unit balls across channels
        p += sigma_tv * grad(xbar)
        mag = np.sqrt(np.sum(p * p, axis=0))
        np.maximum(mag, 1.0, out=mag)
        p /= mag
        # data dual: shift by the data, block-shrink by sigma * eps
        r = q + sigma_data * (sense.forward(xbar) - y)
        rn = float(np.linalg.norm(r))
        q = r * max(0.0, 1.0 - sigma_data * eps / rn) if rn > 0 else np.zeros_like(r)
        # primal descent and over-relaxation (theta = 1)
        x_old = x
        x = x - tau * (grad_adj(p) + sense.adjoint(q))
        xbar = 2.0 * x - x_old

        residual = float(np.linalg.norm(sense.forward(x) - y))
        tv_val = _channel_tv(grad(x))
        history.append((it, residual, tv_val))
        if residual <= feas_limit and tv_val < best_tv:
            best = x.copy()
            best_tv = tv_val
            best_res = residual
            best_iter = it
        # stop only once the iterate is both stationary and inside the ball;
        # near the boundary the change can stall while the constraint is
        # still violated, which must not count as convergence
        dx = float(np.linalg.norm(x - x_old))
        if dx <= tol * max(float(np.linalg.norm(x)), 1e-30) and residual <= feas_limit:
            converged = True
            break

    if best is None:
        stats = _SolveStats(it, residual, tv_val, converged, False, it, history)
        return x, stats
    stats = _SolveStats(it, best_res, best_tv, converged, True, best_iter, history)
    return best, stats


# --------------------------------------------------------------------------
# recovery front-ends
# --------------------------------------------------------------------------

def recover_pinv(y: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Least-squares scene estimate ``Y @ pinv(Phi)``.

    ``phi`` holds one pattern per column ((N2, B), B >= N2); for an
    orthogonal family at the Nyquist count this is the exact inverse.
    Rank deficiency is an error: the measurement set cannot determine the
    scene and the caller should use regularized recovery instead.
    """
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if y.ndim != 2 or phi.ndim != 2 or y.shape[1] != phi.shape[1]:
        raise ValueError(f"inconsistent shapes: measurements {y.shape}, patterns {phi.shape}")
    n, b = phi.shape
    if b < n:
        raise ValueError(f"need at least as many patterns as unknowns per row: {b} < {n}")
    sol, _, rank, _ = np.linalg.lstsq(phi.T, y.T, rcond=None)
    if rank < n:
        raise ValueError(
            f"pattern matrix is rank-deficient (rank {rank} of {n}); "
            "the codes do not span the scene space"
        )
    return sol.T


def recover_tv2d(
    y: np.ndarray,
    phi: np.ndarray,
    params: RecoveryParams | None = None,
    x0: np.ndarray | None = None,
) -> RecoveredImage:
    """TV-constrained recovery of one frame from row-multiplexed data.

    Solves ``min TV(X) s.t. ||Y - X @ Phi||_F <= epsilon`` with ``phi``
    the (N2, B) pattern-column matrix (signed codes after demeaning).
    """
    params = params or RecoveryParams()
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if y.ndim != 2 or phi.ndim != 2 or y.shape[1] != phi.shape[1]:
        raise ValueError(f"inconsistent shapes: measurements {y.shape}, patterns {phi.shape}")
    shape = (y.shape[0], phi.shape[0])
    sense = _RowSensing(phi)
    x, stats = _tv_ball_solve(
        sense, y, shape,
        grad=lambda v: np.stack(spatial_gradients(v)),
        grad_adj=lambda g: spatial_gradients_adjoint(g[0], g[1]),
        params=params, x0=x0,
    )
    return RecoveredImage(
        image=x, iterations=stats.iterations, residual=stats.residual, tv=stats.tv,
        converged=stats.converged, feasible=stats.feasible, history=stats.history,
    )


def recover_tv2d_spc(
    y: np.ndarray,
    patterns: np.ndarray,
    params: RecoveryParams | None = None,
    x0: np.ndarray | None = None,
) -> RecoveredImage:
    """TV-constrained recovery of one frame from single-pixel data.

    ``y`` holds one scalar per pattern; ``patterns`` is the (B, N1, N2)
    stack of signed full-frame codes.
    """
    params = params or RecoveryParams()
    y = np.asarray(y, dtype=float).ravel()
    patterns = np.asarray(patterns, dtype=float)
    if patterns.ndim != 3 or patterns.shape[0] != y.shape[0]:
        raise ValueError(
            f"inconsistent shapes: {y.shape[0]} measurements, patterns {patterns.shape}"
        )
    shape = patterns.shape[1:]
    sense = _FrameSensing(patterns)
    x, stats = _tv_ball_solve(
        sense, y, shape,
        grad=lambda v: np.stack(spatial_gradients(v)),
        grad_adj=lambda g: spatial_gradients_adjoint(g[0], g[1]),
        params=params, x0=x0,
    )
    return RecoveredImage(
        image=x, iterations=stats.iterations, residual=stats.residual, tv=stats.tv,
        converged=stats.converged, feasible=stats.feasible, history=stats.history,
    )


def recover_tv3d(
    blocks: list[MeasurementBlock],
    params: RecoveryParams | None = None,
    model: str = "lisens",
    frame_shape: tuple[int, int] | None = None,
    include_tracking: bool = False,
) -> RecoveredVideo:
    """Joint TV recovery of one video frame per measurement block.

    All frames are solved together under the isotropic spatio-temporal TV
    (spatial gradients plus forward temporal difference, weighted by
    ``params.tv_weights``), subject to a single Frobenius ball over the
    concatenated per-block residuals.  Mean-tracking columns are excluded
    from the pattern blocks by default because they carry the DC estimate
    already consumed by demeaning.

    ``model`` selects the sensing geometry: ``"lisens"`` treats block
    patterns as column codes, ``"spc"`` reshapes them to full 2D patterns
    of ``frame_shape``.
    """
    params = params or RecoveryParams()
    if not blocks:
        raise ValueError("at least one measurement block is required")
    if model not in ("lisens", "spc"):
        raise ValueError(f"unknown sensing model {model!r}")

    n_rows = blocks[0].Y.shape[0]
    order = blocks[0].patterns.shape[0]
    for blk in blocks:
        if blk.Y.shape[0] != n_rows or blk.patterns.shape[0] != order:
            raise ValueError("blocks have inconsistent dimensions")

    if model == "lisens":
        shape2d = (n_rows, order)
    else:
        if frame_shape is None:
            raise ValueError("frame_shape is required for the single-pixel model")
        if frame_shape[0] * frame_shape[1] != order:
            raise ValueError(f"frame_shape {frame_shape} incompatible with pattern length {order}")
        shape2d = tuple(frame_shape)

    block_data = []
    for blk in blocks:
        if include_tracking:
            y_k, phi_k = blk.Y, blk.signed.astype(float)
        else:
            y_k, phi_k = blk.without_tracking()
        if y_k.shape[1] == 0:
            raise ValueError("a block has no usable measurement columns")
        block_data.append((np.asarray(y_k, dtype=float), np.asarray(phi_k, dtype=float)))

    q_frames = len(blocks)
    shape = (q_frames,) + shape2d
    weights = params.tv_weights

    uniform = len({y_k.shape[1] for y_k, _ in block_data}) == 1
    ops = []
    if model == "lisens":
        ops = [_RowSensing(phi_k) for _, phi_k in block_data]
        if uniform:
            sense = _BatchRowSensing(np.stack([phi_k for _, phi_k in block_data]))
            y_all = np.stack([y_k for y_k, _ in block_data])
        else:
            sense = _StackSensing(ops)
            y_all = np.concatenate([y_k.ravel() for y_k, _ in block_data])
    else:
        ops = [_FrameSensing(phi_k.T.reshape(-1, *shape2d)) for _, phi_k in block_data]
        if uniform:
            sense = _BatchFrameSensing(np.stack([op.patterns for op in ops]))
            y_all = np.stack([y_k.ravel() for y_k, _ in block_data])
        else:
            sense = _StackSensing(ops)
            y_all = np.concatenate([y_k.ravel() for y_k, _ in block_data])
    ys = [y_k.ravel() for y_k, _ in block_data]

    x0 = None
    if model == "lisens":
        try:
            x0 = np.stack([
                recover_pinv(*blk.without_tracking()) for blk in blocks
            ])
        except ValueError:
            x0 = None

    x, stats = _tv_ball_solve(
        sense, y_all, shape,
        grad=lambda v: video_gradients(v, weights),
        grad_adj=lambda g: video_gradients_adjoint(g, weights),
        params=params, x0=x0,
        grad_norm_sq=8.0 * weights[0] ** 2 + 4.0 * weights[1] ** 2,
    )

    block_residuals = np.array([
        np.linalg.norm(op.forward(x[k]).ravel() - yk)
        for k, (op, yk) in enumerate(zip(ops, ys))
    ])
    frame_tv = np.array([tv_isotropic(frame) for frame in x])

    return RecoveredVideo(
        frames=x, iterations=stats.iterations, residual=stats.residual,
        block_residuals=block_residuals, frame_tv=frame_tv,
        converged=stats.converged, feasible=stats.feasible, history=stats.history,
    )


def median3(frames: np.ndarray) -> np.ndarray:
    """3x3x3 median filter over (frames, rows, cols) with replicate borders."""
    v = np.asarray(frames, dtype=float)
    if v.ndim != 3 or v.shape[0] < 1:
        raise ValueError(f"expected a non-empty (frames, rows, cols) volume, got {v.shape}")
    return ndimage.median_filter(v, size=3, mode="nearest")
