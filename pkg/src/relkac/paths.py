"""Samplers for the stochastic machinery: Brownian paths, the first-passage
subordinator, the subordinated relativistic process, and jump-decomposition
paths with explicit jump records.

Conventions
-----------
* Brownian motion has unit variance per unit time and per axis
  (E e^{i xi . B(t)} = e^{-t |xi|^2 / 2}).
* The subordinator T(t) is the first passage of drifted Brownian motion,
  T(t) = inf{s : B(s) + m s = t}: inverse Gaussian for m > 0 (sampled by the
  Michael-Schucany-Haas transform), the one-sided stable-1/2 law T = t^2/Z^2
  for m = 0.  Both are exact in distribution.
* The subordinated process X(t) = B(T(t)) has characteristic function
  e^{-t [sqrt(|xi|^2 + m^2) - m]}.
* The jump sampler replaces jumps below the cutoff eps_cut by a centered
  Gaussian matching their variance, and draws jumps above it as a compound
  Poisson process with the exact (normalized) radial law of the jump density.

Everything is reproducible: a :class:`RngStream` (seed, stream) pair yields
bit-identical draws, and distinct stream indices give independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .specfun import MassDim, levy_density_radial

__all__ = [
    "RngStream",
    "BrownianPath",
    "SubordinatorPath",
    "CadlagPath",
    "SubordinatedSample",
    "JumpLaw",
    "jump_law",
    "sample_brownian",
    "sample_subordinator",
    "sample_subordinated",
    "sample_levy_jumps",
    "counting_measure",
    "subordinator_increments",
]


class SamplerError(RuntimeError):
    """Raised when a sampler's supporting quadrature fails to converge."""


@dataclass(frozen=True)
class RngStream:
    """Deterministic RNG handle: (seed, stream) -> independent PCG64 stream."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream])


def _rng_of(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


@dataclass
class BrownianPath:
    times: np.ndarray  # (K+1,)
    values: np.ndarray  # (K+1, d)

    @property
    def d(self) -> int:
        return self.values.shape[-1]


@dataclass
class SubordinatorPath:
    times: np.ndarray  # (K+1,) outer time grid
    values: np.ndarray  # (K+1,) nondecreasing, T(0) = 0


@dataclass
class CadlagPath:
    """Right-continuous path skeleton plus explicit jump records."""

    x0: np.ndarray
    times: np.ndarray  # (K+1,)
    values: np.ndarray  # (K+1, d), right limits X(t_k)
    jump_times: np.ndarray  # (J,)
    jump_vectors: np.ndarray  # (J, d)
    jump_pre_positions: np.ndarray  # (J, d), X(s-) just before each jump
    eps_cut: float | None = None

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[-1]


@dataclass
class SubordinatedSample:
    """A subordinated path together with its generating pair (B, T)."""

    path: CadlagPath
    subordinator: SubordinatorPath
    brownian: BrownianPath | None = None
    outer_index: np.ndarray | None = None  # indices of T(t_k) inside brownian.times


# ---------------------------------------------------------------------------
# subordinator
# ---------------------------------------------------------------------------


def subordinator_increments(rng, dt: float, m: float, shape) -> np.ndarray:
    """Draw first-passage increments T(dt) (i.i.d. over `shape`)."""
    rng = _rng_of(rng)
    if m == 0.0:
        z = rng.standard_normal(shape)
        z = np.where(np.abs(z) < 1e-300, 1e-300, z)
        return dt * dt / (z * z)
    # inverse Gaussian IG(mu = dt/m, lam = dt^2), Michael-Schucany-Haas
    mu = dt / m
    lam = dt * dt
    y = rng.standard_normal(shape) ** 2
    x = mu + mu * mu * y / (2 * lam) - (mu / (2 * lam)) * np.sqrt(
        4 * mu * lam * y + (mu * y) ** 2
    )
    u = rng.uniform(size=shape)
    return np.where(u <= mu / (mu + x), x, mu * mu / x)


def sample_subordinator(t_grid, m: float, rng) -> SubordinatorPath:
    """Sample T on an increasing grid starting at 0."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must increase from 0")
    rng = _rng_of(rng)
    dts = np.diff(t_grid)
    if np.allclose(dts, dts[0]):
        inc = subordinator_increments(rng, float(dts[0]), m, dts.shape)
    else:
        inc = np.array([subordinator_increments(rng, float(dt), m, ()) for dt in dts])
    vals = np.concatenate([[0.0], np.cumsum(inc)])
    return SubordinatorPath(times=t_grid.copy(), values=vals)


# ---------------------------------------------------------------------------
# Brownian motion
# ---------------------------------------------------------------------------


def sample_brownian(x0, dt: float, k: int, d: int, rng) -> BrownianPath:
    """Brownian path from x0 on a uniform grid of k steps of size dt."""
    if dt <= 0 or k < 1:
        raise ValueError("need dt > 0 and k >= 1")
    rng = _rng_of(rng)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    inc = rng.standard_normal((k, d)) * np.sqrt(dt)
    vals = np.concatenate([np.zeros((1, d)), np.cumsum(inc, axis=0)]) + x0
    return BrownianPath(times=np.arange(k + 1) * dt, values=vals)


# ---------------------------------------------------------------------------
# subordinated relativistic process
# ---------------------------------------------------------------------------


def sample_subordinated(
    x0, t_grid, m: float, d: int, rng, fine_steps: int | None = None
) -> SubordinatedSample:
    """X(t_k) = x0 + B(T(t_k)) on the outer grid.

    With ``fine_steps`` set, the generating Brownian path is materialized on a
    sub-grid that refines each subordinator interval [T(t_{k-1}), T(t_k)] into
    ``fine_steps`` uniform pieces, so the values B(T(t_k)) are grid points of
    the fine path (no bridge interpolation is ever needed).
    """
    rng = _rng_of(rng)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    spath = sample_subordinator(t_grid, m, rng)
    dT = np.diff(spath.values)
    k_outer = len(dT)
    if fine_steps is None:
        dx = rng.standard_normal((k_outer, d)) * np.sqrt(dT)[:, None]
        vals = np.concatenate([np.zeros((1, d)), np.cumsum(dx, axis=0)]) + x0
        cpath = CadlagPath(
            x0=x0.copy(),
            times=spath.times.copy(),
            values=vals,
            jump_times=np.empty(0),
            jump_vectors=np.empty((0, d)),
            jump_pre_positions=np.empty((0, d)),
        )
        return SubordinatedSample(path=cpath, subordinator=spath)
    f = int(fine_steps)
    sub_dt = np.repeat(dT, f) / f  # (k_outer * f,)
    db = rng.standard_normal((k_outer * f, d)) * np.sqrt(sub_dt)[:, None]
    bvals = np.concatenate([np.zeros((1, d)), np.cumsum(db, axis=0)]) + x0
    btimes = np.concatenate([[0.0], np.cumsum(sub_dt)])
    outer_idx = np.arange(0, k_outer * f + 1, f)
    bpath = BrownianPath(times=btimes, values=bvals)
    cpath = CadlagPath(
        x0=x0.copy(),
        times=spath.times.copy(),
        values=bvals[outer_idx],
        jump_times=np.empty(0),
        jump_vectors=np.empty((0, d)),
        jump_pre_positions=np.empty((0, d)),
    )
    return SubordinatedSample(
        path=cpath, subordinator=spath, brownian=bpath, outer_index=outer_idx
    )


# ---------------------------------------------------------------------------
# jump-decomposition sampler
# ---------------------------------------------------------------------------


def _sphere_area(d: int) -> float:
    from scipy.special import gamma

    return 2 * np.pi ** (d / 2) / gamma(d / 2)


@dataclass
class JumpLaw:
    """Cutoff decomposition of the jump measure for one (m, d, eps_cut).

    ``lam`` is the total intensity of jumps with |y| > eps_cut, ``sigma2_axis``
    the per-axis variance rate replacing the sub-cutoff jumps, and
    ``sample_radii`` draws from the normalized radial law above the cutoff.
    """

    md: MassDim
    eps_cut: float
    lam: float
    sigma2_axis: float
    tabulation_error: float
    _cdf_radii: np.ndarray | None = field(default=None, repr=False)
    _cdf_values: np.ndarray | None = field(default=None, repr=False)

    def radial_intensity(self, r_lo: float, r_hi: float) -> float:
        """Intensity of jumps with r_lo < |y| <= r_hi (independent of eps_cut)."""
        f = lambda r: levy_density_radial(r, self.md) * r ** (self.md.d - 1)
        val, err = integrate.quad(f, r_lo, r_hi, limit=200)
        return _sphere_area(self.md.d) * val

    def sample_radii(self, rng, n: int) -> np.ndarray:
        rng = _rng_of(rng)
        u = rng.uniform(size=n)
        if self.md.m == 0.0:
            # radial density proportional to r^-2 above the cutoff: exact inverse CDF
            return self.eps_cut / (1.0 - u)
        return np.interp(u, self._cdf_values, self._cdf_radii)

    def sample_directions(self, rng, n: int) -> np.ndarray:
        rng = _rng_of(rng)
        d = self.md.d
        if d == 1:
            return rng.choice([-1.0, 1.0], size=n)[:, None]
        v = rng.standard_normal((n, d))
        return v / np.linalg.norm(v, axis=1, keepdims=True)


@lru_cache(maxsize=32)
def _jump_law_cached(m: float, d: int, eps_cut: float) -> JumpLaw:
    md = MassDim(m, d)
    area = _sphere_area(d)
    radial = lambda r: levy_density_radial(r, md) * r ** (d - 1)

    if m == 0.0:
        # radial(r) = C r^-2 exactly: closed-form tail
        c = radial(1.0)
        lam = area * c / eps_cut
        tab_err = 0.0
        cdf_r = cdf_f = None
    else:
        val, err = integrate.quad(radial, eps_cut, np.inf, limit=400)
        if not np.isfinite(val) or err > 1e-9 * max(val, 1.0):
            raise SamplerError(f"jump intensity quadrature did not converge (err={err:.2e})")
        lam = area * val
        r_max = eps_cut + 60.0 / m
        knots = np.geomspace(eps_cut, r_max, 2048)
        dens = radial(knots)
        cdf = integrate.cumulative_trapezoid(dens, knots, initial=0.0)
        cdf_f = cdf / cdf[-1]
        cdf_r = knots
        # tabulation error: trapezoid mass vs adaptive quadrature
        tab_err = abs(cdf[-1] - val) / val

    s2, err2 = integrate.quad(lambda r: r * r * radial(r), 0.0, eps_cut, limit=400)
    if not np.isfinite(s2):
        raise SamplerError("small-jump variance quadrature did not converge")
    sigma2_axis = area * s2 / d
    return JumpLaw(
        md=md,
        eps_cut=eps_cut,
        lam=lam,
        sigma2_axis=sigma2_axis,
        tabulation_error=tab_err,
        _cdf_radii=cdf_r,
        _cdf_values=cdf_f,
    )


def jump_law(md: MassDim, eps_cut: float) -> JumpLaw:
    if not 0 < eps_cut < 1:
        raise ValueError("need 0 < eps_cut < 1")
    return _jump_law_cached(float(md.m), int(md.d), float(eps_cut))


def _segmented_cumsum(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Cumulative sum along axis 0 restarting at each index in `starts`."""
    cs = np.cumsum(values, axis=0)
    marks = np.zeros(len(values), dtype=int)
    marks[starts] = 1
    seg_idx = np.cumsum(marks) - 1
    prev_totals = np.concatenate(
        [np.zeros((1,) + values.shape[1:], dtype=cs.dtype), cs[starts[1:] - 1]]
    )
    return cs - prev_totals[seg_idx]


def sample_jump_batch(
    rng, t: float, n_grid: int, md: MassDim, eps_cut: float, n_paths: int
):
    """Vectorized jump-decomposition paths started at 0.

    Returns a dict with the skeleton on the uniform grid, flat jump records
    (path index, time, vector, pre-jump position), and the law used.  The
    Gaussian small-jump proxy and the jumps are combined on the merged event
    sequence, so skeleton values and pre-jump positions are exact in law.
    """
    rng = _rng_of(rng)
    law = jump_law(md, eps_cut)
    d = md.d
    grid = np.linspace(0.0, t, n_grid + 1)

    counts = rng.poisson(law.lam * t, size=n_paths)
    total = int(counts.sum())
    jump_t = rng.uniform(0.0, t, size=total)
    radii = law.sample_radii(rng, total)
    dirs = law.sample_directions(rng, total)
    jump_y = radii[:, None] * dirs
    jump_path = np.repeat(np.arange(n_paths), counts)

    # merged event sequence: per path, n_grid+1 grid events plus its jumps
    ev_path = np.concatenate([np.repeat(np.arange(n_paths), n_grid + 1), jump_path])
    ev_time = np.concatenate([np.tile(grid, n_paths), jump_t])
    ev_is_jump = np.concatenate(
        [np.zeros(n_paths * (n_grid + 1), bool), np.ones(total, bool)]
    )
    ev_y = np.zeros((len(ev_path), d))
    ev_y[n_paths * (n_grid + 1) :] = jump_y

    # jumps sort before a coinciding grid event so skeleton values stay
    # right-continuous (X(t_k) includes a jump at exactly t_k)
    order = np.lexsort((~ev_is_jump, ev_time, ev_path))
    ev_path = ev_path[order]
    ev_time = ev_time[order]
    ev_is_jump = ev_is_jump[order]
    ev_y = ev_y[order]

    starts = np.flatnonzero(np.diff(ev_path, prepend=-1))
    dt_ev = np.diff(ev_time, prepend=0.0)
    dt_ev[starts] = 0.0

    w_inc = rng.standard_normal((len(ev_path), d)) * np.sqrt(law.sigma2_axis * dt_ev)[:, None]
    w = _segmented_cumsum(w_inc, starts)
    y_cum = _segmented_cumsum(ev_y, starts)

    pos_right = w + y_cum  # X(s) including a jump at s
    pos_left = pos_right - ev_y  # X(s-)

    skeleton = pos_right[~ev_is_jump].reshape(n_paths, n_grid + 1, d)
    return {
        "grid": grid,
        "skeleton": skeleton,
        "jump_path": ev_path[ev_is_jump],
        "jump_time": ev_time[ev_is_jump],
        "jump_y": ev_y[ev_is_jump],
        "jump_pre": pos_left[ev_is_jump],
        "law": law,
    }


def sample_levy_jumps(
    x0, t: float, m: float, d: int, eps_cut: float, dt: float, rng
) -> CadlagPath:
    """Single jump-decomposition path from x0 with explicit jump records."""
    if dt <= 0 or t <= 0:
        raise ValueError("need t > 0 and dt > 0")
    n_grid = max(1, int(round(t / dt)))
    md = MassDim(m, d)
    batch = sample_jump_batch(rng, t, n_grid, md, eps_cut, 1)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    return CadlagPath(
        x0=x0.copy(),
        times=batch["grid"],
        values=batch["skeleton"][0] + x0,
        jump_times=batch["jump_time"],
        jump_vectors=batch["jump_y"],
        jump_pre_positions=batch["jump_pre"] + x0,
        eps_cut=eps_cut,
    )


def counting_measure(path: CadlagPath, t_lo: float, t_hi: float, r_lo: float, r_hi: float) -> int:
    """Number of recorded jumps with s in (t_lo, t_hi] and r_lo < |y| <= r_hi."""
    if not t_lo < t_hi:
        raise ValueError("need t_lo < t_hi")
    if len(path.jump_times) == 0:
        return 0
    r = np.linalg.norm(path.jump_vectors, axis=1)
    sel = (path.jump_times > t_lo) & (path.jump_times <= t_hi) & (r > r_lo) & (r <= r_hi)
    return int(np.count_nonzero(sel))


# ---------------------------------------------------------------------------
# batched skeletons for the Monte Carlo estimator
# ---------------------------------------------------------------------------


def batch_subordinated_skeletons(rng, t: float, n_slices: int, md: MassDim, n_paths: int):
    """Skeletons X(t_j) (started at 0) of the subordinated process.

    Returns (X, dT) with X of shape (n_paths, n_slices+1, d).
    """
    rng = _rng_of(rng)
    dt = t / n_slices
    dT = subordinator_increments(rng, dt, md.m, (n_paths, n_slices))
    dx = rng.standard_normal((n_paths, n_slices, md.d)) * np.sqrt(dT)[..., None]
    x = np.concatenate(
        [np.zeros((n_paths, 1, md.d)), np.cumsum(dx, axis=1)], axis=1
    )
    return x, dT


def batch_brownian_subordinated(
    rng, t: float, n_outer: int, fine_per_slice: int, md: MassDim, n_paths: int
):
    """Brownian-under-subordinator batches for the square-root variant.

    Returns (bpaths, db, sub_dt, outer_index): bpaths has shape
    (n_paths, n_outer*fine_per_slice + 1, d) and starts at 0; outer_index maps
    the outer grid t_k to fine-grid indices so B(T(t_k)) = bpaths[:, outer_index[k]].
    """
    rng = _rng_of(rng)
    dt = t / n_outer
    f = int(fine_per_slice)
    dT = subordinator_increments(rng, dt, md.m, (n_paths, n_outer))
    sub_dt = np.repeat(dT, f, axis=1) / f  # (B, n_outer * f)
    db = rng.standard_normal((n_paths, n_outer * f, md.d)) * np.sqrt(sub_dt)[..., None]
    b = np.concatenate([np.zeros((n_paths, 1, md.d)), np.cumsum(db, axis=1)], axis=1)
    outer_index = np.arange(0, n_outer * f + 1, f)
    return b, db, sub_dt, outer_index
