"""Vector potentials, scalar potentials, and gauge transformations.

A :class:`FieldSpec` bundles a vector potential A, a scalar potential V and
(after a gauge shift) the accumulated gauge function.  Two evaluation rules
along a chord [x, y] distinguish the midpoint quantization from the averaged
one:

* ``midpoint_eval``      -- A((x+y)/2)
* ``line_average``       -- int_0^1 A((1-theta) x + theta y) dtheta
* ``exact_line_integral``-- int_x^y A . dl = (y-x) . line_average(x, y)

Chord integrals carry closed forms for the built-in families (constant,
linear, squared-coordinate, componentwise tanh) and for gradient parts,
where int_x^y grad(phi) . dl = phi(y) - phi(x) exactly; everything else
falls back to adaptive Gauss-Legendre with a 1e-10 convergence target.

All evaluators are vectorized over leading batch axes: points are arrays of
shape (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


class UnknownFamilyError(KeyError):
    """Requested field/potential/gauge family is not registered."""


class QuadratureError(RuntimeError):
    """A chord quadrature failed to converge."""


# Gauss-Legendre nodes are cached per order.
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        # map from [-1, 1] to [0, 1]
        _GL_CACHE[order] = ((x + 1) / 2, w / 2)
    return _GL_CACHE[order]


@dataclass(frozen=True)
class GaugeFunction:
    """Scalar gauge function phi with an evaluable gradient."""

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]

    def __add__(self, other: "GaugeFunction") -> "GaugeFunction":
        return GaugeFunction(
            name=f"{self.name}+{other.name}",
            phi=lambda p, a=self.phi, b=other.phi: a(p) + b(p),
            grad=lambda p, a=self.grad, b=other.grad: a(p) + b(p),
        )


@dataclass(frozen=True)
class FieldSpec:
    """Immutable bundle of vector potential A, scalar potential V, gauge data.

    ``tag`` drives chord evaluation:  'zero' / 'constant' / 'linear' families
    share the midpoint closed form for line averages; 'polynomial' and
    'separable' families use exact per-family chord integrals; 'generic'
    falls back to quadrature.  ``gauge`` holds the accumulated gauge function
    when the field was produced by :func:`gauge_shift`; its chord integrals
    telescope exactly to phi(y) - phi(x).
    """

    d: int
    a: Callable[[np.ndarray], np.ndarray]
    v: Callable[[np.ndarray], np.ndarray]
    tag: str
    name: str
    params: dict = field(default_factory=dict)
    v_floor: float = 0.0
    div_a: Callable[[np.ndarray], np.ndarray] | None = None
    chord: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    gauge: GaugeFunction | None = None

    def a_total(self, p: np.ndarray) -> np.ndarray:
        out = self.a(p)
        if self.gauge is not None:
            out = out + self.gauge.grad(p)
        return out

    def describe(self) -> dict:
        desc = {"field": self.name, "params": dict(self.params), "tag": self.tag}
        if self.gauge is not None:
            desc["gauge"] = self.gauge.name
        return desc


def _as_points(p, d: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if d == 1 and (p.ndim == 0 or p.shape[-1] != 1):
        p = p[..., np.newaxis]
    if p.shape[-1] != d:
        raise ValueError(f"points must have last axis {d}, got shape {p.shape}")
    return p


def midpoint_eval(fs: FieldSpec, x, y) -> np.ndarray:
    """A((x+y)/2), the midpoint prescription."""
    x = _as_points(x, fs.d)
    y = _as_points(y, fs.d)
    return fs.a_total((x + y) / 2)


def _chord_quadrature(a_fn, x, y, tol: float = 1e-10, max_order: int = 256):
    """Adaptive Gauss-Legendre for int_0^1 a((1-th) x + th y) dth (vector valued).

    Starts at 16 nodes and doubles until two successive orders agree below
    ``tol``; the last observed difference is the recorded error estimate.
    """
    prev = None
    order = 16
    while order <= max_order:
        th, w = _gl_nodes(order)
        pts = x[..., np.newaxis, :] * (1 - th[:, np.newaxis]) + y[..., np.newaxis, :] * th[
            :, np.newaxis
        ]
        val = np.einsum("q,...qk->...k", w, a_fn(pts))
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            if err < tol:
                return val, err
        prev = val
        order *= 2
    raise QuadratureError(f"chord quadrature did not converge at order {max_order}")


def line_average(fs: FieldSpec, x, y, return_error: bool = False):
    """int_0^1 A((1-theta) x + theta y) dtheta.

    Exact (shared code path with ``midpoint_eval``) for constant and linear
    tags, Gauss-Legendre otherwise; gradient parts are averaged by quadrature
    as well since only their chord component has a closed form.  With
    ``return_error`` the quadrature's recorded error estimate is returned too
    (identically 0.0 on the exact paths).
    """
    x = _as_points(x, fs.d)
    y = _as_points(y, fs.d)
    if fs.tag in ("zero", "constant", "linear") and fs.gauge is None:
        val, err = midpoint_eval(fs, x, y), 0.0
    else:
        val, err = _chord_quadrature(fs.a_total, x, y)
    return (val, err) if return_error else val


def exact_line_integral(fs: FieldSpec, x, y) -> np.ndarray:
    """int over the segment [x, y] of A . dl, equal to (y-x) . line_average.

    Uses per-family closed forms where available and phi(y) - phi(x) for the
    gauge part, so gauge covariance checks downstream are exact.
    """
    x = _as_points(x, fs.d)
    y = _as_points(y, fs.d)
    if fs.chord is not None:
        base = fs.chord(x, y)
    else:
        avg, _ = _chord_quadrature(fs.a, x, y)
        base = np.einsum("...k,...k->...", y - x, avg)
    if fs.gauge is not None:
        base = base + fs.gauge.phi(y) - fs.gauge.phi(x)
    return base


def gauge_shift(fs: FieldSpec, phi: GaugeFunction) -> FieldSpec:
    """Replace A by A + grad(phi), keep V, and record phi for conjugation."""
    if not isinstance(phi, GaugeFunction) or phi.grad is None:
        raise ValueError("gauge_shift needs a GaugeFunction with an evaluable gradient")
    total = phi if fs.gauge is None else fs.gauge + phi
    return replace(fs, gauge=total)


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def _field_zero(d: int) -> FieldSpec:
    return FieldSpec(
        d=d,
        a=lambda p: np.zeros_like(p),
        v=_V_ZERO,
        tag="zero",
        name="zero",
        div_a=lambda p: np.zeros(p.shape[:-1]),
        chord=lambda x, y: np.zeros(x.shape[:-1]),
    )


def _field_constant(d: int, a_vec) -> FieldSpec:
    a_vec = np.broadcast_to(np.asarray(a_vec, dtype=float), (d,)).copy()

    return FieldSpec(
        d=d,
        a=lambda p: np.broadcast_to(a_vec, p.shape),
        v=_V_ZERO,
        tag="constant",
        name="constant",
        params={"a": a_vec.tolist()},
        div_a=lambda p: np.zeros(p.shape[:-1]),
        chord=lambda x, y: (y - x) @ a_vec,
    )


def _field_linear(d: int, matrix) -> FieldSpec:
    m = np.asarray(matrix, dtype=float).reshape(d, d)

    def chord(x, y):
        mid = (x + y) / 2
        return np.einsum("...k,...k->...", y - x, mid @ m.T)

    return FieldSpec(
        d=d,
        a=lambda p: p @ m.T,
        v=_V_ZERO,
        tag="linear",
        name="linear",
        params={"matrix": m.tolist()},
        div_a=lambda p: np.full(p.shape[:-1], float(np.trace(m))),
        chord=chord,
    )


def _field_constant_field(d: int, b: float) -> FieldSpec:
    # symmetric-gauge vector potential of a uniform magnetic field:
    # A = (-b x2/2, b x1/2) in d=2, third component 0 in d=3
    if d < 2:
        raise UnknownFamilyError("constant_field needs d >= 2")
    m = np.zeros((d, d))
    m[0, 1] = -b / 2
    m[1, 0] = b / 2
    fs = _field_linear(d, m)
    return replace(fs, name="constant_field", params={"b": b})


def _field_square(d: int, axis: int = -1) -> FieldSpec:
    # A_i(z) = z_i^2 on one axis: the stock example where midpoint and
    # line average differ ((x^2+xy+y^2)/3 vs ((x+y)/2)^2, gap 1/12 at (0,1))
    axis = axis % d

    def a(p):
        out = np.zeros_like(p)
        out[..., axis] = p[..., axis] ** 2
        return out

    def chord(x, y):
        f = x[..., axis]
        t = y[..., axis]
        return (t - f) * (f * f + f * t + t * t) / 3.0

    def div_a(p):
        return 2.0 * p[..., axis]

    return FieldSpec(
        d=d,
        a=a,
        v=_V_ZERO,
        tag="polynomial",
        name="square",
        params={"axis": axis},
        div_a=div_a,
        chord=chord,
    )


def _field_tanh(d: int, scale: float = 1.0) -> FieldSpec:
    # componentwise A_i(z) = scale * tanh(z_i); bounded and smooth, with the
    # separable chord integral sum_i scale [lncosh(y_i) - lncosh(x_i)] / 1
    def a(p):
        return scale * np.tanh(p)

    def div_a(p):
        return scale * np.sum(1.0 / np.cosh(p) ** 2, axis=-1)

    def chord(x, y):
        # per component: int_{x_i}^{y_i} tanh(u) du = lncosh(y_i) - lncosh(x_i);
        # switch to tanh(x_i) dxy_i when the difference would cancel badly
        dxy = y - x
        lc = _lncosh(y) - _lncosh(x)
        small = np.abs(dxy) < 1e-12
        return scale * np.sum(np.where(small, np.tanh(x) * dxy, lc), axis=-1)

    return FieldSpec(
        d=d,
        a=a,
        v=_V_ZERO,
        tag="separable",
        name="tanh",
        params={"scale": scale},
        div_a=div_a,
        chord=chord,
    )


def _lncosh(z):
    # overflow-safe log(cosh(z))
    az = np.abs(z)
    return az + np.log1p(np.exp(-2 * az)) - np.log(2.0)


def _V_ZERO(p):
    return np.zeros(p.shape[:-1])


_FIELD_FAMILIES = {
    "zero": _field_zero,
    "constant": _field_constant,
    "linear": _field_linear,
    "constant_field": _field_constant_field,
    "square": _field_square,
    "tanh": _field_tanh,
}


def _pot_zero(d: int):
    return _V_ZERO, 0.0


def _pot_harmonic_capped(d: int, cap: float = 10.0):
    def v(p):
        return np.minimum(np.sum(p * p, axis=-1), cap)

    return v, 0.0


def _pot_gaussian_well(d: int, depth: float = 1.0, width: float = 1.0):
    # bounded nonnegative well: depth (1 - exp(-|z|^2 / 2 width^2))
    def v(p):
        return depth * (1.0 - np.exp(-np.sum(p * p, axis=-1) / (2 * width * width)))

    return v, 0.0


_POTENTIAL_FAMILIES = {
    "zero": _pot_zero,
    "harmonic_capped": _pot_harmonic_capped,
    "gaussian_well": _pot_gaussian_well,
}


def _gauge_linear(d: int, coeffs=1.0) -> GaugeFunction:
    c = np.broadcast_to(np.asarray(coeffs, dtype=float), (d,)).copy()
    return GaugeFunction(
        name="linear",
        phi=lambda p: p @ c,
        grad=lambda p: np.broadcast_to(c, p.shape).copy(),
    )


def _gauge_cubic(d: int, axis: int = 0) -> GaugeFunction:
    axis = axis % d

    def grad(p):
        out = np.zeros_like(p)
        out[..., axis] = 3.0 * p[..., axis] ** 2
        return out

    return GaugeFunction(name="cubic", phi=lambda p: p[..., axis] ** 3, grad=grad)


def _gauge_windowed_cubic(d: int, axis: int = 0, width: float = 3.0) -> GaugeFunction:
    # x^3 exp(-(x/w)^2): a smoothly capped cubic, bounded with bounded gradient
    axis = axis % d
    w2 = width * width

    def phi(p):
        z = p[..., axis]
        return z**3 * np.exp(-z * z / w2)

    def grad(p):
        z = p[..., axis]
        out = np.zeros_like(p)
        out[..., axis] = (3 * z * z - 2 * z**4 / w2) * np.exp(-z * z / w2)
        return out

    return GaugeFunction(name="windowed_cubic", phi=phi, grad=grad)


def _gauge_quadratic(d: int, matrix=None) -> GaugeFunction:
    m = np.eye(d) if matrix is None else np.asarray(matrix, dtype=float).reshape(d, d)
    m = (m + m.T) / 2

    return GaugeFunction(
        name="quadratic",
        phi=lambda p: 0.5 * np.einsum("...j,jk,...k->...", p, m, p),
        grad=lambda p: p @ m,
    )


_GAUGE_FAMILIES = {
    "linear": _gauge_linear,
    "cubic": _gauge_cubic,
    "windowed_cubic": _gauge_windowed_cubic,
    "quadratic": _gauge_quadratic,
}


def make_field(family: str, d: int, **params) -> FieldSpec:
    """Construct a built-in vector-potential family (scalar potential zero)."""
    try:
        ctor = _FIELD_FAMILIES[family]
    except KeyError:
        raise UnknownFamilyError(
            f"unknown field family {family!r}; known: {sorted(_FIELD_FAMILIES)}"
        ) from None
    return ctor(d, **params)


def make_potential(family: str, d: int, **params):
    """Return (V callable, lower bound) for a built-in scalar potential family."""
    try:
        ctor = _POTENTIAL_FAMILIES[family]
    except KeyError:
        raise UnknownFamilyError(
            f"unknown potential family {family!r}; known: {sorted(_POTENTIAL_FAMILIES)}"
        ) from None
    return ctor(d, **params)


def make_gauge(family: str, d: int, **params) -> GaugeFunction:
    """Construct a built-in gauge function."""
    try:
        ctor = _GAUGE_FAMILIES[family]
    except KeyError:
        raise UnknownFamilyError(
            f"unknown gauge family {family!r}; known: {sorted(_GAUGE_FAMILIES)}"
        ) from None
    return ctor(d, **params)


def make_field_spec(
    field_family: str = "zero",
    potential_family: str = "zero",
    d: int = 1,
    field_params: dict | None = None,
    potential_params: dict | None = None,
) -> FieldSpec:
    """Assemble a FieldSpec from named families, as declared in run configs."""
    fs = make_field(field_family, d, **(field_params or {}))
    v, floor = make_potential(potential_family, d, **(potential_params or {}))
    return replace(
        fs,
        v=v,
        v_floor=floor,
        name=fs.name,
        params={**fs.params, "potential": potential_family, **(potential_params or {})},
    )


def check_divergence(fs: FieldSpec, points, h: float = 1e-5, tol: float = 1e-6) -> float:
    """Max deviation of the declared div A from a central-difference check."""
    if fs.div_a is None:
        raise ValueError("field has no declared divergence")
    pts = _as_points(points, fs.d)
    num = np.zeros(pts.shape[:-1])
    for k in range(fs.d):
        e = np.zeros(fs.d)
        e[k] = h
        num = num + (fs.a(pts + e)[..., k] - fs.a(pts - e)[..., k]) / (2 * h)
    dev = float(np.max(np.abs(num - fs.div_a(pts))))
    if dev > tol:
        raise ValueError(f"declared div A deviates from central differences by {dev:.2e}")
    return dev
