"""Mechanical derivation of the equivalent equation of a scheme.

The density of a scheme with one conservation law obeys, after elimination of
the fast moments,

    d_t rho = A_0 rho + Delta A_1 rho + Delta^2 A_2 rho + O(Delta^3),

where each A_l is a constant-coefficient spatial differential operator.  This
module builds the A_l by iterated substitution of the time derivative: the
conservation defaults theta_k are formed from the per-velocity derivative
E_j (d_t + v_j . grad) with d_t replaced by the series known so far, and the
Henon parameters sigma_k = 1/s_k - 1/2 weight their contributions.  It also
predicts the slaved non-conserved moments (xi_k) for the transition-residual
experiments, and cross-checks A_2 against the zero-shift regrouped form based
on the momentum-velocity tensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import (
    DimensionMismatch,
    MismatchBeyondTolerance,
    NonConstantShift,
    OrderUnavailable,
    ValidationError,
)
from .lattice import _graded_lex_key, build_moment_matrix
from .scheme import SchemeSpec

CROSSCHECK_RTOL = 1e-10


def _axis_name(axis: int, dim: int) -> str:
    return "xyz"[axis] if dim <= 3 else f"x{axis + 1}"


@dataclass(frozen=True)
class DifferentialOperator:
    """Constant-coefficient operator Sum_a C_a d^a, sparse over multi-indices a.

    Terms are kept in graded lexicographic order with exact-zero coefficients
    dropped, so equal operators compare equal structurally.  Composition is
    commutative (all coefficients are constants) and `symbol` evaluates the
    Fourier symbol Sum_a C_a prod_b (i k_b)^{a_b}.
    """

    dim: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        acc: dict[tuple[int, ...], float] = {}
        for exps, coef in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim:
                raise DimensionMismatch(
                    f"multi-index {exps} has length {len(exps)}, expected {self.dim}"
                )
            if any(e < 0 for e in exps):
                raise ValidationError(f"negative exponent in multi-index {exps}")
            acc[exps] = acc.get(exps, 0.0) + float(coef)
        canon = tuple(
            (e, acc[e]) for e in sorted(acc, key=_graded_lex_key) if acc[e] != 0.0
        )
        object.__setattr__(self, "terms", canon)

    @classmethod
    def zero(cls, dim: int) -> "DifferentialOperator":
        return cls(dim, ())

    @classmethod
    def partial(cls, dim: int, axis: int, order: int = 1) -> "DifferentialOperator":
        exps = [0] * dim
        exps[axis] = order
        return cls(dim, ((tuple(exps), 1.0),))

    @classmethod
    def gradient_dot(cls, dim: int, vector) -> "DifferentialOperator":
        """The transport operator v . grad for a constant vector v."""
        return cls(
            dim,
            tuple(
                (tuple(1 if b == a else 0 for b in range(dim)), float(v))
                for a, v in enumerate(vector)
            ),
        )

    @classmethod
    def from_terms(cls, dim: int, mapping) -> "DifferentialOperator":
        return cls(dim, tuple(mapping.items() if hasattr(mapping, "items") else mapping))

    def coefficient(self, exps) -> float:
        exps = tuple(int(e) for e in exps)
        for e, c in self.terms:
            if e == exps:
                return c
        return 0.0

    def is_zero(self) -> bool:
        return not self.terms

    def derivative_orders(self) -> tuple[int, ...]:
        return tuple(sorted({sum(e) for e, _ in self.terms}))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    def __add__(self, other: "DifferentialOperator") -> "DifferentialOperator":
        if self.dim != other.dim:
            raise DimensionMismatch("operator dimensions differ")
        return DifferentialOperator(self.dim, self.terms + other.terms)

    def __sub__(self, other: "DifferentialOperator") -> "DifferentialOperator":
        return self + (-other)

    def __neg__(self) -> "DifferentialOperator":
        return DifferentialOperator(self.dim, tuple((e, -c) for e, c in self.terms))

    def __mul__(self, scalar) -> "DifferentialOperator":
        return DifferentialOperator(
            self.dim, tuple((e, c * float(scalar)) for e, c in self.terms)
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "DifferentialOperator") -> "DifferentialOperator":
        """Composition; exponents add since all coefficients are constant."""
        if self.dim != other.dim:
            raise DimensionMismatch("operator dimensions differ")
        out: dict[tuple[int, ...], float] = {}
        for ea, ca in self.terms:
            for eb, cb in other.terms:
                key = tuple(x + y for x, y in zip(ea, eb))
                out[key] = out.get(key, 0.0) + ca * cb
        return DifferentialOperator(self.dim, tuple(out.items()))

    def symbol(self, k) -> complex:
        k = np.asarray(k, dtype=float)
        if k.shape != (self.dim,):
            raise DimensionMismatch(f"wavevector shape {k.shape}, expected ({self.dim},)")
        ik = 1j * k
        total = 0.0 + 0.0j
        for exps, coef in self.terms:
            term = complex(coef)
            for a, e in enumerate(exps):
                if e:
                    term *= ik[a] ** e
            total += term
        return total

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps, coef in self.terms:
            d = "".join(_axis_name(a, self.dim) * e for a, e in enumerate(exps))
            parts.append(f"{coef:g} ∂{d}" if d else f"{coef:g}")
        return " + ".join(parts)


@dataclass(frozen=True)
class TimeSubstitution:
    """Replacement rule for the time derivative: d_t -> Sum_l Delta^l series[l]."""

    series: tuple[DifferentialOperator, ...]

    def __post_init__(self):
        if not self.series:
            raise ValidationError("time substitution needs at least the order-0 operator")
        object.__setattr__(self, "series", tuple(self.series))

    @property
    def order(self) -> int:
        return len(self.series) - 1


@dataclass(frozen=True)
class ThetaSet:
    """Conservation defaults theta_k as Delta-series of spatial operators.

    operators[k][l] is the order-l part of theta_k; the series depth equals the
    depth of the time substitution it was built from.
    """

    operators: tuple[tuple[DifferentialOperator, ...], ...]

    @property
    def order(self) -> int:
        return len(self.operators[0]) - 1

    def operator(self, k: int, order: int = 0) -> DifferentialOperator:
        if order > self.order:
            raise OrderUnavailable(
                f"theta series computed to order {self.order}, order {order} requested"
            )
        return self.operators[k][order]


@dataclass(frozen=True)
class HenonVector:
    """Parameters sigma_k = 1/s_k - 1/2 for the non-conserved moments.

    Slot 0 carries no value: the conserved moment has no relaxation time.
    """

    sigma: tuple

    def __getitem__(self, k: int) -> float:
        if k < 1:
            raise LookupError("sigma is undefined for the conserved moment k=0")
        return self.sigma[k]


def henon_sigma(s) -> HenonVector:
    values: list = [None]
    for sk in tuple(s)[1:]:
        values.append(1.0 / float(sk) - 0.5)
    return HenonVector(tuple(values))


def advection_vector(spec: SchemeSpec) -> np.ndarray:
    """First-order transport velocity c = Sum_j v_j E_j."""
    return np.asarray(spec.equilibrium) @ spec.vset.velocities


def conservation_defaults(spec: SchemeSpec, subst: TimeSubstitution, *, shift=None) -> ThetaSet:
    """theta_k = Sum_j M_kj(u) E_j (d_t + v_j . grad) with d_t replaced by subst.

    The order-0 part collects e_k(u) subst[0] + Sum_b g_k^b d_b with
    g_k^b = Sum_j M_kj(u) E_j v_j^b; order l >= 1 is e_k(u) subst[l].  `shift`
    overrides the scheme's constant shift (used for the zero-shift variant).
    """
    d = spec.dim
    u = spec.u_tilde.constant_vector(d) if shift is None else tuple(shift)
    mm = build_moment_matrix(spec.basis, spec.vset, u)
    ew = np.asarray(spec.equilibrium)
    vel = spec.vset.velocities
    e = mm.m @ ew
    g = mm.m @ (ew[:, None] * vel)  # g[k, b]
    rows = []
    for k in range(spec.q):
        order0 = e[k] * subst.series[0]
        for b in range(d):
            order0 = order0 + g[k, b] * DifferentialOperator.partial(d, b)
        rows.append((order0,) + tuple(e[k] * op for op in subst.series[1:]))
    return ThetaSet(tuple(rows))


@dataclass(frozen=True)
class EquivalentEquation:
    """Operators [A_0, A_1, A_2] and the tensors read off them.

    `a2_variant` is the third-order operator obtained when the order-1 theta
    correction inside the Delta term keeps the scheme's own shift instead of
    the zero shift; it coincides with ops[2] when the shift is zero.
    """

    dim: int
    order: int
    ops: tuple[DifferentialOperator, ...]
    c: np.ndarray
    D: np.ndarray | None
    T: np.ndarray | None
    a2_variant: DifferentialOperator | None

    def symbol_series(self, k) -> tuple[complex, ...]:
        """Predicted growth-rate coefficients (mu_0 .. mu_{order-1}) at k."""
        return tuple(op.symbol(k) for op in self.ops)

    def structure_violations(self) -> list[tuple[int, tuple[int, ...]]]:
        """Multi-indices whose derivative order differs from Delta-order + 1."""
        bad = []
        for l, op in enumerate(self.ops):
            for exps, _ in op.terms:
                if sum(exps) != l + 1:
                    bad.append((l, exps))
        return bad

    def to_json_dict(self) -> dict:
        def op_terms(op):
            return [
                {"multi_index": list(e), "coefficient": c} for e, c in op.terms
            ]

        out = {
            "dim": self.dim,
            "order": self.order,
            "operators": [
                {"order": l, "terms": op_terms(op)} for l, op in enumerate(self.ops)
            ],
            "tensors": {
                "c": self.c.tolist(),
                "D": None if self.D is None else self.D.tolist(),
                "T": None if self.T is None else self.T.tolist(),
            },
        }
        if self.a2_variant is not None:
            out["a2_variant_terms"] = op_terms(self.a2_variant)
            diff = self.ops[2] - self.a2_variant
            out["theta_convention_max_difference"] = diff.max_abs_coefficient()
        return out

    def pretty(self) -> str:
        """Text form, e.g. '∂t ρ + 0.5 ∂x ρ = Δ·(0.375 ∂xx ρ) + ...'."""
        lhs = ["∂t ρ"]
        for exps, coef in self.ops[0].terms:
            d = "".join(_axis_name(a, self.dim) * e for a, e in enumerate(exps))
            sign = "+" if coef <= 0 else "-"
            lhs.append(f"{sign} {abs(coef):g} ∂{d} ρ")
        rhs = []
        prefix = {1: "Δ·", 2: "Δ²·"}
        for l, op in enumerate(self.ops[1:], start=1):
            if op.is_zero():
                continue
            body = " + ".join(
                f"{coef:g} ∂{''.join(_axis_name(a, self.dim) * e for a, e in enumerate(exps))} ρ"
                for exps, coef in op.terms
            )
            rhs.append(f"{prefix[l]}({body})")
        return " ".join(lhs) + " = " + (" + ".join(rhs) if rhs else "0")


def _symmetric_tensor(op: DifferentialOperator, rank: int, dim: int) -> np.ndarray:
    """Coefficients of op as a fully symmetric rank-`rank` tensor.

    A multi-index a is spread uniformly over its rank!/a! index permutations,
    so Sum over tensor indices reproduces the operator exactly.
    """
    out = np.zeros((dim,) * rank)
    for exps, coef in op.terms:
        axes = []
        for a, e in enumerate(exps):
            axes.extend([a] * e)
        if len(axes) != rank:
            continue
        spread = set(permutations(axes))
        for idx in spread:
            out[idx] = coef / len(spread)
    return out


def _sigma_or_fail(spec: SchemeSpec) -> HenonVector:
    return henon_sigma(spec.s)


def derive_equivalent_equation(spec: SchemeSpec, order: int) -> EquivalentEquation:
    """Build the equivalent equation of `spec` up to the requested Delta order.

    order 1 gives transport only (A_0); order 2 adds the diffusion operator
    A_1 = Sum_b sigma_b d_b theta_b^(0); order 3 adds A_2 assembled from the
    shift-frame sigma-sigma group, the (1/12) fourth-moment group, the (1/6)
    mixed time-space group, and the order-1 correction of the Delta term taken
    at zero shift.  The same correction taken at the scheme's shift is kept as
    `a2_variant`.
    """
    if order not in (1, 2, 3):
        raise OrderUnavailable(f"order {order!r} not derivable; choose 1, 2 or 3")
    if not spec.u_tilde.is_constant:
        raise NonConstantShift("equivalent equation requires a constant shift")
    d = spec.dim
    q = spec.q
    vel = spec.vset.velocities
    ew = np.asarray(spec.equilibrium)

    c = advection_vector(spec)
    a0 = DifferentialOperator(
        d, tuple((tuple(1 if b == a else 0 for b in range(d)), -c[a]) for a in range(d))
    )
    if order == 1:
        return EquivalentEquation(d, 1, (a0,), c, None, None, None)

    sigma = _sigma_or_fail(spec)
    theta0 = conservation_defaults(spec, TimeSubstitution((a0,)))
    a1 = DifferentialOperator.zero(d)
    for b in range(1, d + 1):
        a1 = a1 + sigma[b] * (DifferentialOperator.partial(d, b - 1) @ theta0.operator(b))
    if order == 2:
        D = _symmetric_tensor(a1, 2, d)
        return EquivalentEquation(d, 2, (a0, a1), c, D, None, None)

    subst = TimeSubstitution((a0, a1))
    theta_z = conservation_defaults(spec, subst, shift=(0.0,) * d)
    theta_u = conservation_defaults(spec, subst)
    u = spec.u_tilde.constant_vector(d)
    mm = build_moment_matrix(spec.basis, spec.vset, u)

    # order-1 correction of the Delta term, zero-shift theta convention
    delta_corr_z = DifferentialOperator.zero(d)
    delta_corr_u = DifferentialOperator.zero(d)
    for b in range(1, d + 1):
        pb = DifferentialOperator.partial(d, b - 1)
        delta_corr_z = delta_corr_z + sigma[b] * (pb @ theta_z.operator(b, 1))
        delta_corr_u = delta_corr_u + sigma[b] * (pb @ theta_u.operator(b, 1))

    # sigma_b sigma_l group, built from M(u)^-1 without simplification
    sigma_group = DifferentialOperator.zero(d)
    for b in range(1, d + 1):
        pb = DifferentialOperator.partial(d, b - 1)
        for l in range(1, q):
            inner = DifferentialOperator.zero(d)
            for j in range(q):
                w = vel[j, b - 1] * mm.m_inv[j, l]
                if w == 0.0:
                    continue
                inner = inner + w * (a0 + DifferentialOperator.gradient_dot(d, vel[j]))
            sigma_group = sigma_group + (sigma[b] * sigma[l]) * (
                pb @ inner @ theta0.operator(l)
            )

    # (1/12) group: fourth moments of the per-velocity derivative
    twelfth = DifferentialOperator.zero(d)
    for j in range(q):
        dtj = ew[j] * (a0 + DifferentialOperator.gradient_dot(d, vel[j]))
        for b in range(d):
            for g in range(d):
                w = vel[j, b] * vel[j, g]
                if w == 0.0:
                    continue
                twelfth = twelfth + (w / 12.0) * (
                    DifferentialOperator.partial(d, b)
                    @ DifferentialOperator.partial(d, g)
                    @ dtj
                )

    # (1/6) mixed time-space group
    sixth = DifferentialOperator.zero(d)
    for b in range(1, d + 1):
        sixth = sixth + (1.0 / 6.0) * (
            DifferentialOperator.partial(d, b - 1) @ a0 @ theta0.operator(b)
        )

    core = sixth + twelfth - sigma_group
    a2 = delta_corr_z + core
    a2_variant = delta_corr_u + core

    D = _symmetric_tensor(a1, 2, d)
    T = _symmetric_tensor(a2, 3, d)
    return EquivalentEquation(d, 3, (a0, a1, a2), c, D, T, a2_variant)


@dataclass(frozen=True)
class XiPrediction:
    """Slaved-moment predictors: m_k and m_k* as corrections to equilibrium.

    xi[k] is a Delta-series of operators; the predictions read
      m_k  = e_k rho - Delta (1/2 + sigma_k) xi_k rho + O(Delta^3)
      m_k* = e_k rho + Delta (1/2 - sigma_k) xi_k rho + O(Delta^3)
    with xi_k truncated after its order-(order-2) part.
    """

    dim: int
    order: int
    e: tuple[float, ...]
    sigma: HenonVector
    xi: tuple[tuple[DifferentialOperator, ...], ...]

    def pre_collision_factor(self, k: int) -> float:
        return -(0.5 + self.sigma[k])

    def post_collision_factor(self, k: int) -> float:
        return 0.5 - self.sigma[k]


def transition_prediction(spec: SchemeSpec, order: int) -> XiPrediction:
    """Predict the non-conserved moments to O(Delta^order).

    xi_k = theta_k - Delta Sum_{j, l>=1} sigma_l M_kj(u) (d_t + v_j . grad)
    (M^-1(u))_jl theta_l^(0), with d_t already substituted; order 2 keeps only
    theta_k^(0).
    """
    if order not in (2, 3):
        raise OrderUnavailable(f"order {order!r} not predictable; choose 2 or 3")
    if not spec.u_tilde.is_constant:
        raise NonConstantShift("transition prediction requires a constant shift")
    d = spec.dim
    q = spec.q
    eq = derive_equivalent_equation(spec, order)
    a0 = eq.ops[0]
    sigma = _sigma_or_fail(spec)
    u = spec.u_tilde.constant_vector(d)
    mm = build_moment_matrix(spec.basis, spec.vset, u)
    e = mm.m @ np.asarray(spec.equilibrium)
    vel = spec.vset.velocities

    if order == 2:
        theta = conservation_defaults(spec, TimeSubstitution((a0,)))
        xi = tuple((theta.operator(k),) for k in range(q))
        return XiPrediction(d, 2, tuple(e), sigma, xi)

    a1 = eq.ops[1]
    theta = conservation_defaults(spec, TimeSubstitution((a0, a1)))
    xi_rows = []
    for k in range(q):
        psi = DifferentialOperator.zero(d)
        for l in range(1, q):
            inner = DifferentialOperator.zero(d)
            for j in range(q):
                w = mm.m[k, j] * mm.m_inv[j, l]
                if w == 0.0:
                    continue
                inner = inner + w * (a0 + DifferentialOperator.gradient_dot(d, vel[j]))
            psi = psi + sigma[l] * (inner @ theta.operator(l))
        xi_rows.append((theta.operator(k), theta.operator(k, 1) - psi))
    return XiPrediction(d, 3, tuple(e), sigma, tuple(xi_rows))


def momentum_velocity_tensor(spec: SchemeSpec) -> np.ndarray:
    """Lambda^{bg}_l = Sum_j v_j^b v_j^g (M(0)^-1)_jl, shape (d, d, q)."""
    mm = build_moment_matrix(spec.basis, spec.vset, (0.0,) * spec.dim)
    vel = spec.vset.velocities
    return np.einsum("jb,jg,jl->bgl", vel, vel, mm.m_inv)


def dhumieres_crosscheck(spec: SchemeSpec, rtol: float = CROSSCHECK_RTOL) -> dict:
    """Recompute A_2 at zero shift through the regrouped tensor form.

    The regrouping splits the per-velocity derivative into time and transport
    parts, collapses the sigma-sigma transport part onto the
    momentum-velocity tensor, and turns the (1/12) group into second
    derivatives of Lambda-contracted conservation defaults.  Any disagreement
    with the direct derivation beyond `rtol` (relative to the largest
    coefficient) signals an implementation bug.
    """
    u = spec.u_tilde.constant_vector(spec.dim)
    if any(v != 0.0 for v in u):
        raise ValidationError("crosscheck is defined at zero shift only")
    d = spec.dim
    q = spec.q
    eq = derive_equivalent_equation(spec, 3)
    a0, a1, a2_direct = eq.ops
    sigma = _sigma_or_fail(spec)
    theta0 = conservation_defaults(spec, TimeSubstitution((a0,)))
    lam = momentum_velocity_tensor(spec)
    c = eq.c

    regrouped = DifferentialOperator.zero(d)
    for b in range(1, d + 1):
        pb = DifferentialOperator.partial(d, b - 1)
        # order-1 theta correction: sigma_b c^b d_b A_1
        regrouped = regrouped + (sigma[b] * c[b - 1]) * (pb @ a1)
        # time part of the sigma-sigma group collapses onto moment b itself
        regrouped = regrouped - sigma[b] ** 2 * (pb @ a0 @ theta0.operator(b))
        # (1/6) mixed group
        regrouped = regrouped + (1.0 / 6.0) * (pb @ a0 @ theta0.operator(b))
    for b in range(d):
        for g in range(d):
            pbg = DifferentialOperator.partial(d, b) @ DifferentialOperator.partial(d, g)
            # transport part of the sigma-sigma group via the Lambda tensor
            for l in range(1, q):
                if lam[b, g, l] == 0.0:
                    continue
                regrouped = regrouped - (sigma[b + 1] * sigma[l] * lam[b, g, l]) * (
                    pbg @ theta0.operator(l)
                )
            # (1/12) group via Lambda-contracted conservation defaults
            contracted = DifferentialOperator.zero(d)
            for l in range(q):
                if lam[b, g, l] != 0.0:
                    contracted = contracted + lam[b, g, l] * theta0.operator(l)
            regrouped = regrouped + (1.0 / 12.0) * (pbg @ contracted)

    diff = a2_direct - regrouped
    scale = max(a2_direct.max_abs_coefficient(), regrouped.max_abs_coefficient(), 1e-300)
    rel = diff.max_abs_coefficient() / scale
    report = {
        "max_abs_difference": diff.max_abs_coefficient(),
        "scale": scale,
        "relative_difference": rel,
        "tolerance": rtol,
        "pass": bool(rel <= rtol),
        "direct_terms": len(a2_direct.terms),
        "regrouped_terms": len(regrouped.terms),
    }
    if not report["pass"]:
        raise MismatchBeyondTolerance(
            f"regrouped A_2 deviates from the direct derivation by {rel:.3e} "
            f"(tolerance {rtol:.1e})"
        )
    return report
