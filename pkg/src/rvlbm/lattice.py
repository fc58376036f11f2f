"""Velocity sets, moment polynomials, and shifted moment matrices.

A scheme couples a finite set of lattice velocities v_j with a basis of
multivariate polynomials P_k.  The moment matrix at shift u has entries
M_kj(u) = P_k(v_j - u); the first basis polynomial is the constant 1, so
row 0 is all ones for any shift and the first moment is the density.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonLatticeVelocity, SingularMatrix, ValidationError

# Relative pivot size below which a moment matrix is declared singular.
SINGULAR_PIVOT_RTOL = 1e-12


def _graded_lex_key(exponents: tuple[int, ...]) -> tuple:
    return (sum(exponents), exponents)


@dataclass(frozen=True)
class MomentPolynomial:
    """Sparse multivariate polynomial, a sum of coef * x^exponents terms.

    Terms are stored in graded lexicographic order with zero coefficients
    dropped, so equal polynomials compare equal structurally.
    """

    dim: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch(f"polynomial dimension must be >= 1, got {self.dim}")
        cleaned: dict[tuple[int, ...], float] = {}
        for exponents, coef in self.terms:
            exponents = tuple(int(e) for e in exponents)
            if len(exponents) != self.dim:
                raise DimensionMismatch(
                    f"exponent tuple {exponents} has length {len(exponents)}, expected {self.dim}"
                )
            if any(e < 0 for e in exponents):
                raise ValidationError(f"negative exponent in {exponents}")
            coef = float(coef) + cleaned.get(exponents, 0.0)
            if coef == 0.0:
                cleaned.pop(exponents, None)
            else:
                cleaned[exponents] = coef
        ordered = tuple(sorted(cleaned.items(), key=lambda kv: _graded_lex_key(kv[0])))
        object.__setattr__(self, "terms", ordered)

    @classmethod
    def constant(cls, dim: int, value: float = 1.0) -> "MomentPolynomial":
        return cls(dim, (((0,) * dim, value),))

    @classmethod
    def coordinate(cls, dim: int, axis: int) -> "MomentPolynomial":
        exps = tuple(1 if a == axis else 0 for a in range(dim))
        return cls(dim, ((exps, 1.0),))

    @classmethod
    def from_terms(cls, dim: int, mapping) -> "MomentPolynomial":
        return cls(dim, tuple((tuple(e), c) for e, c in dict(mapping).items()))

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def evaluate(self, x) -> float | np.ndarray:
        """Evaluate at x, a length-dim vector or a (dim, ...) stack of points."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"point has dimension {x.shape[0]}, expected {self.dim}")
        total = np.zeros(x.shape[1:])
        for exponents, coef in self.terms:
            term = np.full(x.shape[1:], coef)
            for axis, e in enumerate(exponents):
                if e:
                    term = term * x[axis] ** e
            total = total + term
        return float(total) if total.ndim == 0 else total

    def __call__(self, x):
        return self.evaluate(x)

    def is_constant_one(self) -> bool:
        return self.terms == (((0,) * self.dim, 1.0),)

    def is_coordinate(self, axis: int) -> bool:
        exps = tuple(1 if a == axis else 0 for a in range(self.dim))
        return self.terms == ((exps, 1.0),)

    def __str__(self) -> str:
        parts = []
        for exponents, coef in self.terms:
            mono = "*".join(
                f"x{a + 1}" + (f"^{e}" if e > 1 else "")
                for a, e in enumerate(exponents)
                if e
            )
            parts.append(f"{coef:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) if parts else "0"


def evaluate_polynomial(p: MomentPolynomial, x) -> float | np.ndarray:
    """Evaluate polynomial p at point(s) x."""
    return p.evaluate(x)


@dataclass(frozen=True)
class VelocitySet:
    """Lattice velocities v_j = lam * n_j with integer vectors n_j.

    lam is the lattice speed dx/dt; storing integer multiples keeps
    streaming an exact grid shift for any acoustic-scaled time step.
    """

    dim: int
    lam: float
    lattice_vectors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch(f"dimension must be >= 1, got {self.dim}")
        if not self.lam > 0:
            raise ValidationError(f"lattice speed must be positive, got {self.lam}")
        vecs = []
        for j, n in enumerate(self.lattice_vectors):
            if len(n) != self.dim:
                raise DimensionMismatch(
                    f"velocity {j} has dimension {len(n)}, expected {self.dim}"
                )
            for comp in n:
                if not float(comp).is_integer():
                    raise NonLatticeVelocity(
                        f"velocity {j} = {tuple(n)} is not an integer multiple of lam per axis"
                    )
            vecs.append(tuple(int(c) for c in n))
        if len(set(vecs)) != len(vecs):
            raise ValidationError("velocities must be pairwise distinct")
        if len(vecs) < self.dim + 1:
            raise ValidationError(
                f"need at least dim+1 = {self.dim + 1} velocities, got {len(vecs)}"
            )
        object.__setattr__(self, "lattice_vectors", tuple(vecs))

    @property
    def q(self) -> int:
        return len(self.lattice_vectors)

    @property
    def velocities(self) -> np.ndarray:
        """Physical velocities as a (q, dim) float array."""
        return self.lam * np.array(self.lattice_vectors, dtype=float)


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """Moment matrix M(u) together with its inverse, as immutable arrays."""

    m: np.ndarray
    m_inv: np.ndarray
    cond_estimate: float
    u_tilde: tuple[float, ...] = field(default=())

    def __post_init__(self):
        for arr in (self.m, self.m_inv):
            arr.setflags(write=False)

    @property
    def q(self) -> int:
        return self.m.shape[0]


def validate_basis(basis, dim: int, q: int) -> None:
    """Check the moment-basis convention: P_0 = 1 and P_k = X_k for k = 1..dim."""
    if len(basis) != q:
        raise DimensionMismatch(f"basis has {len(basis)} polynomials, expected q = {q}")
    for k, p in enumerate(basis):
        if p.dim != dim:
            raise DimensionMismatch(f"basis[{k}] has dimension {p.dim}, expected {dim}")
    if not basis[0].is_constant_one():
        raise ValidationError("basis[0] must be the constant polynomial 1")
    for k in range(1, min(dim, q - 1) + 1):
        if not basis[k].is_coordinate(k - 1):
            raise ValidationError(f"basis[{k}] must be the coordinate polynomial X_{k}")


def build_moment_matrix(basis, vset: VelocitySet, u_tilde) -> MomentMatrix:
    """Build M(u) with entries P_k(v_j - u) and invert it by pivoted LU.

    Raises SingularMatrix when the smallest pivot falls below
    SINGULAR_PIVOT_RTOL times the largest matrix entry.
    """
    u = np.asarray(u_tilde, dtype=float).reshape(-1)
    if u.shape[0] != vset.dim:
        raise DimensionMismatch(f"shift has dimension {u.shape[0]}, expected {vset.dim}")
    validate_basis(basis, vset.dim, vset.q)
    shifted = (vset.velocities - u).T  # (dim, q)
    m = np.empty((vset.q, vset.q))
    for k, p in enumerate(basis):
        m[k, :] = p.evaluate(shifted)
    scale = np.abs(m).max()
    if scale == 0.0:
        raise SingularMatrix("moment matrix is identically zero")
    with warnings.catch_warnings():
        # the pivot check below turns singularity into a typed error
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < SINGULAR_PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"moment matrix singular at shift {tuple(u)}: "
            f"pivot {pivots.min():.3e} below {SINGULAR_PIVOT_RTOL:g} * {scale:.3e}"
        )
    m_inv = scipy.linalg.lu_solve((lu, piv), np.eye(vset.q), check_finite=False)
    cond = float(
        np.abs(m).sum(axis=0).max() * np.abs(m_inv).sum(axis=0).max()
    )
    return MomentMatrix(m=m, m_inv=m_inv, cond_estimate=cond, u_tilde=tuple(u))


def shift_conjugation(basis, vset: VelocitySet, u_tilde) -> np.ndarray:
    """Return R(u) = M(u) M(0)^-1, the moment-space change of frame.

    Applied to rest-frame equilibrium moments it yields the shifted-frame
    equilibrium moments without touching the distributions.
    """
    m_u = build_moment_matrix(basis, vset, u_tilde)
    m_0 = build_moment_matrix(basis, vset, np.zeros(vset.dim))
    r = m_u.m @ m_0.m_inv
    r.setflags(write=False)
    return r


def default_basis(vset: VelocitySet) -> tuple[MomentPolynomial, ...]:
    """Convenience basis: 1, the coordinates, then graded monomials until q."""
    dim, q = vset.dim, vset.q
    basis = [MomentPolynomial.constant(dim)]
    basis += [MomentPolynomial.coordinate(dim, a) for a in range(dim)]
    degree = 2
    while len(basis) < q:
        monos = [
            e
            for e in itertools.product(range(degree + 1), repeat=dim)
            if sum(e) == degree
        ]
        for e in sorted(monos, key=_graded_lex_key):
            if len(basis) == q:
                break
            basis.append(MomentPolynomial(dim, ((tuple(e), 1.0),)))
        degree += 1
    return tuple(basis[:q])
