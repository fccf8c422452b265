"""Conforming P1 finite-element discretization of the damped beam system.

All three fields (phi, psi, w) share one mesh of (0, L) whose nodes include
the damping interface points alpha and beta, so the discontinuous
coefficient d(x) is constant on every element and the element integrals are
exact.  Clamped ends are imposed by excluding the boundary nodes from the
degree-of-freedom set; with interior dofs only, the stiffness matrix K and
mass matrix M are positive definite and the energy metric G = diag(K, M)
realizes the continuous energy norm.

Matrices are dense; at desk scale (a few hundred dofs per field) this is
both fastest and simplest.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import (
    DimensionMismatch,
    FactorizationFailed,
    IncompatibleBoundary,
    TooCoarse,
)
from .model import ModelParams

__all__ = [
    "FIELDS",
    "Mesh",
    "DofMap",
    "AssembledSystem",
    "StateVector",
    "EnergyComponents",
    "build_mesh",
    "assemble",
    "apply_generator",
    "energy",
    "inner_product_H",
    "g_norm_sq",
    "domain_norm",
    "project_initial_data",
]

FIELDS = ("phi", "psi", "w")


@dataclass(frozen=True, eq=False)
class Mesh:
    """1D mesh with the damping interface aligned to nodes.

    nodes is strictly increasing with nodes[0]=0 and nodes[-1]=L;
    nodes[alpha_index] and nodes[beta_index] equal alpha and beta bit-exactly.
    """

    n_elements: int
    nodes: np.ndarray
    alpha_index: int
    beta_index: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)


class DofMap:
    """Maps (field, interior node) pairs to flat indices, field-major.

    Interior nodes are numbered 1..n-1 in mesh order; field blocks are laid
    out phi, psi, w, each of size n_interior.
    """

    def __init__(self, n_nodes: int):
        self.n_interior = n_nodes - 2
        self.interior_nodes = np.arange(1, n_nodes - 1)

    @property
    def size(self) -> int:
        return 3 * self.n_interior

    def field_slice(self, field: str) -> slice:
        k = FIELDS.index(field)
        return slice(k * self.n_interior, (k + 1) * self.n_interior)

    def index(self, field: str, node: int) -> int:
        if not 1 <= node <= self.n_interior:
            raise DimensionMismatch(f"node {node} is not interior")
        return FIELDS.index(field) * self.n_interior + (node - 1)

    def node_dofs(self, node: int) -> list[int]:
        """All three dof indices attached to one interior node."""
        return [self.index(f, node) for f in FIELDS]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Discrete state U = (q, v): displacement and velocity blocks.

    Each block stacks the interior nodal values of (phi, psi, w) in dof_map
    order; entries may be real or complex.
    """

    q: np.ndarray
    v: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.q.copy(), self.v.copy())


@dataclass(frozen=True)
class EnergyComponents:
    kinetic: float
    potential: float
    total: float
    dissipation_rate: float


def build_mesh(p: ModelParams, n_elements: int) -> Mesh:
    """Uniform mesh of (0, L) with alpha and beta snapped onto nodes.

    Snapping moves one node by at most half an element width, so element
    widths stay within a factor 2 of L/n_elements.  Raises TooCoarse when
    the damping interval cannot contain a complete element (including when
    n_elements < 4 or an interface point sits closer to a boundary than
    half an element).
    """
    n = int(n_elements)
    if n < 4:
        raise TooCoarse(f"need at least 4 elements, got {n}")
    h = p.L / n
    nodes = np.linspace(0.0, p.L, n + 1)

    def snap_index(value, lo, hi):
        if value == 0.0:
            return 0
        if value == p.L:
            return n
        i = int(round(value / h))
        return min(max(i, lo), hi)

    ia = snap_index(p.alpha, 1, n - 1)
    ib = snap_index(p.beta, 1, n - 1)
    if ib <= ia:
        raise TooCoarse(
            f"interval ({p.alpha!r}, {p.beta!r}) holds no complete element "
            f"at n={n}"
        )
    if ia > 0:
        nodes[ia] = p.alpha
    if ib < n:
        nodes[ib] = p.beta
    widths = np.diff(nodes)
    if widths.min() < 0.5 * h * (1.0 - 1e-12):
        raise TooCoarse(
            f"snapping alpha/beta at n={n} would distort an element beyond "
            f"the factor-2 width bound; refine the mesh"
        )
    return Mesh(n_elements=n, nodes=nodes, alpha_index=ia, beta_index=ib)


def _field_matrices(nodes: np.ndarray, weights: np.ndarray):
    """Per-field (n+1)-square matrices of the elementary P1 products.

    Returns (A, S, D) with A[i,j] = sum_e w_e int N_i N_j, S[i,j] =
    sum_e w_e int N_i' N_j', D[i,j] = sum_e w_e int N_i' N_j, each integral
    over element e.  Exact: all integrands are polynomials of degree <= 2.
    """
    n_nodes = nodes.size
    A = np.zeros((n_nodes, n_nodes))
    S = np.zeros((n_nodes, n_nodes))
    D = np.zeros((n_nodes, n_nodes))
    h = np.diff(nodes)
    mass_ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    stiff_ref = np.array([[1.0, -1.0], [-1.0, 1.0]])
    mixed_ref = np.array([[-0.5, -0.5], [0.5, 0.5]])
    for e in range(n_nodes - 1):
        w = weights[e]
        if w == 0.0:
            continue
        sl = slice(e, e + 2)
        A[sl, sl] += w * h[e] * mass_ref
        S[sl, sl] += (w / h[e]) * stiff_ref
        D[sl, sl] += w * mixed_ref
    return A, S, D


class AssembledSystem:
    """Dense matrices of the discretized system, immutable after assembly.

    M, C, K act on the displacement/velocity blocks; G = diag(K, M) is the
    energy metric on states (q, v).  Cholesky factors of M and K are
    computed eagerly (both are positive definite); further factorizations
    are cached lazily behind a lock so the object stays shareable.
    """

    def __init__(self, params: ModelParams, mesh: Mesh):
        self.params = params
        self.mesh = mesh
        self.dof_map = DofMap(mesh.nodes.size)
        self.M, self.C, self.K = _assemble_matrices(params, mesh)
        n = self.dof_map.size
        self.G = np.zeros((2 * n, 2 * n))
        self.G[:n, :n] = self.K
        self.G[n:, n:] = self.M
        try:
            self._m_chol = cho_factor(self.M, lower=True)
            self._k_chol = cho_factor(self.K, lower=True)
        except LinAlgError as exc:
            raise FactorizationFailed(
                f"mass/stiffness factorization failed: {exc}"
            ) from exc
        self._m_lower = np.tril(self._m_chol[0])
        self._k_lower = np.tril(self._k_chol[0])
        self._cache_lock = threading.Lock()
        self._step_cache: dict[float, tuple] = {}

    @property
    def n_dofs(self) -> int:
        return self.dof_map.size

    def solve_m(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self._m_chol, rhs)

    def chol_k_lower(self) -> np.ndarray:
        """Lower-triangular Cholesky factor of K (treat as read-only)."""
        return self._k_lower

    def chol_m_lower(self) -> np.ndarray:
        return self._m_lower


def _assemble_matrices(p: ModelParams, mesh: Mesh):
    """Element-exact assembly of M, C, K on interior dofs."""
    nodes = mesh.nodes
    n_el = mesh.n_elements
    ones = np.ones(n_el)
    damped = np.zeros(n_el)
    damped[mesh.alpha_index : mesh.beta_index] = p.d0

    A, S, D = _field_matrices(nodes, ones)
    Ad, Sd, Dd = _field_matrices(nodes, damped)
    l = p.l

    zero = np.zeros_like(A)
    # Stiffness: k1|phi' + psi + l w|^2 + k2|psi'|^2 + k3|w' - l phi|^2
    K_full = np.block(
        [
            [p.k1 * S + p.k3 * l * l * A, p.k1 * D, p.k1 * l * D - p.k3 * l * D.T],
            [p.k1 * D.T, p.k1 * A + p.k2 * S, p.k1 * l * A],
            [p.k1 * l * D.T - p.k3 * l * D, p.k1 * l * A, p.k1 * l * l * A + p.k3 * S],
        ]
    )
    # Damping: d(x)|v_w' - l v_phi|^2, active dofs only under (alpha, beta)
    C_full = np.block(
        [
            [l * l * Ad, zero, -l * Dd.T],
            [zero, zero, zero],
            [-l * Dd, zero, Sd],
        ]
    )
    # Mass: rho1|v_phi|^2 + rho2|v_psi|^2 + rho1|v_w|^2
    M_full = np.block(
        [
            [p.rho1 * A, zero, zero],
            [zero, p.rho2 * A, zero],
            [zero, zero, p.rho1 * A],
        ]
    )

    n_nodes = nodes.size
    interior = np.arange(1, n_nodes - 1)
    idx = np.concatenate([interior + k * n_nodes for k in range(3)])
    sel = np.ix_(idx, idx)
    # Symmetrize to scrub roundoff from the block arithmetic
    K_mat = K_full[sel]
    C_mat = C_full[sel]
    M_mat = M_full[sel]
    K_mat = 0.5 * (K_mat + K_mat.T)
    C_mat = 0.5 * (C_mat + C_mat.T)
    M_mat = 0.5 * (M_mat + M_mat.T)
    return M_mat, C_mat, K_mat


def assemble(p: ModelParams, mesh: Mesh) -> AssembledSystem:
    """Assemble mass, damping, stiffness, and the energy metric for a mesh."""
    return AssembledSystem(p, mesh)


def _check_dims(sys: AssembledSystem, U: StateVector):
    n = sys.n_dofs
    if U.q.shape != (n,) or U.v.shape != (n,):
        raise DimensionMismatch(
            f"state blocks {U.q.shape}/{U.v.shape} do not match {n} dofs"
        )


def apply_generator(sys: AssembledSystem, U: StateVector) -> StateVector:
    """Discrete generator: (q, v) -> (v, -M^{-1}(K q + C v))."""
    _check_dims(sys, U)
    accel = -sys.solve_m(sys.K @ U.q + sys.C @ U.v)
    return StateVector(U.v.copy(), accel)


def energy(sys: AssembledSystem, U: StateVector) -> EnergyComponents:
    """Kinetic/potential split of the energy plus the dissipation rate.

    For complex states the real parts are taken; all quadratic forms here
    are real-valued on Hermitian arguments anyway.
    """
    _check_dims(sys, U)
    kinetic = 0.5 * np.vdot(U.v, sys.M @ U.v).real
    potential = 0.5 * np.vdot(U.q, sys.K @ U.q).real
    dissipation = np.vdot(U.v, sys.C @ U.v).real
    return EnergyComponents(
        kinetic=kinetic,
        potential=potential,
        total=kinetic + potential,
        dissipation_rate=dissipation,
    )


def inner_product_H(sys: AssembledSystem, U: StateVector, V: StateVector) -> complex:
    """Energy inner product (U, V) = V* G U with G = diag(K, M)."""
    _check_dims(sys, U)
    _check_dims(sys, V)
    return complex(np.vdot(V.q, sys.K @ U.q) + np.vdot(V.v, sys.M @ U.v))


def g_norm_sq(sys: AssembledSystem, U: StateVector) -> float:
    """Squared energy norm ||U||_G^2 (twice the total energy)."""
    return inner_product_H(sys, U, U).real


def domain_norm(sys: AssembledSystem, U: StateVector) -> float:
    """Graph norm squared ||U||_G^2 + ||A_h U||_G^2."""
    AU = apply_generator(sys, U)
    return g_norm_sq(sys, U) + g_norm_sq(sys, AU)


def project_initial_data(sys: AssembledSystem, mesh: Mesh, fields) -> StateVector:
    """Nodal interpolation of closed-form initial data.

    fields = (phi0, psi0, w0, phi1, psi1, w1): the first three fill the
    displacement block, the last three the velocity block.  Every function
    must vanish at both ends (|f| <= 1e-12 at x=0 and x=L), matching the
    clamped boundary conditions.
    """
    if len(fields) != 6:
        raise DimensionMismatch(f"expected 6 field functions, got {len(fields)}")
    L = mesh.nodes[-1]
    for i, f in enumerate(fields):
        if abs(f(0.0)) > 1e-12 or abs(f(L)) > 1e-12:
            raise IncompatibleBoundary(
                f"initial field #{i} does not vanish at the clamped ends"
            )
    xi = mesh.nodes[1:-1]
    q = np.concatenate([np.asarray([f(x) for x in xi], dtype=float) for f in fields[:3]])
    v = np.concatenate([np.asarray([f(x) for x in xi], dtype=float) for f in fields[3:]])
    U = StateVector(q, v)
    _check_dims(sys, U)
    return U
