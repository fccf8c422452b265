"""Physical parameters, damping profile, and wave-speed classification.

The beam carries three coupled fields (vertical displacement, shear angle,
longitudinal displacement) on (0, L) with clamped ends.  Viscoelastic
damping of Kelvin-Voigt type acts on the axial strain rate only, and only
on the subinterval (alpha, beta).
"""

import hashlib
import json
from dataclasses import asdict, dataclass

from .errors import BadInterval, NonPositiveParameter, OutOfDomain

__all__ = [
    "ModelParams",
    "SpeedClass",
    "EQUAL_SPEEDS",
    "UNEQUAL_SPEEDS",
    "validate_params",
    "damping_at",
    "classify_speeds",
    "params_digest",
]

EQUAL_SPEEDS = "EqualSpeeds"
UNEQUAL_SPEEDS = "UnequalSpeeds"

_POSITIVE_FIELDS = ("rho1", "rho2", "k1", "k2", "k3", "l", "L", "d0")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the damped curved-beam system.

    rho1   mass density times cross-section area
    rho2   rotational inertia
    k1     shear stiffness
    k2     bending stiffness
    k3     axial stiffness
    l      curvature of the undeformed centerline
    L      beam length
    alpha  left endpoint of the damped subinterval
    beta   right endpoint of the damped subinterval
    d0     viscoelastic damping coefficient on (alpha, beta)
    """

    rho1: float
    rho2: float
    k1: float
    k2: float
    k3: float
    l: float
    L: float
    alpha: float
    beta: float
    d0: float


@dataclass(frozen=True)
class SpeedClass:
    """Stability regime determined by the two wave speeds k1/rho1, k2/rho2.

    variant is ``EqualSpeeds`` or ``UnequalSpeeds``; the predicted exponents
    are the resolvent growth order (2 or 4) and the energy decay exponent
    (1.0 or 0.5) associated with the regime.
    """

    variant: str
    predicted_resolvent_exponent: int
    predicted_decay_exponent: float


def validate_params(p: ModelParams) -> ModelParams:
    """Check strict positivity and the damping-interval ordering.

    Returns p unchanged when valid.  Raises NonPositiveParameter naming the
    first offending coefficient, or BadInterval unless 0 < alpha < beta < L.
    """
    for name in _POSITIVE_FIELDS:
        value = getattr(p, name)
        if not value > 0:  # also rejects NaN
            raise NonPositiveParameter(name, value)
    if not (0.0 < p.alpha < p.beta < p.L):
        raise BadInterval(
            f"damping interval must satisfy 0 < alpha < beta < L, got "
            f"alpha={p.alpha!r}, beta={p.beta!r}, L={p.L!r}"
        )
    return p


def damping_at(p: ModelParams, x: float) -> float:
    """Pointwise damping coefficient d(x).

    Returns d0 strictly inside (alpha, beta) and 0 elsewhere; the endpoints
    alpha and beta themselves return 0 (measure-zero closure convention,
    invisible to the element-wise constant quadrature used downstream).
    """
    if not 0.0 <= x <= p.L:
        raise OutOfDomain(f"x={x!r} outside [0, {p.L!r}]")
    if p.alpha < x < p.beta:
        return p.d0
    return 0.0


def classify_speeds(p: ModelParams, rel_tol: float = 1e-12) -> SpeedClass:
    """Classify into the equal-speed or unequal-speed regime.

    Speeds are compared with a relative tolerance (default 1e-12) because
    floating-point parameter entry makes exact equality fragile.
    """
    validate_params(p)
    if rel_tol < 0:
        raise OutOfDomain(f"rel_tol={rel_tol!r} must be nonnegative")
    s1 = p.k1 / p.rho1
    s2 = p.k2 / p.rho2
    if abs(s1 - s2) <= rel_tol * max(s1, s2):
        return SpeedClass(EQUAL_SPEEDS, 2, 1.0)
    return SpeedClass(UNEQUAL_SPEEDS, 4, 0.5)


def params_digest(p: ModelParams, mesh_n: int | None = None) -> str:
    """Short stable hash of the parameter set (and optionally mesh size)."""
    payload = asdict(p)
    if mesh_n is not None:
        payload["mesh_n"] = mesh_n
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
