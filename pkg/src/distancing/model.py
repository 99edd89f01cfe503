"""Closed-form cost model of communication and the division of labor.

Production splits a unit range of tasks across specialist workers.  Every
hand-off between workers, plus the final hand-off to the customer, is one
contact at cost ``tau`` (expressed relative to the wage), so a run with
``n`` contacts costs ``n*tau + n**(-gamma)/gamma``: more contacts buy a
finer division of labor and cheaper production.  Minimizing over ``n``
(treated as continuous; integer effects are ignored) gives closed forms
for the contact count and the unit cost, and those forms extend to
density-dependent contact costs, contact caps, and a telecom fallback.

Everything here is a pure, stateless scalar function, safe to call from
any number of threads.  Aggregation and data handling live elsewhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "FirmParams",
    "Intervention",
    "Regime",
    "optimal_contacts",
    "unit_cost",
    "contacts_at_density",
    "unit_cost_at_density",
    "distancing_cost_ratio",
    "telecom_cost_ratio",
    "preferred_regime",
    "compensating_subsidy",
]

# chi and gamma are redundant parameterizations; constructors keep them
# consistent to well below this tolerance.
_IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class FirmParams:
    """Communication cost share ``chi`` and specialization benefit ``gamma``.

    The two are tied by ``chi = gamma / (1 + gamma)``; build instances via
    :meth:`from_chi` or :meth:`from_gamma` so the identity always holds.
    ``chi == 0`` (``gamma == 0``) is the degenerate no-communication firm:
    it is accepted so aggregation code can treat such industries uniformly,
    but the unit-cost functions reject it.
    """

    chi: float
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.chi) or not 0.0 <= self.chi < 1.0:
            raise DomainError(f"chi must lie in [0, 1), got {self.chi!r}")
        if not math.isfinite(self.gamma) or self.gamma < 0.0:
            raise DomainError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        if abs(self.chi - self.gamma / (1.0 + self.gamma)) > _IDENTITY_TOL:
            raise DomainError(
                f"inconsistent parameters: chi={self.chi!r} but "
                f"gamma/(1+gamma)={self.gamma / (1.0 + self.gamma)!r}"
            )

    @classmethod
    def from_chi(cls, chi: float) -> "FirmParams":
        """Build from the communication cost share, ``0 <= chi < 1``."""
        if not math.isfinite(chi) or not 0.0 <= chi < 1.0:
            raise DomainError(f"chi must lie in [0, 1), got {chi!r}")
        return cls(chi=chi, gamma=chi / (1.0 - chi))

    @classmethod
    def from_gamma(cls, gamma: float) -> "FirmParams":
        """Build from the division-of-labor benefit, ``gamma >= 0``."""
        if not math.isfinite(gamma) or gamma < 0.0:
            raise DomainError(f"gamma must be finite and >= 0, got {gamma!r}")
        return cls(chi=gamma / (1.0 + gamma), gamma=gamma)


@dataclass(frozen=True)
class Intervention:
    """A contact-limiting policy: cap on face-to-face contacts, optional telecom.

    ``telecom_cost`` is the per-contact cost of the online fallback; ``None``
    means the fallback is unavailable.
    """

    contact_cap: float
    telecom_cost: float | None = None

    def __post_init__(self):
        _require_positive("contact_cap", self.contact_cap)
        if self.telecom_cost is not None:
            _require_positive("telecom_cost", self.telecom_cost)


class Regime(enum.Enum):
    """How a firm operates under an intervention."""

    UNCONSTRAINED = "unconstrained"
    DISTANCED = "distanced"
    TELECOM = "telecom"


def _require_positive(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a positive finite real, got {value!r}")


def optimal_contacts(tau: float, params: FirmParams) -> float:
    """Cost-minimizing number of contacts, ``tau ** (-1 / (1 + gamma))``.

    Cheaper contact (lower ``tau``) means more hand-offs; a higher ``gamma``
    mutes the response because specialization is valuable regardless.
    """
    _require_positive("tau", tau)
    return tau ** (-1.0 / (1.0 + params.gamma))


def unit_cost(tau: float, params: FirmParams) -> float:
    """Minimized unit cost ``tau**chi / chi``.

    Equals the total cost ``n*tau + n**(-gamma)/gamma`` evaluated at
    ``optimal_contacts(tau)``.  Requires ``chi > 0``.
    """
    _require_positive("tau", tau)
    if params.chi <= 0.0:
        raise DomainError("unit_cost is undefined for chi = 0 (no communication)")
    return tau**params.chi / params.chi


def contacts_at_density(d: float, eps: float, params: FirmParams) -> float:
    """Optimal contacts when contact cost falls with density: ``d**(eps*(1-chi))``.

    Contact cost is ``tau = d**(-eps)`` at normalized density ``d``, so this
    is ``optimal_contacts(d**(-eps), params)`` in closed form.
    """
    _require_positive("d", d)
    _require_positive("eps", eps)
    return d ** (eps * (1.0 - params.chi))


def unit_cost_at_density(d: float, eps: float, params: FirmParams) -> float:
    """Unit cost at density ``d``: ``d**(-eps*chi) / chi``, decreasing in ``d``."""
    _require_positive("d", d)
    _require_positive("eps", eps)
    if params.chi <= 0.0:
        raise DomainError("unit_cost_at_density is undefined for chi = 0")
    return d ** (-eps * params.chi) / params.chi


def distancing_cost_ratio(cap_ratio: float, params: FirmParams) -> float:
    """Cost ratio of a capped firm to an unconstrained one.

    ``cap_ratio`` is cap over optimal contacts.  At or above 1 the cap does
    not bind and the ratio is exactly 1.  Below 1 the firm keeps face-to-face
    contact at the capped level and pays
    ``chi * x + (1 - chi) * x**(-gamma)`` with ``x = cap_ratio``: it saves a
    little communication cost but loses more specialization, so the ratio is
    strictly above 1.  When the specialization penalty exceeds the double
    range (tiny cap, huge gamma) the ratio is reported as ``inf``.
    """
    _require_positive("cap_ratio", cap_ratio)
    if cap_ratio >= 1.0:
        return 1.0
    x = cap_ratio
    try:
        penalty = x ** (-params.gamma)
    except OverflowError:
        return math.inf
    return params.chi * x + (1.0 - params.chi) * penalty


def telecom_cost_ratio(T: float, d: float, eps: float, params: FirmParams) -> float:
    """Cost ratio when all contact moves online at per-contact cost ``T``.

    Returns ``(T * d**eps) ** chi``.  Valid only when telecom is at least as
    costly as face-to-face contact at this density, ``T >= d**(-eps)``: were
    it cheaper, the firm would already be using it without any intervention.
    Equivalently, the gate says the returned ratio is >= 1.  Mind the sign
    of the exponent: the face-to-face cost at density ``d`` is ``d**(-eps)``
    and falls with density, so a bound written against ``d**eps`` compares
    T to the wrong side of the density scale.  Violations raise
    :class:`DomainError` with code ``telecom_below_face_to_face_cost``.
    """
    _require_positive("T", T)
    _require_positive("d", d)
    _require_positive("eps", eps)
    face_to_face = d ** (-eps)
    if T < face_to_face:
        raise DomainError(
            f"telecom cost {T!r} is below the face-to-face contact cost "
            f"{face_to_face!r} at density {d!r}; the firm would already "
            "telecommute",
            code="telecom_below_face_to_face_cost",
        )
    return (T * d**eps) ** params.chi


def preferred_regime(
    intervention: Intervention, d: float, eps: float, params: FirmParams
) -> tuple[Regime, float]:
    """Which regime the firm picks under ``intervention``, with its cost ratio.

    Unconstrained (ratio exactly 1) when optimal contacts already fit under
    the cap.  Otherwise the cheaper of capped face-to-face and telecom;
    telecom is considered only when available and valid at this density.
    Ties go to face-to-face.
    """
    nstar = contacts_at_density(d, eps, params)
    if nstar <= intervention.contact_cap:
        return Regime.UNCONSTRAINED, 1.0
    dist = distancing_cost_ratio(intervention.contact_cap / nstar, params)
    T = intervention.telecom_cost
    if T is not None and T >= d ** (-eps):
        tele = telecom_cost_ratio(T, d, eps, params)
        if tele < dist:
            return Regime.TELECOM, tele
    return Regime.DISTANCED, dist


def compensating_subsidy(cap_ratio: float, params: FirmParams) -> float:
    """Proportional wage subsidy that offsets the cost of a binding cap.

    With ``x = cap_ratio``:

        subsidy = 1 - (1 - chi) / (1 - chi * x) * x**gamma

    Zero when the cap does not bind (``x >= 1``), strictly inside (0, 1)
    when it does (and ``gamma > 0``), and approaching 1 as the cap chokes
    off all contact.  For the degenerate ``chi = 0`` firm the subsidy is 0
    at every cap.  The exact value never reaches 1; when ``x**gamma``
    underflows so far that the double rounds up to 1.0, the next-lower
    double is returned to keep the value strictly below 1.
    """
    _require_positive("cap_ratio", cap_ratio)
    if cap_ratio >= 1.0:
        return 0.0
    x = cap_ratio
    denom = 1.0 - params.chi * x
    if denom <= 0.0:
        # Unreachable for chi < 1 and x < 1; guarded so a bad caller gets a
        # typed error instead of a negative-denominator surprise.
        raise DomainError(f"chi * cap_ratio = {params.chi * x!r} >= 1")
    value = 1.0 - (1.0 - params.chi) / denom * x**params.gamma
    if value >= 1.0:
        value = math.nextafter(1.0, 0.0)
    return value
