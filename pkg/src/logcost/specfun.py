"""Special functions for the closed-form filter performance expressions.

The steady-state and transient moment formulas need erfc, erfi and the
exponential integral Ei, but always in products with exp(+-x) that overflow
long before the combined value leaves the representable range.  This module
exposes the raw functions plus two fused, overflow-safe combinations:

    scaled_erfc_combo(lam)    = sqrt(pi*lam) * exp(lam) * erfc(sqrt(lam))
    scaled_erfi_ei_combo(kap) = (pi*erfi(sqrt(kap)) - Ei(kap)) / exp(kap)

Both stay finite for arguments far beyond the range where the unfused
pieces can be formed in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import scipy.special as _sp

STATUS_EXACT = "exact"
STATUS_ASYMPTOTIC = "asymptotic-regime"
STATUS_UNDERFLOW = "underflow-clamped"

# Above this the scaled Ei tail series is at least as accurate as forming
# exp(-kap)*Ei(kap) directly, and the direct product can no longer overflow
# sneak up on us.  Validated against mpmath in the test suite.
_EI_ASYMPTOTIC_CUTOFF = 30.0


@dataclass(frozen=True)
class SpecialValue:
    """A function value together with the evaluation branch that produced it.

    status is one of "exact" (direct library evaluation), "asymptotic-regime"
    (tail series used where the direct form would overflow or cancel) and
    "underflow-clamped" (the true value is below the smallest subnormal and
    was clamped to zero).
    """

    value: float
    status: str


def erfc(x: float) -> float:
    """Complementary error function."""
    return float(_sp.erfc(x))


def erfc_info(x: float) -> SpecialValue:
    v = float(_sp.erfc(x))
    if v == 0.0 and x > 0.0:
        return SpecialValue(0.0, STATUS_UNDERFLOW)
    return SpecialValue(v, STATUS_EXACT)


def erfi(x: float) -> float:
    """Imaginary error function erfi(x) = -i*erf(i*x).

    Grows like exp(x**2)/(x*sqrt(pi)); raises OverflowError once that
    leaves double range (|x| around 26.7).  Use scaled_erfi_ei_combo for
    the scaled combination needed by the moment formulas.
    """
    v = float(_sp.erfi(x))
    if math.isinf(v):
        raise OverflowError(
            f"erfi({x!r}) overflows double precision; "
            "use scaled_erfi_ei_combo for the scaled form"
        )
    return v


def expint_ei(x: float) -> float:
    """Exponential integral Ei(x) for x > 0 (principal value)."""
    if not x > 0.0:
        raise ValueError(f"expint_ei requires x > 0, got {x!r}")
    v = float(_sp.expi(x))
    if math.isinf(v):
        raise OverflowError(
            f"expint_ei({x!r}) overflows double precision; "
            "use scaled_erfi_ei_combo for the scaled form"
        )
    return v


def scaled_erfc_combo(lam: float) -> float:
    """sqrt(pi*lam) * exp(lam) * erfc(sqrt(lam)) without forming exp(lam).

    Uses the scaled complement erfcx(t) = exp(t**2)*erfc(t), which is stable
    for all t >= 0, so no asymptotic branch is needed.  The value increases
    from 0 at lam=0 toward 1 as lam -> infinity.
    """
    return scaled_erfc_combo_info(lam).value


def scaled_erfc_combo_info(lam: float) -> SpecialValue:
    if lam < 0.0:
        raise ValueError(f"scaled_erfc_combo requires lam >= 0, got {lam!r}")
    r = math.sqrt(lam)
    return SpecialValue(math.sqrt(math.pi * lam) * float(_sp.erfcx(r)), STATUS_EXACT)


def scaled_erfi_ei_combo(kap: float) -> float:
    """(pi*erfi(sqrt(kap)) - Ei(kap)) / exp(kap) for kap > 0.

    The erfi part is evaluated through the Dawson function, which carries
    the exp(kap) scaling exactly for any kap.  The Ei part uses the direct
    product exp(-kap)*Ei(kap) up to the cutoff and the divergent tail
    series (1/kap) * sum n!/kap**n, truncated at its smallest term, above
    it.  Diverges like -log(kap) as kap -> 0+ and decays like
    sqrt(pi/kap) as kap -> infinity.
    """
    return scaled_erfi_ei_combo_info(kap).value


def scaled_erfi_ei_combo_info(kap: float) -> SpecialValue:
    if not kap > 0.0:
        raise ValueError(f"scaled_erfi_ei_combo requires kap > 0, got {kap!r}")
    erfi_part = 2.0 * math.sqrt(math.pi) * float(_sp.dawsn(math.sqrt(kap)))
    if kap <= _EI_ASYMPTOTIC_CUTOFF:
        ei_part = math.exp(-kap) * float(_sp.expi(kap))
        return SpecialValue(erfi_part - ei_part, STATUS_EXACT)
    return SpecialValue(erfi_part - _ei_scaled_tail(kap), STATUS_ASYMPTOTIC)


def _ei_scaled_tail(kap: float) -> float:
    # exp(-kap)*Ei(kap) ~ (1/kap) * sum_{n>=0} n!/kap**n, optimal truncation.
    total = 0.0
    term = 1.0
    n = 0
    while True:
        total += term
        n += 1
        nxt = term * n / kap
        if nxt >= term or nxt < 1e-18 * total:
            break
        term = nxt
    return total / kap
