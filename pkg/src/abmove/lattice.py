"""Interval truth annotations, ground literals, and interpretations.

An annotation is a closed subinterval of [0,1] bounding the truth
probability of a literal.  Bounds are stored as exact integers in
micro-units (denominator 10**6), so every comparison, meet, and fixpoint
convergence check in this package is exact -- no floating point, no
epsilon.

The information ordering ``leq`` is reverse interval containment:
``a.leq(b)`` iff b's interval is contained in a's.  ``BOTTOM = [0,1]``
(total uncertainty) sits below everything; point intervals ``[x,x]`` are
maximal.  ``meet`` is interval intersection, which is the least upper
bound under this ordering; an empty intersection yields the ``EMPTY``
marker value rather than an exception so that inconsistency composes
through meet chains.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

SCALE = 1_000_000


def micro_from_text(text):
    """Parse a decimal scalar in [0,1] to exact micro-units.

    Raises ValueError if the value is off the 10**-6 grid or out of range.
    """
    try:
        q = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a decimal scalar: {text!r}") from None
    q = q * SCALE
    if q.denominator != 1:
        raise ValueError(f"scalar {text!r} is finer than the 1e-6 fixed-point grid")
    micro = int(q)
    if not 0 <= micro <= SCALE:
        raise ValueError(f"scalar {text!r} outside [0,1]")
    return micro


def micro_to_text(micro):
    """Render micro-units as a minimal decimal string (900000 -> '0.9')."""
    whole, frac = divmod(micro, SCALE)
    if frac == 0:
        return str(whole)
    return f"{whole}.{f'{frac:06d}'.rstrip('0')}"


class _EmptyInterval:
    """Singleton marker for the inconsistent (empty) interval."""

    _instance = None
    __slots__ = ()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"


EMPTY = _EmptyInterval()


def is_empty(value):
    return value is EMPTY


@dataclass(frozen=True)
class Annotation:
    """Closed subinterval of [0,1]; bounds in exact micro-units."""

    lower: int
    upper: int

    def __post_init__(self):
        if not (isinstance(self.lower, int) and isinstance(self.upper, int)):
            raise TypeError("annotation bounds must be micro-unit ints")
        if not 0 <= self.lower <= self.upper <= SCALE:
            raise ValueError(
                f"invalid annotation bounds [{self.lower}, {self.upper}] "
                f"(need 0 <= lower <= upper <= {SCALE})"
            )

    @classmethod
    def parse(cls, text):
        """Parse the textual form ``[l,u]``, e.g. ``[0.9,1]``."""
        s = text.strip()
        if not (s.startswith("[") and s.endswith("]")):
            raise ValueError(f"annotation must look like [l,u], got {text!r}")
        parts = s[1:-1].split(",")
        if len(parts) != 2:
            raise ValueError(f"annotation must have two bounds, got {text!r}")
        lower, upper = (micro_from_text(p) for p in parts)
        if lower > upper:
            raise ValueError(f"annotation lower bound exceeds upper in {text!r}")
        return cls(lower, upper)

    @classmethod
    def point(cls, value):
        micro = value if isinstance(value, int) else micro_from_text(value)
        return cls(micro, micro)

    def leq(self, other):
        """Information ordering: other's interval contained in self's."""
        return other.lower >= self.lower and other.upper <= self.upper

    def meet(self, other):
        """Interval intersection: least upper bound under leq, or EMPTY."""
        if is_empty(other):
            return EMPTY
        lower = max(self.lower, other.lower)
        upper = min(self.upper, other.upper)
        if lower > upper:
            return EMPTY
        return Annotation(lower, upper)

    @property
    def is_point(self):
        return self.lower == self.upper

    def __str__(self):
        return f"[{micro_to_text(self.lower)},{micro_to_text(self.upper)}]"


BOTTOM = Annotation(0, SCALE)


def ann(lower, upper):
    """Annotation from decimal strings or the ints 0/1: ann('0.9', 1)."""
    def to_micro(v):
        if isinstance(v, int) and 0 <= v <= 1:
            return v * SCALE
        return micro_from_text(v)
    return Annotation(to_micro(lower), to_micro(upper))


def meet_all(annotations):
    """Fold meet over an iterable; EMPTY propagates."""
    acc = BOTTOM
    for a in annotations:
        acc = acc.meet(a) if not is_empty(acc) else EMPTY
        if is_empty(acc):
            return EMPTY
    return acc


_VARIABLE_INITIALS = tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ")


def is_variable(term):
    """Variables are uppercase-initial identifiers; constants lowercase."""
    return bool(term) and term[0] in _VARIABLE_INITIALS


@dataclass(frozen=True)
class Literal:
    """A possibly-negated atom; ground when no argument is a variable."""

    predicate: str
    args: tuple = ()
    negated: bool = False

    @property
    def is_ground(self):
        return not any(is_variable(a) for a in self.args)

    @property
    def atom(self):
        """The positive literal with the same predicate and args."""
        return self if not self.negated else Literal(self.predicate, self.args)

    def negate(self):
        return Literal(self.predicate, self.args, not self.negated)

    def __str__(self):
        sign = "~" if self.negated else ""
        return f"{sign}{self.predicate}({','.join(self.args)})"


class Interpretation:
    """Sparse mapping (ground literal, timepoint) -> Annotation.

    Absent entries are BOTTOM; BOTTOM is never stored, so structural
    equality of the entry dicts is convergence.  Timepoints run 1..horizon
    inclusive; lookups outside that range are errors.  Single writer;
    freely readable once built.
    """

    __slots__ = ("horizon", "_entries")

    def __init__(self, horizon, entries=None):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.horizon = horizon
        self._entries = dict(entries) if entries else {}

    def _check(self, literal, t):
        if not 1 <= t <= self.horizon:
            raise ValueError(f"timepoint {t} outside 1..{self.horizon}")
        if not literal.is_ground:
            raise ValueError(f"non-ground literal in interpretation: {literal}")

    def get(self, literal, t):
        self._check(literal, t)
        return self._entries.get((literal, t), BOTTOM)

    def set(self, literal, t, annotation):
        self._check(literal, t)
        if annotation == BOTTOM:
            self._entries.pop((literal, t), None)
        else:
            self._entries[(literal, t)] = annotation

    def items(self):
        return self._entries.items()

    def __len__(self):
        return len(self._entries)

    def copy(self):
        return Interpretation(self.horizon, self._entries)

    def leq(self, other):
        """Pointwise information ordering over all (literal, timepoint)."""
        if self.horizon != other.horizon:
            raise ValueError(
                f"horizon mismatch: {self.horizon} vs {other.horizon}"
            )
        # Absent entries are BOTTOM, which is below everything, so only
        # our stored entries can violate the ordering.
        for key, a in self._entries.items():
            if not a.leq(other._entries.get(key, BOTTOM)):
                return False
        return True

    def __eq__(self, other):
        return (
            isinstance(other, Interpretation)
            and self.horizon == other.horizon
            and self._entries == other._entries
        )

    def __repr__(self):
        return f"Interpretation(horizon={self.horizon}, entries={len(self._entries)})"


def interpretation_meet(i1, i2):
    """Pointwise meet; None if any cell's intersection is empty.

    This is the least upper bound of two interpretations under the
    pointwise ordering when it exists.
    """
    if i1.horizon != i2.horizon:
        raise ValueError("horizon mismatch")
    merged = Interpretation(i1.horizon, dict(i1.items()))
    for (literal, t), a in i2.items():
        m = merged.get(literal, t).meet(a)
        if is_empty(m):
            return None
        merged.set(literal, t, m)
    return merged
