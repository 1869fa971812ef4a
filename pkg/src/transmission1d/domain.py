"""Decomposed interval U0 = (a, b) with interior interface points."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InterfaceAmbiguity, OutOfDomain, TransmissionError


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class InterfaceHit:
    """Returned by :func:`subdomain_index` when ``x`` is not interior to a piece."""

    point: float
    kind: str  # "interface" or "endpoint"


@dataclass(frozen=True)
class DecomposedInterval:
    """The interval (a, b) cut at the interface points ``gamma``.

    Subdomain ``U_j`` (1-based, as in the mathematical notation) is
    ``(breaks[j-1], breaks[j])``; internally pieces are 0-based.

    ``orientation`` is the direction of the fixed interface normal: +1 means
    the normal points in +x, so the "+" side of an interface point is the
    piece to its left and ``[[u]] = u(gamma-) - u(gamma+)``.  Using -1 negates
    every jump.
    """

    a: float = 0.0
    b: float = 1.0
    gamma: tuple[float, ...] = ()
    bc_left: BC = BC.DIRICHLET
    bc_right: BC = BC.DIRICHLET
    orientation: int = 1

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "bc_left", BC(self.bc_left))
        object.__setattr__(self, "bc_right", BC(self.bc_right))

    @property
    def breaks(self) -> np.ndarray:
        return np.array((self.a, *self.gamma, self.b))

    @property
    def n_pieces(self) -> int:
        return len(self.gamma) + 1

    def piece_bounds(self, j: int) -> tuple[float, float]:
        br = self.breaks
        return float(br[j]), float(br[j + 1])

    @property
    def dirichlet_ends(self) -> list[str]:
        out = []
        if self.bc_left is BC.DIRICHLET:
            out.append("left")
        if self.bc_right is BC.DIRICHLET:
            out.append("right")
        return out

    @property
    def neumann_ends(self) -> list[str]:
        out = []
        if self.bc_left is BC.NEUMANN:
            out.append("left")
        if self.bc_right is BC.NEUMANN:
            out.append("right")
        return out

    def endpoint(self, end: str) -> float:
        return self.a if end == "left" else self.b

    def outward_normal(self, end: str) -> float:
        return -1.0 if end == "left" else 1.0

    def flipped(self) -> DecomposedInterval:
        return DecomposedInterval(self.a, self.b, self.gamma, self.bc_left,
                                  self.bc_right, -self.orientation)

    def piece_of(self, x: float, side: str | None = None) -> int:
        """0-based piece containing ``x``; ``side`` resolves interface points."""
        if x < self.a or x > self.b:
            raise OutOfDomain(f"x={x} outside [{self.a}, {self.b}]")
        j = int(np.searchsorted(self.gamma, x, side="right"))
        if x in self.gamma:
            if side is None:
                raise InterfaceAmbiguity(f"x={x} is an interface point; pass side='left'/'right'")
            if side == "left":
                j -= 1
        return j


def subdomain_index(dom: DecomposedInterval, x: float) -> int | InterfaceHit:
    """1-based index j of the open subdomain U_j containing ``x``."""
    if x < dom.a or x > dom.b:
        raise OutOfDomain(f"x={x} outside [{dom.a}, {dom.b}]")
    if x == dom.a or x == dom.b:
        return InterfaceHit(float(x), "endpoint")
    if x in dom.gamma:
        return InterfaceHit(float(x), "interface")
    return int(np.searchsorted(dom.gamma, x, side="right")) + 1


def validate(dom: DecomposedInterval) -> list[str]:
    """List of violated invariants; empty means the decomposition is valid."""
    problems = []
    if not (np.isfinite(dom.a) and np.isfinite(dom.b)):
        problems.append("endpoints must be finite")
    if not dom.a < dom.b:
        problems.append("a < b fails")
    g = np.asarray(dom.gamma, dtype=float)
    if g.size and np.any(np.diff(g) <= 0):
        problems.append("interface points not strictly increasing")
    if g.size and (np.any(g <= dom.a) or np.any(g >= dom.b)):
        problems.append("interface points must lie strictly inside (a, b)")
    if dom.orientation not in (1, -1):
        problems.append("orientation must be +1 or -1")
    for name, bc in (("bc_left", dom.bc_left), ("bc_right", dom.bc_right)):
        if not isinstance(bc, BC):
            problems.append(f"{name} must be dirichlet or neumann")
    return problems


def checked(dom: DecomposedInterval) -> DecomposedInterval:
    problems = validate(dom)
    if problems:
        raise TransmissionError("invalid domain: " + "; ".join(problems))
    return dom
