"""Model parameters for dynamical percolation on the complete graph."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Params:
    """Vertex count ``n``, edge intensity ``lam`` and refresh rate ``mu``.

    The open probability is ``p = lam / n`` unless given explicitly (the
    override exists for degenerate test environments with ``p`` in {0, 1}).
    """

    n: int
    lam: float
    mu: float
    p_override: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if self.mu < 0 or not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu!r}")
        if self.p_override is None:
            if not self.lam > 0:
                raise ValueError(f"lambda must be > 0, got {self.lam!r}")
            if not 0 < self.lam / self.n < 1:
                raise ValueError(f"p = lambda/n must lie in (0, 1), got {self.lam / self.n!r}")
        elif not 0 <= self.p_override <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p_override!r}")

    @classmethod
    def with_p(cls, n: int, p: float, mu: float) -> "Params":
        return cls(n=n, lam=p * n, mu=mu, p_override=float(p))

    @property
    def p(self) -> float:
        return self.p_override if self.p_override is not None else self.lam / self.n

    @property
    def N(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def slow_mu(self) -> bool:
        # informational only: mu * n <= (log n)^-20
        return self.mu * self.n <= math.log(self.n) ** -20
