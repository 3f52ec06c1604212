from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

from .errors import DomainError


class Method(str, enum.Enum):
    BAYES = "BAYES"
    IM = "IM"
    NIM = "NIM"


@dataclass(frozen=True)
class Interval:
    """Closed confidence or credible interval for a constrained parameter.

    ``truncated_lower`` / ``truncated_upper`` record that an endpoint was
    pinned to the boundary 0. ``grid_fallback`` is set when the endpoints
    came from a grid level-set search instead of the exact root solve.
    """

    lower: float
    upper: float
    level: float
    method: Method
    truncated_lower: bool = False
    truncated_upper: bool = False
    grid_fallback: bool = False

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise DomainError(f"lower {self.lower} exceeds upper {self.upper}")
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must lie in (0, 1)")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def as_dict(self) -> dict:
        out = asdict(self)
        out["method"] = self.method.value
        out["width"] = self.width
        return out


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha
