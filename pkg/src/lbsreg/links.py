"""Link functions mapping a positive parameter to a linear predictor."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InfeasiblePointError

__all__ = ["LinkKind", "LinkFunction", "get_link", "LOG", "SQRT", "IDENTITY"]


class LinkKind(str, enum.Enum):
    LOG = "log"
    SQRT = "sqrt"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LinkFunction:
    kind: LinkKind
    forward: Callable[[np.ndarray], np.ndarray]
    _inverse: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    deriv2: Callable[[np.ndarray], np.ndarray]
    # predictor values admissible for the inverse
    needs_positive_eta: bool

    @property
    def name(self) -> str:
        return self.kind.value

    def inverse(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.needs_positive_eta and np.any(eta <= 0):
            raise InfeasiblePointError(f"{self.name} link needs a positive predictor")
        return self._inverse(eta)

    def __repr__(self) -> str:
        return f"LinkFunction({self.name!r})"

    def __reduce__(self):
        # the callables are lambdas; worker processes look the link up by name
        return (get_link, (self.name,))


LOG = LinkFunction(
    LinkKind.LOG,
    forward=np.log,
    _inverse=np.exp,
    deriv=lambda m: 1.0 / m,
    deriv2=lambda m: -1.0 / m**2,
    needs_positive_eta=False,
)

SQRT = LinkFunction(
    LinkKind.SQRT,
    forward=np.sqrt,
    _inverse=np.square,
    deriv=lambda m: 0.5 / np.sqrt(m),
    deriv2=lambda m: -0.25 * m**-1.5,
    needs_positive_eta=True,
)

IDENTITY = LinkFunction(
    LinkKind.IDENTITY,
    forward=lambda m: np.asarray(m, dtype=float),
    _inverse=lambda e: e,
    deriv=np.ones_like,
    deriv2=np.zeros_like,
    needs_positive_eta=True,
)

_LINKS = {
    "log": LOG,
    "sqrt": SQRT,
    "squareroot": SQRT,
    "square_root": SQRT,
    "identity": IDENTITY,
}


def get_link(link: str | LinkFunction) -> LinkFunction:
    if isinstance(link, LinkFunction):
        return link
    try:
        return _LINKS[str(link).strip().lower()]
    except KeyError:
        raise DomainError(f"unknown link {link!r}; choose from log, sqrt, identity") from None
