"""Minimal sklearn-style estimator base and input-validation helpers.

Estimators in this package follow the familiar conventions: hyperparameters
are plain ``__init__`` keyword arguments, fitted state lives in attributes
with a trailing underscore, and ``get_params`` / ``set_params`` allow
composition with config-driven tooling. The base is self-contained because
our estimators operate on :class:`~fairgen.tabular.DataTable` objects rather
than bare arrays.
"""

from __future__ import annotations

import inspect
import math
from typing import Any

from .errors import NotFittedError


class BaseEstimator:
    """get_params/set_params via ``__init__`` signature introspection."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params: Any) -> "BaseEstimator":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_is_fitted(estimator: Any, *attributes: str) -> None:
    for attr in attributes:
        if getattr(estimator, attr, None) is None:
            raise NotFittedError(
                f"{type(estimator).__name__} is not fitted; call fit() first"
            )


def check_fraction(value: float, name: str) -> float:
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie strictly in (0, 1); got {value}")
    return float(value)


def round_half_up(x: float) -> int:
    """Deterministic round-to-nearest with halves going up.

    Used everywhere a count is derived from ``fraction * n`` so results do
    not depend on the platform's round-half-to-even behaviour.
    """
    return int(math.floor(x + 0.5))


def ceil_count(percent: float, size: int) -> int:
    """``ceil(percent% of size)`` with float-dust protection.

    The product is computed before dividing by 100 and rounded at 1e-9 so an
    exact integer percentage of an integer size never spills into the next
    integer (e.g. 3% of 100 must be 3, not 4).
    """
    if size == 0:
        return 0
    return min(size, int(math.ceil(round(percent * size / 100.0, 9))))
