"""Linear basis functions over a finite state space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankDeficientFeatures(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMap:
    """Feature matrix ``Phi`` with one row per state and one column per basis function."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.isfinite(m).all():
            raise ValueError("feature matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def phi(self, s: int) -> np.ndarray:
        return self.matrix[s]

    def values(self, r) -> np.ndarray:
        """``Phi r``"""
        return self.matrix @ np.asarray(r, dtype=float)

    def check_rank(self, weights=None) -> None:
        """Raise if the columns are linearly dependent on the support of ``weights``."""
        m = self.matrix
        if weights is not None:
            m = m[np.asarray(weights) > 0]
        rank = np.linalg.matrix_rank(m) if m.size else 0
        if rank < self.n_features:
            raise RankDeficientFeatures(
                f"feature columns are linearly dependent: {_dependent_columns(m)} "
                f"(rank {rank} < {self.n_features})")


def _dependent_columns(m):
    dep, basis = [], np.zeros((m.shape[0], 0))
    for k in range(m.shape[1]):
        trial = np.column_stack([basis, m[:, k]])
        if np.linalg.matrix_rank(trial) > basis.shape[1]:
            basis = trial
        else:
            dep.append(k)
    return f"column(s) {dep} lie in the span of earlier columns"


def onehot(n_states: int) -> FeatureMap:
    return FeatureMap(np.eye(n_states))


def constant(n_states: int) -> FeatureMap:
    return FeatureMap(np.ones((n_states, 1)))


def polynomial(n_states: int, degree: int) -> FeatureMap:
    """Powers ``0..degree`` of the state index scaled to ``[0, 1]``."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    x = np.arange(n_states) / max(n_states - 1, 1)
    return FeatureMap(np.vander(x, degree + 1, increasing=True))


def from_spec(spec: str, n_states: int, game=None) -> FeatureMap:
    """Build a feature map from ``onehot``, ``constant``, ``poly:k`` or ``file``.

    ``file`` uses the explicit ``features`` matrix stored in the game.
    """
    spec = spec.strip()
    if spec == "onehot":
        return onehot(n_states)
    if spec == "constant":
        return constant(n_states)
    if spec.startswith("poly:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad polynomial degree in feature spec {spec!r}") from None
        return polynomial(n_states, k)
    if spec == "file":
        if game is None or game.features is None:
            raise ValueError("feature spec 'file' needs a game with a features matrix")
        return FeatureMap(game.features)
    raise ValueError(f"unknown feature spec {spec!r}")
