"""scikit-learn style wrapper around the choice optimizer.

``ArchitectureSelector`` treats each row of ``X`` as a QA weight vector
(columns in ``matrix.qas`` order) and predicts the chosen choice index per
decision group, so sweeps over many weight vectors (sensitivity grids,
per-CCG batches) vectorise and compose with sklearn tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .domain import DecisionMatrix, QaWeights, validate_matrix
from .errors import InvalidMatrix, InvalidProblem
from .optimizer import TIE_BREAKS, OptimizationProblem, solve


class ArchitectureSelector(TransformerMixin, BaseEstimator):
    """Per-group argmax of ``impacts @ weights`` with first-listed ties.

    Parameters
    ----------
    matrix : DecisionMatrix
        Groups, choices and their -1/0/+1 QA impacts.
    tie_break : {"first-listed", "report-all"}
        Kept for parity with :class:`OptimizationProblem`; predictions are
        always the first-listed optimum.

    Attributes
    ----------
    impacts_ : ndarray of shape (n_choices, n_qas)
    group_slices_ : list of slice
        Row range of each decision group in ``impacts_``.
    n_features_in_ : int
    """

    def __init__(self, matrix: DecisionMatrix = None, tie_break: str = "first-listed"):
        self.matrix = matrix
        self.tie_break = tie_break

    def fit(self, X=None, y=None):
        if self.matrix is None:
            raise InvalidProblem("ArchitectureSelector needs a decision matrix")
        if self.tie_break not in TIE_BREAKS:
            raise InvalidProblem(f"tie_break must be one of {TIE_BREAKS}")
        violations = validate_matrix(self.matrix)
        if violations:
            raise InvalidMatrix(violations)
        qas = list(self.matrix.qas)
        rows, slices, start = [], [], 0
        for g in self.matrix.groups:
            rows.extend([c.impact(q) for q in qas] for c in g.choices)
            slices.append(slice(start, start + len(g.choices)))
            start += len(g.choices)
        self.impacts_ = np.asarray(rows, dtype=np.int64)
        self.group_slices_ = slices
        self.n_features_in_ = len(qas)
        if X is not None:
            self._check_weights(X)
        return self

    def _check_weights(self, X):
        X = check_array(X, dtype=np.int64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, matrix has {self.n_features_in_} QAs")
        if (X < 0).any():
            raise ValueError("weights must be non-negative")
        return X

    def decision_function(self, X):
        """Choice values ``impacts @ w``, shape (n_samples, n_choices)."""
        check_is_fitted(self, "impacts_")
        X = self._check_weights(X)
        return X @ self.impacts_.T

    def predict(self, X):
        """Chosen choice index within each group, shape (n_samples, n_groups)."""
        values = self.decision_function(X)
        # argmax returns the first maximum, i.e. the first-listed tie
        return np.stack([values[:, s].argmax(axis=1) for s in self.group_slices_], axis=1)

    def predict_names(self, X):
        idx = self.predict(X)
        groups = self.matrix.groups
        return [{g.name: g.choices[i].name for g, i in zip(groups, row)} for row in idx]

    def transform(self, X):
        """Weighted per-QA satisfaction scores of the predicted choices,
        shape (n_samples, n_qas); rows sum to the objective value."""
        X = self._check_weights(X)
        idx = self.predict(X)
        offsets = np.array([s.start for s in self.group_slices_])
        raw = self.impacts_[idx + offsets].sum(axis=1)
        return raw * X

    def score(self, X, y=None):
        """Mean objective value over the rows of ``X``."""
        return float(self.transform(X).sum(axis=1).mean())

    def solve_one(self, weights: QaWeights):
        """Full :class:`DecisionSet` (with tie sets) for one weight vector."""
        check_is_fitted(self, "impacts_")
        return solve(OptimizationProblem(self.matrix, weights, self.tie_break))
