"""One-vs-all max-margin classification over precomputed kernels, plus score fusion."""
from __future__ import annotations

import numpy as np
from sklearn.svm import SVC

C_DEFAULT = 100.0
TOL_DEFAULT = 1e-3


class UntrainedModel(RuntimeError):
    pass


class LengthMismatch(ValueError):
    pass


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, float)
    z = np.exp(s - s.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


class OneVsAllSVM:
    """One binary SVM per class on a precomputed Gram matrix."""

    def __init__(self, C=C_DEFAULT, tol=TOL_DEFAULT):
        self.C = C
        self.tol = tol
        self.classes_ = None
        self._models = None

    def fit(self, gram, labels):
        gram = np.asarray(gram, float)
        labels = np.asarray(labels)
        self.classes_ = np.unique(labels)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self._models = []
        for c in self.classes_:
            m = SVC(kernel="precomputed", C=self.C, tol=self.tol)
            m.fit(gram, (labels == c).astype(int))
            self._models.append(m)
        return self

    def decision(self, rows) -> np.ndarray:
        """(n_test, n_classes) margins from kernel rows against the training set."""
        if self._models is None:
            raise UntrainedModel("fit() has not been called")
        rows = np.atleast_2d(np.asarray(rows, float))
        return np.stack([m.decision_function(rows) for m in self._models], axis=1)

    def predict_proba(self, rows) -> np.ndarray:
        return softmax(self.decision(rows))

    def predict(self, rows) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(rows), axis=1)]


def classify_one_vs_all(model: OneVsAllSVM, rows):
    """Softmax class probabilities and argmax labels for kernel rows."""
    p = model.predict_proba(rows)
    return p, model.classes_[np.argmax(p, axis=1)]


def fuse_scores(probabilities):
    """Average per-sensor probability vectors; ties break to the lowest index."""
    ps = [np.asarray(p, float) for p in probabilities]
    if not ps:
        raise LengthMismatch("no probability vectors")
    if len({p.shape for p in ps}) != 1:
        raise LengthMismatch("probability vectors differ in length")
    fused = np.mean(ps, axis=0)
    return fused, np.argmax(fused, axis=-1)
