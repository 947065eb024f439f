"""Kernel SVMs: a binary SMO solver, sigmoid calibration, pairwise coupling
and a one-against-one multiclass ensemble.

The solver works on the soft-margin dual

    min_a  1/2 a' Q a - e' a,   Q_ij = y_i y_j k(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum_i y_i a_i = 0

picking the working pair with second-order information (the maximal
violating ``i`` plus the ``j`` with the largest guaranteed decrease), and
stops when the maximal KKT violation drops below ``tol``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12
MIN_PROB = 1e-7


def kernel_matrix(A, B, kernel: str = "rbf", gamma: float = 1.0) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    iterations: int
    violation: float
    converged: bool


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: Optional[int] = None) -> SmoResult:
    """Solve the binary dual for a precomputed kernel matrix.

    The decision function is ``sum_i alpha_i y_i k(x_i, x) - rho``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    QD = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient Q a - e
    it = 0
    converged = False
    violation = np.inf
    pos = y > 0
    while it < max_iter:
        upper = alpha >= C
        lower = alpha <= 0
        in_up = np.where(pos, ~upper, ~lower)
        in_low = np.where(pos, ~lower, ~upper)
        myG = -y * G
        cand = np.where(in_up, myG, -np.inf)
        i = int(cand.argmax())
        gmax = cand[i]
        low_vals = np.where(in_low, -myG, -np.inf)  # y_t G_t over I_low
        gmax2 = low_vals.max()
        violation = gmax + gmax2
        if violation < tol or not np.isfinite(gmax):
            converged = True
            break
        Ki = K[i]
        grad_diff = gmax + y * G
        quad = QD[i] + QD - 2.0 * Ki
        quad = np.where(quad > 0, quad, TAU)
        obj = np.where(in_low & (grad_diff > 0), -(grad_diff ** 2) / quad, np.inf)
        j = int(obj.argmin())
        if not np.isfinite(obj[j]):
            converged = True
            break
        it += 1
        Kj = K[j]
        yi, yj = y[i], y[j]
        ai, aj = alpha[i], alpha[j]
        if yi != yj:
            q = QD[i] + QD[j] - 2.0 * Ki[j]
            q = q if q > 0 else TAU
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:  # C_i - C_j == 0
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            q = QD[i] + QD[j] - 2.0 * Ki[j]
            q = q if q > 0 else TAU
            delta = (G[i] - G[j]) / q
            s = ai + aj
            ni, nj = ai - delta, aj + delta
            if s > C:
                if ni > C:
                    ni, nj = C, s - C
            elif nj < 0:
                nj, ni = 0.0, s
            if s > C:
                if nj > C:
                    nj, ni = C, s - C
            elif ni < 0:
                ni, nj = 0.0, s
        alpha[i], alpha[j] = ni, nj
        dai, daj = ni - ai, nj - aj
        # Q_ik = y_i y_k K_ik
        G += y * (yi * dai * Ki + yj * daj * Kj)
    if not converged:
        log.warning("SMO stopped after %d iterations (violation %.3g)", it, violation)
    rho = _rho(alpha, y, G, C)
    return SmoResult(alpha, rho, it, float(violation), converged)


def _rho(alpha, y, G, C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


@dataclass(eq=False)
class BinarySVM:
    """Trained binary machine; ``coef`` holds alpha_i * y_i of the support vectors."""

    support_vectors: np.ndarray
    coef: np.ndarray
    b: float
    kernel: str
    gamma: float
    C: float
    alpha: Optional[np.ndarray] = None  # full dual vector, kept for diagnostics
    A: float = 0.0  # sigmoid calibration
    B: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        if len(self.coef) == 0:
            return np.full(len(np.atleast_2d(X)), self.b)
        return kernel_matrix(X, self.support_vectors, self.kernel, self.gamma) @ self.coef + self.b

    def weight_vector(self) -> np.ndarray:
        if self.kernel != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        return self.coef @ self.support_vectors

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def predict_proba(self, X) -> np.ndarray:
        """Calibrated P(y = +1 | x)."""
        return sigmoid_predict(self.decision_function(X), self.A, self.B)

    def to_dict(self) -> dict:
        return {"support_vectors": self.support_vectors.tolist(), "coef": self.coef.tolist(),
                "b": self.b, "kernel": self.kernel, "gamma": self.gamma, "C": self.C,
                "A": self.A, "B": self.B}

    @classmethod
    def from_dict(cls, d: dict) -> "BinarySVM":
        sv = np.array(d["support_vectors"], dtype=float)
        return cls(sv.reshape(len(d["coef"]), -1), np.array(d["coef"], dtype=float), d["b"],
                   d["kernel"], d["gamma"], d["C"], None, d["A"], d["B"])


def svm_train_binary(X, y, kernel: str = "rbf", C: float = 1.0, gamma: Optional[float] = None,
                     tol: float = 1e-3, calibrate: bool = True) -> BinarySVM:
    """Train a soft-margin SVM on labels in {-1, +1}.

    ``gamma`` defaults to 1 / n_features. With ``calibrate`` the sigmoid is
    fitted on the training decision values.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    K = kernel_matrix(X, X, kernel, gamma)
    res = smo_solve(K, y, C, tol)
    sv = res.alpha > 0
    model = BinarySVM(X[sv].copy(), (res.alpha * y)[sv], -res.rho, kernel, gamma, C, res.alpha)
    if calibrate:
        dec = K[:, sv] @ model.coef + model.b
        model.A, model.B = sigmoid_train(dec, y)
    return model


def sigmoid_train(dec, y, max_iter: int = 100):
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularised maximum likelihood.

    Newton's method with backtracking, using the smoothed targets
    ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``.
    """
    dec = np.asarray(dec, dtype=float)
    y = np.asarray(y)
    prior1 = float(np.sum(y > 0))
    prior0 = float(len(y) - prior1)
    hi, lo = (prior1 + 1.0) / (prior1 + 2.0), 1.0 / (prior0 + 2.0)
    t = np.where(y > 0, hi, lo)
    min_step, sigma, eps = 1e-10, 1e-12, 1e-5

    def objective(A, B):
        f = dec * A + B
        return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-np.abs(f))),
                                     (t - 1) * f + np.log1p(np.exp(-np.abs(f))))))

    A, B = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))
    fval = objective(A, B)
    for _ in range(max_iter):
        f = dec * A + B
        e = np.exp(-np.abs(f))
        p = np.where(f >= 0, e / (1 + e), 1 / (1 + e))
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.sum(dec * dec * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(dec * d2)
        d1 = t - p
        g1, g2 = np.sum(dec * d1), np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        if step < min_step:
            log.debug("sigmoid fit: line search failed")
            break
    return float(A), float(B)


def sigmoid_predict(dec, A: float, B: float):
    f = np.asarray(dec, dtype=float) * A + B
    e = np.exp(-np.abs(f))
    return np.where(f >= 0, e / (1 + e), 1 / (1 + e))


def couple_probabilities(r, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Combine pairwise probabilities into one class distribution.

    ``r[..., i, j]`` estimates P(class i | i or j) (diagonal ignored, and
    ``r_ji = 1 - r_ij`` expected). Minimises
    ``sum_{i<j} (r_ji p_i - r_ij p_j)^2`` subject to ``sum(p) = 1`` by the
    fixed-point iteration of Wu, Lin and Weng's second method, until
    ``max_t |(Qp)_t - p'Qp| <= tol``. Accepts a single (K, K) matrix or a
    stack (n, K, K).
    """
    r = np.asarray(r, dtype=float)
    single = r.ndim == 2
    R = r[None] if single else r
    n, K, _ = R.shape
    off = ~np.eye(K, dtype=bool)
    RT = np.swapaxes(R, 1, 2)
    Q = np.where(off, -RT * R, 0.0)
    diag = np.where(off, RT ** 2, 0.0).sum(-1)  # Q_tt = sum_j r_jt^2
    Q[:, np.arange(K), np.arange(K)] = diag
    p = np.full((n, K), 1.0 / K)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        Qp = np.einsum("nij,nj->ni", Q, p)
        pQp = (p * Qp).sum(1)
        err = np.abs(Qp - pQp[:, None]).max(1)
        active = err > tol
        if not active.any():
            break
        a = np.nonzero(active)[0]
        pa, Qpa, pQpa, Qa = p[a], Qp[a], pQp[a], Q[a]
        for t in range(K):
            qtt = Qa[:, t, t]
            diff = np.where(qtt > 0, (-Qpa[:, t] + pQpa) / np.where(qtt > 0, qtt, 1.0), 0.0)
            pa[:, t] += diff
            pQpa = (pQpa + diff * (diff * qtt + 2 * Qpa[:, t])) / (1 + diff) ** 2
            Qpa = (Qpa + diff[:, None] * Qa[:, t, :]) / (1 + diff)[:, None]
            pa /= (1 + diff)[:, None]
        p[a] = pa
    else:
        log.warning("probability coupling did not reach tolerance %g", tol)
    return p[0] if single else p


@dataclass(eq=False)
class SvmEnsemble:
    """One-against-one ensemble with calibrated pairwise probabilities."""

    classes: list
    pairs: dict  # (i, j) -> BinarySVM, i < j, class i is +1
    kernel: str = "rbf"
    C: float = 1.0
    gamma: Optional[float] = None
    config: dict = field(default_factory=dict)

    @classmethod
    def fit(cls, X, labels, kernel: str = "rbf", C: float = 1.0, gamma: Optional[float] = None,
            tol: float = 1e-3, classes=None) -> "SvmEnsemble":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        labels = np.asarray(labels)
        classes = sorted(set(labels.tolist())) if classes is None else list(classes)
        if gamma is None:
            gamma = 1.0 / X.shape[1]
        for c in classes:
            if not np.any(labels == c):
                raise ValueError(f"class {c!r} has no training samples")
        pairs = {}
        for i, j in itertools.combinations(range(len(classes)), 2):
            m = (labels == classes[i]) | (labels == classes[j])
            y = np.where(labels[m] == classes[i], 1.0, -1.0)
            pairs[(i, j)] = svm_train_binary(X[m], y, kernel, C, gamma, tol)
        return cls(classes, pairs, kernel, C, gamma)

    def pairwise_probabilities(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K = len(self.classes)
        r = np.full((len(X), K, K), 0.5)
        for (i, j), m in self.pairs.items():
            pij = np.clip(m.predict_proba(X), MIN_PROB, 1 - MIN_PROB)
            r[:, i, j] = pij
            r[:, j, i] = 1 - pij
        return r

    def predict_proba(self, X) -> np.ndarray:
        if len(self.classes) == 1:
            return np.ones((len(np.atleast_2d(X)), 1))
        return couple_probabilities(self.pairwise_probabilities(X))

    def predict(self, X) -> list:
        return [self.classes[k] for k in self.predict_proba(X).argmax(1)]

    def to_dict(self) -> dict:
        return {
            "type": "svm-ovo",
            "format_version": 1,
            "classes": self.classes,
            "kernel": self.kernel,
            "C": self.C,
            "gamma": self.gamma,
            "pairs": [{"i": i, "j": j, **m.to_dict()} for (i, j), m in sorted(self.pairs.items())],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmEnsemble":
        if d.get("type") != "svm-ovo" or d.get("format_version") != 1:
            raise ValueError("not a version-1 SVM ensemble")
        pairs = {(p["i"], p["j"]): BinarySVM.from_dict(p) for p in d["pairs"]}
        return cls(d["classes"], pairs, d["kernel"], d["C"], d["gamma"], d.get("config", {}))


def grid_search(X, labels, groups=None, kernel: str = "rbf", Cs=None, gammas=None,
                folds: int = 5, seed: int = 0):
    """Pick (C, gamma) by k-fold cross-validated window accuracy.

    Folds are drawn over ``groups`` (e.g. sample ids) when given, so windows of
    one recording never straddle train and test. The default grid steps by
    powers of 4: C in 2^-3..2^7, gamma in 2^-7..2^3.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    Cs = Cs if Cs is not None else [2.0 ** k for k in range(-3, 8, 2)]
    if kernel == "linear":
        gammas = [None]
    elif gammas is None:
        gammas = [2.0 ** k for k in range(-7, 4, 2)]
    groups = np.arange(len(X)) if groups is None else np.asarray(groups)
    uniq = np.unique(groups)
    rng = np.random.default_rng(seed)
    fold_of = dict(zip(uniq.tolist(), rng.permutation(len(uniq)) % folds))
    fold = np.array([fold_of[g] for g in groups.tolist()])
    best = None
    for C in Cs:
        for g in gammas:
            hit = 0
            for f in range(folds):
                tr, te = fold != f, fold == f
                if not te.any() or len(np.unique(labels[tr])) < 2:
                    continue
                ens = SvmEnsemble.fit(X[tr], labels[tr], kernel, C, g)
                hit += int(np.sum(np.array(ens.predict(X[te])) == labels[te]))
            acc = hit / len(X)
            if best is None or acc > best[0]:
                best = (acc, C, g)
    return {"accuracy": best[0], "C": best[1], "gamma": best[2]}
