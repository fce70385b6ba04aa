"""Full-batch training algorithms for :class:`~cycletime.ann.NetworkModel`.

Six algorithms, named after their MATLAB toolbox counterparts:

======  =========  ==============================================
key     name       method
======  =========  ==============================================
gd      traingd    steepest descent, fixed learning rate
gdm     traingdm   steepest descent with momentum
scg     trainscg   Moller's scaled conjugate gradient
oss     trainoss   Battiti's one-step secant (memoryless BFGS)
lm      trainlm    Levenberg-Marquardt
br      trainbr    Bayesian regularisation (MacKay evidence + LM)
======  =========  ==============================================

Every trainer minimises the MSE of the normalised training partition.
All but ``br`` stop after ``max_fail`` consecutive epochs of rising
validation error and hand back the best-validation weights.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import ann
from .dataset import NormParams
from .metrics import ConstantInput, pearson_r
from .numerics import NotPositiveDefinite, solve_spd

__all__ = [
    "ALGORITHMS",
    "ALGORITHM_NAMES",
    "STOP_REASONS",
    "TrainConfig",
    "TrainReport",
    "train",
    "train_gd",
    "train_gdm",
    "train_scg",
    "train_oss",
    "train_lm",
    "train_br",
    "run_comparison",
    "evaluate",
]

ALGORITHM_NAMES = {
    "br": "trainbr",
    "lm": "trainlm",
    "gd": "traingd",
    "gdm": "traingdm",
    "scg": "trainscg",
    "oss": "trainoss",
}
ALGORITHMS = tuple(ALGORITHM_NAMES)

STOP_REASONS = (
    "max_epochs",
    "goal",
    "validation_patience",
    "mu_overflow",
    "gradient_vanished",
    "diverged",
    "line_search_failed",
    "gamma_stable",
)

# loss growth over the initial loss that counts as divergence
DIVERGENCE_FACTOR = 1e10
GRAD_TOL = 1e-10
MU_MIN = 1e-20

SCG_SIGMA = 5e-5
SCG_LAMBDA0 = 5e-7

OSS_ARMIJO_C = 1e-4
OSS_MAX_BACKTRACKS = 20

BR_GAMMA_TOL = 1e-3
BR_GAMMA_WINDOW = 10
BR_ALPHA0 = 0.01
BR_BETA0 = 1.0


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "lm"
    max_epochs: int = 1000
    goal_mse: float = 0.0
    lr: float = 0.01
    momentum: float = 0.9
    mu0: float = 1e-3
    mu_inc: float = 10.0
    mu_dec: float = 0.1
    mu_max: float = 1e10
    max_fail: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHM_NAMES:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; choose one of {', '.join(ALGORITHMS)}")
        if self.max_epochs < 0 or self.max_fail < 1:
            raise ValueError("max_epochs must be >= 0 and max_fail >= 1")
        if self.lr <= 0 or self.goal_mse < 0:
            raise ValueError("lr must be positive and goal_mse non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.mu0 <= 0 or self.mu_inc <= 1 or not 0 < self.mu_dec < 1 or self.mu_max <= 0:
            raise ValueError("need mu0 > 0, mu_inc > 1, 0 < mu_dec < 1, mu_max > 0")

    @property
    def name(self):
        return ALGORITHM_NAMES[self.algorithm]


@dataclass
class TrainReport:
    """One row of an algorithm comparison plus the traces behind it.

    ``*_mse`` values are in seconds squared, ``*_mse_norm`` in normalised
    units; ``network`` means all rows pooled (train + validation + test).
    ``r_value`` is computed on the pooled rows in seconds and is ``None``
    when undefined (constant predictions).
    """

    algorithm: str
    epochs_run: int
    train_mse: float
    validation_mse: float
    test_mse: float
    network_mse: float
    r_value: float
    stop_reason: str
    diverged: bool = False
    train_mse_norm: float = None
    validation_mse_norm: float = None
    test_mse_norm: float = None
    network_mse_norm: float = None
    loss_trace: list = field(default_factory=list)
    validation_trace: list = field(default_factory=list)
    seed: int = None
    details: dict = field(default_factory=dict)
    # Per-row (partition, actual_s, predicted_s); kept out of the JSON row.
    fit: dict = field(default=None, repr=False)

    def to_dict(self, include_fit=False):
        """JSON-ready dict; non-finite floats (diverged traces) become None."""
        d = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "diverged": self.diverged,
            "train_mse": self.train_mse,
            "validation_mse": self.validation_mse,
            "test_mse": self.test_mse,
            "network_mse": self.network_mse,
            "r_value": self.r_value,
            "train_mse_norm": self.train_mse_norm,
            "validation_mse_norm": self.validation_mse_norm,
            "test_mse_norm": self.test_mse_norm,
            "network_mse_norm": self.network_mse_norm,
            "loss_trace": list(self.loss_trace),
            "validation_trace": list(self.validation_trace),
            "details": self.details,
        }
        if include_fit and self.fit is not None:
            d["fit"] = {k: np.asarray(v).tolist() for k, v in self.fit.items()}
        return _finite_or_none(d)


def _finite_or_none(obj):
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


# -- shared plumbing ---------------------------------------------------------

class _Problem:
    """Normalised train/validation arrays plus loss/derivative closures."""

    def __init__(self, model, split):
        self.topology = model.topology
        norm = model.norm
        k = model.topology.output_dim

        def arrays(part):
            return (norm.scale_inputs(part.inputs),
                    norm.scale_targets(part.targets).reshape(len(part), k))

        self.X, self.y = arrays(split.train)
        self.Xv, self.yv = arrays(split.validation)
        self.has_validation = len(split.validation) > 0

    def loss(self, w):
        with np.errstate(all="ignore"):
            return ann.mse_raw(self.topology, w, self.X, self.y)

    def val_loss(self, w):
        if not self.has_validation:
            return float("nan")
        with np.errstate(all="ignore"):
            return ann.mse_raw(self.topology, w, self.Xv, self.yv)

    def grad(self, w):
        return ann.gradient_raw(self.topology, w, self.X, self.y)

    def jac(self, w):
        return ann.jacobian_raw(self.topology, w, self.X, self.y)


class _Monitor:
    """Epoch bookkeeping: traces, stopping tests, best-validation weights."""

    def __init__(self, problem, w0, config, use_validation=True):
        self.problem = problem
        self.config = config
        self.use_validation = use_validation and problem.has_validation
        self.loss0 = problem.loss(w0)
        self.trace = [self.loss0]
        v0 = problem.val_loss(w0)
        self.val_trace = [v0]
        self.best_val = v0
        self.best_w = w0.copy()
        self.last_w = w0.copy()
        self.fails = 0
        self.epochs = 0
        self.diverged = False
        self.stop_reason = None

    def start(self):
        """Stop reason that applies before any update, else None."""
        if self.config.max_epochs == 0:
            self.stop_reason = "max_epochs"
        elif self.loss0 <= self.config.goal_mse:
            self.stop_reason = "goal"
        return self.stop_reason

    def blown_up(self, w, loss):
        return (not np.all(np.isfinite(w)) or not np.isfinite(loss)
                or loss > DIVERGENCE_FACTOR * max(self.loss0, 1e-12))

    def step(self, w, loss=None):
        """Record epoch ``self.epochs + 1`` ending at ``w``; returns stop reason or None."""
        self.epochs += 1
        if loss is None:
            loss = self.problem.loss(w)
        if self.blown_up(w, loss):
            self.diverged = True
            self.trace.append(float(loss) if np.isfinite(loss) else float("inf"))
            self.val_trace.append(float("nan"))
            self.stop_reason = "diverged"
            return self.stop_reason
        self.last_w = w.copy()
        self.trace.append(float(loss))
        val = self.problem.val_loss(w)
        self.val_trace.append(val)
        if val < self.best_val:
            self.best_val, self.best_w, self.fails = val, w.copy(), 0
        elif val > self.best_val:
            self.fails += 1
        if loss <= self.config.goal_mse:
            self.stop_reason = "goal"
        elif self.use_validation and self.fails >= self.config.max_fail:
            self.stop_reason = "validation_patience"
        elif self.epochs >= self.config.max_epochs:
            self.stop_reason = "max_epochs"
        return self.stop_reason

    def result_weights(self):
        return self.best_w if self.use_validation else self.last_w


def _safe_r(actual, predicted):
    try:
        return pearson_r(actual, predicted)
    except ConstantInput:
        return None


def evaluate(model, split):
    """MSE per partition (seconds^2 and normalised) and pooled R in seconds."""
    norm = model.norm
    half = norm.target_half_range
    out = {}
    parts = {"train": split.train, "validation": split.validation, "test": split.test}
    actual, predicted, labels = [], [], []
    for name, part in parts.items():
        if len(part) == 0:
            out[name] = out[name + "_norm"] = None
            continue
        with np.errstate(all="ignore"):
            p = ann.predict(model, part.inputs)
        m = float(np.mean((part.targets - p) ** 2))
        out[name] = m
        out[name + "_norm"] = m / half**2
        actual.append(part.targets)
        predicted.append(p)
        labels += [name] * len(part)
    actual = np.concatenate(actual)
    predicted = np.concatenate(predicted)
    m = float(np.mean((actual - predicted) ** 2))
    out["network"] = m
    out["network_norm"] = m / half**2
    out["r"] = _safe_r(actual, predicted) if np.all(np.isfinite(predicted)) else None
    out["fit"] = {"partition": np.array(labels), "actual": actual, "predicted": predicted}
    return out


def _report(config, model, split, mon, details=None):
    ev = evaluate(model, split)
    return TrainReport(
        algorithm=config.name,
        epochs_run=mon.epochs,
        train_mse=ev["train"],
        validation_mse=ev["validation"],
        test_mse=ev["test"],
        network_mse=ev["network"],
        r_value=ev["r"],
        stop_reason=mon.stop_reason or "max_epochs",
        diverged=mon.diverged,
        train_mse_norm=ev["train_norm"],
        validation_mse_norm=ev["validation_norm"],
        test_mse_norm=ev["test_norm"],
        network_mse_norm=ev["network_norm"],
        loss_trace=mon.trace,
        validation_trace=mon.val_trace,
        seed=config.seed,
        details={"topology": list(model.topology.sizes), **(details or {})},
        fit=ev["fit"],
    )


def _finish(model, split, config, mon, details=None):
    trained = model.with_weights(mon.result_weights())
    return trained, _report(config, trained, split, mon, details)


def _with_algorithm(config, algorithm):
    if config is None:
        return TrainConfig(algorithm=algorithm)
    if config.algorithm != algorithm:
        return replace(config, algorithm=algorithm)
    return config


# -- first-order methods -----------------------------------------------------

def _descent(model, split, config, momentum):
    prob = _Problem(model, split)
    w = model.weights.copy()
    mon = _Monitor(prob, w, config)
    if not mon.start():
        v = np.zeros_like(w)
        while True:
            g = prob.grad(w)
            v = momentum * v - config.lr * g
            with np.errstate(all="ignore"):
                w = w + v
            if mon.step(w):
                break
    return _finish(model, split, config, mon)


def train_gd(model, split, config=None):
    """Steepest descent: ``w <- w - lr * grad`` once per epoch.

    Divergence (non-finite loss or growth by DIVERGENCE_FACTOR) ends the
    run with ``stop_reason == "diverged"``; it is not an error.
    """
    config = _with_algorithm(config, "gd")
    return _descent(model, split, config, 0.0)


def train_gdm(model, split, config=None):
    """Heavy-ball momentum: ``v <- m v - lr grad; w <- w + v``."""
    config = _with_algorithm(config, "gdm")
    return _descent(model, split, config, config.momentum)


# -- scaled conjugate gradient -------------------------------------------------

def train_scg(model, split, config=None):
    """Moller's scaled conjugate gradient.

    Curvature along the search direction comes from a forward difference
    of gradients (step ``SCG_SIGMA / |p|``); the Levenberg-style scale
    ``lam`` is raised when the quadratic model predicts the actual decrease
    badly (comparison ratio below 0.25) and cut when it predicts well.
    Every ``n_weights`` successful steps the direction restarts at -grad.
    """
    config = _with_algorithm(config, "scg")
    prob = _Problem(model, split)
    w = model.weights.copy()
    mon = _Monitor(prob, w, config)
    n_w = w.size
    if mon.start():
        return _finish(model, split, config, mon)

    f = mon.loss0
    g = prob.grad(w)
    r = -g
    p = r.copy()
    lam, lam_bar = SCG_LAMBDA0, 0.0
    success = True
    n_success = 0
    delta = 0.0
    while True:
        if np.linalg.norm(g) < GRAD_TOL:
            mon.stop_reason = "gradient_vanished"
            break
        p2 = float(p @ p)
        if success:
            sigma = SCG_SIGMA / np.sqrt(p2)
            s = (prob.grad(w + sigma * p) - g) / sigma
            delta = float(p @ s)
        delta += (lam - lam_bar) * p2
        if delta <= 0:
            lam_bar = 2.0 * (lam - delta / p2)
            delta = -delta + lam * p2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        w_new = w + alpha * p
        f_new = prob.loss(w_new)
        comparison = 2.0 * delta * (f - f_new) / (mu * mu) if np.isfinite(f_new) else -1.0

        if comparison >= 0:
            w, f = w_new, f_new
            g = prob.grad(w)
            r_new = -g
            lam_bar = 0.0
            success = True
            n_success += 1
            if n_success % n_w == 0:
                p = r_new.copy()
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam *= 0.25
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam += delta * (1.0 - comparison) / p2
        if mon.step(w, f):
            break
    return _finish(model, split, config, mon)


# -- one-step secant -------------------------------------------------------------

def _secant_direction(g, s, dg):
    """Memoryless BFGS direction ``-H g`` with H built from one (s, dg) pair."""
    sy = float(s @ dg)
    if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(dg):
        return -g
    sg = float(s @ g)
    yg = float(dg @ g)
    yy = float(dg @ dg)
    a = -(1.0 + yy / sy) * sg / sy + yg / sy
    b = sg / sy
    d = -g + a * s + b * dg
    return d if float(d @ g) < 0 else -g


def _armijo(prob, w, f, g, d):
    slope = float(g @ d)
    t = 1.0
    for _ in range(OSS_MAX_BACKTRACKS + 1):
        w_new = w + t * d
        f_new = prob.loss(w_new)
        if np.isfinite(f_new) and f_new <= f + OSS_ARMIJO_C * t * slope:
            return w_new, f_new
        t *= 0.5
    return None, None


def train_oss(model, split, config=None):
    """Battiti's one-step secant with Armijo backtracking.

    The search direction applies the BFGS inverse-Hessian update to the
    identity using only the latest step ``s`` and gradient change ``dg``,
    so no matrix is stored. The first epoch, and any epoch where the
    secant pair is unusable, falls back to -grad.
    """
    config = _with_algorithm(config, "oss")
    prob = _Problem(model, split)
    w = model.weights.copy()
    mon = _Monitor(prob, w, config)
    if mon.start():
        return _finish(model, split, config, mon)

    f = mon.loss0
    g = prob.grad(w)
    s = dg = None
    while True:
        if np.linalg.norm(g) < GRAD_TOL:
            mon.stop_reason = "gradient_vanished"
            break
        d = -g if s is None else _secant_direction(g, s, dg)
        w_new, f_new = _armijo(prob, w, f, g, d)
        if w_new is None and s is not None:
            d = -g
            w_new, f_new = _armijo(prob, w, f, g, d)
        if w_new is None:
            mon.stop_reason = "line_search_failed"
            break
        g_new = prob.grad(w_new)
        s, dg = w_new - w, g_new - g
        w, f, g = w_new, f_new, g_new
        if mon.step(w, f):
            break
    return _finish(model, split, config, mon)


# -- Levenberg-Marquardt -------------------------------------------------------

def train_lm(model, split, config=None):
    """Levenberg-Marquardt on the training SSE.

    Each epoch solves ``(J^T J + mu I) delta = J^T e`` (J = de/dw) and
    tries ``w - delta``. A step that lowers the SSE is accepted and ``mu``
    shrinks by ``mu_dec``; otherwise ``mu`` grows by ``mu_inc`` and the
    solve is repeated. ``mu > mu_max`` ends training (``mu_overflow``).
    """
    config = _with_algorithm(config, "lm")
    prob = _Problem(model, split)
    w = model.weights.copy()
    mon = _Monitor(prob, w, config)
    mu = config.mu0
    mu_trace = [mu]
    if not mon.start():
        J, e = prob.jac(w)
        sse = float(e @ e)
        eye = np.eye(w.size)
        while True:
            JtJ = J.T @ J
            Jte = J.T @ e
            accepted = False
            while mu <= config.mu_max:
                try:
                    step = solve_spd(JtJ + mu * eye, Jte)
                except NotPositiveDefinite:
                    mu *= config.mu_inc
                    continue
                w_try = w - step
                with np.errstate(all="ignore"):
                    J_try, e_try = prob.jac(w_try)
                    sse_try = float(e_try @ e_try)
                if np.isfinite(sse_try) and sse_try < sse:
                    w, J, e, sse = w_try, J_try, e_try, sse_try
                    mu = max(mu * config.mu_dec, MU_MIN)
                    accepted = True
                    break
                mu *= config.mu_inc
            if not accepted:
                mon.stop_reason = "mu_overflow"
                break
            mu_trace.append(mu)
            if mon.step(w, sse / e.size):
                break
    return _finish(model, split, config, mon, {"mu_trace": mu_trace})


# -- Bayesian regularisation ---------------------------------------------------

def _effective_params(JtJ, alpha, beta):
    """gamma = N_w - alpha * tr((beta J^T J + alpha I)^-1), via eigenvalues."""
    lam = np.clip(np.linalg.eigvalsh(JtJ), 0.0, None)
    return float(np.sum(beta * lam / (beta * lam + alpha)))


def train_br(model, split, config=None):
    """Bayesian regularisation: LM on ``F = beta E_D + alpha E_W``.

    ``E_D = SSE / 2`` and ``E_W = |w|^2 / 2``. After every accepted step the
    hyperparameters are re-estimated from the evidence approximation with
    the Gauss-Newton Hessian ``H = beta J^T J + alpha I``::

        gamma = N_w - alpha tr(H^-1)
        alpha = gamma / (2 E_W)
        beta  = (N - gamma) / (2 E_D)

    Validation error is tracked but never used to stop: the weight penalty
    plays that role. Training ends at ``max_epochs``, the goal, ``mu``
    overflow, or once gamma has moved less than BR_GAMMA_TOL for
    BR_GAMMA_WINDOW consecutive epochs.
    """
    config = _with_algorithm(config, "br")
    prob = _Problem(model, split)
    w = model.weights.copy()
    mon = _Monitor(prob, w, config, use_validation=False)
    n_w = w.size
    tiny = np.finfo(float).tiny
    alpha, beta, gamma = BR_ALPHA0, BR_BETA0, float(n_w)
    mu = config.mu0
    trace = {"alpha": [alpha], "beta": [beta], "gamma": [gamma], "mu_trace": [mu]}

    if not mon.start():
        J, e = prob.jac(w)
        n_terms = e.size
        eye = np.eye(n_w)

        def objective(e_, w_):
            return beta * 0.5 * float(e_ @ e_) + alpha * 0.5 * float(w_ @ w_)

        F = objective(e, w)
        stable = 0
        while True:
            JtJ = J.T @ J
            grad_F = beta * (J.T @ e) + alpha * w
            H = beta * JtJ + alpha * eye
            accepted = False
            while mu <= config.mu_max:
                try:
                    step = solve_spd(H + mu * eye, grad_F)
                except NotPositiveDefinite:
                    mu *= config.mu_inc
                    continue
                w_try = w - step
                with np.errstate(all="ignore"):
                    J_try, e_try = prob.jac(w_try)
                    F_try = objective(e_try, w_try)
                if np.isfinite(F_try) and F_try < F:
                    w, J, e = w_try, J_try, e_try
                    mu = max(mu * config.mu_dec, MU_MIN)
                    accepted = True
                    break
                mu *= config.mu_inc
            if not accepted:
                mon.stop_reason = "mu_overflow"
                break

            E_D = max(0.5 * float(e @ e), tiny)
            E_W = max(0.5 * float(w @ w), tiny)
            new_gamma = _effective_params(J.T @ J, alpha, beta)
            new_gamma = min(max(new_gamma, 1e-12), n_w)
            alpha = max(new_gamma / (2.0 * E_W), tiny)
            beta = max(n_terms - new_gamma, 1e-12) / (2.0 * E_D)
            stable = stable + 1 if abs(new_gamma - gamma) < BR_GAMMA_TOL else 0
            gamma = new_gamma
            F = objective(e, w)
            for key, val in (("alpha", alpha), ("beta", beta), ("gamma", gamma), ("mu_trace", mu)):
                trace[key].append(val)
            if mon.step(w, 2.0 * E_D / n_terms):
                break
            if stable >= BR_GAMMA_WINDOW:
                mon.stop_reason = "gamma_stable"
                break
    return _finish(model, split, config, mon, trace)


_TRAINERS = {
    "gd": train_gd,
    "gdm": train_gdm,
    "scg": train_scg,
    "oss": train_oss,
    "lm": train_lm,
    "br": train_br,
}


def train(model, split, config):
    """Dispatch on ``config.algorithm``."""
    return _TRAINERS[config.algorithm](model, split, config)


def run_comparison(dataset, topology=None, seeds=(42,), configs=None,
                   ratios=(0.7, 0.15, 0.15), shuffle=True):
    """Train every config on the same split for each seed.

    Per seed the rows are split with that seed, scaling is fitted on the
    whole dataset, and one initial network (drawn with the same seed) is
    shared by all algorithms. Reports come back seed-major in ``configs``
    order; each carries its (actual, predicted) pairs in ``report.fit``.
    """
    from .ann import Topology, init_weights
    from .dataset import split as split_rows

    topology = topology or Topology(dataset.n_inputs, (8, 8), 1)
    if not seeds:
        raise ValueError("need at least one seed")
    if configs is None:
        configs = [TrainConfig(algorithm=a) for a in ALGORITHMS]
    norm = NormParams.fit(dataset)
    reports = []
    for seed in seeds:
        parts = split_rows(dataset, ratios, seed=seed, shuffle=shuffle)
        model0 = init_weights(topology, seed, norm)
        for cfg in configs:
            _, rep = train(model0, parts, replace(cfg, seed=seed))
            reports.append(rep)
    return reports
