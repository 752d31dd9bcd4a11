"""Minibatch nonlinear conjugate gradient training.

``cg_step`` advances one nonlinear CG iteration with a backtracking Armijo
line search; a failed search leaves the point unchanged and resets the
direction to steepest descent. ``train_embedding`` and ``train_joint`` drive
it over class-balanced minibatches with seeded shuffling, validation 5NN
error after every epoch, best-model selection and early stopping.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import split
from .evaluation import error_rate, knn_classify
from .model import embed
from .objective import asymmetric_value_and_grad, symmetric_value_and_grad

log = logging.getLogger(__name__)

PR_PLUS = "pr+"
FLETCHER_REEVES = "fr"


class NumericalError(RuntimeError):
    """A loss or gradient became non-finite during training."""


@dataclass
class LineSearchConfig:
    initial_step: float = 1.0
    backtrack: float = 0.5
    c1: float = 1e-4
    max_evals: int = 20
    expand_limit: float = 10.0


@dataclass
class TrainConfig:
    batch_size: int = 1000
    cg_iters_per_batch: int = 3
    max_epochs: int = 50
    cg_variant: str = PR_PLUS
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    warmup_epochs_alternating: int = 5
    seed: int = 0
    validation_fraction: float = 0.1
    patience: int = 10
    k: int = 5

    def validate(self):
        ls = self.line_search
        problems = []
        if self.batch_size < 2:
            problems.append("batch_size must be at least 2")
        if self.cg_iters_per_batch < 0:
            problems.append("cg_iters_per_batch must be nonnegative")
        if self.max_epochs < 1:
            problems.append("max_epochs must be positive")
        if self.cg_variant not in (PR_PLUS, FLETCHER_REEVES):
            problems.append(f"cg_variant must be {PR_PLUS!r} or {FLETCHER_REEVES!r}")
        if not 0 < self.validation_fraction < 1:
            problems.append("validation_fraction must lie in (0, 1)")
        if self.warmup_epochs_alternating < 0 or self.patience < 1 or self.k < 1:
            problems.append("warmup must be nonnegative, patience and k positive")
        if not (ls.initial_step > 0 and 0 < ls.backtrack < 1 and 0 < ls.c1 < 1 and ls.max_evals >= 1):
            problems.append("line search needs initial_step > 0, backtrack and c1 in (0, 1), max_evals >= 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    mean_batch_loss: float
    val_error: float
    wall_time: float


@dataclass
class TrainTrace:
    epochs: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_error: float = float("nan")

    def add(self, record: EpochRecord):
        if self.epochs and record.epoch <= self.epochs[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.epochs.append(record)

    def to_rows(self):
        return [asdict(r) for r in self.epochs]


# --------------------------------------------------------------------------
# conjugate gradient


@dataclass
class CGState:
    loss: float = None
    grad: np.ndarray = None
    direction: np.ndarray = None
    prev_grad: np.ndarray = None
    gd: float = None
    step: float = None
    iteration: int = 0
    restarted: bool = False
    failed: bool = False

    def reset(self):
        self.direction = None
        self.gd = None
        self.step = None
        self.iteration = 0


def _check_finite(loss, grad, where):
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite loss or gradient at {where}")


def cg_step(fun, x, state=None, variant=PR_PLUS, line_search=None):
    """One nonlinear CG iteration on ``fun(x) -> (loss, grad)``.

    ``state`` carries the loss/gradient at ``x`` and the previous direction.
    The direction restarts at steepest descent when it is not a descent
    direction or after ``x.size`` iterations.

    The step is found by Armijo backtracking, each cut landing on the
    minimizer of the interpolating quadratic (safeguarded to 0.1-0.5 of the
    previous trial). When the first trial already passes, further trials move
    toward the interpolated minimizer, at most ``expand_limit`` times farther
    per evaluation, while the loss keeps falling. Returns ``(x_new, state)``;
    ``state.loss`` never increases.
    """
    ls = line_search or LineSearchConfig()
    state = state or CGState()
    if state.loss is None:
        state.loss, state.grad = fun(x)
        _check_finite(state.loss, state.grad, "the starting point")
    g = state.grad
    gg = float(g @ g)
    if gg == 0.0:
        state.restarted, state.failed = False, False
        return x, state

    d = -g
    state.restarted = True
    if state.direction is not None and state.iteration % x.size != 0:
        g_prev = state.prev_grad
        denom = float(g_prev @ g_prev)
        if variant == FLETCHER_REEVES:
            beta = gg / denom
        else:
            beta = max(0.0, float(g @ (g - g_prev)) / denom)
        cand = -g + beta * state.direction
        if float(g @ cand) < 0.0:
            d = cand
            state.restarted = beta == 0.0
    gd = float(g @ d)

    if state.step is not None and state.gd is not None:
        alpha = state.step * state.gd / gd
    else:
        alpha = ls.initial_step / max(1.0, float(np.linalg.norm(d)))

    def acceptable(f, grad, a):
        return np.isfinite(f) and f <= state.loss + ls.c1 * a * gd and np.all(np.isfinite(grad))

    def interpolate(a, f):
        """Minimizer of the quadratic through (0, loss), slope gd, and (a, f)."""
        curv = f - state.loss - gd * a
        return -gd * a * a / (2.0 * curv) if curv > 0 else np.inf

    accepted = None
    evals = 0
    while evals < ls.max_evals:
        f_try, g_try = fun(x + alpha * d)
        evals += 1
        if acceptable(f_try, g_try, alpha):
            accepted = (alpha, f_try, g_try)
            break
        a_new = interpolate(alpha, f_try) if np.isfinite(f_try) else 0.0
        alpha = float(np.clip(a_new, 0.1 * alpha, ls.backtrack * alpha))

    # first trial accepted: move toward the interpolated minimizer (growing at most
    # `expand_limit`-fold per evaluation) while the loss keeps falling
    if accepted is not None and evals == 1:
        while evals < ls.max_evals:
            a_best, f_best, _ = accepted
            a_new = min(interpolate(a_best, f_best), ls.expand_limit * a_best)
            if abs(a_new - a_best) <= 1e-3 * a_best:
                break
            f_new, g_new = fun(x + a_new * d)
            evals += 1
            if not (acceptable(f_new, g_new, a_new) and f_new < f_best):
                break
            accepted = (a_new, f_new, g_new)
            if a_new < a_best:
                break

    if accepted is None:
        state.reset()
        state.failed = True
        return x, state
    alpha, f_new, g_new = accepted
    state.prev_grad = g
    state.loss, state.grad = f_new, g_new
    state.direction, state.gd, state.step = d, gd, alpha
    state.iteration += 1
    state.failed = False
    return x + alpha * d, state


def cg_minimize(fun, x0, iters, variant=PR_PLUS, line_search=None, state=None):
    """Run ``iters`` CG iterations; returns ``(x, losses)`` with the starting loss first."""
    x = np.array(x0, dtype=np.float64)
    state = state or CGState()
    if state.loss is None and iters > 0:
        state.loss, state.grad = fun(x)
        _check_finite(state.loss, state.grad, "the starting point")
    losses = [state.loss] if iters > 0 else []
    for _ in range(iters):
        x, state = cg_step(fun, x, state, variant, line_search)
        losses.append(state.loss)
    return x, losses


# --------------------------------------------------------------------------
# batching and validation


def balanced_batches(labels, batch_size, rng):
    """Shuffle each class and deal it evenly over ``round(n / batch_size)`` batches."""
    labels = np.asarray(labels)
    n = labels.size
    num_batches = max(1, int(round(n / batch_size)))
    batches = [[] for _ in range(num_batches)]
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        # rotate the deal so leftover points don't pile into the first batches
        offset = int(rng.integers(num_batches))
        for b, chunk in enumerate(np.array_split(members, num_batches)):
            batches[(b + offset) % num_batches].extend(chunk.tolist())
    return [np.array(sorted(b), dtype=np.int64) for b in batches if b]


def has_same_class_pair(labels):
    _, counts = np.unique(labels, return_counts=True)
    return bool(np.any(counts >= 2))


def _prepare_split(data, config, validation):
    if validation is not None:
        return data, validation
    train, val = split(data, config.validation_fraction, config.seed)
    if val.n == 0:
        log.warning("validation split is empty; selecting on training-set error instead")
        return train, None
    return train, val


def validation_error(model, train, val, k, refs=None, ref_labels=None):
    """5NN error of validation points against training (or exemplar) embeddings."""
    query = train if val is None else val
    if refs is None:
        refs, ref_labels = train.X, train.labels
    k = min(k, refs.shape[0])
    pred = knn_classify(embed(model, query.X), embed(model, refs), ref_labels, k)
    return error_rate(pred, query.labels)


def _diagnostic(model, epoch, batch):
    norms = ", ".join(f"|{k}|={v:.3e}" for k, v in model.param_norms().items())
    return f"epoch {epoch}, batch {batch}, parameter norms {norms}"


# --------------------------------------------------------------------------
# training loops


def train_embedding(model, data, config=None, validation=None):
    """Fit ``model`` to ``data`` with the symmetric objective.

    Splits off ``config.validation_fraction`` of ``data`` (stratified) unless
    ``validation`` is given. Returns ``(best_model, trace)`` where the best
    model has the lowest validation 5NN error over the trained epochs.
    """
    config = (config or TrainConfig()).validate()
    train, val = _prepare_split(data, config, validation)
    rng = np.random.default_rng(config.seed)
    model = model.copy()
    trace = TrainTrace()
    best, best_err, stale = model.copy(), np.inf, 0
    t0 = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        batch_means = []
        for b, idx in enumerate(balanced_batches(train.labels, config.batch_size, rng)):
            X, labels = train.X[idx], train.labels[idx]
            if idx.size < 2 or not has_same_class_pair(labels):
                continue

            def fun(theta):
                model.set_flat(theta)
                return symmetric_value_and_grad(model, X, labels)

            try:
                theta, losses = cg_minimize(fun, model.get_flat(), config.cg_iters_per_batch,
                                            config.cg_variant, config.line_search)
            except NumericalError as exc:
                raise NumericalError(f"{exc} ({_diagnostic(model, epoch, b)})") from None
            model.set_flat(theta)
            if losses:
                trace.batch_losses.append((epoch, b, "theta", losses))
                batch_means.append(losses[-1])
        err = validation_error(model, train, val, config.k)
        mean_loss = float(np.mean(batch_means)) if batch_means else float("nan")
        trace.add(EpochRecord(epoch, mean_loss, err, time.perf_counter() - t0))
        log.info("epoch %d loss %.6f val_error %.4f", epoch, mean_loss, err)
        if err < best_err:
            best, best_err, stale = model.copy(), err, 0
            trace.best_epoch, trace.best_val_error = epoch, err
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, trace


def train_joint(model, data, exemplars, config=None, validation=None):
    """Jointly fit the model and the exemplars with the asymmetric objective.

    During the first ``warmup_epochs_alternating`` epochs every batch gets a
    parameter-only CG phase followed by an exemplar-only phase; afterwards
    both are updated together. Exemplar labels and bias components never
    change. Returns ``(best_model, best_exemplars, trace)``; validation error
    is measured against the exemplars.
    """
    config = (config or TrainConfig()).validate()
    train, val = _prepare_split(data, config, validation)
    rng = np.random.default_rng(config.seed)
    model = model.copy()
    ex = exemplars.copy()
    ex_labels = ex.labels
    n_theta = model.num_params
    trace = TrainTrace()
    best, best_err, stale = (model.copy(), ex.copy()), np.inf, 0
    t0 = time.perf_counter()

    def set_free(E, free):
        E[:, :-1] = free.reshape(E.shape[0], -1)

    for epoch in range(1, config.max_epochs + 1):
        batch_means = []
        alternating = epoch <= config.warmup_epochs_alternating
        for b, idx in enumerate(balanced_batches(train.labels, config.batch_size, rng)):
            X, labels = train.X[idx], train.labels[idx]

            def fun_theta(theta):
                model.set_flat(theta)
                loss, gp, _ = asymmetric_value_and_grad(model, X, labels, ex.E, ex_labels)
                return loss, gp

            def fun_ex(free):
                set_free(ex.E, free)
                loss, _, gE = asymmetric_value_and_grad(model, X, labels, ex.E, ex_labels)
                return loss, gE[:, :-1].ravel()

            def fun_both(vec):
                model.set_flat(vec[:n_theta])
                set_free(ex.E, vec[n_theta:])
                loss, gp, gE = asymmetric_value_and_grad(model, X, labels, ex.E, ex_labels)
                return loss, np.concatenate([gp, gE[:, :-1].ravel()])

            iters = config.cg_iters_per_batch
            args = (iters, config.cg_variant, config.line_search)
            try:
                if alternating:
                    theta, l1 = cg_minimize(fun_theta, model.get_flat(), *args)
                    model.set_flat(theta)
                    free, l2 = cg_minimize(fun_ex, ex.E[:, :-1].ravel(), *args)
                    set_free(ex.E, free)
                    phases = [("theta", l1), ("exemplars", l2)]
                else:
                    vec, l3 = cg_minimize(fun_both, np.concatenate([model.get_flat(), ex.E[:, :-1].ravel()]), *args)
                    model.set_flat(vec[:n_theta])
                    set_free(ex.E, vec[n_theta:])
                    phases = [("joint", l3)]
            except NumericalError as exc:
                raise NumericalError(f"{exc} ({_diagnostic(model, epoch, b)})") from None
            for phase, losses in phases:
                if losses:
                    trace.batch_losses.append((epoch, b, phase, losses))
            if phases[-1][1]:
                batch_means.append(phases[-1][1][-1])
        err = validation_error(model, train, val, config.k, ex.E, ex_labels)
        mean_loss = float(np.mean(batch_means)) if batch_means else float("nan")
        trace.add(EpochRecord(epoch, mean_loss, err, time.perf_counter() - t0))
        log.info("epoch %d loss %.6f val_error %.4f (%s)", epoch, mean_loss, err,
                 "alternating" if alternating else "joint")
        if err < best_err:
            best, best_err, stale = (model.copy(), ex.copy()), err, 0
            trace.best_epoch, trace.best_val_error = epoch, err
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best[0], best[1], trace
