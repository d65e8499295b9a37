"""Weighted trajectory ensembles: statistics, breeding, and experiment runs.

An ensemble holds ``n_paths`` trajectories with complex log-weights. All
observables are weight-averaged; standard errors come from delete-one
jackknife resampling. Because weights spread exponentially under the
measurement-conditioning drift, the ensemble is kept healthy by *breeding*:
whenever a trajectory's weight falls below ``tolerance`` times the mean
weight, the currently heaviest trajectory is cloned over it and donor and
clone each carry half the donor's weight. The total removed weight is the
discarded trajectory's own weight, so every breeding event perturbs weighted
averages by at most ``tolerance * (max|f| + |mean f|)`` per event.

Reductions use ``numpy``'s pairwise summation throughout, so results are
bitwise reproducible for a fixed ensemble layout regardless of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    CoefficientModel,
    DivergenceError,
    FeedbackContext,
    NoiseIncrements,
    step_paths,
)

_LOG2 = float(np.log(2.0))


class CollapseError(RuntimeError):
    """Every trajectory weight vanished; weighted averages are undefined."""


@dataclass(frozen=True)
class EnsembleSettings:
    """Run parameters for a weighted-ensemble experiment.

    Seeds are explicit so every run is reproducible: the shared measurement
    noise is seeded by ``(seed_real, realization)`` and the per-trajectory
    fictitious streams are spawned from ``(seed_fict, realization)``.
    """

    n_paths: int
    t_final: float
    sample_interval: float
    seed_real: int
    seed_fict: int
    realization: int = 0
    breed_tolerance: float = 1e-4
    fixed_point_iterations: int = 4
    divergence_policy: str = "abort"
    noise_chunk: int = 256

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.t_final < 0.0:
            raise ValueError("t_final must be nonnegative")
        if not self.sample_interval > 0.0:
            raise ValueError("sample_interval must be positive")
        if not 0.0 <= self.breed_tolerance < 1.0:
            raise ValueError("breed_tolerance must lie in [0, 1)")
        if self.fixed_point_iterations < 1:
            raise ValueError("fixed_point_iterations must be at least 1")
        if self.divergence_policy not in ("abort", "recycle"):
            raise ValueError("divergence_policy must be 'abort' or 'recycle'")
        if self.seed_real < 0 or self.seed_fict < 0:
            raise ValueError("seeds must be nonnegative integers")
        if self.noise_chunk < 1:
            raise ValueError("noise_chunk must be at least 1")


def _weights(log_weights: np.ndarray) -> np.ndarray:
    """Exponentiate log-weights after shifting by the largest real part."""
    lw = np.asarray(log_weights)
    if lw.size == 0:
        raise ValueError("empty ensemble")
    re = lw.real
    shift = re.max()
    if shift == -np.inf:
        raise CollapseError("every trajectory weight vanished")
    if not np.isfinite(shift):
        raise ValueError("non-finite log-weights; divergence policy not applied?")
    return np.exp(lw - shift)


def weighted_average(
    log_weights: np.ndarray,
    values: np.ndarray,
    *,
    return_stderr: bool = False,
):
    """Weight-averaged mean of per-trajectory values.

    Parameters
    ----------
    log_weights : (n_paths,) real or complex array
    values : (n_paths,) real or complex array
    return_stderr : also return the delete-one jackknife standard error of
        the real part.

    Returns
    -------
    The weighted mean (complex when either input is complex, else float),
    optionally followed by the jackknife standard error. The error is ``nan``
    for a single trajectory.
    """
    w = _weights(log_weights)
    f = np.asarray(values)
    if f.shape != w.shape:
        raise ValueError("values and log_weights must have matching shapes")
    total = np.sum(w)
    if total == 0:
        raise CollapseError("every trajectory weight vanished")
    num = np.sum(w * f)
    mean = num / total
    if not (np.iscomplexobj(w) or np.iscomplexobj(f)):
        mean = float(mean)
    else:
        mean = complex(mean)
    if not return_stderr:
        return mean
    n = w.size
    if n < 2:
        return mean, float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        rest = ((num - w * f) / (total - w)).real
    centered = rest - np.mean(rest)
    stderr = float(np.sqrt((n - 1) / n * np.sum(centered * centered)))
    return mean, stderr


def family_stderr(
    log_weights: np.ndarray,
    values: np.ndarray,
    ancestors: np.ndarray | None = None,
) -> float:
    """Standard error of the weighted mean, grouped by founding ancestor.

    Trajectories cloned from a common parent stay correlated long after the
    cloning event, so summing each trajectory's influence separately (as the
    delete-one jackknife does) underestimates the error of an ensemble that
    has been through breeding, by an amount that grows with the number of
    clone events. Treating whole ancestral families as the independent units
    restores an honest estimate: with normalized weights ``p_i`` the error is

        stderr^2 = sum_families ( sum_{i in family} p_i (f_i - mean) )^2

    which reduces to the usual independent-trajectory formula when every
    trajectory is its own family. ``ancestors`` holds one integer label per
    trajectory; ``None`` means all trajectories are independent.
    """
    w = _weights(log_weights)
    f = np.asarray(values)
    if f.shape != w.shape:
        raise ValueError("values and log_weights must have matching shapes")
    total = np.sum(w)
    if total == 0:
        raise CollapseError("every trajectory weight vanished")
    if w.size < 2:
        return float("nan")
    influence = ((w * (f - np.sum(w * f) / total)) / total).real
    if ancestors is None:
        return float(np.sqrt(np.sum(influence * influence)))
    labels = np.asarray(ancestors)
    if labels.shape != w.shape:
        raise ValueError("ancestors and log_weights must have matching shapes")
    _, inverse = np.unique(labels, return_inverse=True)
    sums = np.bincount(inverse, weights=influence)
    return float(np.sqrt(np.sum(sums * sums)))


def family_variance_stderr(
    log_weights: np.ndarray,
    values: np.ndarray,
    ancestors: np.ndarray | None = None,
) -> float:
    """Family-grouped standard error of the weighted variance of ``values``.

    The variance estimate ``mean(f^2) - mean(f)^2`` has per-trajectory
    influence ``(f_i - mean)^2 - var``, so its error is the family error of
    the centered squares; see :func:`family_stderr`.
    """
    w = _weights(log_weights)
    f = np.asarray(values).real
    if f.shape != w.shape:
        raise ValueError("values and log_weights must have matching shapes")
    total = np.sum(w)
    if total == 0:
        raise CollapseError("every trajectory weight vanished")
    mean = (np.sum(w * f) / total).real
    return family_stderr(log_weights, (f - mean) ** 2, ancestors)


def weighted_variance(
    log_weights: np.ndarray,
    values: np.ndarray,
    *,
    return_stderr: bool = False,
):
    """Weight-averaged variance of real per-trajectory values.

    Computed as ``mean(f^2) - mean(f)^2`` under the trajectory weights, with
    an optional delete-one jackknife standard error.
    """
    w = _weights(log_weights)
    f = np.asarray(values).real
    if f.shape != w.shape:
        raise ValueError("values and log_weights must have matching shapes")
    total = np.sum(w)
    if total == 0:
        raise CollapseError("every trajectory weight vanished")
    num1 = np.sum(w * f)
    num2 = np.sum(w * f * f)
    var = float((num2 / total - (num1 / total) ** 2).real)
    if not return_stderr:
        return var
    n = w.size
    if n < 2:
        return var, float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        denom = total - w
        mean_rest = (num1 - w * f) / denom
        rest = ((num2 - w * f * f) / denom - mean_rest * mean_rest).real
    centered = rest - np.mean(rest)
    stderr = float(np.sqrt((n - 1) / n * np.sum(centered * centered)))
    return var, stderr


def effective_sample_size(log_weights: np.ndarray) -> float:
    """``(sum w)^2 / sum w^2`` computed on the weight magnitudes.

    Equals ``n_paths`` for uniform weights and approaches 1 when a single
    trajectory dominates.
    """
    w = np.abs(_weights(log_weights))
    total = np.sum(w)
    if total == 0:
        raise CollapseError("every trajectory weight vanished")
    return float(total * total / np.sum(w * w))


def compute_context(
    model: CoefficientModel,
    states: np.ndarray,
    log_weights: np.ndarray,
    ancestors: np.ndarray | None = None,
) -> FeedbackContext:
    """Freeze the weighted means and the feedback control for one step."""
    means = {
        name: weighted_average(log_weights, values)
        for name, values in model.feedback_values(states).items()
    }
    return FeedbackContext(means=means, control=model.control(means), ancestors=ancestors)


def breed(
    states: np.ndarray,
    log_weights: np.ndarray,
    tolerance: float,
    ancestors: np.ndarray | None = None,
) -> tuple[int, float]:
    """Clone heavy trajectories over vanishing ones, in place.

    While any weight is below ``tolerance`` times the current mean weight,
    the smallest such trajectory (lowest index on ties) is replaced by a copy
    of the heaviest one (lowest index on ties) and both copies receive half
    the donor's weight. The trajectory count never changes and each event
    removes exactly the discarded weight from the ensemble total.

    ``ancestors``, when given, is updated alongside: the replaced slot takes
    the donor's ancestor label, keeping family bookkeeping for
    :func:`family_stderr` accurate.

    Returns
    -------
    (events, removed) : the number of breeding events and the removed weight
        as a fraction of the ensemble total at each event.
    """
    if not 0.0 <= tolerance < 1.0:
        raise ValueError("tolerance must lie in [0, 1)")
    if tolerance == 0.0:
        return 0, 0.0
    n = log_weights.shape[0]
    events = 0
    removed = 0.0
    while True:
        w = _weights(log_weights).real
        total = np.sum(w)
        threshold = tolerance * total / n
        smallest = int(np.argmin(w))
        if w[smallest] >= threshold:
            break
        heaviest = int(np.argmax(w))
        if heaviest == smallest:
            raise CollapseError("a single trajectory carries all the weight")
        removed += float(w[smallest] / total)
        states[smallest] = states[heaviest]
        if ancestors is not None:
            ancestors[smallest] = ancestors[heaviest]
        halved = log_weights[heaviest] - _LOG2
        log_weights[heaviest] = halved
        log_weights[smallest] = halved
        events += 1
    return events, removed


class _FictNoiseBuffer:
    """Chunked supplier of per-trajectory fictitious increments.

    Draws ``chunk`` steps of increments per stream at a time; the per-stream
    draw order is identical to calling ``standard_normal(n_fict)`` once per
    step, so buffering never changes the numbers.
    """

    def __init__(self, streams, n_fict: int, dt: float, chunk: int = 256) -> None:
        self._streams = streams
        self._n_fict = n_fict
        self._root_dt = float(np.sqrt(dt))
        self._chunk = chunk
        self._buffer = None
        self._cursor = 0

    def next(self) -> np.ndarray:
        n_paths = len(self._streams)
        if self._n_fict == 0:
            return np.zeros((n_paths, 0))
        if self._buffer is None or self._cursor == self._chunk:
            draws = np.stack(
                [g.standard_normal(self._chunk * self._n_fict) for g in self._streams]
            )
            self._buffer = self._root_dt * draws.reshape(n_paths, self._chunk, self._n_fict)
            self._cursor = 0
        block = self._buffer[:, self._cursor, :]
        self._cursor += 1
        return block


@dataclass
class StepReport:
    """Per-step bookkeeping returned by :func:`step_ensemble`."""

    breed_events: int
    removed_weight: float
    divergences: int
    control: float = 0.0


@dataclass
class TrajectoryEnsemble:
    """Mutable state of one weighted-ensemble run."""

    model: CoefficientModel
    settings: EnsembleSettings
    states: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray = None
    t: float = 0.0
    step_index: int = 0
    total_breed_events: int = 0
    total_removed_weight: float = 0.0
    total_divergences: int = 0
    _fict: _FictNoiseBuffer = field(default=None, repr=False)

    @classmethod
    def initialize(cls, model: CoefficientModel, settings: EnsembleSettings) -> "TrajectoryEnsemble":
        """Sample initial states and set up the per-trajectory noise streams.

        Child sequence 0 of ``(seed_fict, realization)`` seeds the initial
        state draw; children 1..n_paths seed the fictitious streams.
        """
        root = np.random.SeedSequence([settings.seed_fict, settings.realization])
        children = root.spawn(settings.n_paths + 1)
        init_rng = np.random.Generator(np.random.PCG64(children[0]))
        streams = [np.random.Generator(np.random.PCG64(c)) for c in children[1:]]
        states = np.array(model.sample_initial(settings.n_paths, init_rng), dtype=np.complex128)
        if states.shape != (settings.n_paths, model.dim):
            raise ValueError("sample_initial returned the wrong shape")
        log_weights = np.zeros(settings.n_paths, dtype=np.complex128)
        buffer = _FictNoiseBuffer(
            streams, model.noise.n_fict, model.noise.dt, chunk=settings.noise_chunk
        )
        return cls(
            model=model,
            settings=settings,
            states=states,
            log_weights=log_weights,
            ancestors=np.arange(settings.n_paths, dtype=np.int64),
            _fict=buffer,
        )


def step_ensemble(
    ensemble: TrajectoryEnsemble,
    real_increments: np.ndarray,
    control: float | None = None,
) -> StepReport:
    """Advance the whole ensemble by one step under shared measurement noise.

    The feedback context is frozen from the pre-step ensemble, every
    trajectory receives the same ``real_increments`` plus its own fictitious
    block, divergent trajectories are handled per the settings policy
    (``abort`` raises, ``recycle`` zeroes state and weight), and breeding runs
    once after the step.

    ``control`` forces the feedback value applied this step instead of the
    one computed from the ensemble. A closed-loop run records the control it
    applied, and a second solver reproducing the same experiment must replay
    that sequence rather than close the loop on its own state estimate. The
    applied value is returned in the report either way.
    """
    model = ensemble.model
    settings = ensemble.settings
    context = compute_context(model, ensemble.states, ensemble.log_weights)
    if control is not None:
        context = FeedbackContext(means=context.means, control=float(control))
    fict = ensemble._fict.next()
    increments = NoiseIncrements(
        real=np.asarray(real_increments, dtype=np.float64), fict=fict
    )
    states, log_weights, bad = step_paths(
        model,
        ensemble.states,
        ensemble.log_weights,
        ensemble.t,
        increments,
        context,
        iterations=settings.fixed_point_iterations,
    )
    divergences = int(np.count_nonzero(bad))
    if divergences:
        if settings.divergence_policy == "abort":
            raise DivergenceError(
                f"{divergences} trajectories diverged at t={ensemble.t + model.noise.dt:.6g}"
            )
        states[bad] = 0.0
        log_weights[bad] = complex(-np.inf, 0.0)
    ensemble.states = states
    ensemble.log_weights = log_weights
    ensemble.step_index += 1
    ensemble.t = ensemble.step_index * model.noise.dt
    events, removed = breed(states, log_weights, settings.breed_tolerance, ensemble.ancestors)
    ensemble.total_breed_events += events
    ensemble.total_removed_weight += removed
    ensemble.total_divergences += divergences
    return StepReport(
        breed_events=events,
        removed_weight=removed,
        divergences=divergences,
        control=context.control,
    )


@dataclass
class ExperimentRecord:
    """Sampled output of one realization.

    ``columns`` maps column names (the model's observables plus ``ess``,
    ``breed_events`` and ``removed_weight`` counters) to arrays over sample
    times. ``real_increments`` is the full measurement-noise record that
    drove the run and ``controls`` the feedback value applied at each step;
    together they pin down the experiment, so a reference solver can
    reproduce it exactly instead of closing the feedback loop on its own
    state estimate.
    """

    times: np.ndarray
    columns: dict[str, np.ndarray]
    real_increments: np.ndarray
    dt: float
    settings: EnsembleSettings | None
    controls: np.ndarray | None = None
    n_divergences: int = 0
    failed: bool = False
    failure: str = ""


def _sample_row(ensemble: TrajectoryEnsemble) -> dict[str, float]:
    context = compute_context(
        ensemble.model, ensemble.states, ensemble.log_weights, ensemble.ancestors
    )
    row = dict(ensemble.model.summarize(ensemble.states, ensemble.log_weights, context))
    row["ess"] = effective_sample_size(ensemble.log_weights)
    row["breed_events"] = float(ensemble.total_breed_events)
    row["removed_weight"] = ensemble.total_removed_weight
    return row


def run_experiment(
    model: CoefficientModel,
    settings: EnsembleSettings,
    real_increments: np.ndarray | None = None,
    controls: np.ndarray | None = None,
) -> ExperimentRecord:
    """Run one realization and sample observables on a fixed cadence.

    Parameters
    ----------
    model : coefficient model to integrate
    settings : run parameters; ``t_final`` must be an integer number of steps
        and ``sample_interval`` an integer number of ``dt``
    real_increments : optional pre-drawn measurement record of shape
        ``(n_steps, n_real)``; when omitted the record is drawn from the
        ``(seed_real, realization)`` stream. Supplying the same record
        reproduces the run exactly.
    controls : optional per-step feedback sequence of shape ``(n_steps,)``
        applied verbatim instead of closing the loop on this ensemble's own
        estimate. Use the ``controls`` captured by a previous run to make a
        second solver face the identical experiment.

    Returns
    -------
    ExperimentRecord
        Observables at t=0, every ``sample_interval``, and ``t_final``. When
        the divergence policy aborts the run, the record is marked ``failed``
        and holds the rows sampled so far.
    """
    dt = model.noise.dt
    n_steps = int(round(settings.t_final / dt))
    if abs(n_steps * dt - settings.t_final) > 1e-9 * max(1.0, abs(settings.t_final)):
        raise ValueError("t_final must be an integer multiple of dt")
    stride = max(1, int(round(settings.sample_interval / dt)))
    if abs(stride * dt - settings.sample_interval) > 1e-9:
        raise ValueError("sample_interval must be an integer multiple of dt")

    if real_increments is None:
        rng_real = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([settings.seed_real, settings.realization]))
        )
        real_increments = np.sqrt(dt) * rng_real.standard_normal((n_steps, model.noise.n_real))
    else:
        real_increments = np.asarray(real_increments, dtype=np.float64)
        if real_increments.shape != (n_steps, model.noise.n_real):
            raise ValueError(
                f"need a ({n_steps}, {model.noise.n_real}) noise record, "
                f"got {real_increments.shape}"
            )
    if controls is not None:
        controls = np.asarray(controls, dtype=np.float64)
        if controls.shape != (n_steps,):
            raise ValueError(f"need a ({n_steps},) control sequence, got {controls.shape}")

    ensemble = TrajectoryEnsemble.initialize(model, settings)
    times = [0.0]
    rows = [_sample_row(ensemble)]
    applied = np.zeros(n_steps, dtype=np.float64)
    failed = False
    failure = ""
    for k in range(n_steps):
        forced = None if controls is None else controls[k]
        try:
            report = step_ensemble(ensemble, real_increments[k], control=forced)
        except DivergenceError as exc:
            failed = True
            failure = str(exc)
            applied = applied[: k]
            break
        applied[k] = report.control
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            times.append(ensemble.t)
            rows.append(_sample_row(ensemble))

    keys = rows[0].keys()
    columns = {key: np.array([row[key] for row in rows], dtype=np.float64) for key in keys}
    return ExperimentRecord(
        times=np.array(times, dtype=np.float64),
        columns=columns,
        real_increments=real_increments,
        dt=dt,
        settings=settings,
        controls=applied,
        n_divergences=ensemble.total_divergences,
        failed=failed,
        failure=failure,
    )
