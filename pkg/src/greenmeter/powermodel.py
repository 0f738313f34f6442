"""Power modeling: static estimation, linear regression, Bayes classification.

The pipeline view: aligned (utilization, watts) rows come out of
:func:`extract_features` as windowed means; :func:`fit` solves the ridge
normal equations for ``watts ~ intercept + beta . u`` (the penalty never
touches the intercept, so fitting total watts makes the intercept the
static power); :func:`bayes_fit` learns per-workload Gaussians over the
same features for classification and per-class expected dynamic watts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    EstimationError,
    ExtractionError,
    FitError,
    FormatError,
    UsageError,
    VersionError,
)
from .ingest import (
    CPU_VALUE,
    DEFAULT_SCALES,
    DISK_READ,
    DISK_WRITE,
    MEMORY_VALUE,
    NET_RECEIVE,
    NET_TRANSMIT,
    ExperimentMarks,
    ResourceScales,
    _fmt,
)
from .simcloud import ExperimentRecord
from .timeseries import TimeSeries, align

DEFAULT_WINDOW_SECONDS = 5
MIN_FIT_SAMPLES = 5
MIN_CLASS_SAMPLES = 10
MIN_IDLE_SAMPLES = 30
VARIANCE_FLOOR = 1e-6
SINGULAR_FALLBACK_LAMBDA = 1e-8
STATIC_MISMATCH_WATTS = 6.0

POWER_MODEL_TAG = "powermodel-v1"
BAYES_MODEL_TAG = "bayes-v1"

_FEATURE_KEYS = ("cpu", "mem", "disk", "net")


class StaticMismatchWarning(UserWarning):
    """Fitted intercept disagrees with the independent static estimate."""


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


@dataclass(frozen=True)
class FeatureVector:
    """Normalized mean utilizations over one window, each in [0, 1]."""

    u_cpu: float
    u_mem: float
    u_disk: float
    u_net: float

    def __post_init__(self):
        for name, v in zip(_FEATURE_KEYS, self.as_tuple()):
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise DataError(f"u_{name} must be in [0, 1], got {v}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.u_cpu, self.u_mem, self.u_disk, self.u_net)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)


@dataclass(frozen=True)
class PowerModel:
    """Fitted linear power model. The intercept is the static power when
    the model was fit on total watts."""

    p_static_watts: float
    beta: tuple[float, float, float, float]
    ridge_lambda: float
    residual_rmse_watts: float
    r_squared: float
    n_samples: int

    def __post_init__(self):
        if len(self.beta) != 4:
            raise ConfigurationError(f"beta must have 4 components, got {len(self.beta)}")
        if not math.isfinite(self.residual_rmse_watts):
            raise DataError("residual_rmse_watts must be finite")


@dataclass(frozen=True)
class BayesClassifier:
    """Gaussian naive Bayes over feature vectors, one class per workload kind.

    ``classes`` keeps declaration order (first appearance in the training
    data); ties during classification resolve to the earliest class.
    """

    classes: tuple[str, ...]
    priors: tuple[float, ...]
    means: tuple[tuple[float, float, float, float], ...]
    variances: tuple[tuple[float, float, float, float], ...]
    mean_dynamic_watts: tuple[float, ...]

    def __post_init__(self):
        k = len(self.classes)
        if k < 2:
            raise FitError(f"need at least 2 classes, got {k}")
        if not (len(self.priors) == len(self.means) == len(self.variances) == len(self.mean_dynamic_watts) == k):
            raise ConfigurationError("classifier field lengths disagree")
        if abs(sum(self.priors) - 1.0) > 1e-9:
            raise DataError(f"priors must sum to 1, got {sum(self.priors)}")
        for row in self.variances:
            if any(v < VARIANCE_FLOOR for v in row):
                raise DataError(f"variances must be >= {VARIANCE_FLOOR}")


def estimate_static(
    power: TimeSeries,
    marks: ExperimentMarks | None = None,
    min_samples: int = MIN_IDLE_SAMPLES,
) -> float:
    """Mean idle power in watts.

    With ``marks`` given, only samples outside [start, end] count (the
    load is running in between). With ``marks=None`` the whole series is
    treated as a dedicated idle record. Fewer than ``min_samples`` idle
    samples is an estimation error: supply a dedicated idle record.
    """
    if marks is None:
        idle = power.values
    else:
        epochs = power.epochs
        outside = (epochs < marks.start_epoch) | (epochs > marks.end_epoch)
        idle = power.values[outside]
    if idle.size < min_samples:
        raise EstimationError(
            f"only {idle.size} idle samples, need >= {min_samples}; supply a dedicated idle record"
        )
    return float(idle.mean())


def _sample_features(row: dict, scales: ResourceScales) -> tuple[float, float, float, float]:
    disk_rate = row.get(DISK_READ, 0.0) + row.get(DISK_WRITE, 0.0)
    net_rate = row.get(NET_RECEIVE, 0.0) + row.get(NET_TRANSMIT, 0.0)
    return (
        _clamp01(row.get(CPU_VALUE, 0.0)),
        _clamp01(row.get(MEMORY_VALUE, 0.0)),
        _clamp01(disk_rate / scales.disk_bytes_per_sec),
        _clamp01(net_rate / scales.net_bytes_per_sec),
    )


def extract_features(
    record: ExperimentRecord,
    window_seconds: int = DEFAULT_WINDOW_SECONDS,
    p_static_watts: float = 0.0,
    scales: ResourceScales = DEFAULT_SCALES,
    max_gap_seconds: int = 1,
) -> list[tuple[FeatureVector, float]]:
    """Windowed (features, watts) pairs for one record.

    Windows tile the marks span from its start; a trailing partial window
    is dropped, as is any window with no aligned samples. Each pair holds
    the component-wise mean utilization and the mean power minus
    ``p_static_watts`` clamped at zero (pass 0.0 to keep total watts).
    """
    if window_seconds < 1:
        raise ConfigurationError(f"window_seconds must be >= 1, got {window_seconds}")
    aligned = align(record.resources, record.power, max_gap_seconds)
    if not aligned:
        raise ExtractionError(f"no aligned samples for experiment {record.id}")
    marks = record.marks
    n_windows = marks.span_seconds // window_seconds
    out: list[tuple[FeatureVector, float]] = []
    i = 0
    for w in range(n_windows):
        lo = marks.start_epoch + w * window_seconds
        hi = lo + window_seconds - 1
        while i < len(aligned) and aligned[i].epoch_seconds < lo:
            i += 1
        j = i
        while j < len(aligned) and aligned[j].epoch_seconds <= hi:
            j += 1
        if j == i:
            continue
        chunk = aligned[i:j]
        i = j
        feats = [_sample_features(s.resource_values, scales) for s in chunk]
        mean_u = [sum(col) / len(col) for col in zip(*feats)]
        mean_power = sum(s.power_watts for s in chunk) / len(chunk)
        out.append((FeatureVector(*mean_u), max(0.0, mean_power - p_static_watts)))
    return out


def fit(data: list[tuple[FeatureVector, float]], ridge_lambda: float = 0.0) -> PowerModel:
    """Least squares for ``watts ~ intercept + beta . u`` with an optional
    ridge penalty on the betas only.

    A singular normal system at lambda 0 is refit at 1e-8 and the model
    records the lambda actually used.
    """
    if ridge_lambda < 0:
        raise ConfigurationError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    if len(data) < MIN_FIT_SAMPLES:
        raise FitError(f"need >= {MIN_FIT_SAMPLES} samples, got {len(data)}")
    X = np.ones((len(data), 5), dtype=np.float64)
    y = np.empty(len(data), dtype=np.float64)
    for row, (fv, watts) in enumerate(data):
        X[row, 1:] = fv.as_tuple()
        y[row] = watts
    if not np.all(np.isfinite(y)):
        raise DataError("target watts contain non-finite values")

    penalty = np.diag([0.0, 1.0, 1.0, 1.0, 1.0])
    normal = X.T @ X
    rhs = X.T @ y
    lam = float(ridge_lambda)
    if lam == 0.0 and np.linalg.matrix_rank(normal, hermitian=True) < 5:
        lam = SINGULAR_FALLBACK_LAMBDA
    try:
        theta = np.linalg.solve(normal + lam * penalty, rhs)
    except np.linalg.LinAlgError:
        if lam == 0.0:
            lam = SINGULAR_FALLBACK_LAMBDA
            theta = np.linalg.solve(normal + lam * penalty, rhs)
        else:
            raise FitError("normal equations are singular") from None

    residuals = y - X @ theta
    rmse = float(np.sqrt(np.mean(residuals**2)))
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-18 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return PowerModel(
        p_static_watts=float(theta[0]),
        beta=tuple(float(b) for b in theta[1:]),
        ridge_lambda=lam,
        residual_rmse_watts=rmse,
        r_squared=r_squared,
        n_samples=len(data),
    )


def predict(model: PowerModel, fv: FeatureVector) -> float:
    """Predicted total watts: static plus the non-negative dynamic part."""
    if model.n_samples < MIN_FIT_SAMPLES:
        raise UsageError(f"model was not fit ({model.n_samples} samples)")
    dynamic = sum(b * u for b, u in zip(model.beta, fv.as_tuple()))
    return model.p_static_watts + max(0.0, dynamic)


def crosscheck_static(model: PowerModel, static_estimate_watts: float) -> float:
    """Compare the fitted intercept with an independent static estimate.

    Returns the absolute discrepancy and warns (never raises) when it
    exceeds 6 W, a hint that the training data or marks are off.
    """
    gap = abs(model.p_static_watts - static_estimate_watts)
    if gap > STATIC_MISMATCH_WATTS:
        warnings.warn(
            f"fitted intercept {model.p_static_watts:.1f} W vs static estimate "
            f"{static_estimate_watts:.1f} W (gap {gap:.1f} W)",
            StaticMismatchWarning,
            stacklevel=2,
        )
    return gap


def bayes_fit(labeled: list[tuple[FeatureVector, str, float]]) -> BayesClassifier:
    """Gaussian naive Bayes from (features, kind, dynamic_watts) rows.

    Classes keep first-appearance order. Every class needs at least 10
    samples; per-feature variances are floored at 1e-6.
    """
    by_class: dict[str, list[tuple[FeatureVector, float]]] = {}
    for fv, label, watts in labeled:
        by_class.setdefault(label, []).append((fv, watts))
    if len(by_class) < 2:
        raise FitError(f"need >= 2 classes, got {len(by_class)}")
    for label, rows in by_class.items():
        if len(rows) < MIN_CLASS_SAMPLES:
            raise FitError(f"class {label!r} has {len(rows)} samples, need >= {MIN_CLASS_SAMPLES}")

    classes = tuple(by_class)
    total = len(labeled)
    priors, means, variances, watts_means = [], [], [], []
    for label in classes:
        rows = by_class[label]
        features = np.array([fv.as_tuple() for fv, _ in rows], dtype=np.float64)
        priors.append(len(rows) / total)
        means.append(tuple(float(m) for m in features.mean(axis=0)))
        var = features.var(axis=0)
        variances.append(tuple(float(max(v, VARIANCE_FLOOR)) for v in var))
        watts_means.append(float(np.mean([w for _, w in rows])))
    return BayesClassifier(
        classes=classes,
        priors=tuple(priors),
        means=tuple(means),
        variances=tuple(variances),
        mean_dynamic_watts=tuple(watts_means),
    )


def class_log_scores(classifier: BayesClassifier, fv: FeatureVector) -> list[float]:
    """Unnormalized log posterior per class, in declaration order."""
    x = fv.as_tuple()
    scores = []
    for prior, mean, var in zip(classifier.priors, classifier.means, classifier.variances):
        score = math.log(prior)
        for xi, mu, v in zip(x, mean, var):
            score += -0.5 * math.log(2.0 * math.pi * v) - (xi - mu) ** 2 / (2.0 * v)
        scores.append(score)
    return scores


def bayes_classify(classifier: BayesClassifier, fv: FeatureVector) -> tuple[str, float, float]:
    """Most probable class with its posterior and expected dynamic watts.

    Work happens in log domain; exact score ties go to the earliest
    declared class.
    """
    scores = class_log_scores(classifier, fv)
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    shift = max(scores)
    total = sum(math.exp(s - shift) for s in scores)
    posterior = math.exp(scores[best] - shift) / total
    return classifier.classes[best], posterior, classifier.mean_dynamic_watts[best]


# --- flat key-value serialization ---------------------------------------


def _parse_kv(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        key, sep, value = raw.partition(" ")
        if not sep or not value.strip():
            raise FormatError(f"expected 'key value', got {raw!r}", line=lineno)
        pairs[key] = value.strip()
    return pairs


def model_to_text(model) -> str:
    """Serialize a PowerModel or BayesClassifier to its flat key-value form."""
    if isinstance(model, PowerModel):
        lines = [f"format {POWER_MODEL_TAG}"]
        lines.append(f"p_static {_fmt(model.p_static_watts)}")
        for key, b in zip(_FEATURE_KEYS, model.beta):
            lines.append(f"beta_{key} {_fmt(b)}")
        lines.append(f"lambda {_fmt(model.ridge_lambda)}")
        lines.append(f"rmse {_fmt(model.residual_rmse_watts)}")
        lines.append(f"r2 {_fmt(model.r_squared)}")
        lines.append(f"n {model.n_samples}")
        return "\n".join(lines) + "\n"
    if isinstance(model, BayesClassifier):
        lines = [f"format {BAYES_MODEL_TAG}", f"classes {len(model.classes)}"]
        for i, label in enumerate(model.classes):
            lines.append(f"class.{i}.label {label}")
            lines.append(f"class.{i}.prior {_fmt(model.priors[i])}")
            lines.append(f"class.{i}.watts {_fmt(model.mean_dynamic_watts[i])}")
            for key, m in zip(_FEATURE_KEYS, model.means[i]):
                lines.append(f"class.{i}.mean.{key} {_fmt(m)}")
            for key, v in zip(_FEATURE_KEYS, model.variances[i]):
                lines.append(f"class.{i}.var.{key} {_fmt(v)}")
        return "\n".join(lines) + "\n"
    raise UsageError(f"cannot serialize {type(model).__name__}")


def model_from_text(text: str):
    """Inverse of :func:`model_to_text`. Unknown format tags are rejected."""
    pairs = _parse_kv(text)
    tag = pairs.get("format")
    if tag == POWER_MODEL_TAG:
        try:
            return PowerModel(
                p_static_watts=float(pairs["p_static"]),
                beta=tuple(float(pairs[f"beta_{k}"]) for k in _FEATURE_KEYS),
                ridge_lambda=float(pairs["lambda"]),
                residual_rmse_watts=float(pairs["rmse"]),
                r_squared=float(pairs["r2"]),
                n_samples=int(pairs["n"]),
            )
        except KeyError as exc:
            raise FormatError(f"missing key {exc.args[0]!r}") from None
    if tag == BAYES_MODEL_TAG:
        try:
            k = int(pairs["classes"])
            return BayesClassifier(
                classes=tuple(pairs[f"class.{i}.label"] for i in range(k)),
                priors=tuple(float(pairs[f"class.{i}.prior"]) for i in range(k)),
                means=tuple(
                    tuple(float(pairs[f"class.{i}.mean.{key}"]) for key in _FEATURE_KEYS)
                    for i in range(k)
                ),
                variances=tuple(
                    tuple(float(pairs[f"class.{i}.var.{key}"]) for key in _FEATURE_KEYS)
                    for i in range(k)
                ),
                mean_dynamic_watts=tuple(float(pairs[f"class.{i}.watts"]) for i in range(k)),
            )
        except KeyError as exc:
            raise FormatError(f"missing key {exc.args[0]!r}") from None
    raise VersionError(f"unknown model format tag {tag!r}")
