"""VM power metering, modeling, and green-energy scheduling toolkit.

The pipeline: simulate (or ingest) per-second resource and power series
for VM workloads, consolidate them in round-robin archives, fit a linear
host power model plus a workload classifier, then place predicted loads
against a renewable-power forecast.
"""

from .errors import GreenMeterError
from .ingest import (
    ALL_METRICS,
    CPU_VALUE,
    DISK_READ,
    DISK_WRITE,
    MEMORY_VALUE,
    NET_RECEIVE,
    NET_TRANSMIT,
    ExperimentMarks,
    MetricName,
    ResourceScales,
    parse_marks,
    parse_power_log,
    parse_resource_csv,
    quantize_power,
    serialize_marks,
    serialize_power_log,
    serialize_resource_csv,
)
from .powermodel import (
    BayesClassifier,
    FeatureVector,
    PowerModel,
    bayes_classify,
    bayes_fit,
    estimate_static,
    extract_features,
    fit,
    predict,
)
from .scheduler import (
    GreenForecast,
    Job,
    Schedule,
    admit_coarse,
    green_utilization,
    schedule_exact,
    schedule_greedy,
    slot_loads,
)
from .simcloud import (
    DEFAULT_HOST,
    M1_SMALL,
    ExperimentRecord,
    Flavor,
    HostModel,
    WorkloadKind,
    WorkloadSpec,
    default_workload,
    run_experiment,
    run_mix,
)
from .store import load_experiment, load_model, query, save_experiment, save_model
from .timeseries import AlignedSample, Consolidation, RoundRobinArchive, TimeSeries, align

__version__ = "0.1.0"

__all__ = [
    "ALL_METRICS",
    "AlignedSample",
    "BayesClassifier",
    "Consolidation",
    "CPU_VALUE",
    "DEFAULT_HOST",
    "DISK_READ",
    "DISK_WRITE",
    "ExperimentMarks",
    "ExperimentRecord",
    "FeatureVector",
    "Flavor",
    "GreenForecast",
    "GreenMeterError",
    "HostModel",
    "Job",
    "M1_SMALL",
    "MEMORY_VALUE",
    "MetricName",
    "NET_RECEIVE",
    "NET_TRANSMIT",
    "PowerModel",
    "ResourceScales",
    "RoundRobinArchive",
    "Schedule",
    "TimeSeries",
    "WorkloadKind",
    "WorkloadSpec",
    "admit_coarse",
    "align",
    "bayes_classify",
    "bayes_fit",
    "default_workload",
    "estimate_static",
    "extract_features",
    "fit",
    "green_utilization",
    "load_experiment",
    "load_model",
    "parse_marks",
    "parse_power_log",
    "parse_resource_csv",
    "predict",
    "quantize_power",
    "query",
    "run_experiment",
    "run_mix",
    "save_experiment",
    "save_model",
    "schedule_exact",
    "schedule_greedy",
    "serialize_marks",
    "serialize_power_log",
    "serialize_resource_csv",
    "slot_loads",
]
