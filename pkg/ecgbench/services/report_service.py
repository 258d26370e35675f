"""Comparison tables: model rows, prior-implementation rows, resource summary"""
import csv
import io
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel

from ecgbench import __version__
from ecgbench.schemas.artifact import RunArtifact
from ecgbench.schemas.metrics import MetricsReport, TrainingHistory
from ecgbench.schemas.perf import AcceleratorSpec, PerfReport
from ecgbench.services.cost_model_service import estimate_accelerator_latency

MISSING = "-"

ROW_LABEL = "Models"
COMPARISON_COLUMNS = [
    "Accuracy",
    "Precision",
    "Recall",
    "F1-score",
    "Training time",
    "Model complexity (params)",
    "Throughput [GOP/s]",
    "Latency",
]
VERSION_COLUMN = "Tool version"

IMPLEMENTATION_FIELDS = [
    "Convolution Type",
    "Platform",
    "No. Input Samples",
    "Activation",
    "Num of MACs",
    "Clock",
    "Accuracy",
    "Power",
]

RESOURCE_COLUMNS = ["Resource", "Utilization", "Available", "% Utilization"]
HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "wall_clock_s"]


class ImplementationRow(BaseModel):
    """One column of the prior-implementation comparison; None renders as "-" """
    label: str
    convolution_type: Optional[str] = None
    platform: Optional[str] = None
    input_samples: Optional[str] = None
    activation: Optional[str] = None
    num_macs: Optional[str] = None
    clock: Optional[str] = None
    accuracy: Optional[str] = None
    power: Optional[str] = None

    def values(self) -> List[str]:
        fields = [
            self.convolution_type, self.platform, self.input_samples, self.activation,
            self.num_macs, self.clock, self.accuracy, self.power,
        ]
        return [MISSING if value is None else value for value in fields]


REFERENCE_IMPLEMENTATIONS = [
    ImplementationRow(label="[1]", convolution_type="1-D", platform="FPGA Pynq-Z2", input_samples="512",
                      num_macs="929,650", clock="25 MHz", accuracy="98.9", power="13.34 uW"),
    ImplementationRow(label="[2]", convolution_type="1-D", platform="CPU-i7", input_samples="200",
                      activation="ReLu", num_macs="1,289,312", clock="3.7 GHz", accuracy="99.8", power="84 W"),
    ImplementationRow(label="[3]", convolution_type="1-D", input_samples="400",
                      num_macs="749,620", accuracy="98.4", power="141 mW"),
    ImplementationRow(label="[4]", convolution_type="2-D", platform="iCE40UP5k", input_samples="10x10",
                      activation="bTanH", num_macs="27,153", clock="100 MHz", accuracy="96.8", power="227.3 uW"),
    ImplementationRow(label="[5]", convolution_type="2-D", platform="GPU RTX 2080 Ti", input_samples="64x64",
                      activation="ReLu", num_macs="58.1 M", clock="1350 MHz", accuracy="99.7", power="108 W"),
]

OUR_MACS = 47560
OUR_CLOCK_HZ = 100e6
OUR_IMPLEMENTATION = ImplementationRow(
    label="Our", convolution_type="2-D", platform="FPGA Pynq-Z1", input_samples="187",
    activation="ReLu", num_macs="47,560", clock="100 MHz", accuracy="99.1", power="1.53 W",
)

# Zynq-7000 utilization of the deployed accelerator: (used, available)
ZYNQ_RESOURCES: Dict[str, tuple] = {
    "LUT": (17579, 74000),
    "FF": (20060, 106400),
    "BRAM": (1374, 3300),
    "IO": (36, 150),
    "DSP": (85, 160),
}


def _format_duration(seconds: float) -> str:
    if seconds < 1.0:
        return f"{seconds * 1e3:.3f} ms"
    return f"{seconds:.2f} s"


def render_comparison_row(metrics: MetricsReport, perf: PerfReport) -> List[str]:
    """
    Row in COMPARISON_COLUMNS order

    Throughput and latency both come from ``perf``, so the row satisfies
    throughput = MACs / latency. Minimum and mean timings stay in the
    artifact's LatencyMeasurement.
    """
    latency_s = perf.simulation_time_s_per_sample
    return [
        f"{metrics.accuracy * 100:.2f}%",
        f"{metrics.macro_precision * 100:.2f}%",
        f"{metrics.macro_recall * 100:.2f}%",
        f"{metrics.macro_f1 * 100:.2f}%",
        f"{metrics.training_time_s:.2f} s",
        f"{metrics.param_count:,}",
        f"{perf.throughput_gops:.6f}",
        _format_duration(latency_s),
    ]


def comparison_table(artifacts: Sequence[RunArtifact], current_version: str = __version__,
                     with_version: bool = False) -> List[List[str]]:
    """
    Header plus one row per artifact, labelled by model name

    With ``with_version`` a trailing column carries each artifact's tool
    version, suffixed with " (mismatch)" when it differs from ``current_version``.
    """
    header = [ROW_LABEL, *COMPARISON_COLUMNS]
    if with_version:
        header.append(VERSION_COLUMN)
    rows = [header]
    for artifact in artifacts:
        row = [artifact.config.model.value.upper(),
               *render_comparison_row(artifact.metrics, artifact.perf)]
        if with_version:
            version = artifact.tool_version
            row.append(version if version == current_version else f"{version} (mismatch)")
        rows.append(row)
    return rows


def implementation_table(spec: Optional[AcceleratorSpec] = None, efficiency: float = 1.0) -> List[List[str]]:
    """
    Prior implementations next to the 187-sample FPGA row, transposed so
    each implementation is a column. With ``spec`` an extra row carries the
    estimated accelerator latency of the 47,560-MAC design.
    """
    implementations = [*REFERENCE_IMPLEMENTATIONS, OUR_IMPLEMENTATION]
    rows = [["", *(impl.label for impl in implementations)]]
    columns = [impl.values() for impl in implementations]
    for index, field in enumerate(IMPLEMENTATION_FIELDS):
        rows.append([field, *(column[index] for column in columns)])
    if spec is not None:
        estimate = estimate_accelerator_latency(OUR_MACS, spec, efficiency)
        label = f"Est. latency ({spec.name} @ {spec.clock_hz / 1e6:g} MHz)"
        rows.append([label, *([MISSING] * len(REFERENCE_IMPLEMENTATIONS)), _format_duration(estimate)])
    return rows


def resource_table() -> List[List[str]]:
    rows = [RESOURCE_COLUMNS]
    for resource, (used, available) in ZYNQ_RESOURCES.items():
        rows.append([resource, str(used), str(available), f"{100.0 * used / available:.2f}%"])
    return rows


def render_text(rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned columns padded to the widest cell, header underlined"""
    if not rows:
        return ""
    widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def render_csv(rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    return buffer.getvalue()


def history_csv(history: TrainingHistory) -> str:
    """Per-epoch columnar history for external plotting"""
    rows = [HISTORY_COLUMNS]
    for record in history.epochs:
        rows.append([
            str(record.epoch),
            repr(record.train_loss),
            repr(record.val_loss),
            repr(record.wall_clock_s),
        ])
    return render_csv(rows)
