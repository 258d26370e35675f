"""MAC counting, latency/throughput metrics and the accelerator latency estimate

Counting conventions:
  * paper_formula: conv = F * D^2 * I^2, pool = I^2 / P^2 (floored), fc = C.
    Channels are ignored; 1-D layers use the one-dimensional reading
    F * D * L and L / P.
  * exact: every multiply-accumulate the forward pass performs, e.g.
    F * C_in * kh * kw * H' * W' for a convolution. Pooling performs
    comparisons, not MACs; both modes count it as output elements.
  * 1 MAC = 1 operation when converting to GOP/s.
"""
import statistics
import threading
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ecgbench.core.exceptions import DataError
from ecgbench.models.beats import Dataset
from ecgbench.models.layers import Conv1DLayer, Conv2DLayer, DenseLayer, MaxPool1DLayer, MaxPool2DLayer
from ecgbench.models.network import Sequential
from ecgbench.models.rbm import RbmLayer
from ecgbench.models.recurrent import BiLstmLayer, LstmLayer, SimpleRnnLayer
from ecgbench.schemas.perf import (
    AcceleratorSpec,
    CountMode,
    LatencyMeasurement,
    LayerCost,
    LayerKind,
    PerfReport,
)
from ecgbench.utils.logger import logger

# held by whoever runs a timed region
EXCLUSIVE_RUN = threading.Lock()


def _require_positive(**values: int) -> None:
    for name, value in values.items():
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


def mac_conv(F: int, D: int, I: int) -> int:
    """F * D^2 * I^2"""
    _require_positive(F=F, D=D, I=I)
    return F * D * D * I * I


def mac_conv_exact(F: int, D: int, I: int, channels: int = 1, stride: int = 1, padding: str = "valid") -> int:
    """Real MACs of a square convolution on an I x I input"""
    _require_positive(F=F, D=D, I=I, channels=channels, stride=stride)
    if padding == "same":
        side = -(-I // stride)
    elif D > I:
        raise ValueError(f"Kernel {D} larger than input {I}")
    else:
        side = (I - D) // stride + 1
    return F * channels * D * D * side * side


def mac_pool(I: int, P: int) -> Tuple[int, bool]:
    """
    floor(I^2 / P^2)

    Returns:
        (count, divisible) where divisible is False when P does not divide I
    """
    _require_positive(I=I, P=P)
    divisible = I % P == 0
    if not divisible:
        logger.warning(f"Pool window {P} does not divide input {I}; count floored")
    return (I * I) // (P * P), divisible


def mac_fc(C: int) -> int:
    """C connections, i.e. in_features * out_features for a dense layer"""
    if C < 0:
        raise ValueError(f"Connection count must be >= 0, got {C}")
    return C


def mac_recurrent(hidden_size: int, input_size: int, cell: str = "lstm", steps: int = 1) -> int:
    """
    Per-sequence MACs of a recurrent cell

    LSTM step: 4 * H * (H + X) for the gates plus 3 * H elementwise products
    (two in the cell update, one in the output). RNN step: H * (H + X).
    """
    _require_positive(hidden_size=hidden_size, input_size=input_size, steps=steps)
    if cell == "lstm":
        per_step = 4 * hidden_size * (hidden_size + input_size) + 3 * hidden_size
    elif cell == "rnn":
        per_step = hidden_size * (hidden_size + input_size)
    else:
        raise ValueError(f"Unknown recurrent cell: {cell}")
    return steps * per_step


def mac_total(costs: Sequence[LayerCost]) -> int:
    """Sum over layers; mixing counting modes is allowed but logged"""
    warning = mixed_mode_warning(costs)
    if warning:
        logger.warning(warning)
    return int(sum(cost.macs for cost in costs))


def mixed_mode_warning(costs: Sequence[LayerCost]) -> Optional[str]:
    modes = sorted({cost.mode.value for cost in costs})
    if len(modes) > 1:
        return f"MAC total mixes counting modes: {', '.join(modes)}"
    return None


def _layer_cost(index: int, layer, in_shape, out_shape, mode: CountMode) -> LayerCost:
    layer_id = f"{index}.{layer.name}"
    exact = mode == CountMode.EXACT

    if isinstance(layer, Conv2DLayer):
        F, C = layer.num_filters, layer.in_channels
        kh, kw = layer.kernel_shape
        if exact:
            spatial = int(np.prod(out_shape[1:]))
            macs = F * C * kh * kw * spatial
        elif isinstance(layer, Conv1DLayer):
            macs = F * kw * in_shape[-1]
        else:
            macs = F * kh * kw * in_shape[1] * in_shape[2]
        return LayerCost(layer_id=layer_id, kind=LayerKind.CONV, macs=macs, mode=mode)

    if isinstance(layer, MaxPool2DLayer):
        if exact:
            return LayerCost(layer_id=layer_id, kind=LayerKind.POOL, macs=int(np.prod(out_shape)), mode=mode)
        note = None
        if isinstance(layer, MaxPool1DLayer):
            macs = in_shape[-1] // layer.window
            if in_shape[-1] % layer.window:
                note = "non-divisible window, floored"
        else:
            if in_shape[1] == in_shape[2]:
                macs, divisible = mac_pool(in_shape[1], layer.window)
            else:
                macs = (in_shape[1] * in_shape[2]) // (layer.window * layer.window)
                divisible = in_shape[1] % layer.window == 0 and in_shape[2] % layer.window == 0
            if not divisible:
                note = "non-divisible window, floored"
        return LayerCost(layer_id=layer_id, kind=LayerKind.POOL, macs=macs, mode=mode, note=note)

    if isinstance(layer, DenseLayer):
        return LayerCost(layer_id=layer_id, kind=LayerKind.FC,
                         macs=mac_fc(layer.in_features * layer.out_features), mode=mode)

    if isinstance(layer, RbmLayer):
        return LayerCost(layer_id=layer_id, kind=LayerKind.FC,
                         macs=mac_fc(layer.rbm.n_visible * layer.rbm.n_hidden), mode=mode)

    if isinstance(layer, LstmLayer):
        steps = in_shape[0]
        macs = mac_recurrent(layer.cell.hidden_size, layer.cell.input_size, "lstm", steps)
        return LayerCost(layer_id=layer_id, kind=LayerKind.RECURRENT, macs=macs, mode=mode)

    if isinstance(layer, BiLstmLayer):
        steps = in_shape[0]
        macs = sum(
            mac_recurrent(cell.hidden_size, cell.input_size, "lstm", steps)
            for cell in (layer.bi.forward_cell, layer.bi.backward_cell)
        )
        return LayerCost(layer_id=layer_id, kind=LayerKind.RECURRENT, macs=macs, mode=mode)

    if isinstance(layer, SimpleRnnLayer):
        cell = layer.cell
        macs = mac_recurrent(cell.hidden_size, cell.input_size, "rnn", in_shape[0])
        macs += cell.output_size * cell.hidden_size
        return LayerCost(layer_id=layer_id, kind=LayerKind.RECURRENT, macs=macs, mode=mode,
                         note="includes the final-step output head")

    return LayerCost(layer_id=layer_id, kind=LayerKind.OTHER, macs=0, mode=mode)


def analyze_model(model: Sequential, input_shape: Sequence[int], mode: CountMode = CountMode.EXACT) -> List[LayerCost]:
    """LayerCost for every layer of ``model`` fed one sample of ``input_shape``"""
    return [
        _layer_cost(index, layer, in_shape, out_shape, mode)
        for index, (layer, in_shape, out_shape) in enumerate(model.trace_shapes(input_shape))
    ]


def simulation_time(total_time_s: float, num_samples: int) -> float:
    """Total inference time divided by the number of inference samples"""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if total_time_s < 0:
        raise ValueError("total_time_s must be >= 0")
    return total_time_s / num_samples


def throughput(total_macs: int, latency_s: float) -> float:
    """MACs per second"""
    if latency_s <= 0:
        raise ValueError("Latency must be > 0")
    return total_macs / latency_s


def build_perf_report(total_macs: int, total_time_s: float, num_samples: int) -> PerfReport:
    """
    PerfReport for a timed run

    Args:
        total_macs: MACs of one inference
        total_time_s: wall-clock time of the whole run
        num_samples: inferences in the run
    """
    latency = simulation_time(total_time_s, num_samples)
    rate = throughput(total_macs, latency) if latency > 0 else 0.0
    return PerfReport(
        total_macs=total_macs,
        total_inference_time_s=total_time_s,
        num_samples=num_samples,
        simulation_time_s_per_sample=latency,
        throughput_macs_per_s=rate,
        throughput_gops=rate * 1e-9,
    )


def measure_latency(model: Sequential, ds: Dataset, repeats: int,
                    clock: Callable[[], float] = time.perf_counter,
                    batch_size: int = 256) -> LatencyMeasurement:
    """
    Time ``repeats`` full inference passes over ``ds`` after one warm-up pass

    The timed region runs while holding EXCLUSIVE_RUN so concurrent benchmarks
    cannot overlap it.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if len(ds) == 0:
        raise DataError("empty dataset")
    n = len(ds)
    with EXCLUSIVE_RUN:
        model.predict_proba(ds.features, batch_size)
        durations = []
        for _ in range(repeats):
            started = clock()
            model.predict_proba(ds.features, batch_size)
            durations.append(clock() - started)
    per_sample = [d / n for d in durations]
    minimum = min(per_sample)
    mean = max(statistics.fmean(per_sample), minimum)
    return LatencyMeasurement(
        repeats=repeats,
        num_samples=n,
        total_time_s=float(sum(durations)),
        per_sample_min_s=minimum,
        per_sample_mean_s=mean,
        per_sample_std_s=statistics.pstdev(per_sample),
    )


def estimate_accelerator_latency(total_macs: int, spec: AcceleratorSpec, efficiency: float = 1.0) -> float:
    """cycles = macs / (macs_per_cycle * efficiency); latency = cycles / clock"""
    if not 0.0 < efficiency <= 1.0:
        raise ValueError(f"Efficiency must be in (0, 1], got {efficiency}")
    if total_macs < 0:
        raise ValueError("total_macs must be >= 0")
    cycles = total_macs / (spec.macs_per_cycle * efficiency)
    return cycles / spec.clock_hz
