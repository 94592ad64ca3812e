"""Value distributions of the heads under Haar-random inputs, and report files.

File layouts written by ``emit_report``:

``metrics.csv``
    ``query_id,predicted_log_card,true_log_card,abs_log_error`` plus
    ``baseline_log_card,baseline_abs_log_error,improvement_factor`` when a
    baseline exists. One row per query, then one ``__mean__`` row holding
    the mean absolute log errors and the improvement factor (``exact`` when
    the model error is zero).
``loss_curve.csv``
    ``episode,loss``.
``hist_<label>.csv``
    ``bin_left,bin_right,count``; ``hist_<label>.svg`` is the matching bar chart.

Floats are written with ``repr`` so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, QCardError, UsageError
from .postproc import PostLayer
from .sim import MAX_QUBITS, haar_random_amplitudes

DEFAULT_SAMPLES = 100_000
DEFAULT_BINS = 100
CHUNK = 10_000


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total_samples: int
    layer: str
    n_qubits: int
    min_value: float
    max_value: float

    def __post_init__(self):
        if int(self.counts.sum()) != self.total_samples:
            raise ValueError("histogram counts do not add up to the sample count")
        if not np.all(np.diff(self.edges) > 0):
            raise ValueError("histogram edges must be strictly increasing")

    def bin_of(self, value: float) -> int:
        i = int(np.searchsorted(self.edges, value, side="right")) - 1
        return min(max(i, 0), len(self.counts) - 1)

    @property
    def modal_bin(self) -> int:
        return int(np.argmax(self.counts))


def panel_layers(d: float = 0.1, epsilon: float = 1e-6) -> list[tuple[PostLayer, int]]:
    """The eight value-distribution panels as (layer, register size) pairs.

    Scalars are 1 and the place-value base is 2. Every head appears once at
    4 entries; the place-value pair is repeated at 8 entries on 8 qubits.
    """
    return [
        (PostLayer("Linear", d=d, epsilon=epsilon), 4),
        (PostLayer("Rational", d=d, epsilon=epsilon), 4),
        (PostLayer("Threshold", d=d, epsilon=epsilon), 4),
        (PostLayer("ThresholdRatio", d=d, epsilon=epsilon), 4),
        (PostLayer("PlaceValue", width=4, d=d, epsilon=epsilon), 4),
        (PostLayer("PlaceValueNeg", width=4, d=d, epsilon=epsilon), 4),
        (PostLayer("PlaceValue", width=8, d=d, epsilon=epsilon), 8),
        (PostLayer("PlaceValueNeg", width=8, d=d, epsilon=epsilon), 8),
    ]


def marginals(probs: np.ndarray, n_qubits: int) -> np.ndarray:
    """Probability that each qubit reads 1, shape (..., n_qubits)."""
    idx = np.arange(probs.shape[-1])
    bits = ((idx[:, None] >> np.arange(n_qubits)) & 1).astype(np.float64)
    return probs @ bits


def sample_values(layer: PostLayer, n_qubits: int, samples: int, seed: int,
                  inputs: str = "basis", workers: int = 1) -> np.ndarray:
    """Head outputs for ``samples`` Haar-random states.

    Samples are drawn in fixed chunks, each from its own child of
    ``SeedSequence(seed)``, so the values do not depend on ``workers``.
    """
    if samples < 1:
        raise UsageError(f"samples must be >= 1, got {samples}")
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    available = n_qubits if inputs == "marginal" else 1 << n_qubits
    if inputs not in ("basis", "marginal"):
        raise ConfigurationError(f"inputs must be 'basis' or 'marginal', got {inputs!r}")
    if layer.width > available:
        raise ConfigurationError(
            f"{layer.label} reads {layer.width} entries but {n_qubits} qubits give {available} ({inputs})"
        )
    sizes = [min(CHUNK, samples - i) for i in range(0, samples, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(args):
        size, ss = args
        probs = np.abs(haar_random_amplitudes(n_qubits, size, np.random.default_rng(ss))) ** 2
        x = marginals(probs, n_qubits) if inputs == "marginal" else probs
        return layer(x[:, : layer.width])

    jobs = list(zip(sizes, seeds))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, jobs))
    else:
        parts = [chunk(j) for j in jobs]
    return np.concatenate(parts)


def histogram(values: np.ndarray, bins: int = DEFAULT_BINS, label: str = "", n_qubits: int = 0) -> Histogram:
    """Uniform bins over the observed range; a degenerate range gets a unit-wide span."""
    if bins < 1:
        raise UsageError(f"bins must be >= 1, got {bins}")
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, int(values.size), label, n_qubits, float(values.min()), float(values.max()))


def value_distribution(layer: PostLayer, n_qubits: int, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                       bins: int = DEFAULT_BINS, inputs: str = "basis", workers: int = 1) -> Histogram:
    values = sample_values(layer, n_qubits, samples, seed, inputs, workers)
    return histogram(values, bins, layer.label, n_qubits)


def improvement_factor(model_report, baseline_log_errors) -> float:
    """Baseline mean absolute log error divided by the model's.

    Equal means give exactly 1; a zero model error against a nonzero
    baseline gives ``inf``, which reports render as ``exact``.
    """
    model_errors = np.asarray(
        model_report.abs_log_errors if hasattr(model_report, "abs_log_errors") else model_report, dtype=np.float64
    )
    baseline = np.asarray(baseline_log_errors, dtype=np.float64)
    if model_errors.shape != baseline.shape:
        raise UsageError(f"{baseline.size} baseline errors for {model_errors.size} queries")
    m, b = float(model_errors.mean()), float(baseline.mean())
    if m == b:
        return 1.0
    if m == 0:
        return math.inf
    return b / m


def format_factor(value: float | None) -> str:
    if value is None:
        return ""
    return "exact" if math.isinf(value) else repr(float(value))


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def metrics_csv(report) -> str:
    header = ["query_id", "predicted_log_card", "true_log_card", "abs_log_error"]
    if report.has_baseline:
        header += ["baseline_log_card", "baseline_abs_log_error", "improvement_factor"]
    rows = []
    for r in report.rows:
        row = [r.query_id, _fmt(r.predicted_log_card), _fmt(r.true_log_card), _fmt(r.abs_log_error)]
        if report.has_baseline:
            row += [_fmt(r.baseline_log_card), _fmt(r.baseline_abs_log_error), ""]
        rows.append(row)
    footer = ["__mean__", "", "", _fmt(report.mean_abs_log_error)]
    if report.has_baseline:
        footer += ["", _fmt(report.baseline_mean_abs_log_error), format_factor(report.improvement_factor)]
    rows.append(footer)
    return _csv_text(header, rows)


def loss_curve_csv(curve) -> str:
    return _csv_text(["episode", "loss"], [[i, _fmt(v)] for i, v in enumerate(curve)])


def histogram_csv(hist: Histogram) -> str:
    rows = [[_fmt(hist.edges[i]), _fmt(hist.edges[i + 1]), int(c)] for i, c in enumerate(hist.counts)]
    return _csv_text(["bin_left", "bin_right", "count"], rows)


def histogram_svg(hist: Histogram, width: int = 640, height: int = 360) -> str:
    pad = 40
    plot_w, plot_h = width - 2 * pad, height - 2 * pad
    peak = max(int(hist.counts.max()), 1)
    bar_w = plot_w / len(hist.counts)
    bars = []
    for i, c in enumerate(hist.counts):
        if c == 0:
            continue
        h = plot_h * int(c) / peak
        bars.append(
            f'<rect x="{pad + i * bar_w:.3f}" y="{pad + plot_h - h:.3f}" '
            f'width="{max(bar_w - 0.5, 0.5):.3f}" height="{h:.3f}" fill="#3b6ea5"/>'
        )
    lo, hi = hist.edges[0], hist.edges[-1]
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2}" y="{pad / 2 + 5}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{hist.layer} ({hist.n_qubits} qubits, {hist.total_samples} samples)</text>',
        *bars,
        f'<line x1="{pad}" y1="{pad + plot_h}" x2="{pad + plot_w}" y2="{pad + plot_h}" stroke="black"/>',
        f'<text x="{pad}" y="{height - pad / 2}" font-family="sans-serif" font-size="11">{lo:.4g}</text>',
        f'<text x="{pad + plot_w}" y="{height - pad / 2}" text-anchor="end" font-family="sans-serif" '
        f'font-size="11">{hi:.4g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-family="sans-serif" '
        f'font-size="11">{peak}</text>',
        "</svg>",
        "",
    ])


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise QCardError(f"cannot write {path}: {exc}") from exc
    return path


def emit_histograms(histograms, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise QCardError(f"cannot create {out}: {exc}") from exc
    written = []
    for hist in histograms:
        written.append(_write(out / f"hist_{hist.layer}.csv", histogram_csv(hist)))
        written.append(_write(out / f"hist_{hist.layer}.svg", histogram_svg(hist)))
    return written


def emit_report(report, histograms, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise QCardError(f"cannot create {out}: {exc}") from exc
    written = [
        _write(out / "metrics.csv", metrics_csv(report)),
        _write(out / "loss_curve.csv", loss_curve_csv(report.loss_curve)),
    ]
    return written + emit_histograms(histograms or [], out)
