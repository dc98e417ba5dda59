"""Scenario pipelines, result bundles and run comparison.

Every simulated scenario processes its pulses in independent chunks. All
randomness is addressed by pulse index, so the chunks may run serially or on
a thread pool and the merged result is identical either way.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import bb84, fiber, keyrate, link, photon_stats, rng
from .config import RunConfig
from .errors import ConfigurationError, InvalidParameterError
from .source import SourceSpec, effective_mu, emit_stream, target_g2_to_p2

SUMMARY_FILE = "summary.json"


# --- results ----------------------------------------------------------------

@dataclass(frozen=True)
class Metric:
    value: float
    sigma: float | None = None


@dataclass
class ResultBundle:
    """Output of one scenario run: metrics, calibration info and CSV tables."""

    scenario: str
    scenario_name: str
    seed: int
    metrics: dict[str, Metric] = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    tables: dict[str, str] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "metrics": {k: {"value": m.value, "sigma": m.sigma} for k, m in self.metrics.items()},
            "info": self.info,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in sorted(self.tables.items()):
            (out / name).write_text(text)
            written.append(out / name)
        (out / SUMMARY_FILE).write_text(self.summary_json())
        written.append(out / SUMMARY_FILE)
        return written

    @classmethod
    def load(cls, path) -> "ResultBundle":
        """Read a bundle from its output directory (or its summary file)."""
        path = Path(path)
        summary_path = path / SUMMARY_FILE if path.is_dir() else path
        try:
            data = json.loads(summary_path.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigurationError(f"cannot read result summary {summary_path}: {err}") from None
        tables = {p.name: p.read_text() for p in sorted(summary_path.parent.glob("*.csv"))}
        metrics = {k: Metric(v["value"], v.get("sigma")) for k, v in data.get("metrics", {}).items()}
        return cls(data["scenario"], data["scenario_name"], data["seed"], metrics, data.get("info", {}), tables)


@dataclass(frozen=True)
class MetricDelta:
    metric: str
    a: float
    b: float
    delta: float
    sigma: float | None


@dataclass
class DeltaReport:
    scenario: str
    rows: list[MetricDelta]

    def to_csv(self) -> str:
        lines = ["metric,a,b,delta,sigma"]
        for r in self.rows:
            sigma = "" if r.sigma is None else repr(r.sigma)
            lines.append(f"{r.metric},{r.a!r},{r.b!r},{r.delta!r},{sigma}")
        return "\n".join(lines) + "\n"

    def __getitem__(self, metric: str) -> MetricDelta:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)


def compare_runs(a: ResultBundle, b: ResultBundle) -> DeltaReport:
    """Deltas ``b - a`` of every metric both bundles share, with combined sigma."""
    if a.scenario != b.scenario:
        raise InvalidParameterError(f"cannot compare scenario {a.scenario!r} with {b.scenario!r}")
    rows = []
    for name in sorted(set(a.metrics) & set(b.metrics)):
        ma, mb = a.metrics[name], b.metrics[name]
        if ma.sigma is None and mb.sigma is None:
            sigma = None
        else:
            sigma = math.hypot(ma.sigma or 0.0, mb.sigma or 0.0)
        rows.append(MetricDelta(name, ma.value, mb.value, mb.value - ma.value, sigma))
    return DeltaReport(a.scenario, rows)


# --- calibration ------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedRun:
    """Physical parameters after applying every calibration target in the config."""

    source: SourceSpec
    detector: link.DetectorSpec
    receiver: bb84.ReceiverSpec
    budget: fiber.LossBudget
    info: dict


def _sift_fraction(encoding: str, z_prob: float, basis_split: float) -> float:
    z = z_prob * basis_split
    x = (1 - z_prob) * (1 - basis_split)
    return z + x if encoding == "polarization" else z + 0.5 * x


def resolve(config: RunConfig) -> ResolvedRun:
    src_cfg = config.source
    budget = fiber.channel_loss(config.fiber, src_cfg.wavelength_um)
    info: dict = {
        "channel_loss_db": budget.total_db,
        "transmittance": budget.transmittance,
        "window": fiber.window_index(
            src_cfg.wavelength_um, config.fiber.membrane_thickness_um, config.fiber.refractive_index
        ),
    }
    src_fields = src_cfg.model_dump(exclude={"g2_target", "hom_visibility_target"})
    if src_cfg.g2_target is not None:
        src_fields["p2"] = target_g2_to_p2(src_cfg.g2_target, src_cfg.p1)
        info["calibrated_p2"] = src_fields["p2"]
    det = config.detector
    if src_cfg.hom_visibility_target is not None:
        eta = budget.transmittance * det.efficiency
        src_fields["wavepacket_overlap"] = photon_stats.calibrate_overlap(
            src_cfg.hom_visibility_target, src_fields["p1"], src_fields["p2"], eta
        )
        info["calibrated_wavepacket_overlap"] = src_fields["wavepacket_overlap"]
    source = SourceSpec(**src_fields)

    rx_cfg = config.receiver
    rx_fields = rx_cfg.model_dump(exclude={"qber_target", "sifted_rate_target"})
    encoding = config.encoding
    if rx_cfg.qber_target is not None:
        if encoding == "polarization":
            rx_fields["misalignment_angle"] = bb84.misalignment_for_qber(rx_cfg.qber_target)
            info["calibrated_misalignment_deg"] = math.degrees(rx_fields["misalignment_angle"])
        else:
            rx_fields["phase_error"] = bb84.phase_error_for_qber(rx_cfg.qber_target)
            info["calibrated_phase_error_deg"] = math.degrees(rx_fields["phase_error"])
    if rx_cfg.sifted_rate_target is not None and config.scenario in ("bb84_pol", "bb84_timebin"):
        z_prob = _z_prob(config)
        rx_fields["efficiency"] = bb84.receiver_efficiency_for_rate(
            rx_cfg.sifted_rate_target, source.rep_rate, effective_mu(source), budget.transmittance,
            det.efficiency, _sift_fraction(encoding, z_prob, rx_fields["basis_split"]),
        )
        info["calibrated_receiver_efficiency"] = rx_fields["efficiency"]
    receiver = bb84.ReceiverSpec(**rx_fields)
    return ResolvedRun(source, det, receiver, budget, info)


def _z_prob(config: RunConfig) -> float:
    if config.protocol.z_prob is not None:
        return config.protocol.z_prob
    return config.receiver.basis_split


# --- chunked execution -------------------------------------------------------

def _chunks(num_pulses: int, chunk_pulses: int) -> list[tuple[int, int]]:
    if chunk_pulses <= 0:
        raise InvalidParameterError("chunk size must be > 0")
    return [(lo, min(lo + chunk_pulses, num_pulses)) for lo in range(0, num_pulses, chunk_pulses)]


def _map_chunks(fn: Callable, num_pulses: int, workers: int, chunk_pulses: int) -> list:
    chunks = _chunks(num_pulses, chunk_pulses)
    if workers <= 1 or len(chunks) == 1:
        return [fn(lo, hi) for lo, hi in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def _merge_clicks(parts, duration_ps: int, detector) -> link.TimeTagStream:
    ch = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, np.int16)
    t = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.int64)
    stream = link.TimeTagStream.from_unsorted(ch, t, duration_ps)
    return link.apply_dead_time(stream, detector)


def simulate_hbt(
    source: SourceSpec,
    transmittance: float,
    detector: link.DetectorSpec,
    num_pulses: int,
    seed: int,
    coprop: link.CoPropagationSpec | None = None,
    workers: int = 1,
    chunk_pulses: int = rng.BLOCK_PULSES,
) -> link.TimeTagStream:
    """Source, fiber and a 50:50 splitter onto detectors 0 and 1."""
    period = source.rep_period_ps
    duration = num_pulses * period

    def run(lo, hi):
        ev = link.propagate(emit_stream(source, hi - lo, seed, lo), transmittance, seed)
        arr = photon_stats.hbt_split(ev, seed)
        return link.raw_clicks(arr, detector, (0, 1), lo * period, hi * period, seed, coprop, duration)

    return _merge_clicks(_map_chunks(run, num_pulses, workers, chunk_pulses), duration, detector)


def simulate_hom(
    source: SourceSpec,
    transmittance: float,
    detector: link.DetectorSpec,
    num_pulses: int,
    seed: int,
    workers: int = 1,
    chunk_pulses: int = rng.BLOCK_PULSES,
) -> link.TimeTagStream:
    """Consecutive pulse pairs interfering on a 50:50 splitter."""
    if chunk_pulses % 2:
        raise InvalidParameterError("HOM chunks must hold whole pulse pairs")
    period = source.rep_period_ps
    duration = num_pulses * period

    def run(lo, hi):
        ev = link.propagate(emit_stream(source, hi - lo, seed, lo), transmittance, seed)
        arr = photon_stats.hom_interfere(ev, seed)
        return link.raw_clicks(arr, detector, (0, 1), lo * period, hi * period, seed, None, duration)

    return _merge_clicks(_map_chunks(run, num_pulses, workers, chunk_pulses), duration, detector)


def simulate_bb84(
    source: SourceSpec,
    transmittance: float,
    detector: link.DetectorSpec,
    receiver: bb84.ReceiverSpec,
    encoding: str,
    rounds: int,
    seed: int,
    z_prob: float = 0.5,
    coprop: link.CoPropagationSpec | None = None,
    workers: int = 1,
    chunk_pulses: int = rng.BLOCK_PULSES,
) -> tuple[np.ndarray, np.ndarray, link.TimeTagStream]:
    """Alice's choices and Bob's raw (ungated) clicks for ``rounds`` pulses.

    The receiver coupling efficiency is folded into the detector efficiency.
    """
    period = source.rep_period_ps
    duration = rounds * period
    det = detector.model_copy(update={"efficiency": detector.efficiency * receiver.efficiency})
    channels = bb84.channels_for(encoding)

    def run(lo, hi):
        basis, bit = bb84.alice_choices(seed, lo, hi, z_prob)
        ev = bb84.encode(emit_stream(source, hi - lo, seed, lo), basis, bit, encoding)
        ev = link.propagate(ev, transmittance, seed)
        arr = bb84.receiver_route(ev, receiver, seed)
        ch, t = link.raw_clicks(arr, det, channels, lo * period, hi * period, seed, coprop, duration)
        return basis, bit, ch, t

    parts = _map_chunks(run, rounds, workers, chunk_pulses)
    basis = np.concatenate([p[0] for p in parts])
    bit = np.concatenate([p[1] for p in parts])
    tags = _merge_clicks([(p[2], p[3]) for p in parts], duration, det)
    return basis, bit, tags


# --- analysis helpers ----------------------------------------------------------

def default_span_ps(rep_period_ps: int, window_ps: int, bin_width_ps: int, orders: int = 5) -> int:
    """Smallest span on the bin grid whose histogram holds peaks up to ``orders`` in full."""
    need = orders * rep_period_ps + window_ps / 2 - bin_width_ps / 2
    return int(math.ceil(need / bin_width_ps)) * bin_width_ps


def analyze_tags(
    tags: link.TimeTagStream,
    mode: str,
    rep_period_ps: int,
    bin_width_ps: int = photon_stats.DEFAULT_BIN_WIDTH_PS,
    span_ps: int | None = None,
    window_ps: int = photon_stats.DEFAULT_WINDOW_PS,
    exclude_orders=None,
    channels: tuple[int, int] = (0, 1),
):
    """Histogram two channels and return (histogram, areas, value, sigma).

    ``mode`` is ``"g2"`` or ``"hom"``; for HOM the peak spacing is ``rep_period_ps``
    as given (twice the pulse period for paired-pulse interference).
    """
    if mode not in ("g2", "hom"):
        raise InvalidParameterError(f"mode must be 'g2' or 'hom', got {mode!r}")
    window_ps = min(window_ps, rep_period_ps)
    if span_ps is None:
        span_ps = default_span_ps(rep_period_ps, window_ps, bin_width_ps)
    h = photon_stats.histogram(
        tags.for_channel(channels[0]), tags.for_channel(channels[1]), bin_width_ps, span_ps, rep_period_ps
    )
    areas = photon_stats.peak_areas(h, window_ps)
    if mode == "g2":
        value, sigma = photon_stats.g2_zero(areas, () if exclude_orders is None else exclude_orders)
    elif exclude_orders is None:
        value, sigma = photon_stats.hom_visibility(areas)
    else:
        value, sigma = photon_stats.hom_visibility(areas, exclude_orders)
    return h, areas, value, sigma


def _areas_info(areas: photon_stats.PeakAreas) -> dict:
    return {"central_area": areas.central, "side_areas": {str(k): v for k, v in sorted(areas.sides.items())}}


def _rows_to_csv(header: list[str], rows: list[dict]) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(r[h]) for h in header))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --- scenario runners ------------------------------------------------------------

def _run_hbt(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    a = cfg.analysis
    tags = simulate_hbt(res.source, res.budget.transmittance, res.detector, a.num_pulses, cfg.seed,
                        cfg.coprop, opts.workers, opts.chunk_pulses)
    h, areas, g2, sigma = analyze_tags(tags, "g2", res.source.rep_period_ps, a.bin_width_ps, a.span_ps,
                                       a.window_ps, a.exclude_orders)
    eta = res.budget.transmittance * res.detector.efficiency
    tables["histogram.csv"] = h.to_csv()
    if opts.dump_tags:
        tables["time_tags.csv"] = link.time_tags_to_csv(tags)
    duration_s = tags.duration_ps * 1e-12
    metrics = {
        "g2": Metric(g2, sigma),
        "detected_rate_hz": Metric(len(tags) / duration_s),
        "expected_g2": Metric(float(photon_stats.expected_g2(res.source.p1, res.source.p2, eta))),
    }
    return metrics, {**_areas_info(areas), "clicks": len(tags), "num_pulses": a.num_pulses}


def _run_hom(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    a = cfg.analysis
    tags = simulate_hom(res.source, res.budget.transmittance, res.detector, a.num_pulses, cfg.seed, opts.workers, opts.chunk_pulses)
    period = 2 * res.source.rep_period_ps
    h, areas, v, sigma = analyze_tags(tags, "hom", period, a.bin_width_ps, a.span_ps, a.window_ps, a.exclude_orders)
    eta = res.budget.transmittance * res.detector.efficiency
    tables["histogram.csv"] = h.to_csv()
    if opts.dump_tags:
        tables["time_tags.csv"] = link.time_tags_to_csv(tags)
    s = res.source
    metrics = {
        "hom_visibility": Metric(v, sigma),
        "expected_hom_visibility": Metric(
            float(photon_stats.expected_hom_visibility(s.p1, s.p2, s.wavepacket_overlap, eta))
        ),
    }
    return metrics, {**_areas_info(areas), "clicks": len(tags), "num_pulses": a.num_pulses,
                     "peak_period_ps": period}


def bb84_pipeline(cfg: RunConfig, res: ResolvedRun, workers: int = 1, chunk: int = rng.BLOCK_PULSES):
    """Full BB84 run; returns (alice basis, alice bits, gated tags, sifted key, gate offset)."""
    rounds = cfg.protocol.rounds
    basis, bit, raw = simulate_bb84(
        res.source, res.budget.transmittance, res.detector, res.receiver, cfg.encoding, rounds,
        cfg.seed, _z_prob(cfg), cfg.coprop, workers, chunk,
    )
    period = res.source.rep_period_ps
    offset = cfg.protocol.gate_offset_ps
    if offset is None:
        offset = bb84.calibrate_gate_offset(raw, period)
    gated = bb84.gate(raw, res.receiver.gate_width_ns, period, offset)
    bob = bb84.bob_results(gated, res.receiver, cfg.encoding, period, rounds, offset)
    key = bb84.sift(basis, bit, bob)
    return basis, bit, gated, key, offset


def _run_bb84(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    basis, bit, gated, key, offset = bb84_pipeline(cfg, res, opts.workers, opts.chunk_pulses)
    rows = bb84.per_state_table(basis, bit, key, cfg.encoding)
    tables["qkd_states.csv"] = _rows_to_csv(["state", "sent", "sifted", "errors", "qber", "qber_sigma"], rows)
    if opts.dump_tags:
        for ch in bb84.channels_for(cfg.encoding):
            sel = gated.channel == ch
            tables[f"time_tags_ch{ch}.csv"] = link.time_tags_to_csv(
                link.TimeTagStream(gated.channel[sel], gated.timestamp_ps[sel], gated.duration_ps)
            )
    rounds = cfg.protocol.rounds
    duration_s = rounds / res.source.rep_rate
    n = len(key)
    q, q_sigma = bb84.qber(key) if n else (0.0, 0.0)
    singles = key.single_click_rounds
    frac = n / singles if singles else 0.0
    frac_sigma = math.sqrt(frac * (1 - frac) / singles) if singles else 0.0
    metrics = {
        "qber": Metric(q, q_sigma),
        "sifted_fraction": Metric(frac, frac_sigma),
        "sifted_rate_hz": Metric(n / duration_s, math.sqrt(n) / duration_s),
    }
    info = {"rounds": rounds, "sifted_bits": n, "errors": key.errors, "single_click_rounds": singles,
            "gate_offset_ps": offset, "encoding": cfg.encoding}
    return metrics, info


def keyrate_inputs(cfg: RunConfig, res: ResolvedRun) -> tuple[keyrate.KeyRateParams, keyrate.ChannelScaling]:
    """Operating point and loss scaling from the keyrate section and calibration targets."""
    k = cfg.keyrate
    gain = k.gain
    if gain is None:
        target = cfg.receiver.sifted_rate_target
        if target is None:
            raise ConfigurationError("keyrate.gain: set it or receiver.sifted_rate_target")
        gain = target / (k.sift_factor * res.source.rep_rate)
    e = k.qber if k.qber is not None else cfg.receiver.qber_target
    if e is None:
        raise ConfigurationError("keyrate.qber: set it or receiver.qber_target")
    p_multi = k.p_multi if k.p_multi is not None else 2 * res.source.p2
    params = keyrate.KeyRateParams(gain, e, p_multi, k.f_ec, k.sift_factor, res.source.rep_rate)
    n_det = len(bb84.channels_for(cfg.encoding))
    dark_yield = n_det * res.detector.dark_count_rate * res.receiver.gate_width_ns * 1e-9
    return params, keyrate.ChannelScaling(dark_yield, res.budget.total_db)


def _run_keyrate(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    k = cfg.keyrate
    base, scaling = keyrate_inputs(cfg, res)
    rate = keyrate.gllp_rate(base)
    grid = np.arange(k.loss_start_db, k.loss_stop_db + k.loss_step_db / 2, k.loss_step_db)
    curve = keyrate.rate_vs_loss(base, scaling, grid - scaling.reference_loss_db)
    rows = [{"loss_db": float(L), "rate_bits_per_pulse": r, "rate_bits_per_s": r * base.rep_rate}
            for L, (_, r) in zip(grid, curve)]
    tables["keyrate_vs_loss.csv"] = _rows_to_csv(["loss_db", "rate_bits_per_pulse", "rate_bits_per_s"], rows)
    metrics = {"rate_bits_per_pulse": Metric(rate), "rate_bits_per_s": Metric(rate * base.rep_rate)}
    for sc in k.scenarios:
        d = keyrate.max_distance(base, scaling, sc.prop_loss_db_per_km, sc.fixed_loss_db)
        metrics[f"max_distance_km[{sc.label}]"] = Metric(d)
        c = keyrate.distance_curve(base, scaling, k.prop_losses_db_per_km, sc.fixed_loss_db, sc.label)
        tables[f"max_distance_{sc.label}.csv"] = _rows_to_csv(
            ["prop_loss_db_per_km", "max_distance_km"],
            [{"prop_loss_db_per_km": a, "max_distance_km": dist} for a, dist in c.points],
        )
    info = {"gain": base.gain_q, "qber": base.qber_e, "p_multi": base.p_multi, "f_ec": base.f_ec,
            "sift_factor": base.sift_factor_q, "dark_yield": scaling.dark_yield,
            "reference_loss_db": scaling.reference_loss_db}
    return metrics, info


FIBER_COLUMNS = ["wavelength_um", "window", "prop_db", "iface_db", "total_db", "transmittance"]


def _run_fiber(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    rows = fiber.fiber_report(cfg.fiber, cfg.report_wavelengths_um)
    tables["fiber_report.csv"] = _rows_to_csv(FIBER_COLUMNS, rows)
    metrics = {}
    for r in rows:
        metrics[f"total_db[{r['wavelength_um']}]"] = Metric(r["total_db"])
        metrics[f"transmittance[{r['wavelength_um']}]"] = Metric(r["transmittance"])
    resonances = fiber.resonance_wavelengths(cfg.fiber.membrane_thickness_um, cfg.fiber.refractive_index)
    return metrics, {"resonances_um": resonances}


def _run_coprop_null(cfg: RunConfig, res: ResolvedRun, opts: "RunOptions", tables) -> tuple[dict, dict]:
    a = cfg.analysis
    off = cfg.coprop.model_copy(update={"classical_power_mw": 0.0})
    runs = {}
    for label, cp in (("power_on", cfg.coprop), ("power_off", off)):
        runs[label] = simulate_hbt(res.source, res.budget.transmittance, res.detector, a.num_pulses,
                                   cfg.seed, cp, opts.workers, opts.chunk_pulses)
    period = res.source.rep_period_ps
    # background: clicks farther than a quarter period from any signal arrival
    rows = []
    bg = {}
    for label, cp in (("power_on", cfg.coprop), ("power_off", off)):
        tags = runs[label]
        phase = bb84._phase(tags.timestamp_ps, period, 0)
        bg[label] = int(np.count_nonzero(np.abs(phase) > period // 4))
        rows.append({"run": label, "classical_power_mw": cp.classical_power_mw, "clicks": len(tags),
                     "background_clicks": bg[label]})
    tables["coprop_null.csv"] = _rows_to_csv(["run", "classical_power_mw", "clicks", "background_clicks"], rows)
    identical = runs["power_on"].equals(runs["power_off"])
    metrics = {
        "records_identical": Metric(float(identical)),
        "background_delta": Metric(float(bg["power_on"] - bg["power_off"]),
                                   math.sqrt(bg["power_on"] + bg["power_off"])),
    }
    return metrics, {"num_pulses": a.num_pulses}


_RUNNERS = {
    "hbt": _run_hbt,
    "hom": _run_hom,
    "bb84_pol": _run_bb84,
    "bb84_timebin": _run_bb84,
    "keyrate": _run_keyrate,
    "fiber_report": _run_fiber,
    "coprop_null": _run_coprop_null,
}

@dataclass(frozen=True)
class RunOptions:
    """Execution knobs that never change the results."""

    workers: int = 1
    chunk_pulses: int = rng.BLOCK_PULSES
    dump_tags: bool = False


def run_scenario(
    config: RunConfig,
    out_dir=None,
    workers: int = 1,
    chunk_pulses: int = rng.BLOCK_PULSES,
    dump_tags: bool = False,
) -> ResultBundle:
    """Run the pipeline for ``config.scenario``; write the bundle if ``out_dir`` is given.

    ``workers`` and ``chunk_pulses`` only affect speed; ``dump_tags`` adds
    time-tag CSV tables to the bundle.
    """
    res = resolve(config)
    tables: dict[str, str] = {}
    opts = RunOptions(workers, chunk_pulses, dump_tags)
    metrics, extra = _RUNNERS[config.scenario](config, res, opts, tables)
    info = {**res.info, **extra, "source_p2": res.source.p2,
            "wavepacket_overlap": res.source.wavepacket_overlap}
    bundle = ResultBundle(config.scenario, config.scenario_name, config.seed, metrics, info, tables)
    if out_dir is not None:
        bundle.write(out_dir)
    return bundle
