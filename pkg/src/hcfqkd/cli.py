"""Command-line entry point: ``hcfqkd <subcommand> ...``.

Exit codes: 0 success, 1 configuration error (including an on-resonance
wavelength), 2 runtime error, 3 infeasible physics (for example a
multi-photon probability above the gain).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import fiber, link
from .config import RunConfig, load_config, parse_config, preset_names
from .errors import ConfigurationError, HcfqkdError, InfeasibleError, OnResonanceError
from .photon_stats import DEFAULT_BIN_WIDTH_PS, DEFAULT_WINDOW_PS
from .scenarios import FIBER_COLUMNS, ResultBundle, analyze_tags, compare_runs, run_scenario

OUT_ENV = "HCFQKD_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INFEASIBLE = 0, 1, 2, 3


def output_dir(cli_value: str | None, config: RunConfig | None = None) -> Path:
    """``--out`` wins, then ``$HCFQKD_OUT``, then ``results/<scenario_name>``."""
    if cli_value:
        return Path(cli_value)
    base = os.environ.get(OUT_ENV)
    name = config.scenario_name if config is not None else "analysis"
    if base:
        return Path(base) / name
    return Path("results") / name


def _with_overrides(config: RunConfig, args) -> RunConfig:
    data = config.model_dump(mode="json")
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "pulses", None) is not None:
        data["analysis"]["num_pulses"] = args.pulses
        data["protocol"]["rounds"] = args.pulses
    return parse_config(data)


def _print_metrics(bundle: ResultBundle) -> None:
    for name, m in bundle.metrics.items():
        tail = "" if m.sigma is None else f" {m.sigma:.6g}"
        print(f"{name} {m.value:.6g}{tail}")


def _run(args, expect=None) -> tuple[ResultBundle, Path]:
    config = _with_overrides(load_config(args.config), args)
    if expect and config.scenario not in expect:
        raise ConfigurationError(f"scenario {config.scenario!r} is not one of {', '.join(expect)}")
    out = output_dir(args.out, config)
    bundle = run_scenario(config, out, workers=args.workers, dump_tags=args.dump_tags)
    return bundle, out


def cmd_sim(args) -> int:
    bundle, out = _run(args)
    _print_metrics(bundle)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_qkd(args) -> int:
    bundle, out = _run(args, expect=("bb84_pol", "bb84_timebin"))
    sys.stdout.write(bundle.tables["qkd_states.csv"])
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_keyrate(args) -> int:
    bundle, out = _run(args, expect=("keyrate",))
    sys.stdout.write(bundle.tables["keyrate_vs_loss.csv"])
    if args.verbose:
        _print_metrics(bundle)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_fiber(args) -> int:
    spec = load_config(args.config).fiber if args.config else fiber.FiberSpec()
    if args.resonances:
        print("order,resonance_um")
        for m, wl in enumerate(fiber.resonance_wavelengths(spec.membrane_thickness_um, spec.refractive_index), 1):
            print(f"{m},{wl!r}")
        return EXIT_OK
    wavelengths = args.wavelength or (
        load_config(args.config).report_wavelengths_um if args.config else [0.934, 1.55]
    )
    rows = fiber.fiber_report(spec, wavelengths)
    print(",".join(FIBER_COLUMNS))
    for row in rows:
        print(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in FIBER_COLUMNS))
    return EXIT_OK


def cmd_analyze(args) -> int:
    tags = link.read_time_tags(args.tags)
    exclude = None if args.exclude is None else [int(x) for x in args.exclude.split(",") if x]
    h, _, value, sigma = analyze_tags(
        tags, args.mode, args.rep_period_ps, args.bin_width_ps, args.span_ps, args.window_ps, exclude,
        (args.channel_a, args.channel_b),
    )
    path = Path(args.histogram) if args.histogram else output_dir(args.out) / "histogram.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(h.to_csv())
    print(f"{args.mode} {value:.6g} {sigma:.6g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    report = compare_runs(ResultBundle.load(args.a), ResultBundle.load(args.b))
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in preset_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hcfqkd", description="Single-photon QKD over hollow-core fiber: simulation and analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        sp.add_argument("config", help="JSON run configuration or bundled preset name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or results/<name>)")
        sp.add_argument("--pulses", type=int, help="override pulse / round count")
        sp.add_argument("--workers", type=int, default=1, help="threads; results do not depend on it")
        sp.add_argument("--dump-tags", action="store_true", help="also write time-tag CSVs")

    sp = sub.add_parser("sim", help="run any scenario")
    run_args(sp)
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("qkd", help="run a BB84 scenario and print the per-state table")
    run_args(sp)
    sp.set_defaults(func=cmd_qkd)

    sp = sub.add_parser("keyrate", help="key rate vs loss and maximum distance curves")
    run_args(sp)
    sp.add_argument("-v", "--verbose", action="store_true", help="also print rate and distance metrics")
    sp.set_defaults(func=cmd_keyrate)

    sp = sub.add_parser("fiber", help="window assignment and loss budget rows")
    sp.add_argument("config", nargs="?", help="configuration whose fiber section is used")
    sp.add_argument("--wavelength", type=float, action="append", help="wavelength in um (repeatable)")
    sp.add_argument("--resonances", action="store_true", help="print membrane resonances instead")
    sp.set_defaults(func=cmd_fiber)

    sp = sub.add_parser("analyze", help="histogram a time-tag CSV and estimate g2 or HOM visibility")
    sp.add_argument("tags")
    sp.add_argument("--mode", choices=("g2", "hom"), default="g2")
    sp.add_argument("--rep-period-ps", type=int, default=12_500, help="peak spacing (2x the pulse period for HOM)")
    sp.add_argument("--bin-width-ps", type=int, default=DEFAULT_BIN_WIDTH_PS)
    sp.add_argument("--span-ps", type=int)
    sp.add_argument("--window-ps", type=int, default=DEFAULT_WINDOW_PS)
    sp.add_argument("--exclude", help="comma-separated peak orders left out of the side mean")
    sp.add_argument("--channel-a", type=int, default=0)
    sp.add_argument("--channel-b", type=int, default=1)
    sp.add_argument("--histogram", help="histogram CSV path")
    sp.add_argument("--out", help="output directory for histogram.csv")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("compare", help="metric deltas b - a between two result directories")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("presets", help="list bundled presets")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigurationError, OnResonanceError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (HcfqkdError, ValueError, OSError, ZeroDivisionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
