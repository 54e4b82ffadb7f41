"""
retina-limit - command line entry point

Subcommands:
- calc      does a display exceed the resolution limit? (plus display movement planner)
- curves    plot-ready CSV of population thresholds and display requirements
- fit       refit the resolution-limit model from threshold or trial CSVs
- simulate  QUEST sessions against a synthetic observer
- foveate   gaze-contingent perceptual filtering of an image

Default reference data are the bundled files in data/: model parameters from
reference table C with stimulus contrasts and chromaticities from table A,
and the population spread from table D. Override with --model-file /
--population-file or the RETINA_LIMIT_DATA_DIR environment variable.
"""
import argparse
import sys

from configs.app_config import get_display_preset, load_config
from configs.data_config import load_reference_model, load_reference_population
from configs.settings import (
    QUEST_PRIOR_CPD, RAIL_MAX_M, RAIL_MIN_M, REPEATS_PER_TRIAL, WEIBULL_SLOPE,
)
from core.csf_model import ColorChannel, ModelParamSet, threshold_resolution
from core.exceptions import RetinaLimitError
from core.foveate import FoveationOptions
from core.laplacian_pyramid import BAND_FREQUENCY_MODES
from core.psychophysics import PsychometricFunction, QuestState
from core.units import DisplayGeometry
from utils.logger import setup_logger
from workflows.calc_workflow import DisplayCalculator
from workflows.curves_workflow import DEFAULT_PERCENTILES, DEFAULT_RANGES, FIGURES, CurveGenerator, sample_grid
from workflows.fit_workflow import ModelFitter
from workflows.foveate_workflow import ImageFoveator
from workflows.output import OUTPUT_FORMATS, emit_document, emit_rows
from workflows.simulate_workflow import SessionSimulator

logger = setup_logger(__name__)

DATA_PROVENANCE = (
    "Reference data: model parameters from table C, stimulus contrasts and "
    "chromaticities from table A, population spread from table D (bundled in data/)."
)


class UsageError(Exception):
    """Inconsistent or incomplete command line flags"""


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _gaze(text):
    if text.strip().lower() in ("center", "centre"):
        return "center"
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"gaze must be 'center' or 'x,y', got '{text}'")
    return tuple(values)


def _rings(text):
    if text.strip().lower() == "off":
        return None
    return float(text)


def _add_display_flags(parser, distance_required=True):
    group = parser.add_argument_group("display geometry")
    group.add_argument("--display", help="named display preset from configs/config.yaml")
    group.add_argument("--display-width-m", type=float, help="active area width (m)")
    group.add_argument("--display-height-m", type=float, help="active area height (m)")
    group.add_argument("--display-px", "--h-pixels", dest="h_pixels", type=int, help="horizontal pixel count")
    group.add_argument("--v-pixels", type=int, help="vertical pixel count")
    distance = parser.add_mutually_exclusive_group(required=distance_required)
    distance.add_argument("--distance-m", type=float, help="viewing distance (m)")
    distance.add_argument("--distance-heights", type=float, help="viewing distance in display heights")


def _common_flags(default_format: str, population: bool = True) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model-file", help="model parameter JSON (default: bundled table C/A data)")
    if population:
        common.add_argument("--population-file", help="population JSON (default: bundled table D data)")
    common.add_argument("--format", choices=OUTPUT_FORMATS, default=default_format, help="output format")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retina-limit",
        description="Resolution limits of the human eye for display design. " + DATA_PROVENANCE,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    calc = sub.add_parser("calc", parents=[_common_flags("table")], formatter_class=fmt, epilog=DATA_PROVENANCE,
                          help="compare a display with the population resolution limit")
    _add_display_flags(calc)
    calc.add_argument("--channel", default="achromatic", help="achromatic | red_green | yellow_violet")
    calc.add_argument("--eccentricity", type=float, default=0.0, help="retinal eccentricity (deg)")
    calc.add_argument("--percentile", type=float, default=0.5, help="population percentile in (0, 1)")
    calc.add_argument("--plan-target-ppd", type=float,
                      help="also plan display movement to reach this ppd with integer subsampling")
    calc.add_argument("--rail-min-m", type=float, default=RAIL_MIN_M, help="nearest display position (m)")
    calc.add_argument("--rail-max-m", type=float, default=RAIL_MAX_M, help="farthest display position (m)")

    curves = sub.add_parser("curves", parents=[_common_flags("csv")], formatter_class=fmt, epilog=DATA_PROVENANCE,
                            help="emit plot-ready curves as CSV")
    curves.add_argument("--figure", choices=FIGURES, required=True,
                        help="1b: threshold vs eccentricity; 1c: lines vs display heights; 1d: ppi vs metres")
    curves.add_argument("--start", type=float, help="first x value (figure default when omitted)")
    curves.add_argument("--stop", type=float, help="last x value")
    curves.add_argument("--step", type=float, help="x spacing")
    curves.add_argument("--percentiles", type=_float_list, default=list(DEFAULT_PERCENTILES),
                        help="comma-separated population percentiles")
    curves.add_argument("--channels", default="achromatic,red_green,yellow_violet",
                        help="channels for figure 1b")
    curves.add_argument("--output", help="write to this file instead of stdout")

    fit = sub.add_parser("fit", parents=[_common_flags("json", population=False)], formatter_class=fmt,
                         epilog=DATA_PROVENANCE, help="fit model parameters to threshold or trial data")
    fit.add_argument("--input", required=True,
                     help="CSV with observer_id, channel, eccentricity_deg, value[, correct]")
    fit.add_argument("--channel", action="append", help="channel to fit (repeatable; default: all present)")
    fit.add_argument("--sensitivity", type=float,
                     help="stimulus sensitivity S (default: the reference value of each channel)")
    fit.add_argument("--no-outliers", action="store_true", help="skip the modified Z-score outlier rule")
    fit.add_argument("--output", help="write the fit report JSON here")
    fit.add_argument("--output-model", help="write a drop-in model parameter JSON here")

    sim = sub.add_parser("simulate", parents=[_common_flags("table", population=False)], formatter_class=fmt,
                         epilog=DATA_PROVENANCE, help="simulate QUEST sessions against a Weibull observer")
    sim.add_argument("--channel", default="achromatic", help="achromatic | red_green | yellow_violet")
    sim.add_argument("--eccentricity", type=float, default=0.0, help="retinal eccentricity (deg)")
    sim.add_argument("--true-threshold-ppd", type=float,
                     help="observer threshold (ppd); default: the model threshold for --channel at --eccentricity")
    sim.add_argument("--slope", type=float, default=WEIBULL_SLOPE, help="observer Weibull slope")
    sim.add_argument("--sessions", type=int, default=100, help="number of sessions")
    sim.add_argument("--seed", type=int, default=0, help="master random seed")
    sim.add_argument("--repeats", type=int, default=REPEATS_PER_TRIAL, help="presentations per QUEST trial")
    sim.add_argument("--prior-cpd", type=float, default=QUEST_PRIOR_CPD, help="QUEST prior mean (cpd)")
    sim.add_argument("--trials-output", help="write every simulated presentation to this CSV")

    fov = sub.add_parser("foveate", parents=[_common_flags("table", population=False)], formatter_class=fmt,
                         epilog=DATA_PROVENANCE, help="remove image detail invisible at each eccentricity")
    fov.add_argument("--input", help="8/16-bit PNG (default: bundled synthetic scene)")
    fov.add_argument("--output", help="filtered PNG")
    fov.add_argument("--gaze", type=_gaze, default="center", help="'center' or x,y in pixels")
    fov.add_argument("--ppd", type=float, help="image ppd at the display centre")
    _add_display_flags(fov, distance_required=False)
    fov.add_argument("--rings", type=_rings, default=None, help="eccentricity ring width (deg) or 'off'")
    fov.add_argument("--dump-pyramid", help="directory for per-band visualisations")
    fov.add_argument("--stats", help="write per-channel statistics JSON here")
    fov.add_argument("--soft", action="store_true", help="attenuate instead of zeroing")
    fov.add_argument("--band-frequency", choices=BAND_FREQUENCY_MODES,
                     help="nominal band frequency assignment (default from config)")
    fov.add_argument("--all-pass", action="store_true", help="use an infinite-sensitivity model (identity)")

    return parser


def resolve_geometry(args, required=True):
    """DisplayGeometry from a preset or explicit flags plus a distance"""
    explicit = [args.display_width_m, args.display_height_m, args.h_pixels, args.v_pixels]
    if args.display and any(v is not None for v in explicit):
        raise UsageError("--display cannot be combined with explicit display dimensions")

    if args.display:
        try:
            preset = get_display_preset(args.display)
        except KeyError as e:
            raise UsageError(str(e.args[0]))
    elif any(v is not None for v in explicit):
        preset = _explicit_preset(args)
    elif required:
        raise UsageError("Give --display or the explicit display dimensions")
    else:
        if args.distance_m is not None or args.distance_heights is not None:
            raise UsageError("A viewing distance needs display dimensions")
        return None

    if args.distance_m is not None:
        distance = args.distance_m
    elif args.distance_heights is not None:
        distance = args.distance_heights * float(preset["height_m"])
    else:
        raise UsageError("Give --distance-m or --distance-heights")
    return DisplayGeometry.from_preset(preset, distance)


def _explicit_preset(args) -> dict:
    """Display dimensions from flags; a missing height or vertical count assumes square pixels"""
    width, height = args.display_width_m, args.display_height_m
    h_pixels, v_pixels = args.h_pixels, args.v_pixels
    if width is None or h_pixels is None:
        raise UsageError("Explicit geometry needs at least --display-width-m and --display-px")
    if not (width > 0 and h_pixels > 0):
        raise UsageError("--display-width-m and --display-px must be positive")

    pitch = width / h_pixels
    if height is None and v_pixels is None:
        if args.distance_heights is not None:
            raise UsageError("--distance-heights needs --display-height-m or --v-pixels")
        height, v_pixels = width, h_pixels
        logger.info("No display height given; assuming square pixels on a square display")
    elif height is None:
        height = v_pixels * pitch
    elif v_pixels is None:
        v_pixels = max(1, int(round(height / pitch)))
    return {"width_m": width, "height_m": height, "h_pixels": h_pixels, "v_pixels": v_pixels}


def _load_model(args) -> ModelParamSet:
    return load_reference_model(args.model_file)


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def run_calc(args) -> int:
    geometry = resolve_geometry(args)
    population = load_reference_population(args.population_file, _load_model(args))
    calculator = DisplayCalculator(population)
    result = calculator.evaluate(geometry, ColorChannel.parse(args.channel), args.eccentricity, args.percentile)

    if args.plan_target_ppd is None:
        emit_rows([result], args.format)
        return 0

    plan = calculator.plan(geometry, args.plan_target_ppd, args.rail_min_m, args.rail_max_m)
    if args.format == "json":
        emit_document({"calc": result, "plan": plan})
    else:
        emit_rows([result], args.format)
        emit_rows(plan, args.format)
    return 0


def run_curves(args) -> int:
    population = load_reference_population(args.population_file, _load_model(args))
    start, stop, step = DEFAULT_RANGES[args.figure]
    grid = sample_grid(args.start if args.start is not None else start,
                       args.stop if args.stop is not None else stop,
                       args.step if args.step is not None else step)
    channels = [c for c in args.channels.split(",") if c.strip()]
    rows = CurveGenerator(population).generate(args.figure, grid, args.percentiles, channels)
    emit_rows(rows, args.format, args.output, meta={"figure": args.figure})
    return 0


def run_fit(args) -> int:
    report = ModelFitter(_load_model(args)).run(
        args.input, args.channel, args.sensitivity, reject_outliers=not args.no_outliers
    )
    model = report.pop("model")
    if args.output_model:
        model.save(args.output_model, source=f"fitted from {args.input}")
        logger.info(f"Wrote refit model to {args.output_model}")

    if args.format == "json":
        emit_document(report, args.output)
    else:
        rows = []
        for r in report["results"]:
            for name, value in r["estimates"].items():
                rows.append({"channel": r["channel"], "parameter": name, "estimate": value,
                             "standard_error": r["standard_errors"][name], "fixed": r["fixed"][name]})
        emit_rows(rows, args.format, args.output)
    return 0


def run_simulate(args) -> int:
    if args.sessions < 1:
        raise UsageError("--sessions must be at least 1")
    if args.eccentricity < 0:
        raise UsageError("--eccentricity must not be negative")
    channel = ColorChannel.parse(args.channel)
    truth = args.true_threshold_ppd
    if truth is None:
        truth = float(threshold_resolution(_load_model(args)[channel], args.eccentricity))
        logger.info(f"Observer threshold from the model: {truth:.2f} ppd")

    observer = PsychometricFunction.from_threshold_ppd(truth, slope_beta=args.slope)
    quest = QuestState.create(prior_cpd=args.prior_cpd)
    simulator = SessionSimulator(observer, quest, args.repeats, channel, args.eccentricity)
    results = simulator.run(args.sessions, args.seed)

    if args.trials_output:
        emit_rows(simulator.trial_rows(results), "csv", args.trials_output)
    summary = simulator.summarize(results)
    if args.format == "json":
        emit_document({"summary": summary, "seed": args.seed})
    else:
        emit_rows([summary], args.format)
    return 0


def run_foveate(args) -> int:
    geometry = resolve_geometry(args, required=False)
    if geometry is None and args.ppd is None:
        raise UsageError("foveate needs --ppd or a display geometry with a viewing distance")

    model = _load_model(args)
    if args.all_pass:
        model = ModelParamSet.all_pass(model)
    options = FoveationOptions.from_config(load_config(), band_frequency=args.band_frequency,
                                           ring_width_deg=args.rings, soft_threshold=args.soft or None)

    foveator = ImageFoveator(model, options)
    image = foveator.load_image(args.input)
    result = foveator.run(image, args.gaze, args.output, args.ppd, geometry, args.dump_pyramid)

    stats = result.stats.to_dict()
    if args.stats:
        emit_document({k: v for k, v in stats.items() if k != "schema"}, args.stats)
    if args.format == "json":
        emit_document({k: v for k, v in stats.items() if k != "schema"})
    else:
        rows = [{"channel": c, "zeroed_fraction": f} for c, f in stats["zeroed_fraction"].items()]
        emit_rows(rows, args.format)
    return 0


COMMANDS = {
    "calc": run_calc,
    "curves": run_curves,
    "fit": run_fit,
    "simulate": run_simulate,
    "foveate": run_foveate,
}


def main(argv=None) -> int:
    """Run the CLI; returns 0 on success, 2 on usage errors, 1 on computation errors"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        parser.print_usage(sys.stderr)
        return 2
    except (RetinaLimitError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
