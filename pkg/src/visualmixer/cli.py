"""Command-line entry point: one executable, one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import attack, calibration, mixer, stadam
from .corpus import corpus_dir
from .imagecore import ImageFormatError, load_image, save_image
from .vfe import VfeConfig, vfe_report

log = logging.getLogger("visualmixer")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="seed for randomized stages")
    g.add_argument("--threads", type=_positive_int, default=1, help="dataset-level worker cap")
    g.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    g.add_argument("--config", type=Path, default=None, help="flat key=value file; explicit flags win")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="visualmixer", description="Window-level pixel shuffling toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("vfe", parents=[common], help="per-region VFE report for one image")
    p.add_argument("--in", dest="input", type=Path, help="input image")
    p.add_argument("--ws", type=_positive_int, default=8, help="tiling window size")
    p.add_argument("--scale-factor", type=float, default=1.0)

    p = sub.add_parser("calibrate", parents=[common], help="window-size bounds from VFE target and confidence")
    p.add_argument("--d", type=float, help="tolerated output deviation")
    p.add_argument("--alpha", type=float, help="whole-map confidence")
    p.add_argument("--mu-w", type=float, default=0.0)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--target-vfe", type=float, help="VFE the shuffled image must reach")
    p.add_argument("--q", type=float, default=0.5, help="confidence quantile for the lower bound")
    p.add_argument("--n", type=int, default=calibration.DEFAULT_SAMPLES, help="Monte Carlo samples")
    p.add_argument("--width", type=_positive_int, default=224)
    p.add_argument("--height", type=_positive_int, default=224)
    p.add_argument("--ws0", type=_positive_int, default=3)
    p.add_argument("--method", choices=("extremal", "table"), default="extremal",
                   help="alpha0 sampling model (table is experimental)")

    p = sub.add_parser("table1", parents=[common], help="enumerate the 2x2 kernel subset table")
    p.add_argument("--reference", action="store_true", help="print the reference counts instead")

    p = sub.add_parser("obfuscate", parents=[common], help="shuffle every image in a directory")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--target-vfe", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--n", type=int, default=calibration.DEFAULT_SAMPLES)
    p.add_argument("--ref-size", type=_positive_int, default=224,
                   help="square image side the lower bound is calibrated for")
    p.add_argument("--ws-lower", type=_positive_int, help="skip calibration and use this lower bound")
    p.add_argument("--ws-upper", type=_positive_int, help="skip calibration and use this upper bound")
    p.add_argument("--plans", type=Path, help="also write per-image plan files here")
    p.add_argument("--channel-mode", choices=mixer.CHANNEL_MODES, default="spatial",
                   help="rotate is experimental")

    p = sub.add_parser("invert", parents=[common], help="undo a shuffle given its plan (test mode)")
    p.add_argument("--in", dest="input", type=Path, help="shuffled image or directory")
    p.add_argument("--plan", type=Path, help="plan file or directory of plan files")
    p.add_argument("--out", type=Path, help="output image or directory")

    p = sub.add_parser("optim-bench", parents=[common], help="optimizer trajectory as CSV")
    p.add_argument("--optimizer", choices=tuple(stadam.STEPS), default="st-adam")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--gamma", type=float, default=0.999)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--profile", choices=("quadratic", "rosenbrock", "oscillation"), default="quadratic")
    p.add_argument("--steps", type=_positive_int, default=None)
    p.add_argument("--amplitude", type=float, default=stadam.OSC_AMPLITUDE)
    p.add_argument("--compare", action="store_true",
                   help="oscillation profile only: print the ST-Adam vs Adam summary instead")

    p = sub.add_parser("attack", parents=[common], help="key-less min-VFE reassembly attack")
    p.add_argument("--in", dest="input", type=Path, help="shuffled image")
    p.add_argument("--truth", type=Path, help="original image, for scoring only")
    p.add_argument("--ws", type=int, default=2, choices=(2, 3))
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--out", type=Path, help="write the reassembled image here")
    p.add_argument("--corpus", type=Path, nargs="?", const="bundled",
                   help="sweep a directory of originals (default: bundled corpus)")
    parser.set_defaults(_subparsers=sub.choices)
    return parser


def read_config(path: Path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        values["input" if k == "in" else k] = v
    return values


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]):
    """Re-parse with config values as defaults so explicit flags still win."""
    values = read_config(args.config)
    sub = args._subparsers[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, raw in values.items():
        if k not in actions or k in ("config", "help"):
            raise UsageError(f"unknown config key {k!r} for {args.command}")
        a = actions[k]
        if a.const is True or a.const is False:  # store_true/false
            defaults[k] = raw.lower() in ("1", "true", "yes", "on")
        else:
            conv = a.type or str
            try:
                defaults[k] = conv(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k}: {exc}") from None
            if a.choices is not None and defaults[k] not in a.choices:
                raise UsageError(f"config key {k}: {raw!r} not in {sorted(a.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-").replace("input", "in") for n in missing)
        raise UsageError(f"{args.command}: missing {flags}")


# ---------------------------------------------------------------- subcommands

def cmd_vfe(args) -> int:
    _require(args, "input")
    report = vfe_report(load_image(args.input), args.ws, VfeConfig(args.scale_factor))
    sys.stdout.write("\n".join(report.to_lines()) + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    _require(args, "d", "alpha", "target_vfe")
    seed = calibration.DEFAULT_SEED if args.seed is None else args.seed
    km = calibration.KernelModel(args.mu_w, args.sigma_w)
    result = calibration.calibrate(d=args.d, alpha=args.alpha, target_vfe=args.target_vfe,
                                   width=args.width, height=args.height, km=km, quantile=args.q,
                                   n=args.n, seed=seed, ws0=args.ws0, method=args.method)
    print(result.to_record())
    if not result.feasible:
        log.error("infeasible bounds: WS_u=%d < WS_l=%d", result.ws_upper, result.ws_lower)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_table1(args) -> int:
    counts = (dict(calibration.REFERENCE_TABLE) if args.reference
              else calibration.enumerate_induction_table())
    print("\n".join(calibration.format_table(counts)))
    return EXIT_OK


def _dataset_bounds(args) -> tuple[int, int]:
    if args.ws_lower is not None and args.ws_upper is not None:
        return args.ws_lower, args.ws_upper
    _require(args, "target_vfe", "alpha", "d")
    result = calibration.calibrate(d=args.d, alpha=args.alpha, target_vfe=args.target_vfe,
                                   width=args.ref_size, height=args.ref_size, quantile=args.q,
                                   n=args.n)
    log.info("calibrated %s", result.to_record())
    ws_l = args.ws_lower if args.ws_lower is not None else result.ws_lower
    ws_u = args.ws_upper if args.ws_upper is not None else result.ws_upper
    return ws_l, ws_u


def cmd_obfuscate(args) -> int:
    _require(args, "input", "out")
    if not args.input.is_dir():
        log.error("input directory %s not found", args.input)
        return EXIT_FAILURE
    if args.seed is None:
        raise UsageError("obfuscate: --seed is required (it is the master key)")
    ws_l, ws_u = _dataset_bounds(args)
    if ws_u < ws_l:
        log.error("infeasible bounds: WS_u=%d < WS_l=%d", ws_u, ws_l)
        return EXIT_FAILURE
    config = mixer.MixerConfig(args.seed, ws_l, ws_u, args.threads, args.channel_mode,
                               str(args.plans) if args.plans else None)
    summary = mixer.obfuscate_dataset(args.input, args.out, config)
    print("\n".join(summary.lines()))
    return EXIT_FAILURE if summary.failures else EXIT_OK


def _invert_one(src: Path, plan_file: Path, dst: Path):
    plan = mixer.ShufflePlan.from_text(plan_file.read_text())
    restored = mixer.invert_image(load_image(src), plan)
    dst.parent.mkdir(parents=True, exist_ok=True)
    save_image(restored, dst)


def cmd_invert(args) -> int:
    _require(args, "input", "plan", "out")
    if args.input.is_file():
        try:
            _invert_one(args.input, args.plan, args.out)
        except (OSError, ImageFormatError, mixer.MixerError) as exc:
            log.error("%s: %s", args.input, exc)
            return EXIT_FAILURE
        print("inverted 1 failed 0")
        return EXIT_OK
    if not args.input.is_dir():
        log.error("input %s not found", args.input)
        return EXIT_FAILURE
    done = failed = 0
    for src in mixer.find_images(args.input):
        rel = src.relative_to(args.input)
        try:
            _invert_one(src, args.plan / rel.with_suffix(".plan"), args.out / rel.with_suffix(".png"))
            done += 1
        except (OSError, ImageFormatError, mixer.MixerError) as exc:
            log.error("%s: %s", src, exc)
            failed += 1
    print(f"inverted {done} failed {failed}")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_optim_bench(args) -> int:
    seed = 42 if args.seed is None else args.seed
    eta = args.eta if args.eta is not None else (0.01 if args.profile != "rosenbrock" else 1e-3)
    p = stadam.StAdamParams(eta, args.beta, args.gamma, args.eps, args.weight_decay)
    if args.profile == "oscillation":
        steps = args.steps or stadam.OSC_STEPS
        if args.compare:
            sys.stdout.write(stadam.oscillation_benchmark(seed, args.amplitude, p, steps).to_text())
            return EXIT_OK
        f, grad = stadam.oscillation_objective()
        noise = stadam.oscillation_noise(seed, args.amplitude, steps, len(stadam.OSC_START))
        traj = stadam.optimize(f, grad, stadam.OSC_START, p, steps, 0.0, args.optimizer, noise)
    else:
        f, grad, w0 = stadam.PROFILES[args.profile]
        traj = stadam.optimize(f, grad, w0, p, args.steps or 5000, 1e-8, args.optimizer)
    sys.stdout.write(traj.to_csv())
    return EXIT_OK


def cmd_attack(args) -> int:
    if args.corpus is not None:
        root = corpus_dir("attack") if str(args.corpus) == "bundled" else args.corpus
        if not Path(root).is_dir():
            log.error("corpus directory %s not found", root)
            return EXIT_FAILURE
        seed = 0 if args.seed is None else args.seed
        rows = attack.attack_sweep(root, (2, 3), seed, args.channel, log)
        if not rows:
            log.error("no readable images under %s", root)
            return EXIT_FAILURE
        print("\n".join(attack.format_sweep(rows)))
        return EXIT_OK
    _require(args, "input")
    shuffled = load_image(args.input)
    truth = load_image(args.truth) if args.truth else None
    rebuilt, report = attack.min_vfe_attack(shuffled, args.ws, args.channel, truth)
    if args.out:
        save_image(rebuilt, args.out)
    print(report.to_record())
    return EXIT_OK


COMMANDS = {
    "vfe": cmd_vfe, "calibrate": cmd_calibrate, "table1": cmd_table1, "obfuscate": cmd_obfuscate,
    "invert": cmd_invert, "optim-bench": cmd_optim_bench, "attack": cmd_attack,
}


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        if args.config is not None:
            if not args.config.is_file():
                raise UsageError(f"config file {args.config} not found")
            args = _apply_config(parser, args, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"visualmixer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(dispatch())
