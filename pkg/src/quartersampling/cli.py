"""Command-line front end.

Subcommands::

    qsrecon mask      generate fixed or dynamic mask files
    qsrecon synth     write a synthetic test sequence
    qsrecon simulate  apply a mask schedule to a sequence (sensor output)
    qsrecon run       reconstruct a sequence and write frames and a report
    qsrecon compare   merge run reports into one table with per-frame gains

Settings for ``run`` come from built-in defaults, then an optional flat
``key = value`` config file, then explicit flags.  Every run writes a
``run_config.txt`` holding the fully resolved settings; passing it back via
``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .consistency import CHECK_KINDS, CheckMode
from .errors import ConfigError, DimensionError, FormatError
from .frame_io import (DEFAULT_PATTERN, Frame, SampledFrame, read_sequence, write_frame,
                       write_mask, write_sequence)
from .fsr import FsrParams, set_threads
from .mask import MaskSchedule, generate_schedule, load_schedule, save_schedule
from .metrics import EvalConfig, psnr, sequence_summary, ssim
from .motion import MotionParams
from .pipeline import VARIANTS, PipelineConfig, run_sequence
from .synthetic import GENERATORS

log = logging.getLogger("quartersampling")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIMENSION = 4
EXIT_MISMATCH = 5

REPORT_NAME = "report.txt"
MANIFEST_NAME = "run_config.txt"
CSV_NAME = "frames.csv"

# key -> (type, default); the single source of truth for run settings
RUN_KEYS = {
    "input": (str, ""),
    "output": (str, "out"),
    "pattern": (str, DEFAULT_PATTERN),
    "name": (str, ""),
    "frames": (int, 0),
    "variant": (str, "dfsr"),
    "check": (str, "nnc_frmc"),
    "mask": (str, "dynamic"),
    "seed": (int, 0),
    "refs": (int, 3),
    "threads": (int, 1),
    "border": (int, 40),
    "block_size": (int, 4),
    "fsr_border": (int, 14),
    "iterations": (int, 100),
    "rho": (float, 0.7),
    "rho_f": (float, 0.975),
    "gamma": (float, 0.5),
    "kappa": (float, 1.0),
    "search_range": (int, 9),
    "template_radius": (int, 4),
    "min_support": (int, 8),
    "cost": (str, "mad"),
    "frmc_offsets": (str, "-7,-3,-1,0,1,3,7"),
    "nnc_threshold": (int, 1),
    "nnc_pairwise": (bool, False),
    "ssim_window": (int, 11),
    "ssim_sigma": (float, 1.5),
    "write_frames": (bool, True),
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# config handling


def _convert(key: str, raw: str):
    kind = RUN_KEYS[key][0]
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in RUN_KEYS:
            known = ", ".join(sorted(RUN_KEYS))
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r} (known: {known})")
        out[key] = _convert(key, value)
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}", EXIT_IO) from None
    return parse_config_text(text, str(path))


def format_config(settings: dict) -> str:
    lines = []
    for key in RUN_KEYS:
        value = settings[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def resolve_settings(args) -> dict:
    settings = {k: d for k, (_, d) in RUN_KEYS.items()}
    if args.config:
        settings.update(load_config(args.config))
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _offsets(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"frmc_offsets: expected comma separated integers, got {text!r}") from None


def build_pipeline_config(settings: dict, schedule: MaskSchedule) -> PipelineConfig:
    try:
        return PipelineConfig(
            mask_schedule=schedule,
            fsr=FsrParams(settings["block_size"], settings["fsr_border"], settings["iterations"],
                          settings["rho"], settings["rho_f"], settings["gamma"],
                          settings["kappa"]),
            motion=MotionParams(settings["search_range"], settings["template_radius"],
                                settings["min_support"], settings["cost"]),
            check=CheckMode(settings["check"], _offsets(settings["frmc_offsets"]),
                            settings["nnc_threshold"], settings["nnc_pairwise"]),
            refs=settings["refs"],
            variant=settings["variant"],
        )
    except (ConfigError, DimensionError):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_schedule(source: str, shape, seed: int) -> MaskSchedule:
    """``fixed``, ``dynamic`` or ``file:<path>`` (a mask PGM or a directory of them)."""
    h, w = shape
    if source in ("fixed", "dynamic"):
        return generate_schedule(source, w, h, seed)
    if source.startswith("file:"):
        path = Path(source[5:])
        if path.is_dir():
            paths = []
            while (path / f"mask{len(paths)}.pgm").exists():
                paths.append(path / f"mask{len(paths)}.pgm")
            if not paths:
                raise CliError(f"no mask0.pgm in {path}", EXIT_IO)
        else:
            paths = [path]
        schedule = load_schedule(paths)
        if schedule.shape != tuple(shape):
            raise DimensionError(f"masks are {schedule.shape}, frames are {tuple(shape)}")
        return schedule
    raise ConfigError(f"mask: expected fixed, dynamic or file:<path>, got {source!r}")


def sequence_fingerprint(frames) -> str:
    digest = hashlib.sha1()
    for f in frames:
        digest.update(np.ascontiguousarray(f.data).tobytes())
    return digest.hexdigest()[:16]


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"size: expected WIDTHxHEIGHT, got {text!r}") from None
    return w, h


# --------------------------------------------------------------------------
# report writing and reading


def write_report(path, settings, extra, timings, stats, summary, per_frame, records) -> None:
    lines = ["[config]"]
    lines += format_config(settings).splitlines()
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += ["", "[timings]", "ME,CC,FSR,Total",
              f"{timings.me:.6f},{timings.cc:.6f},{timings.fsr:.6f},{timings.total:.6f}",
              f"# projection seconds (included in Total): {timings.pr:.6f}"]
    lines += ["", "[checks]",
              f"kind = {settings['check']}",
              f"checked = {stats.checked}",
              f"accepted = {stats.accepted}",
              f"rejected = {stats.rejected}",
              f"nnc_rejected = {stats.nnc_rejected}",
              f"evaluations = {stats.evaluations}",
              f"evaluations_per_checked = {stats.evaluations_per_checked:.6f}",
              f"acceptance_rate = {stats.acceptance_rate:.6f}"]
    lines += ["", "[summary]",
              f"frames = {summary.frames}",
              f"mean_psnr_db = {summary.mean_psnr:.6f}",
              f"mean_ssim = {summary.mean_ssim:.8f}",
              f"inf_psnr_excluded = {summary.inf_excluded}"]
    lines += ["", "[frames]", "frame,psnr_db,ssim,references,projected,me,cc,fsr,total"]
    for (p, s), rec in zip(per_frame, records):
        tm = rec.timings
        lines.append(f"{rec.t},{p:.6f},{s:.8f},{rec.references},{rec.projected},"
                     f"{tm.me:.6f},{tm.cc:.6f},{tm.fsr:.6f},{tm.total:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict:
    """Sections of a report: key/value sections as dicts, CSV sections as row lists."""
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"cannot read report {path}: {exc.strerror or exc}", EXIT_IO) from None
    sections: dict = {}
    current = None
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
            continue
        if current is None:
            raise CliError(f"{path}: content before the first section", EXIT_IO)
        sections[current].append(stripped)
    report = {"path": str(path)}
    for name, rows in sections.items():
        if name in ("timings", "frames"):
            header = rows[0].split(",")
            report[name] = [dict(zip(header, r.split(","))) for r in rows[1:]]
        else:
            report[name] = dict((s.strip() for s in r.split("=", 1)) for r in rows)
    for needed in ("config", "summary", "frames"):
        if needed not in report:
            raise CliError(f"{path}: missing [{needed}] section", EXIT_IO)
    return report


# --------------------------------------------------------------------------
# subcommands


def cmd_mask(args) -> int:
    w, h = _parse_size(args.size)
    schedule = generate_schedule(args.mode, w, h, args.seed)
    out = Path(args.out)
    paths = save_schedule(schedule, out)
    manifest = [f"mode = {schedule.mode}", f"period = {schedule.period}",
                f"seed = {schedule.seed}", f"width = {w}", f"height = {h}"]
    manifest += [f"mask{i} = {p.name}" for i, p in enumerate(paths)]
    (out / "schedule.txt").write_text("\n".join(manifest) + "\n")
    print(f"wrote {len(paths)} mask file(s) to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    w, h = _parse_size(args.size)
    gen = GENERATORS[args.kind]
    frames = gen((h, w), args.frames, sigma=args.sigma, seed=args.seed)
    write_sequence(frames, args.out, args.pattern)
    print(f"wrote {len(frames)} {args.kind} frames ({w}x{h}) to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    frames = read_sequence(args.input, args.pattern)
    schedule = resolve_schedule(args.mask, frames[0].shape, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, f in enumerate(frames):
        m = schedule.mask_for(t)
        sampled = SampledFrame(Frame(f.data * m.bits, t=t), m)
        write_frame(sampled.frame, out / (args.pattern % t))
        write_mask(m, out / f"mask{t:04d}.pgm")
    print(f"wrote {len(frames)} sampled frames and masks to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    settings = resolve_settings(args)
    if not settings["input"]:
        raise ConfigError("no input directory given (--input or 'input' in the config)")
    if settings["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    set_threads(settings["threads"])
    eval_cfg = _eval_config(settings)

    truth = read_sequence(settings["input"], settings["pattern"])
    if settings["frames"] > 0:
        truth = truth[:settings["frames"]]
    eval_cfg.interior(truth[0].shape)
    schedule = resolve_schedule(settings["mask"], truth[0].shape, settings["seed"])
    config = build_pipeline_config(settings, schedule)

    result = run_sequence(truth, config)
    per_frame = [(psnr(a, b, eval_cfg), ssim(a, b, eval_cfg))
                 for a, b in zip(truth, result.reconstructions)]
    summary = sequence_summary(per_frame)

    out = Path(settings["output"])
    out.mkdir(parents=True, exist_ok=True)
    if settings["write_frames"]:
        write_sequence(result.reconstructions, out / "frames", settings["pattern"])
    with open(out / CSV_NAME, "w") as fh:
        fh.write("frame,psnr_db,ssim\n")
        for t, (p, s) in enumerate(per_frame):
            fh.write(f"{t},{p:.6f},{s:.8f}\n")
    (out / MANIFEST_NAME).write_text(
        "# resolved settings; rerun with: qsrecon run --config " + MANIFEST_NAME + "\n"
        + format_config(settings))
    h, w = truth[0].shape
    extra = {"sequence_id": sequence_fingerprint(truth), "width": w, "height": h,
             "mask_mode": schedule.mode, "version": __version__}
    write_report(out / REPORT_NAME, settings, extra, result.timings, result.stats, summary,
                 per_frame, result.frames)
    tm = result.timings
    print(f"{len(truth)} frames: mean PSNR {summary.mean_psnr:.3f} dB, "
          f"mean SSIM {summary.mean_ssim:.5f}; ME {tm.me:.2f}s CC {tm.cc:.2f}s "
          f"FSR {tm.fsr:.2f}s Total {tm.total:.2f}s -> {out}")
    return EXIT_OK


def _eval_config(settings) -> EvalConfig:
    try:
        return EvalConfig(border=settings["border"], ssim_window=settings["ssim_window"],
                          ssim_sigma=settings["ssim_sigma"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _run_label(report) -> str:
    cfg = report["config"]
    return cfg.get("name") or Path(report["path"]).parent.name


def compare_reports(reports, baseline: str | None = None) -> str:
    if len(reports) < 2:
        raise ConfigError("compare needs at least two reports")
    ids = {r["config"].get("sequence_id") for r in reports}
    if len(ids) != 1:
        raise CliError("reports come from different input sequences: "
                       + ", ".join(sorted(str(i) for i in ids)), EXIT_MISMATCH)
    labels = [_run_label(r) for r in reports]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"run names must be unique, got {labels}")
    base_idx = 0
    if baseline is not None:
        if baseline not in labels:
            raise ConfigError(f"baseline {baseline!r} is not among {labels}")
        base_idx = labels.index(baseline)
    base = [float(row["psnr_db"]) for row in reports[base_idx]["frames"]]

    lines = ["[runs]", "name,variant,check,mask,mean_psnr_db,mean_ssim,gain_db"]
    base_mean = float(reports[base_idx]["summary"]["mean_psnr_db"])
    for label, r in zip(labels, reports):
        cfg, summ = r["config"], r["summary"]
        mean = float(summ["mean_psnr_db"])
        lines.append(f"{label},{cfg['variant']},{cfg['check']},{cfg.get('mask_mode', cfg['mask'])},"
                     f"{mean:.6f},{float(summ['mean_ssim']):.8f},{mean - base_mean:.6f}")
    lines += ["", f"[gain vs {labels[base_idx]}]",
              "frame," + ",".join(f"{lb}_psnr_db,{lb}_gain_db" for lb in labels)]
    for t in range(len(base)):
        row = [str(t)]
        for r in reports:
            p = float(r["frames"][t]["psnr_db"])
            gain = p - base[t] if math.isfinite(p) and math.isfinite(base[t]) else math.nan
            row += [f"{p:.6f}", f"{gain:.6f}"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    reports = [read_report(p) for p in args.reports]
    lengths = {len(r["frames"]) for r in reports}
    if len(lengths) != 1:
        raise CliError("reports cover different numbers of frames", EXIT_MISMATCH)
    table = compare_reports(reports, args.baseline)
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsrecon",
                                     description="Quarter-sampling video reconstruction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", help="generate mask files")
    p.add_argument("--mode", choices=("fixed", "dynamic"), default="dynamic")
    p.add_argument("--size", required=True, help="WIDTHxHEIGHT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="masks")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("synth", help="write a synthetic sequence")
    p.add_argument("--kind", choices=sorted(GENERATORS), default="moving_object")
    p.add_argument("--size", default="256x256", help="WIDTHxHEIGHT")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--sigma", type=float, default=1.5, help="texture smoothing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pattern", default=DEFAULT_PATTERN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="apply a mask schedule to a sequence")
    p.add_argument("--input", required=True)
    p.add_argument("--mask", default="dynamic", help="fixed, dynamic or file:<path>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pattern", default=DEFAULT_PATTERN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="reconstruct a sequence")
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--input", help="directory of ground-truth frames")
    p.add_argument("--out", dest="output", help="output directory")
    p.add_argument("--pattern")
    p.add_argument("--name", help="label used by compare")
    p.add_argument("--frames", type=int, help="use only the first N frames")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--check", choices=CHECK_KINDS)
    p.add_argument("--mask", help="fixed, dynamic or file:<path>")
    p.add_argument("--refs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--border", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--cost", choices=("mad", "msd"))
    p.add_argument("--nnc-pairwise", dest="nnc_pairwise", action="store_const", const=True)
    p.add_argument("--no-frames", dest="write_frames", action="store_const", const=False,
                   help="skip writing reconstructed frames")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="merge run reports")
    p.add_argument("reports", nargs="+", help="run directories or report files")
    p.add_argument("--baseline", help="run name used as gain reference (default: first)")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
