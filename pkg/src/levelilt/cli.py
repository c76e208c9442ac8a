"""Command-line interface.

Thin client over the operations layer: argument parsing and file shuffling
only. Exit codes: 0 success, 1 usage or configuration error, 2 runtime
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_run_config
from .fileio import (
    read_pgm,
    read_raw_field,
    write_json_report,
    write_loss_trace_csv,
    write_pgm,
    write_raw_field,
)
from .fields import LevelSet
from . import ops

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument(
        "-o",
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )


def _parse_overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override '{item}': expected KEY=VALUE")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def _config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, _parse_overrides(args.override))


def _kernels_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.kernels_dir if args.kernels_dir else cfg.kernels_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelilt",
        description="Level-set inverse lithography toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-kernels", help="write LKRN kernel files per defocus")
    _add_common(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("gen-layouts", help="synthesize rectilinear target layouts")
    _add_common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=None)

    p = sub.add_parser("simulate", help="aerial image and resist pattern of a mask")
    _add_common(p)
    p.add_argument("--kernels-dir", default=None)
    p.add_argument("--mask", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--defocus", type=float, default=0.0)
    p.add_argument("--dose", type=float, default=0.0)

    p = sub.add_parser("ilt", help="optimize a mask for a target layout")
    _add_common(p)
    p.add_argument("--kernels-dir", default=None)
    p.add_argument("--target", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--init-psi", default=None)

    p = sub.add_parser("metrics", help="EDE report for mask/target pairs")
    _add_common(p)
    p.add_argument("--kernels-dir", default=None)
    p.add_argument(
        "--pair",
        action="append",
        required=True,
        metavar="MASK.pgm:TARGET.pgm",
        help="mask/target pair (repeatable)",
    )
    p.add_argument("--out", required=True)

    p = sub.add_parser("pw", help="process-window curve for a mask")
    _add_common(p)
    p.add_argument("--kernels-dir", default=None)
    p.add_argument("--mask", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-grad", help="loss gradient w.r.t. a level set")
    _add_common(p)
    p.add_argument("--kernels-dir", default=None)
    p.add_argument("--psi", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-out", default=None, help="optionally write the loss as JSON")

    return parser


def _cmd_gen_kernels(args) -> int:
    cfg = _config(args)
    written = ops.op_gen_kernels(cfg, args.out_dir)
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_gen_layouts(args) -> int:
    cfg = _config(args)
    results = ops.op_gen_layouts(cfg, args.out_dir, args.count)
    report = {
        "count": len(results),
        "min_cd_nm": cfg.min_cd,
        "layouts": [
            {"raster": path.name, "rectangles": [list(r) for r in spec.rectangles]}
            for spec, path in results
        ],
    }
    write_json_report(report, Path(args.out_dir) / "layouts.json")
    for _, path in results:
        print(path)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _config(args)
    mask = read_pgm(args.mask)
    kmap = ops.load_kernel_map(cfg, _kernels_dir(args, cfg), [args.defocus])
    image, wafer = ops.op_simulate(cfg, kmap[args.defocus], mask, args.dose)
    write_raw_field(image, f"{args.out_prefix}_aerial.raw")
    write_pgm(wafer, f"{args.out_prefix}_resist.pgm")
    return EXIT_OK


def _cmd_ilt(args) -> int:
    cfg = _config(args)
    target = read_pgm(args.target)
    kmap = ops.load_kernel_map(
        cfg, _kernels_dir(args, cfg), cfg.ilt_defocus_values(), cfg.ilt_kernel_count
    )
    if args.init_psi:
        initial = LevelSet(read_raw_field(args.init_psi))
    else:
        from .levelset import signed_distance

        initial = signed_distance(target)
    result = ops.op_ilt(cfg, kmap, target, initial)
    write_pgm(result.final_mask, f"{args.out_prefix}_mask.pgm")
    write_raw_field(initial.field, f"{args.out_prefix}_psi0.raw")
    write_raw_field(result.final_psi.field, f"{args.out_prefix}_psi.raw")
    write_loss_trace_csv(result.loss_trace, f"{args.out_prefix}_trace.csv")
    print(
        f"iterations={result.iterations_run} "
        f"loss_first={result.loss_trace[0]!r} loss_best={min(result.loss_trace)!r}"
    )
    return EXIT_OK


def _cmd_metrics(args) -> int:
    cfg = _config(args)
    pairs = []
    for item in args.pair:
        if ":" not in item:
            raise ConfigError(f"--pair '{item}': expected MASK.pgm:TARGET.pgm")
        mask_path, _, target_path = item.partition(":")
        pairs.append((read_pgm(mask_path), read_pgm(target_path)))
    kmap = ops.load_kernel_map(cfg, _kernels_dir(args, cfg), [0.0])
    report = ops.op_metrics(cfg, kmap[0.0], pairs)
    write_json_report(report, args.out)
    print(f"aede_nm={report['aede_nm']!r}")
    return EXIT_OK


def _cmd_pw(args) -> int:
    cfg = _config(args)
    mask = read_pgm(args.mask)
    target = read_pgm(args.target)
    kmap = ops.load_kernel_map(cfg, _kernels_dir(args, cfg), cfg.pw_defocus)
    _, payload = ops.op_pw(cfg, kmap, mask, target)
    write_json_report(payload, args.out)
    print(f"pw_area={payload['area']!r}")
    return EXIT_OK


def _cmd_export_grad(args) -> int:
    cfg = _config(args)
    psi = LevelSet(read_raw_field(args.psi))
    target = read_pgm(args.target)
    kmap = ops.load_kernel_map(
        cfg, _kernels_dir(args, cfg), cfg.ilt_defocus_values(), cfg.ilt_kernel_count
    )
    loss, grad = ops.op_export_grad(cfg, kmap, psi, target)
    write_raw_field(grad, args.out)
    if args.loss_out:
        write_json_report({"loss": loss}, args.loss_out)
    print(f"loss={loss!r}")
    return EXIT_OK


_COMMANDS = {
    "gen-kernels": _cmd_gen_kernels,
    "gen-layouts": _cmd_gen_layouts,
    "simulate": _cmd_simulate,
    "ilt": _cmd_ilt,
    "metrics": _cmd_metrics,
    "pw": _cmd_pw,
    "export-grad": _cmd_export_grad,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage problems and 0 on --help.
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
