"""Command line interface: segment, evolve, eval, gradcheck, synth.

Configuration comes from a flat key=value file (--config) with command
line flags taking precedence. Exit codes are a stable contract:
0 success, 1 usage, 2 unreadable or malformed input, 3 numerical failure
(divergence, or a failed gradient check).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .autodiff import run_gradcheck
from .chanvese import EvolutionResult, InstanceHypers, evolve
from .errors import (
    DimensionError,
    DivergenceError,
    FieldFormatError,
    GenerationError,
    ParameterError,
)
from .fields import BinaryMask, FeatureField
from .fileio import (
    read_feature_field,
    read_gray_image,
    read_mask_png,
    write_energy_csv,
    write_field_file,
    write_mask_png,
)
from .metrics import boundary_f1, mask_iou
from .synth import SynthSpec, generate
from .tsdf import default_truncation_radius, tsdf_from_mask

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

THREADS_ENV = "LEVELSET_THREADS"


def thread_cap() -> int | None:
    """Worker cap from LEVELSET_THREADS; 0 means single-threaded.

    The numeric kernels are vectorized and single-threaded, so any cap is
    already satisfied; the variable is still validated so configurations
    stay portable.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 0:
        raise ParameterError(f"{THREADS_ENV} must be nonnegative, got {value}")
    return value


@dataclass
class RunConfig:
    """Resolved settings for a segment/evolve run."""

    mode: str = "classic"
    image: str | None = None
    features: str | None = None
    init_mask: str | None = None
    box: tuple[int, int, int, int] | None = None
    steps: int = 3
    lambda1: float = 1.0
    lambda2: float = 1.0
    mu: float = 0.05
    eps: tuple[float, ...] = (1.0,)
    dt: tuple[float, ...] = (0.5,)
    tau: float | None = None
    out: str = "."
    seed: int = 0
    w_initial: float = 1.0
    w_final: float = 5.0

    def hypers(self) -> InstanceHypers:
        return InstanceHypers(
            self.lambda1,
            self.lambda2,
            self.mu,
            _broadcast(self.eps, self.steps, "eps"),
            _broadcast(self.dt, self.steps, "dt"),
        )


def _broadcast(values: tuple[float, ...], steps: int, name: str) -> tuple[float, ...]:
    if len(values) == 1:
        return values * steps
    if len(values) != steps:
        raise ParameterError(f"{name} has {len(values)} entries but steps={steps}")
    return values


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ParameterError(f"expected comma-separated numbers, got {text!r}") from None


def _box(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ParameterError(f"--box needs r0,c0,r1,c1, got {text!r}")
    try:
        r0, c0, r1, c1 = (int(p) for p in parts)
    except ValueError:
        raise ParameterError(f"--box needs integers, got {text!r}") from None
    return r0, c0, r1, c1


def parse_keyvalue(path) -> dict[str, str]:
    """Flat config format: one `key = value` per line, # starts a comment."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParameterError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            mapping[key.strip()] = value.strip()
    return mapping


_CONFIG_PARSERS = {
    "mode": str,
    "image": str,
    "features": str,
    "init_mask": str,
    "box": _box,
    "steps": int,
    "lambda1": float,
    "lambda2": float,
    "mu": float,
    "eps": _float_list,
    "dt": _float_list,
    "tau": float,
    "out": str,
    "seed": int,
    "w_initial": float,
    "w_final": float,
}


def _apply_mapping(config: RunConfig, mapping: dict[str, str]) -> None:
    for key, raw in mapping.items():
        if key not in _CONFIG_PARSERS:
            raise ParameterError(f"unknown config key {key!r}")
        setattr(config, key, _CONFIG_PARSERS[key](raw))


def _apply_flags(config: RunConfig, args: argparse.Namespace) -> None:
    for field in dataclass_fields(RunConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            setattr(config, field.name, value)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        _apply_mapping(config, parse_keyvalue(args.config))
    _apply_flags(config, args)
    if config.mode not in ("classic", "feature"):
        raise ParameterError(f"mode must be classic or feature, got {config.mode!r}")
    return config


def _init_mask_for(config: RunConfig, height: int, width: int) -> BinaryMask:
    if config.init_mask:
        mask = read_mask_png(config.init_mask)
        if mask.shape != (height, width):
            raise DimensionError(f"init mask {mask.shape} does not match the input grid ({height}, {width})")
        return mask
    if config.box:
        r0, c0, r1, c1 = config.box
        if not (0 <= r0 <= r1 < height and 0 <= c0 <= c1 < width):
            raise ParameterError(f"box {config.box} does not fit a ({height}, {width}) grid")
        arr = np.zeros((height, width), dtype=np.uint8)
        arr[r0 : r1 + 1, c0 : c1 + 1] = 1
        return BinaryMask(arr)
    raise ParameterError("segment needs --init-mask or --box")


def _cmd_segment(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    if config.mode == "feature":
        if not config.features:
            raise ParameterError("feature mode needs --features")
        features = read_feature_field(config.features)
    else:
        if not config.image:
            raise ParameterError("classic mode needs --image")
        features = FeatureField.from_scalar(read_gray_image(config.image))
    mask = _init_mask_for(config, features.height, features.width)
    tau = config.tau if config.tau is not None else default_truncation_radius(features.height, features.width)
    phi0 = tsdf_from_mask(mask, tau)
    result = evolve(features, phi0, config.hypers())
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_mask_png(out_dir / "mask.png", result.final_mask())
    write_field_file(out_dir / "phi_final.lsf", result.phi_final)
    write_energy_csv(out_dir / "energies.csv", result.energies)
    _print_run_summary(result, out_dir)
    return EXIT_OK


def _print_run_summary(result: EvolutionResult, out_dir: Path) -> None:
    print(f"steps={result.steps}")
    print(f"energy_initial={result.energies[0]:.17g}")
    print(f"energy_final={result.energies[-1]:.17g}")
    print(f"out={out_dir}")


def _cmd_eval(args: argparse.Namespace) -> int:
    pred = read_mask_png(args.pred)
    gt = read_mask_png(args.gt)
    print(f"iou={mask_iou(pred, gt):.6f}")
    print(f"f1_1px={boundary_f1(pred, gt, 1.0):.6f}")
    print(f"f1_2px={boundary_f1(pred, gt, 2.0):.6f}")
    return EXIT_OK


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    report = run_gradcheck(
        base_seed=args.seed,
        instances=args.count,
        height=args.height,
        width=args.width,
        channels=args.channels,
        steps=args.steps,
        fd_step=args.fd_step,
    )
    print(f"instances={report.instances}")
    print(f"components={report.components}")
    print(f"max_rel_err={report.max_rel_err:.6e}")
    print(f"worst={report.worst_component}@seed{report.worst_seed}")
    if report.max_rel_err >= args.tol:
        print(f"gradient check failed at tolerance {args.tol:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    mapping = parse_keyvalue(args.spec)
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    spec = SynthSpec.from_mapping(mapping)
    features, gt_mask, gt_tsdf = generate(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_field_file(out_dir / "features.lsf", features)
    write_mask_png(out_dir / "gt_mask.png", gt_mask)
    write_field_file(out_dir / "gt_tsdf.lsf", gt_tsdf)
    print(f"out={out_dir}")
    print("files=features.lsf,gt_mask.png,gt_tsdf.lsf")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelset", description="Level-set segmentation toolbox")
    sub = parser.add_subparsers(dest="command", required=True)

    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("--config", help="key=value config file; flags override it")
    run_flags.add_argument("--mode", choices=("classic", "feature"))
    run_flags.add_argument("--image", help="grayscale PNG/PGM input (classic mode)")
    run_flags.add_argument("--features", help="LSF1 feature field input (feature mode)")
    run_flags.add_argument("--init-mask", dest="init_mask", help="initialization mask PNG")
    run_flags.add_argument("--box", type=_box, help="initialization box r0,c0,r1,c1 (inclusive)")
    run_flags.add_argument("--steps", type=int, help="number of evolution steps (default 3)")
    run_flags.add_argument("--lambda1", type=float)
    run_flags.add_argument("--lambda2", type=float)
    run_flags.add_argument("--mu", type=float)
    run_flags.add_argument("--eps", type=_float_list, help="per-step relaxation, single value or N comma-separated")
    run_flags.add_argument("--dt", type=_float_list, help="per-step step size, single value or N comma-separated")
    run_flags.add_argument("--tau", type=float, help="truncation radius in pixels")
    run_flags.add_argument("--seed", type=int)
    run_flags.add_argument("--out", help="output directory")

    for name, help_text in (
        ("segment", "segment an image or feature field"),
        ("evolve", "alias of segment with explicit schedules"),
    ):
        p = sub.add_parser(name, parents=[run_flags], help=help_text)
        p.set_defaults(handler=_cmd_segment)

    p = sub.add_parser("eval", help="compare a predicted mask against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--fd-step", dest="fd_step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(handler=_cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic instance")
    p.add_argument("--spec", required=True, help="key=value synth spec file")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(handler=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        thread_cap()
        return args.handler(args)
    except (ParameterError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FieldFormatError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
