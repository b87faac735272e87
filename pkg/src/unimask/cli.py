"""Command-line interface: ``unimask <command> [options]``.

Commands::

    synth       write a synthetic gait dataset (train/ and test/ motion files)
    train       train a model; writes checkpoints, a loss curve and the resolved config
    eval        score baselines (and a checkpoint) on a masked test set
    synthesize  fill the hidden frames of one motion file with a trained model
    maskgen     write a visibility mask for inspection
    report      merge evaluation CSVs into a table plus plot-ready CSV

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .bvh import BVHParseError
from .config import RunConfig
from .fileio import atomic_write_text
from .kinematics import ORTHO6D, POSITION3, MotionTensor, default_topology, quaternion_to_rot6d
from .masking import KINDS, MaskParameterError, MaskSpec
from .metrics import EvalReport, MetricInputError
from .model import ConfigError, UniMaskM, load_checkpoint
from .motionfile import MotionFileError, load_motion, save_motion, write_dataset
from .pipeline import UnfillableChannelError
from .runner import DataError, load_data, run_evaluation, to_repr
from .synthetic import generate_split
from .trainer import NumericalError, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MASK_KINDS = tuple(k for k in KINDS if k != "custom")
VIS_FORMAT = "unimask-visibility"

log = logging.getLogger("unimask")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the usage/config code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, mask: bool = True) -> None:
    p.add_argument("--config", help="run configuration JSON file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    if mask:
        p.add_argument("--mask", choices=MASK_KINDS, help="masking pattern")
        p.add_argument("--p", type=float, help="masking / occlusion probability")
        p.add_argument("--transition", type=int, help="inbetween transition length")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unimask", description="Masked-autoencoder motion synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic gait dataset")
    _add_common(p, mask=False)
    p.add_argument("--count", type=int, help="training sequences")
    p.add_argument("--test-count", type=int, help="test sequences")
    p.add_argument("--length", type=int, help="frames per sequence")
    p.add_argument("--repr", choices=("position3", "ortho6d"), default="position3")
    p.add_argument("--out", required=True, help="dataset directory")

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--data", help="motion-file or BVH directory (default: synthetic)")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", help="output directory (default: config output_dir)")

    p = sub.add_parser("eval", help="evaluate baselines and optionally a checkpoint")
    _add_common(p)
    p.add_argument("--data", help="motion-file or BVH directory (default: synthetic)")
    p.add_argument("--checkpoint", help="model checkpoint (.npz)")
    p.add_argument("--out", help="report CSV path")

    p = sub.add_parser("synthesize", help="complete a masked motion file")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="input motion file")
    p.add_argument("--visibility", help="visibility file from maskgen (overrides --mask)")
    p.add_argument("--out", required=True, help="output motion file")

    p = sub.add_parser("maskgen", help="write a visibility mask")
    _add_common(p)
    p.add_argument("--frames", type=int, help="sequence length (default: implied by the mask)")
    p.add_argument("--out", required=True, help="visibility JSON path")

    p = sub.add_parser("report", help="merge evaluation CSVs")
    p.add_argument("inputs", nargs="+", help="EvalReport CSV files")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "seed": getattr(args, "seed", None),
        "kind": getattr(args, "mask", None),
        "p": getattr(args, "p", None),
        "transition": getattr(args, "transition", None),
        "steps": getattr(args, "steps", None),
        "lr": getattr(args, "lr", None),
        "batch_size": getattr(args, "batch_size", None),
        "data": getattr(args, "data", None),
    }
    if overrides["transition"] is not None and (overrides["kind"] or config.mask.kind) != "inbetween":
        raise UsageError("--transition only applies to the inbetween mask")
    return config.with_overrides(**overrides)


def _replace_dir(tmp: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for child in tmp.iterdir():
        target = out / child.name
        if target.is_dir():
            shutil.rmtree(target)
        os.replace(child, target)
    tmp.rmdir()


# -- commands --------------------------------------------------------------
def cmd_synth(args) -> int:
    config = _load_config(args)
    params = config.data.synthetic
    d = params.to_dict()
    for key, value in (("count", args.count), ("test_count", args.test_count), ("length", args.length),
                       ("seed", args.seed)):
        if value is not None:
            d[key] = value
    params = type(params).from_dict(d)
    topology = default_topology()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}."))
    try:
        splits = []
        for split in ("train", "test"):
            motions = []
            for s in generate_split(params, split, topology):
                if args.repr == POSITION3:
                    motions.append(MotionTensor(s.positions, frame_rate=params.frame_rate))
                else:
                    motions.append(MotionTensor(quaternion_to_rot6d(s.rotations), repr=ORTHO6D,
                                                frame_rate=params.frame_rate, root_translation=s.root_translation))
            splits.append(motions)
        write_dataset(tmp, splits[0], splits[1], topology)
        atomic_write_text(tmp / "synthetic.json", json.dumps(params.to_dict(), indent=2))
        _replace_dir(tmp, out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)
    print(f"wrote {params.count} train and {params.test_count} test sequences to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    out = Path(args.out or config.output_dir)
    train_m, test_m, topology, _ = load_data(config.data, config.model.repr, config.topology)
    model = UniMaskM(config.model, topology if topology.num_joints == config.model.num_joints else None)
    if model.config.num_joints != topology.num_joints:
        raise DataError(f"model expects {model.config.num_joints} joints, data has {topology.num_joints}")
    model.set_normalization(np.concatenate(train_m))
    tc = config.train
    tc.checkpoint_dir = str(out / "checkpoints")
    tc.curve_path = str(out / "loss.csv")
    atomic_write_text(out / "config.json", config.to_json())
    result = train(model, train_m, tc, val_motions=test_m, topology=topology)
    first, last = result.curve[0]["loss"], result.curve[-1]["loss"]
    print(f"trained {tc.steps} steps: loss {first:.5f} -> {last:.5f}; best eval {result.best_eval}")
    print(f"checkpoints: {result.best_path}, {result.last_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args)
    model = None
    if args.checkpoint:
        model, _ = _load_model(args.checkpoint)
        d = config.to_dict()
        d["model"] = model.config.to_dict()
        config = RunConfig.from_dict(d)
    report = run_evaluation(config, model)
    print(report.to_table())
    if args.out:
        atomic_write_text(args.out, report.to_csv())
    return EXIT_OK


def _load_model(path) -> tuple[UniMaskM, dict]:
    if not Path(path).exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except (KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from None


def _read_visibility(path) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"visibility file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}") from None
    if doc.get("format") != VIS_FORMAT:
        raise DataError(f"{path}: not a visibility file")
    return np.asarray(doc["visibility"], dtype=bool)


def cmd_synthesize(args) -> int:
    config = _load_config(args)
    model, meta = _load_model(args.checkpoint)
    if not Path(args.input).exists():
        raise DataError(f"input motion not found: {args.input}")
    motion, topology = load_motion(args.input)
    topology = topology or config.topology
    x = to_repr(motion, model.config.repr, topology)
    T, J = x.shape[:2]
    if args.visibility:
        vis = _read_visibility(args.visibility)
    elif args.mask:
        vis = config.mask.generate(T, model.scheme, config.seed)
    else:
        vis = motion.visibility
    if vis.shape != (T, J):
        raise DataError(f"visibility shape {vis.shape} does not match motion {(T, J)}")
    y = model.predict(x, vis)
    out = MotionTensor(y, repr=model.config.repr, frame_rate=motion.frame_rate)
    save_motion(args.out, out, topology)
    print(f"synthesised {int((~vis).sum())} hidden joint entries over {T} frames -> {args.out}")
    return EXIT_OK


def cmd_maskgen(args) -> int:
    config = _load_config(args)
    spec = config.mask
    T = args.frames or spec.window_length(default=None)
    scheme = config.model.resolve_scheme(config.topology)
    vis = spec.generate(T, scheme, config.seed)
    doc = {"format": VIS_FORMAT, "version": 1, "mask": spec.to_dict(), "seed": config.seed,
           "T": T, "J": scheme.num_joints, "visibility": vis.astype(int).tolist()}
    atomic_write_text(args.out, json.dumps(doc))
    for t in range(T):
        print(f"{t:4d} " + "".join("#" if v else "." for v in vis[t]))
    return EXIT_OK


def _column_axis(column: str) -> tuple[str, str]:
    """Split ``"L2P@15"`` into ``("L2P", "15")`` and ``"MPJPE@80ms"`` into ``("MPJPE", "80")``."""
    if "@" not in column:
        return column, ""
    metric, at = column.split("@", 1)
    return metric, at[:-2] if at.endswith("ms") else at


def cmd_report(args) -> int:
    merged = EvalReport()
    for path in args.inputs:
        if not Path(path).exists():
            raise DataError(f"report not found: {path}")
        try:
            merged = merged.merge(EvalReport.from_csv(Path(path).read_text()))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed report ({exc})") from None
    out = Path(args.out)
    table = merged.to_table()
    atomic_write_text(out / "table.txt", table + "\n")
    lines = ["method,metric,x,value"]
    for method, row in merged.rows.items():
        for col, val in row.items():
            metric, x = _column_axis(col)
            lines.append(f"{method},{metric},{x},{val!r}")
    atomic_write_text(out / "plot.csv", "\n".join(lines) + "\n")
    print(table)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "synthesize": cmd_synthesize,
    "maskgen": cmd_maskgen,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, MaskParameterError) as exc:
        print(f"unimask: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MotionFileError, BVHParseError, UnfillableChannelError, MetricInputError) as exc:
        print(f"unimask: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"unimask: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
