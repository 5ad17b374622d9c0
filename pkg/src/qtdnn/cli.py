"""Command-line front end.

Every command that writes files also writes a JSON manifest holding the fully
resolved options, the entropy provenance and the SHA-256 of every output, so
``qtdnn rerun <manifest>`` can regenerate and verify them.

Exit codes: 0 success, 1 I/O, 2 usage, 3 entropy exhausted, 4 divergence,
5 remote entropy failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .activation import parse_activation
from .errors import (
    DivergenceError,
    DomainError,
    EntropyExhaustedError,
    RemoteEntropyError,
    StimulusParseError,
    UsageError,
)
from .experiment import (
    ExperimentConfig,
    compare_activations,
    run_perception_experiment,
    switch_count,
    write_dtw_matrix,
)
from .network import TrainConfig
from .rng import QRNG_URL_ENV, EntropySpec, fetch_remote_entropy
from .stimuli import save_stimulus, stimulus_set
from .tunnelling import BarrierParams, barrier_curve, write_curve_csv

log = logging.getLogger("qtdnn")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_ENTROPY, EXIT_DIVERGENCE, EXIT_REMOTE = range(6)
MANIFEST = "manifest.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(path: Path, command: str, options: dict, outputs: list[Path], entropy: dict | None = None) -> Path:
    manifest = {
        "tool": "qtdnn",
        "version": __version__,
        "command": command,
        "options": options,
        "entropy": entropy,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _options(args: argparse.Namespace) -> dict:
    skip = {"func", "config", "command", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --- commands ---------------------------------------------------------------

def cmd_barrier_curve(args) -> int:
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.emin < 0 or (args.points > 1 and not args.emax > args.emin):
        raise UsageError("need 0 <= --emin < --emax")
    barrier = BarrierParams(args.v0, args.s)
    grid = barrier.v0 * (np.array([args.emin]) if args.points == 1
                         else np.linspace(args.emin, args.emax, args.points))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(barrier_curve(barrier, grid), out)
    manifest = out.with_name(out.name + ".manifest.json")
    write_manifest(manifest, "barrier-curve", _options(args), [out])
    print(f"wrote {len(grid)} points to {out}")
    return EXIT_OK


def _entropy(args) -> EntropySpec:
    chosen = [args.seed is not None, args.entropy_file is not None, args.qrng_cache is not None]
    if sum(chosen) > 1:
        raise UsageError("choose one of --seed, --entropy-file, --qrng-cache")
    if args.entropy_file is not None:
        return EntropySpec("file", path=args.entropy_file, block_size=args.block_size)
    if args.qrng_cache is not None:
        return EntropySpec("qrng", path=args.qrng_cache, url=args.qrng_url, block_size=args.block_size)
    return EntropySpec("seeded", seed=args.seed if args.seed is not None else 0)


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        stimulus_set=args.illusion,
        runs=args.runs,
        activation=parse_activation(args.activation),
        train=TrainConfig(args.lr, args.epochs, args.shuffle),
        entropy=_entropy(args),
        threshold=args.threshold,
        hidden=args.hidden,
        swap_labels=args.swap_labels,
        workers=args.workers,
    )


def _resolve_qrng(args) -> None:
    if args.qrng_cache is not None and not args.qrng_url:
        args.qrng_url = os.environ.get(QRNG_URL_ENV)


def cmd_perceive(args) -> int:
    _resolve_qrng(args)
    cfg = _experiment_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = run_perception_experiment(cfg)
    csv_path = series.write_csv(out_dir / "series.csv")
    entropy = cfg.entropy.open(cfg.template(cfg.stimuli().n_inputs).n_weights).describe()
    write_manifest(out_dir / MANIFEST, "perceive", _options(args), [csv_path], entropy)
    print(f"{len(series)} runs, {switch_count(series.percept)} percept switches -> {csv_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    _resolve_qrng(args)
    cfg = _experiment_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    comp = compare_activations(cfg, window=args.dtw_window, normalize=args.normalize_dtw)
    outputs = [s.write_csv(out_dir / f"{name}.csv") for name, s in comp.series.items()]
    outputs.append(write_dtw_matrix(comp, out_dir / "dtw_matrix.csv"))
    entropy = cfg.entropy.open(cfg.template(cfg.stimuli().n_inputs).n_weights).describe()
    write_manifest(out_dir / MANIFEST, "compare", _options(args), outputs, entropy)
    for a, b in (("qt", "sigmoid"), ("qt", "relu"), ("relu", "sigmoid")):
        print(f"DTW({a}, {b}) = {comp.distance(a, b):.6g}")
    return EXIT_OK


def cmd_stimuli(args) -> int:
    sset = stimulus_set(args.set)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = [img for img, _ in sset.train] + [sset.ambiguous]
    outputs = [save_stimulus(img, out_dir / f"{img.tag.value}.{args.format}") for img in images]
    write_manifest(out_dir / MANIFEST, "stimuli", _options(args), outputs)
    for p in outputs:
        print(p)
    return EXIT_OK


def cmd_qrng_fetch(args) -> int:
    url = args.url or os.environ.get(QRNG_URL_ENV)
    if not url:
        raise UsageError(f"--url or ${QRNG_URL_ENV} is required")
    result = fetch_remote_entropy(url, args.count, args.cache, timeout=args.timeout, retries=args.retries)
    if result.used_cache:
        print(f"service unavailable, using cache ({result.cache_words} words in {args.cache})")
    else:
        print(f"fetched {result.fetched} words; cache holds {result.cache_words}")
    return EXIT_OK


def cmd_rerun(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text())
    command, options = manifest["command"], dict(manifest["options"])
    if args.out_dir:
        if "out_dir" in options:
            options["out_dir"] = args.out_dir
        elif "out" in options:
            options["out"] = str(Path(args.out_dir) / Path(options["out"]).name)
    ns = argparse.Namespace(**options)
    HANDLERS[command](ns)
    if "out_dir" in options:
        out_dir = Path(options["out_dir"])
    else:
        out_dir = Path(options["out"]).parent
    mismatched = [name for name, digest in manifest["outputs"].items()
                  if not (out_dir / name).exists() or _sha256(out_dir / name) != digest]
    if mismatched:
        print("outputs differ from manifest: " + ", ".join(mismatched), file=sys.stderr)
        return EXIT_IO
    print(f"all {len(manifest['outputs'])} outputs match {manifest_path}")
    return EXIT_OK


HANDLERS = {
    "barrier-curve": cmd_barrier_curve,
    "perceive": cmd_perceive,
    "compare": cmd_compare,
    "stimuli": cmd_stimuli,
    "qrng-fetch": cmd_qrng_fetch,
}


# --- parser -----------------------------------------------------------------

def _experiment_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--illusion", choices=("necker", "rubin"), default="necker")
    p.add_argument("--runs", type=int, default=40)
    p.add_argument("--lr", type=float, default=TrainConfig().learning_rate, help="learning rate")
    p.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    p.add_argument("--shuffle", action="store_true", help="shuffle sample order each epoch")
    p.add_argument("--threshold", type=float, default=0.5, help="P|1> threshold for the binary percept")
    p.add_argument("--hidden", type=int, default=20, help="nodes per hidden layer")
    p.add_argument("--swap-labels", action="store_true", help="swap the two training labels")
    p.add_argument("--workers", type=int, default=1)
    src = p.add_argument_group("entropy (pick one)")
    src.add_argument("--seed", type=int, default=None)
    src.add_argument("--entropy-file", default=None, help="raw little-endian uint16 words")
    src.add_argument("--qrng-cache", default=None, help="entropy cache topped up from --qrng-url")
    src.add_argument("--qrng-url", default=None, help=f"QRNG endpoint (default ${QRNG_URL_ENV})")
    src.add_argument("--block-size", type=int, default=None, help="words per run for file entropy")
    p.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtdnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("barrier-curve", help="transmission curve T(E/V0) as CSV")
    p.add_argument("--v0", type=float, default=1.0)
    p.add_argument("--s", type=float, default=0.5, help="dimensionless barrier thickness")
    p.add_argument("--emin", type=float, default=0.0, help="lowest E/V0")
    p.add_argument("--emax", type=float, default=5.0, help="highest E/V0")
    p.add_argument("--points", type=int, default=501)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_barrier_curve)

    p = sub.add_parser("perceive", help="run the perception experiment")
    p.add_argument("--activation", default="qt:v0=1,s=0.5")
    _experiment_options(p)
    p.set_defaults(func=cmd_perceive)

    p = sub.add_parser("compare", help="QT vs ReLU vs Sigmoid with DTW distances")
    p.add_argument("--activation", default="qt:v0=1,s=0.5", help="QT variant to compare")
    p.add_argument("--dtw-window", type=int, default=None)
    p.add_argument("--normalize-dtw", action="store_true")
    _experiment_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stimuli", help="write the canonical stimulus images")
    p.add_argument("--set", choices=("necker", "rubin"), required=True)
    p.add_argument("--format", choices=("pgm", "csv"), default="pgm")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_stimuli)

    p = sub.add_parser("qrng-fetch", help="append words from a QRNG service to a cache")
    p.add_argument("--url", default=None)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--retries", type=int, default=None)
    p.set_defaults(func=cmd_qrng_fetch)

    p = sub.add_parser("rerun", help="re-execute a manifest and verify its outputs")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_rerun)

    for name, sp in sub.choices.items():
        if name != "rerun":
            sp.add_argument("--config", default=None, help="key=value file; flags override it")
    return parser


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{ln}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _config_path(argv: list[str]) -> tuple[str | None, str | None]:
    """Find the subcommand and ``--config`` value without a full parse."""
    command = next((a for a in argv if not a.startswith("-")), None)
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return command, argv[i + 1]
        if a.startswith("--config="):
            return command, a.split("=", 1)[1]
    return command, None


def _apply_config(parser: argparse.ArgumentParser, command: str, path: str) -> None:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command not in sub.choices:
        return
    sp = sub.choices[command]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, value in read_config_file(path).items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {command}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
        # a config value satisfies a required flag
        action.required = False
    sp.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command, config = _config_path(argv)
        if config:
            _apply_config(parser, command, config)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EntropyExhaustedError as exc:
        print(f"error: entropy exhausted: {exc}", file=sys.stderr)
        return EXIT_ENTROPY
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except RemoteEntropyError as exc:
        print(f"error: remote entropy: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except (UsageError, DomainError) as exc:
        if isinstance(exc, StimulusParseError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
