"""Command-line interface.

Subcommands: train, generate, reconstruct, eval, verify.  Every run that
produces files also writes a manifest (full configuration plus seed),
and rerunning with --manifest reproduces the run byte for byte: nothing
nondeterministic is ever written to an output file.  Wall-clock timing
goes to the console only.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .activations import ActivationSpec
from .estimators import linear_probe_accuracy
from .exact import log_likelihood_exact
from .io import (
    DataFormatError,
    load_idx,
    load_model,
    load_ppm_dir,
    save_model,
    save_ppm,
)
from .optim import NumericalError
from .params import RbmParams, validate_model
from .sampling import RngStream
from .stack import (
    TrainConfig,
    build_dbn,
    forward_means,
    generate,
    reconstruct_model,
    train,
    warm_start_visible,
)
from .verify import run_checks

_RECON_MODES = {"mean": "mean_field", "stochastic": "stochastic"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad flags through our exit-code scheme."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="drbm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command")

    tr = sub.add_parser("train", help="train a model on a dataset")
    tr.add_argument("--data", help="IDX image file or directory of netpbm images")
    tr.add_argument("--labels", default=None, help="IDX label file (optional)")
    tr.add_argument("--out", help="model file to write")
    tr.add_argument("--arch", default="dense:64", help="e.g. conv:8x4s2,dense:64")
    tr.add_argument("--lr", type=float, default=0.03)
    tr.add_argument("--beta1", type=float, default=0.9)
    tr.add_argument("--beta2", type=float, default=0.999)
    tr.add_argument("--batch", type=int, default=128)
    tr.add_argument("--epochs", type=int, default=500)
    tr.add_argument("--n-levels", type=int, default=255, dest="n_levels")
    tr.add_argument("--k", type=float, default=1.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--recon", choices=sorted(_RECON_MODES), default="mean")
    tr.add_argument("--loss-norm", choices=["mean", "sum"], default="mean",
                    dest="loss_norm")
    tr.add_argument("--grad-clip", type=float, default=None, dest="grad_clip")
    tr.add_argument("--manifest", default=None,
                    help="rerun the configuration stored in this manifest")
    tr.set_defaults(func=cmd_train)

    ge = sub.add_parser("generate", help="sample images from a model")
    ge.add_argument("--model", help="model file to load")
    ge.add_argument("--out", help="output directory")
    ge.add_argument("--count", type=int, default=16)
    ge.add_argument("--steps", type=int, default=200, help="Gibbs steps")
    ge.add_argument("--seed", type=int, default=0)
    ge.add_argument("--shape", default=None,
                    help="image shape HxW or CxHxW when the model is dense")
    ge.add_argument("--manifest", default=None)
    ge.set_defaults(func=cmd_generate)

    re_ = sub.add_parser("reconstruct", help="write original/reconstruction pairs")
    re_.add_argument("--model", help="model file to load")
    re_.add_argument("--data", help="IDX image file or directory of netpbm images")
    re_.add_argument("--out", help="output directory")
    re_.add_argument("--count", type=int, default=8)
    re_.add_argument("--recon", choices=sorted(_RECON_MODES), default="mean")
    re_.add_argument("--seed", type=int, default=0)
    re_.add_argument("--manifest", default=None)
    re_.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("eval", help="exact log-likelihood or linear probe")
    ev.add_argument("--model", help="model file to load")
    ev.add_argument("--data", help="IDX image file or directory of netpbm images")
    ev.add_argument("--labels", default=None)
    ev.add_argument("--mode", choices=["loglik", "probe"], default=None,
                    help="default: loglik when the model is small enough")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--manifest", default=None)
    ev.set_defaults(func=cmd_eval)

    ve = sub.add_parser("verify", help="run the built-in correctness checks")
    ve.set_defaults(func=cmd_verify)
    return parser


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _manifest_payload(args) -> dict:
    skip = {"func", "command", "manifest"}
    return {
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k not in skip},
    }


def _write_manifest(path, args) -> None:
    text = json.dumps(_manifest_payload(args), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def _apply_manifest(args) -> None:
    try:
        stored = json.loads(Path(args.manifest).read_text())
        command = stored["command"]
        arguments = stored["arguments"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataFormatError(f"{args.manifest}: not a run manifest ({exc})")
    if command != args.command:
        raise UsageError(
            f"manifest {args.manifest} is for '{command}', not '{args.command}'"
        )
    for key, value in arguments.items():
        setattr(args, key, value)


def _load_dataset(path, labels, n_levels):
    p = Path(path)
    if p.is_dir():
        return load_ppm_dir(p, n_levels)
    return load_idx(p, labels, n_levels)


def _check_model(model) -> None:
    problems = validate_model(model)
    if problems:
        raise DataFormatError("; ".join(problems))


def _parse_shape(text: str) -> tuple:
    parts = text.lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad --shape {text!r}; expected HxW or CxHxW") from None
    if len(dims) == 2:
        dims = (1, *dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise UsageError(f"bad --shape {text!r}; expected HxW or CxHxW")
    return dims


def _save_image(path_base: Path, image, n_levels: int) -> Path:
    suffix = ".pgm" if image.shape[0] == 1 else ".ppm"
    path = path_base.with_suffix(suffix)
    save_ppm(path, image, n_levels)
    return path


def cmd_train(args) -> int:
    _require(args, "data", "out")
    dataset = _load_dataset(args.data, args.labels, args.n_levels)
    spec = ActivationSpec(args.n_levels, args.k)
    model = build_dbn(
        args.arch, dataset.image_shape, data_spec=spec, unit_spec=spec,
        seed=args.seed,
    )
    model = warm_start_visible(model, dataset.samples)
    config = TrainConfig(
        learning_rate=args.lr,
        beta1=args.beta1,
        beta2=args.beta2,
        batch_size=args.batch,
        n_epochs=args.epochs,
        recon_mode=_RECON_MODES[args.recon],
        loss_norm=args.loss_norm,
        grad_clip=args.grad_clip,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = out.with_name(out.name + ".csv")
    n_layers = len(model.layers)
    loss_cols = ",".join(f"loss_{i}" for i in range(n_layers))
    print_every = max(1, args.epochs // 10) if args.epochs else 1

    started = time.monotonic()
    with open(log_path, "w") as log:
        log.write(f"epoch,{loss_cols},recon_error\n")

        def on_epoch(report):
            losses = ",".join(repr(float(x)) for x in report.losses)
            log.write(f"{report.epoch},{losses},{report.recon_errors[0]!r}\n")
            if report.epoch % print_every == 0 or report.epoch == args.epochs - 1:
                print(
                    f"epoch {report.epoch}: loss {report.total_loss:.6f}, "
                    f"recon error {report.recon_errors[0]:.6f}"
                )

        model, _ = train(model, dataset.samples, config, seed=args.seed,
                         callback=on_epoch)
    elapsed = time.monotonic() - started
    save_model(out, model)
    _write_manifest(out.with_name(out.name + ".manifest.json"), args)
    print(f"trained {n_layers} layer(s) on {dataset.count} samples "
          f"in {elapsed:.1f}s -> {out}")
    return 0


def cmd_generate(args) -> int:
    _require(args, "model", "out")
    model = load_model(args.model)
    _check_model(model)
    first = model.layers[0]
    if isinstance(first, RbmParams):
        if args.shape is None:
            raise UsageError(
                "--shape is required to arrange a dense model's samples as images"
            )
        shape = _parse_shape(args.shape)
        if int(shape[0] * shape[1] * shape[2]) != first.n_visible:
            raise UsageError(
                f"--shape {args.shape} holds {shape[0] * shape[1] * shape[2]} "
                f"pixels but the model has {first.n_visible} visible units"
            )
    else:
        if first.input_size is None:
            raise DataFormatError(
                f"{args.model}: convolutional model lacks an input size"
            )
        shape = (first.in_channels, *first.input_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = generate(model, args.count, steps=args.steps,
                       rng=RngStream(args.seed, 3))
    samples = samples.reshape(args.count, *shape)
    n_levels = first.visible_spec.n_levels
    for i in range(args.count):
        _save_image(out / f"sample_{i:03d}", samples[i], n_levels)
    _write_manifest(out / "manifest.json", args)
    print(f"wrote {args.count} samples to {out}")
    return 0


def cmd_reconstruct(args) -> int:
    _require(args, "model", "data", "out")
    model = load_model(args.model)
    _check_model(model)
    n_levels = model.layers[0].visible_spec.n_levels
    dataset = _load_dataset(args.data, None, n_levels)
    count = min(args.count, dataset.count)
    batch = dataset.samples[:count]
    recon = reconstruct_model(
        model, batch, rng=RngStream(args.seed, 4),
        mode=_RECON_MODES[args.recon],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        _save_image(out / f"original_{i:03d}", batch[i], n_levels)
        _save_image(out / f"recon_{i:03d}", recon[i], n_levels)
    _write_manifest(out / "manifest.json", args)
    error = float(abs(recon - batch).mean())
    print(f"wrote {count} pairs to {out}; mean |v - v'| = {error:.4f}")
    return 0


def cmd_eval(args) -> int:
    _require(args, "model", "data")
    model = load_model(args.model)
    _check_model(model)
    n_levels = model.layers[0].visible_spec.n_levels
    dataset = _load_dataset(args.data, args.labels, n_levels)
    mode = args.mode
    if mode is None:
        first = model.layers[0]
        enumerable = (
            len(model.layers) == 1
            and isinstance(first, RbmParams)
            and first.visible_spec.n_levels == 1
            and first.n_visible <= 20
        )
        mode = "loglik" if enumerable else "probe"
    if mode == "loglik":
        report = log_likelihood_exact(model.layers[0], dataset.flat())
        print(f"log_partition {report.log_partition!r}")
        print(f"log_likelihood {report.mean_log_likelihood!r}")
        return 0
    if dataset.labels is None:
        raise UsageError("--labels is required for probe evaluation")
    features = forward_means(model, dataset.samples)
    features = features.reshape(features.shape[0], -1)
    perm = RngStream(args.seed, 5).generator().permutation(dataset.count)
    half = dataset.count // 2
    tr, te = perm[:half], perm[half:]
    accuracy = linear_probe_accuracy(
        features[tr], dataset.labels[tr], features[te], dataset.labels[te]
    )
    print(f"probe_accuracy {accuracy:.4f}")
    return 0


def cmd_verify(args) -> int:
    results = run_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name:<{width}}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 3


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        if getattr(args, "manifest", None):
            _apply_manifest(args)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
