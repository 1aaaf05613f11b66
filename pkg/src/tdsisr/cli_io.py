"""Volume files, run manifests, CSV emitters and the ``tdsisr`` command line.

A volume ``vol.t3r`` is a raw little-endian payload (i fastest, then j, then
k) next to a JSON sidecar ``vol.t3r.json``::

    {"dims": [I, J, K], "dtype": "f64", "order": "i-fastest",
     "voxel_size": null, "provenance": {...}}

Every command also writes ``<output>.manifest.json`` holding the argv, all
parameters, seeds, stage timings and the SHA-256 of each output payload;
``tdsisr replay <manifest>`` re-executes it.

Exit codes: 0 success, 1 usage/parameter, 2 I/O, 3 dimension, 4 divergence.
"""

import argparse
import contextlib
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .cpd_sisr import CpdConfig, tf_sisr
from .degradation import DegradationSpec, degrade, low_rank_phantom, tooth_phantom
from .errors import (
    DimensionError,
    LengthMismatchError,
    MissingSidecarError,
    ParameterError,
    SisrError,
    UnknownDtypeError,
    VolumeIOError,
)
from .metrics import evaluate
from .operators import build_operators
from .tucker_sisr import TruncationRule, hosvd, sv_spectrum, td_sisr

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIM, EXIT_DIVERGE = 0, 1, 2, 3, 4


# --- volume files -------------------------------------------------------------

def sidecar_path(path):
    return Path(str(path) + ".json")


@contextlib.contextmanager
def _atomic(path, mode="wb"):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def read_header(path):
    side = sidecar_path(path)
    if not side.exists():
        raise MissingSidecarError(f"missing header sidecar {side}")
    try:
        header = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeIOError(f"malformed header {side}: {exc}") from exc
    if header.get("dtype") not in DTYPES:
        raise UnknownDtypeError(f"unknown dtype {header.get('dtype')!r} in {side}")
    dims = header.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise VolumeIOError(f"invalid dims {dims!r} in {side}")
    if header.get("order", "i-fastest") != "i-fastest":
        raise VolumeIOError(f"unsupported element order {header.get('order')!r}")
    return header


def read_volume(path):
    """Load a ``.t3r`` volume as a float64 array of shape (I, J, K)."""
    header = read_header(path)
    dt = DTYPES[header["dtype"]]
    dims = tuple(header["dims"])
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise VolumeIOError(f"missing payload {path}") from exc
    expected = int(np.prod(dims)) * dt.itemsize
    if len(raw) != expected:
        raise LengthMismatchError(
            f"{path}: payload has {len(raw)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(raw, dtype=dt)
    return np.reshape(flat, dims, order="F").astype(np.float64)


def write_volume(x, path, dtype="f64", voxel_size=None, provenance=None):
    """Write ``x`` and its sidecar; both files appear only on success."""
    if dtype not in DTYPES:
        raise UnknownDtypeError(f"unknown dtype {dtype!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"expected an order-3 volume, got shape {x.shape}")
    header = {
        "dims": [int(d) for d in x.shape],
        "dtype": dtype,
        "order": "i-fastest",
        "voxel_size": None if voxel_size is None else [float(v) for v in voxel_size],
        "provenance": provenance or {},
    }
    payload = x.astype(DTYPES[dtype]).tobytes(order="F")
    text = json.dumps(header, indent=2) + "\n"
    with _atomic(path) as fpay, _atomic(sidecar_path(path), "w") as fhead:
        fpay.write(payload)
        fhead.write(text)


def payload_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- CSV ----------------------------------------------------------------------

def _fmt(v):
    return "%.17g" % v


def write_csv(path, header, rows):
    with _atomic(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in row) + "\n")


def write_trace_csv(path, trace):
    write_csv(path, ["sweep", "residual"], [(i, r) for i, r in enumerate(trace)])


def write_sv_csv(path, model):
    rows = []
    with np.errstate(divide="ignore"):
        for mode, series in enumerate(sv_spectrum(model), start=1):
            for idx, sv in series:
                rows.append((mode, int(idx), float(sv), float(np.log10(sv))))
    write_csv(path, ["mode", "index", "sv", "log10_sv"], rows)


# --- argument helpers ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _triple(kind):
    def parse(text):
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) == 1:
            parts = parts * 3
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected 1 or 3 comma-separated values, got {text!r}")
        try:
            return tuple(kind(p) for p in parts)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _add_operator_flags(p, epsilon=True):
    p.add_argument("--sigma", type=_triple(float), default=(8.0, 8.0, 8.0),
                   help="Gaussian blur std per mode in voxels (default 8,8,8)")
    p.add_argument("--rate", type=int, default=2, help="downsampling rate (default 2)")
    p.add_argument("--kernel-radius", type=float, default=3.0,
                   help="kernel truncation radius in sigmas (default 3)")
    p.add_argument("--downsample", choices=["decimate", "average"], default="decimate")
    if epsilon:
        p.add_argument("--epsilon", type=float, default=1.0,
                       help="Tikhonov regularizer (default 1)")


def build_parser():
    parser = _Parser(prog="tdsisr", description="Tensor-factorization 3D super-resolution")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write a synthetic HR volume")
    p.add_argument("--kind", choices=["tooth", "low-rank"], default="tooth")
    p.add_argument("--shape", type=_triple(int), default=(64, 64, 64))
    p.add_argument("--ranks", type=_triple(int), default=(4, 4, 4), help="n-ranks for low-rank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=list(DTYPES), default="f64")
    p.add_argument("--out", required=True)

    p = sub.add_parser("degrade", help="blur, downsample and add noise")
    p.add_argument("--in", dest="inp", required=True)
    _add_operator_flags(p, epsilon=False)
    p.add_argument("--snr", type=float, default=None, help="SNR in dB (omit for noiseless)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=list(DTYPES), default="f64")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sr-cpd", help="CPD / ALS super-resolution (TF-SISR)")
    p.add_argument("--in", dest="inp", required=True)
    _add_operator_flags(p)
    p.add_argument("--ranks", type=int, default=500, help="CPD rank R (default 500)")
    p.add_argument("--max-sweeps", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--init", choices=["random", "hosvd-of-upsampled"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=list(DTYPES), default="f64")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="CSV of per-sweep LR residuals")

    p = sub.add_parser("sr-tucker", help="truncated HOSVD + Tikhonov deconvolution (TD-SISR)")
    p.add_argument("--in", dest="inp", required=True)
    _add_operator_flags(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ranks", type=_triple(int), default=None, help="kept components per mode (default 40,40,40)")
    g.add_argument("--sv-threshold", type=_triple(float), default=None,
                   help="keep components with SV >= threshold, per mode")
    p.add_argument("--dtype", choices=list(DTYPES), default="f64")
    p.add_argument("--out", required=True)
    p.add_argument("--sv-csv", default=None, help="CSV of mode-wise singular values")

    p = sub.add_parser("evaluate", help="PSNR / SSI / Dice against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mask-mode", choices=["otsu-dilate1", "otsu", "all"], default="otsu-dilate1")
    p.add_argument("--report", required=True)

    p = sub.add_parser("sv-spectrum", help="mode-wise singular values of a volume")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--sv-csv", required=True)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


# --- commands -----------------------------------------------------------------

def _operators(args, hr_dims):
    return build_operators(hr_dims, args.sigma, args.rate, getattr(args, "epsilon", 1.0),
                           args.kernel_radius, args.downsample)


def _operator_params(args):
    out = {"sigma": list(args.sigma), "rate": args.rate, "kernel_radius": args.kernel_radius,
           "downsample": args.downsample}
    if hasattr(args, "epsilon"):
        out["epsilon"] = args.epsilon
    return out


def _validate(args):
    if hasattr(args, "rate") and args.rate < 1:
        raise ParameterError(f"--rate must be >= 1, got {args.rate}")
    if hasattr(args, "sigma") and any(not s > 0 for s in args.sigma):
        raise ParameterError(f"--sigma values must be positive, got {args.sigma}")
    if getattr(args, "epsilon", 0.0) < 0:
        raise ParameterError("--epsilon must be non-negative")
    if args.threads is not None and args.threads < 1:
        raise ParameterError("--threads must be >= 1")


def _cmd_phantom(args, run):
    if args.kind == "tooth":
        x = tooth_phantom(args.shape, seed=args.seed)
    else:
        x = low_rank_phantom(args.shape, args.ranks, seed=args.seed)
    run["params"].update(kind=args.kind, shape=list(args.shape), ranks=list(args.ranks))
    run["seeds"]["phantom"] = args.seed
    write_volume(x, args.out, args.dtype, provenance={"command": "phantom", **run["params"]})
    return [args.out]


def _cmd_degrade(args, run):
    x = read_volume(args.inp)
    spec = DegradationSpec(tuple(args.sigma), args.rate, args.snr, args.seed)
    with _stage(run, "operators"):
        ops = _operators(args, x.shape)
    with _stage(run, "degrade"):
        y = degrade(x, spec, ops)
    run["params"].update(_operator_params(args), snr_db=args.snr)
    run["params"]["noise_generator"] = spec.to_dict()["noise_generator"]
    run["seeds"]["noise"] = args.seed
    write_volume(y, args.out, args.dtype, provenance={"command": "degrade", "source": str(args.inp),
                                                      **run["params"], "seed": args.seed})
    return [args.out]


def _hr_dims(args, lr_shape):
    return tuple(n * args.rate for n in lr_shape)


def _cmd_sr_cpd(args, run):
    y = read_volume(args.inp)
    cfg = CpdConfig(rank=args.ranks, max_sweeps=args.max_sweeps, rel_tol=args.tol,
                    epsilon=args.epsilon, init=args.init, seed=args.seed)
    with _stage(run, "operators"):
        ops = _operators(args, _hr_dims(args, y.shape))
    with _stage(run, "tf_sisr"):
        x_hat, factors, trace = tf_sisr(y, ops, cfg)
    run["params"].update(_operator_params(args), rank=cfg.rank, max_sweeps=cfg.max_sweeps,
                         rel_tol=cfg.rel_tol, init=cfg.init, sweeps_run=len(trace) - 1)
    run["seeds"]["init"] = args.seed
    outputs = [args.out]
    write_volume(x_hat, args.out, args.dtype,
                 provenance={"command": "sr-cpd", "source": str(args.inp), **run["params"],
                             "runtime_s": run["timings"]["tf_sisr"]})
    if args.trace:
        write_trace_csv(args.trace, trace)
        outputs.append(args.trace)
    return outputs


def _cmd_sr_tucker(args, run):
    y = read_volume(args.inp)
    if args.sv_threshold is not None:
        rule = TruncationRule.thresholds(*args.sv_threshold)
    else:
        rule = TruncationRule.counts(*(args.ranks or (40, 40, 40)))
    with _stage(run, "operators"):
        ops = _operators(args, _hr_dims(args, y.shape))
    with _stage(run, "td_sisr"):
        x_hat, model, _ = td_sisr(y, ops, rule)
    run["params"].update(_operator_params(args), truncation=rule.describe(),
                         kept_ranks=list(model.ranks), clamped=model.clamped)
    outputs = [args.out]
    write_volume(x_hat, args.out, args.dtype,
                 provenance={"command": "sr-tucker", "source": str(args.inp), **run["params"],
                             "runtime_s": run["timings"]["td_sisr"]})
    if args.sv_csv:
        write_sv_csv(args.sv_csv, model)
        outputs.append(args.sv_csv)
    return outputs


def _cmd_evaluate(args, run):
    ref = read_volume(args.ref)
    test = read_volume(args.test)
    if ref.shape != test.shape:
        raise DimensionError(f"reference {ref.shape} and test {test.shape} differ in shape")
    runtime = read_header(args.test).get("provenance", {}).get("runtime_s", 0.0)
    with _stage(run, "evaluate"):
        report = evaluate(ref, test, args.mask_mode, runtime_s=runtime,
                          params={"ref": str(args.ref), "test": str(args.test)})
    run["params"].update(mask_mode=args.mask_mode)
    with _atomic(args.report, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    return [args.report]


def _cmd_sv_spectrum(args, run):
    y = read_volume(args.inp)
    with _stage(run, "hosvd"):
        model = hosvd(y)
    write_sv_csv(args.sv_csv, model)
    return [args.sv_csv]


COMMANDS = {
    "phantom": _cmd_phantom,
    "degrade": _cmd_degrade,
    "sr-cpd": _cmd_sr_cpd,
    "sr-tucker": _cmd_sr_tucker,
    "evaluate": _cmd_evaluate,
    "sv-spectrum": _cmd_sv_spectrum,
}


@contextlib.contextmanager
def _stage(run, name):
    t0 = time.perf_counter()
    yield
    run["timings"][name] = time.perf_counter() - t0


@contextlib.contextmanager
def _chdir(path):
    prev = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(prev)


def manifest_path(output):
    return Path(str(output) + ".manifest.json")


def _write_manifest(run, outputs):
    run["outputs"] = {str(p): payload_sha256(p) for p in outputs}
    with _atomic(manifest_path(outputs[0]), "w") as fh:
        json.dump(run, fh, indent=2)
        fh.write("\n")


def _run(argv):
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        try:
            manifest = json.loads(Path(args.manifest).read_text())
        except FileNotFoundError as exc:
            raise VolumeIOError(f"missing manifest {args.manifest}") from exc
        with _chdir(manifest.get("cwd", ".")):
            return _run(manifest["argv"])
    _validate(args)
    run = {
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "params": {},
        "seeds": {},
        "timings": {},
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }
    limits = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
    with limits:
        t0 = time.perf_counter()
        outputs = COMMANDS[args.command](args, run)
        run["timings"]["total"] = time.perf_counter() - t0
    _write_manifest(run, outputs)
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _run(argv)
    except SystemExit as exc:
        # argparse usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except SisrError as exc:
        print(f"tdsisr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tdsisr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"tdsisr: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
