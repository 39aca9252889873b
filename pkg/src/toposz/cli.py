"""Command-line front end.

Every command writes a JSON manifest beside its outputs; ``toposz replay``
re-runs a command from that manifest and produces byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .codec import StreamFormatError, decode_field
from .field import RawSizeError, ScalarField, generate_gaussian_mixture, load_raw, normalize, save_raw
from .metrics import evaluate
from .pipeline import IterationLimitError, PipelineConfig, compress, decompress
from .topology import build_contour_tree, simplify
from .validate import detect_false_cases

log = logging.getLogger("toposz")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAP = 3
EXIT_IO = 4
EXIT_FORMAT = 5

SWEEP_COLUMNS = [
    "xi", "eps", "status", "iterations", "ratio", "psnr", "mse", "bottleneck",
    "wasserstein2", "max_abs_error", "fp", "fn", "ft",
]


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    input: dict = dc_field(default_factory=dict)
    config: dict = dc_field(default_factory=dict)
    outputs: dict = dc_field(default_factory=dict)
    seed: int | None = None
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(**{k: data[k] for k in ("command", "input", "config", "outputs", "seed", "version") if k in data})

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())


def parse_dims(text: str, rank: int | None = None) -> tuple[int, ...]:
    parts = [p for p in text.replace("x", ",").split(",") if p.strip()]
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad --dims {text!r}; expected e.g. 64,64") from None
    if rank is not None and len(dims) == 1:
        dims = dims * rank
    if len(dims) not in (2, 3) or any(d < 1 for d in dims):
        raise UsageError(f"--dims must give 2 or 3 positive sizes, got {text!r}")
    if rank is not None and rank != len(dims):
        raise UsageError(f"--rank {rank} does not match --dims {text!r}")
    return dims


def parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _sibling(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _config(xi, eps, m, max_iterations) -> PipelineConfig:
    try:
        return PipelineConfig(xi, eps, m, max_iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands --------------------------------------------------------------

def cmd_synth(args) -> int:
    dims = parse_dims(args.dims, args.rank)
    f = generate_gaussian_mixture(dims, seed=args.seed, n_components=args.components)
    save_raw(f, args.out)
    RunManifest(
        "synth",
        config={"components": args.components},
        input={"dims": list(dims), "rank": len(dims)},
        outputs={"raw": str(args.out)},
        seed=args.seed,
    ).write(_sibling(args.out, ".synth.json"))
    return EXIT_OK


def cmd_compress(args) -> int:
    if args.xi is None:
        raise UsageError("compress needs --xi")
    dims = parse_dims(args.dims, args.rank)
    cfg = _config(args.xi, args.eps, args.m, args.max_iterations)
    field = load_raw(args.input, dims)
    out = Path(args.out)
    trace_path = _sibling(out, ".trace.csv")
    manifest = RunManifest(
        "compress",
        input={"path": str(args.input), "dims": list(dims), "rank": len(dims)},
        config={"xi": cfg.xi, "eps": cfg.eps, "m": cfg.m, "max_iterations": cfg.max_iterations},
        outputs={"stream": str(out), "trace": str(trace_path)},
    )
    try:
        stream, trace = compress(field, cfg)
    except IterationLimitError as exc:
        report_path = _sibling(out, ".report.txt")
        trace_path.write_text(exc.trace.to_csv())
        report_path.write_text(f"# {exc}\n" + exc.report.to_text())
        print(f"iteration cap reached; residual false cases in {report_path}", file=sys.stderr)
        return EXIT_CAP
    out.write_bytes(stream.to_bytes())
    trace_path.write_text(trace.to_csv())
    if args.figures:
        from .plotting import plot_trace

        fig_path = _sibling(out, ".trace.png")
        plot_trace(trace, fig_path)
        manifest.outputs["figure"] = str(fig_path)
    manifest.config["figures"] = bool(args.figures)
    manifest.write(_sibling(out, ".compress.json"))
    last = trace.steps[-1]
    print(f"{out}: ratio {last.ratio:.2f}, psnr {last.psnr:.2f} dB, {trace.iterations} iterations")
    return EXIT_OK


def cmd_decompress(args) -> int:
    data = Path(args.input).read_bytes()
    g = decompress(data)
    save_raw(g, args.out)
    RunManifest(
        "decompress",
        input={"path": str(args.input), "dims": list(g.dims), "rank": g.rank},
        outputs={"raw": str(args.out)},
    ).write(_sibling(args.out, ".decompress.json"))
    return EXIT_OK


def _to_unit(values: np.ndarray, ref: ScalarField) -> ScalarField:
    span = ref.orig_max - ref.orig_min
    scaled = (values - ref.orig_min) / span if span > 0 else values - ref.orig_min
    return ScalarField(scaled, normalized=True, orig_min=ref.orig_min, orig_max=ref.orig_max)


def _metrics_row(f: ScalarField, g: ScalarField, eps: float, n_bytes: int | None) -> dict:
    report = detect_false_cases(
        simplify(build_contour_tree(f), eps), simplify(build_contour_tree(g), eps)
    )
    m = evaluate(f, g, compressed_bytes=n_bytes, report=report)
    return {
        "ratio": m.compression_ratio, "psnr": m.psnr, "mse": m.mse, "bottleneck": m.bottleneck,
        "wasserstein2": m.wasserstein2, "max_abs_error": m.max_abs_error,
        "fp": report.counts["FP"], "fn": report.counts["FN"], "ft": report.counts["FT"],
    }


def run_point(f: ScalarField, xi: float, eps: float, m: int, max_iterations: int) -> dict:
    """Compress, decode and measure one (xi, eps) point on a normalized field."""
    row = {"xi": xi, "eps": eps}
    try:
        stream, trace = compress(f, PipelineConfig(xi, eps, m, max_iterations))
    except IterationLimitError as exc:
        row.update(status="cap", iterations=exc.trace.iterations)
        row.update({k: None for k in SWEEP_COLUMNS if k not in row})
        return row
    data = stream.to_bytes()
    g = decode_field(data)
    row.update(status="ok", iterations=trace.iterations)
    row.update(_metrics_row(f, g, eps, len(data)))
    return row


def _workers(n_tasks: int) -> int:
    env = os.environ.get("TOPOSZ_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise UsageError(f"TOPOSZ_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_tasks))


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def write_sweep(rows, out_dir: Path) -> dict:
    """JSON-lines, CSV and (for multi-point axes) figures; returns the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"jsonl": str(out_dir / "metrics.jsonl"), "csv": str(out_dir / "sweep.csv")}
    with open(paths["jsonl"], "w") as fh:
        for r in rows:
            fh.write(json.dumps({k: _json_value(r.get(k)) for k in SWEEP_COLUMNS}, sort_keys=True) + "\n")
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(["" if r.get(k) is None else _json_value(r.get(k)) for k in SWEEP_COLUMNS])
    ok = [r for r in rows if r["status"] == "ok"]
    if ok:
        from .plotting import plot_sweep

        if len({r["xi"] for r in ok}) > 1:
            paths["figure_xi"] = str(out_dir / "sweep_xi.png")
            plot_sweep(ok, "xi", paths["figure_xi"], group_key="eps")
        if len({r["eps"] for r in ok}) > 1:
            paths["figure_eps"] = str(out_dir / "sweep_eps.png")
            plot_sweep(ok, "eps", paths["figure_eps"], group_key="xi")
    return paths


def cmd_eval(args) -> int:
    dims = parse_dims(args.dims, args.rank)
    f = normalize(load_raw(args.input, dims))
    out_dir = Path(args.out)
    manifest = RunManifest(
        "eval",
        input={"path": str(args.input), "dims": list(dims), "rank": len(dims)},
        config={"eps": args.eps, "m": args.m, "max_iterations": args.max_iterations},
    )
    if args.decoded:
        g = _to_unit(load_raw(args.decoded, dims).values, f)
        n_bytes = Path(args.stream).stat().st_size if args.stream else None
        row = {"xi": args.xi, "eps": args.eps, "status": "ok", "iterations": None}
        row.update(_metrics_row(f, g, args.eps, n_bytes))
        rows = [row]
        manifest.input.update(decoded=str(args.decoded), stream=args.stream)
        manifest.config["xi"] = args.xi
    else:
        xis = parse_floats(args.sweep_xi) if args.sweep_xi else [args.xi]
        epss = parse_floats(args.sweep_eps) if args.sweep_eps else [args.eps]
        if any(x is None for x in xis):
            raise UsageError("eval needs --xi, --sweep-xi or --decoded")
        points = list(itertools.product(xis, epss))
        for xi, eps in points:
            _config(xi, eps, args.m, args.max_iterations)
        workers = _workers(len(points))
        jobs = [(f, xi, eps, args.m, args.max_iterations) for xi, eps in points]
        if workers == 1:
            rows = [run_point(*job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(run_point, *zip(*jobs)))
        manifest.config.update(sweep_xi=xis, sweep_eps=epss)
    manifest.outputs = write_sweep(rows, out_dir)
    manifest.write(out_dir / "manifest.json")
    for r in rows:
        print(json.dumps({k: _json_value(r.get(k)) for k in SWEEP_COLUMNS}, sort_keys=True))
    return EXIT_CAP if any(r["status"] == "cap" for r in rows) else EXIT_OK


def manifest_argv(manifest: RunManifest, out: str | None = None) -> list[str]:
    """Rebuild the command line recorded in ``manifest``."""
    inp, cfg, outs = manifest.input, manifest.config, manifest.outputs
    dims = ",".join(str(d) for d in inp.get("dims", []))
    if manifest.command == "synth":
        return ["synth", "--dims", dims, "--seed", str(manifest.seed),
                "--components", str(cfg["components"]), "--out", out or outs["raw"]]
    if manifest.command == "compress":
        argv = ["compress", "--in", inp["path"], "--dims", dims, "--xi", repr(cfg["xi"]),
                "--eps", repr(cfg["eps"]), "--m", str(cfg["m"]),
                "--max-iterations", str(cfg["max_iterations"]), "--out", out or outs["stream"]]
        return argv + (["--figures"] if cfg.get("figures") else [])
    if manifest.command == "decompress":
        return ["decompress", "--in", inp["path"], "--out", out or outs["raw"]]
    if manifest.command == "eval":
        argv = ["eval", "--in", inp["path"], "--dims", dims, "--eps", repr(cfg["eps"]),
                "--m", str(cfg["m"]), "--max-iterations", str(cfg["max_iterations"]),
                "--out", out or str(Path(outs["jsonl"]).parent)]
        if inp.get("decoded"):
            argv += ["--decoded", inp["decoded"]]
            if inp.get("stream"):
                argv += ["--stream", inp["stream"]]
            if cfg.get("xi") is not None:
                argv += ["--xi", repr(cfg["xi"])]
        else:
            argv += ["--sweep-xi", ",".join(repr(x) for x in cfg["sweep_xi"]),
                     "--sweep-eps", ",".join(repr(e) for e in cfg["sweep_eps"])]
        return argv
    raise UsageError(f"manifest has unknown command {manifest.command!r}")


def cmd_replay(args) -> int:
    manifest = RunManifest.from_json(Path(args.manifest).read_text())
    return main(manifest_argv(manifest, args.out))


# -- argument parsing ------------------------------------------------------

def _add_config(p):
    p.add_argument("--xi", type=float, default=None, help="global error bound on the normalized scale")
    p.add_argument("--eps", type=float, default=0.12, help="persistence threshold (default 0.12)")
    p.add_argument("--m", type=int, default=16, help="quantization code width in bits (default 16)")
    p.add_argument("--max-iterations", type=int, default=100, dest="max_iterations")


def _add_grid(p, required=True):
    p.add_argument("--dims", required=required, help="grid size, e.g. 64,64 or 32,32,32")
    p.add_argument("--rank", type=int, choices=(2, 3), default=None,
                   help="grid rank; with a single --dims value the grid is a square/cube")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toposz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each refinement step")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a Gaussian-mixture field as raw float32")
    _add_grid(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--components", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress", help="topology-preserving compression of a raw field")
    p.add_argument("--in", dest="input", required=True)
    _add_grid(p)
    _add_config(p)
    p.add_argument("--out", required=True, help="output .tsz path; trace and manifest go beside it")
    p.add_argument("--figures", action="store_true", help="also render the iteration trace as PNG")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode a .tsz stream to raw float32")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="metrics for one decoded field or a sweep over xi and eps")
    p.add_argument("--in", dest="input", required=True, help="original raw field")
    _add_grid(p)
    _add_config(p)
    p.add_argument("--decoded", help="decoded raw field to compare instead of running a sweep")
    p.add_argument("--stream", help="the .tsz the decoded field came from (for the ratio)")
    p.add_argument("--sweep-xi", dest="sweep_xi", help="comma-separated xi values")
    p.add_argument("--sweep-eps", dest="sweep_eps", help="comma-separated eps values")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write the primary output here instead")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"toposz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StreamFormatError as exc:
        print(f"toposz: bad stream ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (OSError, RawSizeError) as exc:
        print(f"toposz: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
