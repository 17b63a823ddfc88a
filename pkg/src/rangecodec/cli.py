"""Command-line front end.

Subcommands: encode, decode, bench, ablate, simulate, stream-send,
stream-recv.  Exit codes: 0 success, 1 usage error, 2 I/O error,
3 corrupt data.  Set RANGECODEC_LOG=debug for verbose logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import socket
import sys
import time
from pathlib import Path

import numpy as np

from . import abr, io as cio, metrics, pipeline, stream, surface
from .errors import CodecError
from .range_image import ProjectionConfig, project_with_sources

log = logging.getLogger("rangecodec")


class UsageError(Exception):
    pass


def _parse_params(text: str) -> pipeline.CompressionLevel:
    try:
        dt, dp, dr, qs = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--params expects 'dtheta,dphi,delta_r,q_step', got {text!r}") from exc
    return pipeline.CompressionLevel(id=0, delta_theta=dt, delta_phi=dp, delta_r=dr, q_step=qs)


def _resolve_level(args) -> pipeline.CompressionLevel:
    if args.params:
        return _parse_params(args.params)
    ladder = pipeline.default_ladder()
    if not 0 <= args.level < len(ladder):
        raise UsageError(f"--level must be in 0..{len(ladder) - 1}")
    return ladder[args.level]


def _dataset_files(path: Path):
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".bin", ".xyz", ".txt"))
        if not files:
            raise UsageError(f"no point cloud files in {path}")
        return files
    return [path]


def cmd_encode(args) -> int:
    level = _resolve_level(args)
    files = _dataset_files(Path(args.input))
    out = Path(args.output)
    multi = len(files) > 1
    if multi:
        out.mkdir(parents=True, exist_ok=True)
    reports = []
    for f in files:
        cloud = cio.load_cloud(f)
        frame, report = pipeline.compress(cloud, level)
        target = out / (f.stem + ".rcpcc") if multi else out
        cio.write_frames(target, [frame.to_bytes()])
        reports.append(report)
        if args.verify:
            q = metrics.evaluate_quality(cloud, level)
            print(f"{f.name}: CR={q.compression_ratio:.2f} MAE={q.overall_mae:.2f}cm "
                  f"fitted={q.fitted_fraction:.2%}")
        else:
            print(f"{f.name}: {report.compressed_bytes} bytes, CR={report.compression_ratio:.2f}")
    if multi:
        print(f"mean: CR={np.mean([r.compression_ratio for r in reports]):.2f} "
              f"bytes={np.mean([r.compressed_bytes for r in reports]):.0f} "
              f"encode_ms={np.mean([r.encode_time_ms for r in reports]):.1f}")
    return 0


def cmd_decode(args) -> int:
    frames = list(cio.read_frames(args.input))
    out = Path(args.output)
    for k, blob in enumerate(frames):
        points = pipeline.decompress(blob)
        target = out if len(frames) == 1 else out.with_name(f"{out.stem}_{k:04d}{out.suffix}")
        if target.suffix == ".bin":
            cio.write_velodyne_bin(target, points)
        else:
            cio.write_xyz(target, points)
        print(f"frame {k}: {len(points)} points -> {target}")
    return 0


def _bench_rows(files, levels):
    for level in levels:
        crs, maes, fmaes, umaes, enc_ms, dec_ms = [], [], [], [], [], []
        for f in files:
            cloud = cio.load_cloud(f) if isinstance(f, (str, Path)) else f
            frame, rep = pipeline.compress(cloud, level)
            t0 = time.perf_counter()
            pipeline.decompress_to_image(frame.to_bytes())
            dec_ms.append((time.perf_counter() - t0) * 1e3)
            q = metrics.evaluate_quality(cloud, level)
            crs.append(q.compression_ratio)
            maes.append(q.overall_mae)
            fmaes.append(q.fitted_mae)
            umaes.append(q.unfit_mae)
            enc_ms.append(rep.encode_time_ms)
        yield (
            f"({level.delta_theta}:{level.delta_phi}:{level.delta_r}:{level.q_step})",
            np.mean(crs), np.mean(maes), np.mean(fmaes), np.mean(umaes),
            np.mean(enc_ms), np.mean(dec_ms),
        )


def cmd_bench(args) -> int:
    files = _dataset_files(Path(args.dataset))
    if args.params_list:
        levels = [_parse_params(p) for p in args.params_list.split(";")]
    else:
        levels = pipeline.default_ladder()
    lines = ["params,cr,mae_cm,fitted_mae_cm,unfit_mae_cm,encode_ms,decode_ms"]
    for row in _bench_rows(files, levels):
        lines.append("%s,%.4f,%.4f,%.4f,%.4f,%.3f,%.3f" % row)
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    print(text, end="")
    return 0


def cmd_ablate(args) -> int:
    files = _dataset_files(Path(args.dataset))
    thresholds = [float(t) for t in args.thresholds.split(",")]
    models = ["plane", "surface"] if args.model == "both" else [args.model]
    cfg = ProjectionConfig.from_degrees(args.resolution, args.resolution)
    lines = ["model,threshold_m,fitted_mae_cm,fitted_fraction"]
    projected = []
    for f in files:
        cloud = cio.load_cloud(f)[:, :3]
        image, _, sources = project_with_sources(cloud, cfg)
        pts = np.where(sources[:, :, None] >= 0, cloud[sources], np.nan)
        projected.append((image, pts))
    for model in models:
        for thr in thresholds:
            maes, fracs = [], []
            fit_cfg = surface.FitConfig(delta_r=thr)
            for image, pts in projected:
                fit_points = pts if model == "plane" else None
                mae, frac = metrics.fitted_model_mae(image, fit_cfg, model, fit_points)
                maes.append(mae)
                fracs.append(frac)
            lines.append(f"{model},{thr},{np.mean(maes):.4f},{np.mean(fracs):.4f}")
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    print(text, end="")
    return 0


def _load_dataset_clouds(spec_str: str):
    from . import synthetic

    if spec_str.startswith("synthetic"):
        n = int(spec_str.split(":")[1]) if ":" in spec_str else 8
        return [synthetic.street_scene(seed=k, n_azimuth=720, n_beams=32) for k in range(n)]
    return [cio.load_cloud(f) for f in _dataset_files(Path(spec_str))]


def cmd_simulate(args) -> int:
    trace = stream.BandwidthTrace.from_csv(args.trace)
    clouds = _load_dataset_clouds(args.dataset)
    source = stream.EncodedFrameSource(clouds)
    result = stream.simulate(trace, source, fps=args.fps, duration=args.duration)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    result.with_strategy.write_csv(outdir / "session_with_strategy.csv")
    result.without_strategy.write_csv(outdir / "session_without_strategy.csv")
    for key, value in result.summary().items():
        print(f"{key}: {value:.2f}")
    return 0


def cmd_stream_send(args) -> int:
    clouds = _load_dataset_clouds(args.dataset)
    source = stream.EncodedFrameSource(clouds)
    link = stream.SocketLink.connect(args.host, args.port)
    controller = None
    if args.adaptive:
        controller = abr.QueueController(len(source.ladder))
    try:
        log_ = stream.sender_loop(
            source, link, controller,
            fps=args.fps, duration=args.duration, fixed_level=args.level,
        )
    finally:
        link.close()
    print(f"sent {len(log_.records)} frames")
    return 0


def cmd_stream_recv(args) -> int:
    srv = socket.create_server(("0.0.0.0", args.port))
    conn, addr = srv.accept()
    print(f"connection from {addr}")
    fh = conn.makefile("rb")
    n = 0
    for seq, points, decode_ms in stream.receive_frames(fh):
        n += 1
        print(f"frame {seq}: {len(points)} points, decode {decode_ms:.1f} ms")
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            cio.write_xyz(out / f"frame_{seq:05d}.xyz", points)
    conn.close()
    srv.close()
    print(f"received {n} frames")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rangecodec", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="compress point cloud file(s) to .rcpcc")
    enc.add_argument("input")
    enc.add_argument("-o", "--output", required=True)
    enc.add_argument("--level", type=int, default=2)
    enc.add_argument("--params", help="dtheta_deg,dphi_deg,delta_r_m,q_step_m")
    enc.add_argument("--verify", action="store_true", help="decode back and report quality")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decompress .rcpcc to .xyz/.bin")
    dec.add_argument("input")
    dec.add_argument("-o", "--output", required=True)
    dec.set_defaults(func=cmd_decode)

    ben = sub.add_parser("bench", help="sweep configurations over a dataset")
    ben.add_argument("dataset")
    ben.add_argument("--params-list", help="semicolon-separated four-tuples")
    ben.add_argument("--csv")
    ben.set_defaults(func=cmd_bench)

    abl = sub.add_parser("ablate", help="plane vs surface fitted-MAE comparison")
    abl.add_argument("dataset")
    abl.add_argument("--model", choices=["plane", "surface", "both"], default="both")
    abl.add_argument("--thresholds", default="0.1,0.3,0.5")
    abl.add_argument("--resolution", type=float, default=0.5, help="degrees per pixel")
    abl.add_argument("--csv")
    abl.set_defaults(func=cmd_ablate)

    sim = sub.add_parser("simulate", help="bandwidth-trace transmission simulation")
    sim.add_argument("--trace", required=True)
    sim.add_argument("--dataset", required=True, help="directory or 'synthetic[:N]'")
    sim.add_argument("--fps", type=float, default=10.0)
    sim.add_argument("--duration", type=float, default=None)
    sim.add_argument("--out-dir", default="simulation_out")
    sim.set_defaults(func=cmd_simulate)

    snd = sub.add_parser("stream-send", help="send frames over TCP")
    snd.add_argument("--host", default="127.0.0.1")
    snd.add_argument("--port", type=int, required=True)
    snd.add_argument("--dataset", required=True)
    snd.add_argument("--fps", type=float, default=10.0)
    snd.add_argument("--duration", type=float, default=10.0)
    snd.add_argument("--level", type=int, default=2)
    snd.add_argument("--adaptive", action="store_true")
    snd.set_defaults(func=cmd_stream_send)

    rcv = sub.add_parser("stream-recv", help="receive and decode frames over TCP")
    rcv.add_argument("--port", type=int, required=True)
    rcv.add_argument("--out-dir")
    rcv.set_defaults(func=cmd_stream_recv)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RANGECODEC_LOG", "warning").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CodecError as exc:
        print(f"corrupt data: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
