"""Command-line frontend: every pipeline and experiment as a seeded,
reproducible batch command with machine-readable reports.

Exit codes: 0 success, 2 usage/unknown command, 3 bad input file,
4 infeasible target.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .codec import CodecConfig
from .distsim import (
    Scenario,
    check_fit,
    comm_report,
    load_scenario,
    memory_footprint,
    simulate_pipeline,
    trace_summary,
    write_trace_csv,
    write_trace_json,
)
from .errors import FormatError, InfeasibleError
from .hwmodel import (
    CODEC_PAIRS,
    PROFILES,
    TrainingScenario,
    codec_comm_ratio,
    energy_efficiency,
    infer_parallel_plan,
    sweep_bandwidth,
    sweep_model_size,
    write_sweep_csv,
)
from .pipelines import (
    GradientSchedule,
    compress_gradient,
    compress_runtime,
    compress_weights,
    decompress,
    format_ratio,
)
from .rate import (
    RateReport,
    _RD,
    ablation_report,
    write_reports_csv,
    write_reports_json,
)
from .tensor import (
    error_metrics,
    gen_synthetic,
    gen_synthetic_kv,
    load_tensor,
    save_tensor,
)

EXIT_OK, EXIT_USAGE, EXIT_BAD_INPUT, EXIT_INFEASIBLE = 0, 2, 3, 4

_STAGE_NAMES = ("entropy", "transform", "prediction")


def _config_from_args(args) -> CodecConfig:
    kwargs = {}
    if getattr(args, "stages", None) is not None:
        wanted = [s for s in args.stages.split(",") if s]
        for s in wanted:
            if s not in _STAGE_NAMES:
                raise ValueError(f"unknown stage {s!r} (choose from {','.join(_STAGE_NAMES)})")
        kwargs = dict(
            enable_entropy="entropy" in wanted,
            enable_transform="transform" in wanted,
            enable_prediction="prediction" in wanted,
        )
    if getattr(args, "qp", None) is not None:
        kwargs["qp"] = args.qp
    if getattr(args, "ctu", None) is not None:
        kwargs["ctu_size"] = args.ctu
    if getattr(args, "min_block", None) is not None:
        kwargs["min_block"] = args.min_block
    return CodecConfig(**kwargs)


def _write_reports(reports, path, fmt, command):
    if fmt == "json":
        write_reports_json(reports, path, command)
    else:
        write_reports_csv(reports, path, command)


def _cmd_gen(args, command):
    if args.layout == "weight":
        t = gen_synthetic(
            args.rows,
            args.cols,
            args.channel_corr,
            args.outlier_rate,
            args.outlier_scale,
            args.seed,
            role=args.role,
            outlier_mode=args.outlier_mode,
        )
    else:
        t = gen_synthetic_kv(
            args.rows,
            args.cols,
            args.channel_corr,
            args.outlier_rate,
            args.outlier_scale,
            args.seed,
            role=args.role,
        )
    save_tensor(t, args.out)
    print(f"wrote {args.out}: dims {t.dims} role {t.role}")
    return EXIT_OK


def _cmd_compress(args, command):
    t = load_tensor(getattr(args, "in"))
    config = _config_from_args(args)
    if t.role == "weight":
        ct = compress_weights(
            t,
            target_mse=args.target_mse,
            target_bits=args.target_bits,
            rotate=args.rotate,
            rotation_seed=args.seed,
            config=config,
            frame_side=args.frame_side,
        )
    elif t.role in ("activation", "kv_cache"):
        if args.target_bits is None:
            raise ValueError("runtime tensors take --target-bits")
        if args.rotate:
            raise ValueError("runtime tensors are never rotated")
        ct = compress_runtime(t, args.target_bits, config=config, frame_side=args.frame_side)
    else:
        raise ValueError("gradient tensors are compressed via the grad-sim command")
    with open(args.out, "wb") as fh:
        fh.write(ct.data)
    rep = ct.report
    print(
        f"wrote {args.out}: qp {rep.qp}, {rep.bits_per_value:.3f} bits/value "
        f"({format_ratio(rep.bits_per_value)} vs fp16), mse {rep.mse:.6g}"
        + (" [floor]" if rep.floor else "")
    )
    if args.report:
        _write_reports([rep], args.report, args.format, command)
    return EXIT_OK


def _cmd_decompress(args, command):
    with open(getattr(args, "in"), "rb") as fh:
        data = fh.read()
    t = decompress(data)
    save_tensor(t, args.out)
    msg = f"wrote {args.out}: dims {t.dims} role {t.role}"
    if args.orig:
        m = error_metrics(load_tensor(args.orig), t)
        msg += f", mse vs original {m.mse:.6g}"
    print(msg)
    return EXIT_OK


def _cmd_sweep(args, command):
    t = load_tensor(getattr(args, "in"))
    config = _config_from_args(args)
    qps = [int(q) for q in args.qps.split(",") if q]
    if not qps:
        raise ValueError("--qps needs at least one value")

    def one(qp):
        rd = _RD.from_tensor(t, config, None, args.frame_side)
        data, mse = rd.eval(qp)
        return RateReport(
            args.tensor_id,
            "+".join(config.stage_set()) or "none",
            qp,
            8.0 * len(data) / t.element_count,
            mse,
            len(data),
        )

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            reports = list(pool.map(one, qps))
    else:
        reports = [one(qp) for qp in qps]
    _write_reports(reports, args.report, args.format, command)
    print(f"wrote {args.report}: {len(reports)} rows")
    return EXIT_OK


def _cmd_ablate(args, command):
    t = load_tensor(getattr(args, "in"))
    reports = ablation_report(
        t, args.target_mse, tensor_id=args.tensor_id, frame_side=args.frame_side
    )
    _write_reports(reports, args.report, args.format, command)
    for r in reports:
        print(f"{r.stage_set:32s} {r.bits_per_value:8.4f} bits  mse {r.mse:.6g}")
    return EXIT_OK


def _cmd_grad_sim(args, command):
    sched = GradientSchedule(
        switch_step=args.switch_step,
        phase1_residual_bits=args.residual_bits,
        base_bits=args.base_bits,
        total_steps=args.total_steps,
    )
    doc = {
        "meta": {"tool": "vcodec", "version": __version__, "command": command},
        "schedule": {
            "switch_step": sched.switch_step,
            "base_bits": sched.base_bits,
            "phase1_residual_bits": sched.phase1_residual_bits,
            "total_steps": sched.total_steps,
            "average_bits": sched.average_bits(),
        },
        "steps": [],
    }
    if getattr(args, "in", None):
        g = load_tensor(getattr(args, "in"))
        for step in [int(s) for s in args.steps.split(",") if s]:
            payload = compress_gradient(g, step, sched)
            doc["steps"].append(
                {
                    "step": step,
                    "phase": payload.phase,
                    "base_bits": float(f"{payload.base_bits:.6f}"),
                    "residual_bits": float(f"{payload.residual_bits:.6f}"),
                    "total_bits": float(f"{payload.bits_per_value:.6f}"),
                }
            )
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"schedule average: {sched.average_bits():.4f} bits/value")
    for row in doc["steps"]:
        print(f"step {row['step']}: phase {row['phase']}, {row['total_bits']:.3f} bits/value")
    return EXIT_OK


def _cmd_dist_sim(args, command):
    scenario = load_scenario(args.scenario)
    m, cluster, plan = scenario.model, scenario.cluster, scenario.plan
    fp = memory_footprint(m, plan, cluster)
    comm = comm_report(m, plan)
    fits = check_fit(m, plan, cluster, slack_gb=args.slack_gb)
    print(
        f"per-device: weights {fp['weights_gb']:.2f} GB + kv {fp['kv_gb']:.2f} GB "
        f"= {fp['total_gb']:.2f} GB -> {'fits' if fits else 'DOES NOT FIT'} "
        f"{cluster.memory_per_device_gb:g} GB devices (+{args.slack_gb:g} slack)"
    )
    print(
        f"boundary payload: {comm['bytes_per_boundary_per_token']:.0f} B/token, "
        f"{comm['ratio_vs_fp16']:.2f}x vs fp16 across {comm['boundaries']} boundaries"
    )
    summary = {
        "meta": {"tool": "vcodec", "version": __version__, "command": command},
        "memory_gb": {k: float(f"{v:.6f}") for k, v in fp.items()},
        "fits": fits,
        "comm": {k: float(v) for k, v in comm.items()},
    }
    if args.stream_tensors > 0:
        stream = [
            gen_synthetic_kv(
                args.tokens, args.channels, 0.9, 0.03, 20, seed=args.seed + i, role="activation"
            )
            for i in range(args.stream_tensors)
        ]
        trace = simulate_pipeline(stream, plan, compressor=args.compressor, rtn_bits=args.rtn_bits)
        summary["trace"] = trace_summary(trace)
        if args.report:
            write_trace_csv(trace, args.report, command)
            print(f"wrote {args.report}: {len(trace.rows)} rows")
        if trace.cumulative_mse:
            print(
                f"stream: {trace.bits_per_value:.3f} bits/value, "
                f"cumulative mse {trace.cumulative_mse[-1]:.6g} after {len(trace.cumulative_mse)} boundaries"
            )
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _hw_pair(name):
    enc_key, dec_key = CODEC_PAIRS[name]
    return PROFILES[enc_key], PROFILES[dec_key]


def _cmd_hw_model(args, command):
    comm = PROFILES[args.comm].energy_pj_per_bit
    if args.hw_cmd == "energy":
        enc, dec = _hw_pair(args.codec)
        factor = energy_efficiency(comm, enc.energy_pj_per_bit, dec.energy_pj_per_bit, args.ratio)
        print(f"{factor:.2f}")
        return EXIT_OK
    if args.hw_cmd == "ratio":
        enc, dec = _hw_pair(args.codec)
        print(f"{codec_comm_ratio(comm, enc.energy_pj_per_bit, dec.energy_pj_per_bit):.1f}")
        return EXIT_OK
    if args.hw_cmd == "plan":
        pp, dp = infer_parallel_plan(args.model_bytes, args.memory_bytes, args.devices)
        print(f"pp={pp} dp={dp}")
        return EXIT_OK
    if args.hw_cmd == "sweep":
        enc, dec = _hw_pair(args.codec)
        if args.type == "bandwidth":
            scn = TrainingScenario(
                args.model_bytes, args.comm_bytes, 1.0, args.compute_s, args.ratio, enc, dec
            )
            rows = sweep_bandwidth(scn, [float(b) for b in args.points.split(",")])
        else:
            rows = sweep_model_size(
                comm,
                enc.energy_pj_per_bit,
                dec.energy_pj_per_bit,
                args.ratio,
                [float(b) for b in args.points.split(",")],
            )
        write_sweep_csv(rows, args.report, command)
        print(f"wrote {args.report}: {len(rows)} rows")
        return EXIT_OK
    raise ValueError(f"unknown hw-model subcommand {args.hw_cmd!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcodec",
        description="Data-independent tensor compression on an intra-only codec pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"vcodec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_codec_flags(p):
        p.add_argument("--stages", help="comma list from entropy,transform,prediction")
        p.add_argument("--qp", type=int)
        p.add_argument("--ctu", type=int)
        p.add_argument("--min-block", dest="min_block", type=int)
        p.add_argument("--frame-side", dest="frame_side", type=int, default=1024)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("gen", help="write a deterministic synthetic tensor")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--channel-corr", dest="channel_corr", type=float, default=0.9)
    p.add_argument("--outlier-rate", dest="outlier_rate", type=float, default=0.0)
    p.add_argument("--outlier-scale", dest="outlier_scale", type=float, default=1.0)
    p.add_argument("--outlier-mode", dest="outlier_mode", choices=("scattered", "channel"), default="scattered")
    p.add_argument("--layout", choices=("weight", "runtime"), default="weight")
    p.add_argument("--role", default="weight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("compress", help="compress a tensor to a bitstream")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--target-mse", dest="target_mse", type=float)
    target.add_argument("--target-bits", dest="target_bits", type=float)
    p.add_argument("--rotate", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="rotation seed")
    p.add_argument("--report")
    add_common_codec_flags(p)
    p.set_defaults(fn=_cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct a tensor from a bitstream")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--orig", help="original tensor for error reporting")
    p.set_defaults(fn=_cmd_decompress)

    p = sub.add_parser("sweep", help="rate/distortion table over fixed qp values")
    p.add_argument("--in", required=True)
    p.add_argument("--qps", default="0,12,24,36,48")
    p.add_argument("--report", required=True)
    p.add_argument("--tensor-id", dest="tensor_id", default="t0")
    add_common_codec_flags(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("ablate", help="bits at fixed quality per codec stage set")
    p.add_argument("--in", required=True)
    p.add_argument("--target-mse", dest="target_mse", type=float, required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--tensor-id", dest="tensor_id", default="t0")
    add_common_codec_flags(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("grad-sim", help="gradient schedule accounting and payloads")
    p.add_argument("--in")
    p.add_argument("--switch-step", dest="switch_step", type=int, default=2500)
    p.add_argument("--base-bits", dest="base_bits", type=float, default=3.5)
    p.add_argument("--residual-bits", dest="residual_bits", type=float, default=3.5)
    p.add_argument("--total-steps", dest="total_steps", type=int, default=8000)
    p.add_argument("--steps", default="100,5000")
    p.add_argument("--report")
    p.set_defaults(fn=_cmd_grad_sim)

    p = sub.add_parser("dist-sim", help="memory/communication accounting and boundary simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--stream-tensors", dest="stream_tensors", type=int, default=0)
    p.add_argument("--tokens", type=int, default=128)
    p.add_argument("--channels", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--compressor", choices=("codec", "rtn"), default="codec")
    p.add_argument("--rtn-bits", dest="rtn_bits", type=int, default=4)
    p.add_argument("--slack-gb", dest="slack_gb", type=float, default=0.5)
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(fn=_cmd_dist_sim)

    p = sub.add_parser("hw-model", help="energy, speedup, and placement modeling")
    hw = p.add_subparsers(dest="hw_cmd", required=True)
    e = hw.add_parser("energy", help="energy-efficiency factor of compressed transfer")
    e.add_argument("--comm", default="nccl", choices=sorted(PROFILES))
    e.add_argument("--codec", default="t264", choices=sorted(CODEC_PAIRS))
    e.add_argument("--ratio", type=float, required=True)
    r = hw.add_parser("ratio", help="coded-bit vs transmitted-bit energy ratio")
    r.add_argument("--comm", default="nccl", choices=sorted(PROFILES))
    r.add_argument("--codec", default="t264", choices=sorted(CODEC_PAIRS))
    pl = hw.add_parser("plan", help="infer (pp, dp) for a model and cluster")
    pl.add_argument("--model-bytes", dest="model_bytes", type=float, required=True)
    pl.add_argument("--memory-bytes", dest="memory_bytes", type=float, required=True)
    pl.add_argument("--devices", type=int, required=True)
    pl.add_argument("--comm", default="nccl")
    sw = hw.add_parser("sweep", help="speedup or energy tables for plotting")
    sw.add_argument("--type", choices=("bandwidth", "model-size"), required=True)
    sw.add_argument("--comm", default="nccl", choices=sorted(PROFILES))
    sw.add_argument("--codec", default="t265", choices=sorted(CODEC_PAIRS))
    sw.add_argument("--ratio", type=float, default=5.0)
    sw.add_argument("--model-bytes", dest="model_bytes", type=float, default=14e9)
    sw.add_argument("--comm-bytes", dest="comm_bytes", type=float, default=1e9)
    sw.add_argument("--compute-s", dest="compute_s", type=float, default=0.05)
    sw.add_argument("--points", required=True, help="comma-separated sweep x values")
    sw.add_argument("--report", required=True)
    p.set_defaults(fn=_cmd_hw_model)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    command = "vcodec " + " ".join(argv)
    try:
        return args.fn(args, command)
    except FileNotFoundError as exc:
        print(f"error: input file not found: {exc.filename}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except FormatError as exc:
        print(f"error: bad input file: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except InfeasibleError as exc:
        print(f"error: infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
