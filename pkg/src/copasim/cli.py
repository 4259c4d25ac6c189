"""Command-line entry point.

Exit codes: 0 success, 1 validation/feasibility violations or failed
checks, 2 usage errors.  Diagnostics go to stderr; data goes to stdout or
files.  All randomness flows from explicit --seed flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

from . import workloads
from .arch import PRESET_NAMES, load_design, preset, validate
from .energy import EnergyParams, memory_energy
from .errors import CopaError, PresetError, ValidationError
from .packaging import DieSpec, TechParams, check_feasibility
from .perf import attribute, result_to_json, run
from .report import generate_report
from .sweeps import run_sweep, summary_dict, sweep_spec_from_json
from .units import parse_bytes

USAGE_ERROR, VIOLATION = 2, 1


def _resolve_design(name_or_path, strict: bool = True):
    """Preset names resolve first, then file paths."""
    try:
        return preset(name_or_path)
    except PresetError:
        pass
    if os.path.exists(name_or_path):
        with open(name_or_path) as f:
            return load_design(f.read(), strict=strict)
    raise ValidationError(
        f"{name_or_path!r} is neither a preset ({', '.join(PRESET_NAMES)}) "
        f"nor a design file"
    )


def _cmd_presets(args):
    for name in PRESET_NAMES:
        if args.verbose:
            d = preset(name)
            llc = d.l3 if d.l3 is not None else d.l2
            print(f"{name}: integration={d.integration.value} "
                  f"llc={llc.capacity_bytes / (1 << 20):g}MB "
                  f"dram={d.dram.total_bandwidth / 1e9:g}GB/s "
                  f"{d.dram.total_capacity_gb:g}GB")
        else:
            print(name)
    return 0


def _cmd_gen(args):
    if args.preset in workloads.HPC_PRESET_NAMES:
        trace = workloads.hpc_preset_trace(args.preset, args.seed)
    elif args.working_set is not None:
        trace = workloads.gen_hpc_trace(
            int(parse_bytes(args.working_set)), args.reuse_fraction,
            args.flop_byte_ratio, args.kernels, args.seed,
            name=args.preset or None)
    else:
        if args.preset is None:
            print("gen: --preset or --working-set is required", file=sys.stderr)
            return USAGE_ERROR
        model = workloads.dl_preset(args.preset, args.mode)
        trace = workloads.gen_dl_trace(model, args.batch, args.seed)
    if args.output:
        workloads.save_trace(trace, args.output)
        print(f"wrote {args.output} ({len(trace.kernels)} kernels, "
              f"footprint {trace.footprint / (1 << 20):.1f}MB)", file=sys.stderr)
    else:
        sys.stdout.write(workloads.trace_to_jsonl(trace))
    return 0


def _cmd_run(args):
    design = _resolve_design(args.design, strict=False)
    violations = validate(design)
    if violations:
        for v in violations:
            print(f"invalid design: {v}", file=sys.stderr)
        return VIOLATION
    trace = workloads.load_trace(args.trace)
    result = run(trace, design)
    breakdown = attribute(trace, design) if args.attribute else None
    energy = memory_energy(result.traffic, EnergyParams())
    print(result_to_json(result, breakdown, energy))
    return 0


def _cmd_package_check(args):
    design = _resolve_design(args.design, strict=False)
    tech = None
    if args.tech:
        tech = (TechParams.stacked_3d() if args.tech == "3d"
                else TechParams.planar_2p5d())
    gpm = DieSpec(args.gpm_area)
    msm = DieSpec(args.msm_area) if args.msm_area else None
    report = check_feasibility(design, tech, gpm, msm)
    arch_violations = validate(design)
    doc = report.to_json_dict()
    doc["design_violations"] = arch_violations
    print(json.dumps(doc, indent=2))
    for v in arch_violations + report.violations:
        print(f"violation: {v}", file=sys.stderr)
    return VIOLATION if (report.violations or arch_violations) else 0


_SWEEP_OUT = {
    "dram_bw_multiplier": "dram_bw.csv",
    "llc_capacity": "llc.csv",
    "l3_link_bw": "link_bw.csv",
    "named_designs": "designs.csv",
    "gpu_count": "scale_out.csv",
}


def _cmd_sweep(args):
    with open(args.spec) as f:
        docs = json.load(f)
    if isinstance(docs, dict):
        docs = [docs]
    os.makedirs(args.output, exist_ok=True)
    jobs = args.jobs or int(os.environ.get("COPA_JOBS", "1"))
    results = {}
    for doc in docs:
        spec = sweep_spec_from_json(doc, _resolve_design)
        result = run_sweep(spec, jobs=jobs)
        fname = doc.get("output", _SWEEP_OUT[spec.axis])
        path = os.path.join(args.output, fname)
        with open(path, "w") as f:
            f.write(result.to_csv())
        print(f"wrote {path}", file=sys.stderr)
        results[fname.removesuffix(".csv")] = result
    summary = os.path.join(args.output, "summary.json")
    with open(summary, "w") as f:
        json.dump(summary_dict(results), f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {summary}", file=sys.stderr)
    return 0


def _cmd_report(args):
    stamp = None
    if args.stamp:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    written = generate_report(args.results_dir, args.output,
                              figures=not args.no_figures, stamp=stamp)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="copa",
        description="Design-space simulator for composable GPU memory systems",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("presets", help="list the named designs")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(fn=_cmd_presets)

    sp = sub.add_parser("gen", help="generate a synthetic trace")
    sp.add_argument("--preset", help="DL or HPC workload preset name")
    sp.add_argument("--mode", choices=["training", "inference"], default="training")
    sp.add_argument("--batch", type=int, default=1)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--working-set", help="HPC: working set size, e.g. 40MB")
    sp.add_argument("--reuse-fraction", type=float, default=0.9)
    sp.add_argument("--flop-byte-ratio", type=float, default=10.0)
    sp.add_argument("--kernels", type=int, default=8)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=_cmd_gen)

    sp = sub.add_parser("run", help="simulate a trace on a design")
    sp.add_argument("--design", required=True, help="preset name or design file")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--attribute", action="store_true",
                    help="include the bottleneck breakdown")
    sp.set_defaults(fn=_cmd_run)

    sp = sub.add_parser("package", help="packaging feasibility checks")
    psub = sp.add_subparsers(dest="package_verb", required=True)
    spc = psub.add_parser("check", help="check a design against budgets")
    spc.add_argument("--design", required=True)
    spc.add_argument("--tech", choices=["2.5d", "3d"])
    spc.add_argument("--gpm-area", type=float, default=826.0)
    spc.add_argument("--msm-area", type=float)
    spc.set_defaults(fn=_cmd_package_check)

    sp = sub.add_parser("sweep", help="run sweeps from a spec file")
    sp.add_argument("--spec", required=True)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--jobs", type=int, default=0,
                    help="worker threads (default: COPA_JOBS or 1)")
    sp.set_defaults(fn=_cmd_sweep)

    sp = sub.add_parser("report", help="summarize sweep CSVs into markdown + figures")
    sp.add_argument("results_dir")
    sp.add_argument("-o", "--output", help="output directory (default: results dir)")
    sp.add_argument("--no-figures", action="store_true")
    sp.add_argument("--stamp", action="store_true",
                    help="include a generation timestamp (off by default for "
                         "reproducible output)")
    sp.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except PresetError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except CopaError as e:
        print(f"error: {e}", file=sys.stderr)
        return VIOLATION
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return VIOLATION


if __name__ == "__main__":
    sys.exit(main())
