"""Command-line front end: format builds, access benchmarks, SpMM and mesh simulations.

Exit codes: 0 success, 1 usage error, 2 data error, 3 correctness failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .incrs import (
    AccessCounter,
    InCrsConfig,
    build_incrs,
    load_incrs,
    ma_ratio_estimate,
    measured_ma_ratio,
    save_incrs,
    storage_ratio_estimate,
    verify_counters,
)
from .matrix import coo_to_csr, matrix_stats
from .mesh import (
    ArchConfig,
    load_arch_config,
    resource_account,
    run_arch,
    table5_configs,
)
from .mmio import MatrixMarketError, load_matrix_market, save_matrix_market
from .spmm import spmm, spmm_a_at
from .synth import generate_synthetic, parse_profile

log = logging.getLogger("sparsemesh")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CORRECTNESS = 0, 1, 2, 3

ACCESS_SCHEMA = "access-bench/v1"
SIM_SCHEMA = "sim/v1"
ACCESS_FIELDS = [
    "dataset", "format", "probes", "rows", "cols", "density", "nz_min", "nz_mean",
    "nz_max", "element_reads", "pointer_reads", "counter_reads", "total_reads",
    "ratio", "predicted_ratio", "storage_ratio", "predicted_storage_ratio",
]
SIM_FIELDS = ["arch", "dataset", "density", "total_cycles", "normalized_latency", "checksum"]
TABLE2_FIELDS = [
    "dataset", "dimension", "density", "nz_min", "nz_mean", "nz_max", "ma_ratio",
    "predicted_ma_ratio", "storage_ratio", "predicted_storage_ratio",
]
TABLE5_FIELDS = ["design", "units", "mesh", "bw_kb_per_cycle", "macs", "buffer_kB"]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class CorrectnessError(Exception):
    pass


@dataclass
class ExperimentSpec:
    """Everything needed to rerun a report row bit-for-bit."""

    operation: str
    dataset: dict
    format: str | None = None
    incrs: dict | None = None
    archs: list = field(default_factory=list)
    output: str | None = None
    seed: int | None = None
    probes: int | None = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers


def _dataset(args):
    """Load ``--input`` or generate ``--profile``; returns (name, csr, source)."""
    if bool(args.input) == bool(args.profile):
        raise UsageError("give exactly one of --input or --profile")
    if args.profile:
        try:
            p = parse_profile(args.profile, seed=args.seed, rows=getattr(args, "rows", None))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        source = {"profile": asdict(p)}
        return args.profile, coo_to_csr(generate_synthetic(p)), source
    path = args.input
    try:
        if path.endswith(".incrs"):
            m = load_incrs(path).base
        else:
            m = coo_to_csr(load_matrix_market(path))
    except (OSError, ValueError, IndexError) as exc:
        raise DataError(str(exc)) from None
    return path, m, {"path": path}


def _incrs_config(args):
    try:
        return InCrsConfig(args.section_size, args.block_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _stats_lines(m):
    s = matrix_stats(m)
    return (f"rows={s.rows} cols={s.cols} nnz={s.nnz} density={s.density:.6g} "
            f"nz_per_row(min,mean,max)=({s.nz_min},{s.nz_mean:.6g},{s.nz_max})")


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _csv_text(schema, spec, fields, rows):
    buf = io.StringIO()
    buf.write(f"#schema={schema} spec={spec.to_json()}\n")
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#schema="):
            raise DataError(f"{path}: missing schema line")
        schema = first[len("#schema="):].split(" ", 1)[0]
        return schema, list(csv.DictReader(fh))


# --------------------------------------------------------------- commands


def cmd_convert(args):
    name, m, _ = _dataset(args)
    if not args.out:
        raise UsageError("convert needs --out")
    if args.format == "incrs":
        cfg = _incrs_config(args)
        try:
            im = build_incrs(m, cfg)
        except OverflowError as exc:
            raise DataError(str(exc)) from None
        save_incrs(args.out, im)
        print(_stats_lines(m))
        print(f"counters={len(im.counters)} storage_ratio={im.storage_ratio():.4f} "
              f"predicted_storage_ratio={storage_ratio_estimate(m.density, cfg.section_size):.4f}"
              if m.nnz else f"counters={len(im.counters)}")
    else:
        save_matrix_market(args.out, m)
        print(_stats_lines(m))
    return EXIT_OK


def cmd_stats(args):
    name, m, _ = _dataset(args)
    print(_stats_lines(m))
    if args.input and args.input.endswith(".incrs"):
        im = load_incrs(args.input)
        cfg = im.config
        print(f"section_size={cfg.section_size} block_size={cfg.block_size} "
              f"counters={len(im.counters)} storage_ratio={im.storage_ratio():.4f}")
    return EXIT_OK


def cmd_verify(args):
    if not args.input or not args.input.endswith(".incrs"):
        raise UsageError("verify needs --input FILE.incrs")
    try:
        im = load_incrs(args.input)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    bad = verify_counters(im)
    if bad:
        print(f"FAIL: {len(bad)} counter vectors disagree, first at (row, section)={bad[0]}")
        return EXIT_DATA
    print(f"OK: {len(im.counters)} counter vectors consistent")
    return EXIT_OK


def cmd_access_bench(args):
    name, m, source = _dataset(args)
    cfg = _incrs_config(args)
    spec = ExperimentSpec("access-bench", source, format="crs,incrs", incrs=asdict(cfg),
                          output=args.out, seed=args.seed, probes=args.probes)
    rows = []
    if args.probes > 0:
        try:
            ratio, crs_ctr, incrs_ctr = measured_ma_ratio(m, cfg, args.probes, seed=args.seed or 0)
        except OverflowError as exc:
            raise DataError(str(exc)) from None
        s = matrix_stats(m)
        im = build_incrs(m, cfg)
        common = {
            "dataset": name, "probes": args.probes, "rows": s.rows, "cols": s.cols,
            "density": f"{s.density:.6g}", "nz_min": s.nz_min, "nz_mean": f"{s.nz_mean:.6g}",
            "nz_max": s.nz_max, "ratio": f"{ratio:.6g}",
            "predicted_ratio": f"{ma_ratio_estimate(s.cols, s.density, cfg.block_size):.6g}",
            "storage_ratio": f"{im.storage_ratio():.6g}",
            "predicted_storage_ratio": (f"{storage_ratio_estimate(s.density, cfg.section_size):.6g}"
                                        if s.density > 0 else "0"),
        }
        for fmt, ctr in (("crs", crs_ctr), ("incrs", incrs_ctr)):
            rows.append({**common, "format": fmt, "element_reads": ctr.element_reads,
                         "pointer_reads": ctr.pointer_reads, "counter_reads": ctr.counter_reads,
                         "total_reads": ctr.total})
    _write_text(args.out, _csv_text(ACCESS_SCHEMA, spec, ACCESS_FIELDS, rows))
    return EXIT_OK


def cmd_spmm(args):
    name, a, source = _dataset(args)
    ctr = None
    if args.aat:
        result = spmm_a_at(a)
    else:
        if args.second:
            try:
                b = coo_to_csr(load_matrix_market(args.second))
            except (OSError, ValueError, IndexError) as exc:
                raise DataError(str(exc)) from None
        else:
            b = a
        if a.cols != b.rows:
            raise DataError(f"dimension mismatch: {a.shape} x {b.shape}")
        ctr = AccessCounter()
        rhs = build_incrs(b, _incrs_config(args)) if args.format == "incrs" else b
        result = spmm(a, rhs, ctr)
    print(_stats_lines(result))
    if ctr is not None:
        print(f"format={args.format} " + " ".join(f"{k}={v}" for k, v in ctr.as_dict().items()))
    if args.out:
        spec = ExperimentSpec("spmm-aat" if args.aat else "spmm", source, format=args.format,
                              output=args.out, seed=args.seed)
        save_matrix_market(args.out, result, comment=f"spec: {spec.to_json()}")
    return EXIT_OK


def _arch_configs(args):
    if args.config:
        try:
            return [load_arch_config(path) for path in args.config]
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    names = args.arch or ["table5"]
    try:
        parity = table5_configs(args.mesh, args.round)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = []
    for name in names:
        if name == "table5":
            out.extend(parity.values())
        elif name == "fpic":
            out.append(ArchConfig.fpic(args.units))
        elif name == "conventional" and args.conv_mesh:
            out.append(ArchConfig.conventional(args.conv_mesh))
        elif name in parity:
            out.append(parity[name])
        else:
            raise UsageError(f"mesh {args.mesh} has no whole-unit {name} counterpart")
    return out


def cmd_sim(args):
    name, a, source = _dataset(args)
    if args.second:
        try:
            b = coo_to_csr(load_matrix_market(args.second))
        except (OSError, ValueError, IndexError) as exc:
            raise DataError(str(exc)) from None
        if a.cols != b.rows:
            raise DataError(f"dimension mismatch: {a.shape} x {b.shape}")
    else:
        b = a.transpose()
    configs = _arch_configs(args)
    spec = ExperimentSpec("sim", source, archs=[_config_dict(c) for c in configs],
                          output=args.out, seed=args.seed)
    reports = []
    for cfg in configs:
        log.info("simulating %s on %s", cfg.name, name)
        reports.append(run_arch(a, b, cfg))

    checksums = {r.checksum for r in reports}
    if len(checksums) > 1:
        detail = ", ".join(f"{r.arch}={r.checksum[:12]}" for r in reports)
        raise CorrectnessError(f"result checksums disagree across architectures: {detail}")

    ref = next((r for r in reports if r.config.arch.value == "syncmesh"), reports[0])
    rows = []
    for r in reports:
        norm = r.total_cycles / ref.total_cycles if ref.total_cycles else float("nan")
        rows.append({"arch": r.arch, "dataset": name, "density": f"{a.density:.6g}",
                     "total_cycles": f"{r.total_cycles:.6g}",
                     "normalized_latency": f"{norm:.6g}", "checksum": r.checksum})
    csv_text = _csv_text(SIM_SCHEMA, spec, SIM_FIELDS, rows)
    if args.out:
        doc = {"schema": SIM_SCHEMA, "spec": json.loads(spec.to_json()), "dataset": name,
               "density": a.density, "reports": [r.to_json_dict() for r in reports]}
        with open(f"{args.out}.json", "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
        _write_text(f"{args.out}.csv", csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _config_dict(cfg):
    d = asdict(cfg)
    d["arch"] = cfg.arch.value
    return d


def _table5_row(cfg):
    res = resource_account(cfg)
    n = cfg.mesh_dim
    return {"design": cfg.name, "units": cfg.unit_count, "mesh": f"{n}x{n}",
            "bw_kb_per_cycle": f"{res.bandwidth_kb_per_cycle:g}", "macs": res.mac_units,
            "buffer_kB": f"{res.buffer_kB:g}" if res.buffer_kB else "-"}


def cmd_report(args):
    table2, table5 = [], {}
    for path in args.inputs:
        if path.endswith(".json"):
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except (OSError, ValueError) as exc:
                raise DataError(f"{path}: {exc}") from None
            if doc.get("schema") != SIM_SCHEMA:
                raise DataError(f"{path}: schema {doc.get('schema')!r}, expected {SIM_SCHEMA!r}")
            for rep in doc["reports"]:
                c = dict(rep["config"])
                table5[c["name"]] = _table5_row(ArchConfig(**c))
        else:
            try:
                schema, rows = _read_csv(path)
            except OSError as exc:
                raise DataError(str(exc)) from None
            if schema != ACCESS_SCHEMA:
                raise DataError(f"{path}: schema {schema!r}, expected {ACCESS_SCHEMA!r}")
            for row in rows:
                if row["format"] != "incrs":
                    continue
                table2.append({
                    "dataset": row["dataset"], "dimension": f"{row['rows']}x{row['cols']}",
                    "density": row["density"], "nz_min": row["nz_min"],
                    "nz_mean": row["nz_mean"], "nz_max": row["nz_max"],
                    "ma_ratio": row["ratio"], "predicted_ma_ratio": row["predicted_ratio"],
                    "storage_ratio": row["storage_ratio"],
                    "predicted_storage_ratio": row["predicted_storage_ratio"],
                })
    if args.mesh:
        try:
            for cfg in table5_configs(args.mesh, args.round).values():
                table5[cfg.name] = _table5_row(cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    table2.sort(key=lambda r: r["dataset"])
    order = ["syncmesh", "fpic-same-bw", "fpic-same-buffer", "conventional"]
    t5 = sorted(table5.values(), key=lambda r: (order.index(r["design"])
                                               if r["design"] in order else len(order), r["design"]))
    buf = io.StringIO()
    for title, fields, rows in (("table2", TABLE2_FIELDS, table2), ("table5", TABLE5_FIELDS, t5)):
        buf.write(f"# {title}\n")
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="sparsemesh", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def dataset_args(sp):
        sp.add_argument("--input", help="Matrix Market (.mtx) or InCRS (.incrs) file")
        sp.add_argument("--profile", help="synthetic profile 'M,N,D[,seed]' or a preset name")
        sp.add_argument("--rows", type=int, help="override the profile row count")
        sp.add_argument("--seed", type=int, default=None)

    def incrs_args(sp):
        sp.add_argument("--section-size", type=int, default=256)
        sp.add_argument("--block-size", type=int, default=32)

    sp = sub.add_parser("convert", help="write a matrix as InCRS binary or Matrix Market")
    dataset_args(sp)
    incrs_args(sp)
    sp.add_argument("--format", choices=["crs", "incrs"], default="incrs")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("stats", help="print matrix statistics")
    dataset_args(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("verify", help="check InCRS counters against a full scan")
    sp.add_argument("--input")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("access-bench", help="CRS vs InCRS word reads over column gathers")
    dataset_args(sp)
    incrs_args(sp)
    sp.add_argument("--probes", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_access_bench)

    sp = sub.add_parser("spmm", help="instrumented software SpMM")
    dataset_args(sp)
    incrs_args(sp)
    sp.add_argument("--second", help="right operand (.mtx); defaults to the input itself")
    sp.add_argument("--aat", action="store_true", help="compute A x A^T")
    sp.add_argument("--format", choices=["crs", "incrs"], default="incrs")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_spmm)

    sp = sub.add_parser("sim", help="simulate mesh architectures (A x A^T by default)")
    dataset_args(sp)
    sp.add_argument("--second", help="right operand (.mtx) instead of A^T")
    sp.add_argument("--arch", action="append",
                    choices=["table5", "syncmesh", "fpic", "fpic-same-bw", "fpic-same-buffer",
                             "conventional"])
    sp.add_argument("--config", action="append", help="key=value architecture file")
    sp.add_argument("--mesh", type=int, default=64, help="synchronized mesh edge")
    sp.add_argument("--units", type=int, default=1, help="FPIC unit count for --arch fpic")
    sp.add_argument("--round", type=int, default=32)
    sp.add_argument("--conv-mesh", type=int, help="override the parity-sized dense mesh edge")
    sp.add_argument("--out", help="output prefix for .json and .csv")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("report", help="merge access-bench CSVs and sim JSONs into tables")
    sp.add_argument("inputs", nargs="*")
    sp.add_argument("--mesh", type=int, help="add the parity-sized design table for this mesh")
    sp.add_argument("--round", type=int, default=32)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sparsemesh: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MatrixMarketError) as exc:
        print(f"sparsemesh: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CorrectnessError as exc:
        print(f"sparsemesh: correctness failure: {exc}", file=sys.stderr)
        return EXIT_CORRECTNESS


if __name__ == "__main__":
    sys.exit(main())
