"""Command-line front-end: structure learning, experiments, synthesis, energy.

Subcommands:
  structure  learn a tree structure (and column codec) from a dataset
  run        execute a distributed-learning experiment, write results CSV
  synth      sample a labeled dataset from a given integer model
  energy     tabulate the centralized vs parallel energy estimate
  report     render figures from results and energy CSVs

Configuration is a flat key=value text file whose keys mirror the experiment
settings plus `label` and `numeric_columns` for dataset preparation. Exit
codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from hashlib import sha256
from pathlib import Path

from .data import DatasetCodec, load_codec, read_csv_dataset, save_codec, write_csv_dataset
from .energy import PRESETS, EnergyParams, scaling_curves
from .graph import StructureGraph, chow_liu, read_structure, validate_tree, write_structure
from .intmodel import IntParams
from .simulator import (
    RESULTS_HEADER,
    ExperimentConfig,
    RunResult,
    derive_seed,
    run,
    split_holdout,
    synth_tree_data,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DEFAULT_M_RANGE = "1,2,4,8,16,32,64,128"


class UsageError(Exception):
    """Bad invocation or malformed configuration."""


class DataError(Exception):
    """Unreadable or inconsistent input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def parse_kv_file(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key in out:
            raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _build_config(mapping: dict[str, str], seed_override: int | None) -> tuple[ExperimentConfig, dict]:
    mapping = dict(mapping)
    label = mapping.pop("label", None)
    numeric_raw = mapping.pop("numeric_columns", "auto")
    if numeric_raw == "auto":
        numeric_columns: str | tuple[str, ...] = "auto"
    else:
        numeric_columns = tuple(v.strip() for v in numeric_raw.split(",") if v.strip())
    if seed_override is not None:
        mapping["seed"] = str(seed_override)
    try:
        config = ExperimentConfig.from_mapping(mapping)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config, {"label": label, "numeric_columns": numeric_columns}


def _read_dataset(path) -> tuple[list[str], list[tuple[str, ...]]]:
    try:
        return read_csv_dataset(path)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _load_structure(path) -> StructureGraph:
    try:
        structure = read_structure(path)
    except OSError as exc:
        raise DataError(f"cannot read structure {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    problem = validate_tree(structure)
    if problem is not None:
        raise DataError(f"{path}: structure is not a tree: {problem}")
    return structure


def _split(rows, config: ExperimentConfig):
    try:
        return split_holdout(rows, config.holdout_size, derive_seed(config.seed, "holdout"))
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _fit_codec(header, holdout, data_opts, config: ExperimentConfig) -> DatasetCodec:
    if not data_opts["label"]:
        raise UsageError("config must set label=<column name>")
    try:
        return DatasetCodec.fit(header, holdout, data_opts["label"], data_opts["numeric_columns"], config.bins)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def codec_sidecar_path(structure_path) -> Path:
    return Path(str(structure_path) + ".codec.json")


def _check_consistency(structure: StructureGraph, codec: DatasetCodec, header: list[str]) -> None:
    if tuple(header) != tuple(c.name for c in codec.columns):
        raise DataError("dataset columns do not match the codec's schema")
    structure_names = tuple(v.name for v in structure.variables)
    codec_names = tuple("_".join(c.name.split()) or "_" for c in codec.columns)
    if structure_names != codec_names:
        raise DataError("structure variables do not match the dataset columns")
    if structure.arities != tuple(c.arity for c in codec.columns):
        raise DataError(
            f"arity mismatch between structure {structure.arities} and encoded dataset "
            f"{tuple(c.arity for c in codec.columns)}"
        )
    if structure.label_index() != codec.label_column():
        raise DataError("structure and codec disagree on the label column")


def _results_csv(result: RunResult, run_id: str) -> str:
    lines = [",".join(RESULTS_HEADER)]
    for r in result.records:
        lines.append(
            f"{r.t},{r.cum_errors},{r.cum_samples},{r.bytes_up},{r.bytes_down},"
            f"{r.violations},{r.full_syncs},{r.partial_syncs}"
        )
    last = result.records[-1]
    lines.append(
        f"# final_error_rate={last.error_rate:.6f} total_bytes={last.bytes_up + last.bytes_down} run_id={run_id}"
    )
    return "\n".join(lines) + "\n"


def cmd_structure(args) -> int:
    config, data_opts = _build_config(parse_kv_file(args.config), args.seed)
    header, rows = _read_dataset(args.dataset)
    holdout, _ = _split(rows, config)
    codec = _fit_codec(header, holdout, data_opts, config)
    try:
        structure = chow_liu(codec.encode_rows(holdout), codec.variable_specs())
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    write_structure(structure, args.out)
    save_codec(codec, codec_sidecar_path(args.out))
    print(
        f"structure: {structure.n_vertices} variables, {len(structure.edges)} edges -> {args.out} "
        f"(codec: {codec_sidecar_path(args.out)})"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    config, data_opts = _build_config(parse_kv_file(args.config), args.seed)
    header, rows = _read_dataset(args.dataset)
    structure = _load_structure(args.structure)
    holdout, rest = _split(rows, config)
    sidecar = codec_sidecar_path(args.structure)
    if sidecar.exists():
        try:
            codec = load_codec(sidecar)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot read codec sidecar {sidecar}: {exc}") from exc
    else:
        codec = _fit_codec(header, holdout, data_opts, config)
    _check_consistency(structure, codec, header)
    stream = codec.encode_rows(rest)
    result = run(config, structure, stream, threads=args.threads)
    if not result.records:
        raise DataError(
            f"dataset too small: {len(stream)} stream rows cannot fill one round of "
            f"{config.learners} learners x batch_size {config.batch_size}"
        )
    payload = Path(args.config).read_bytes() + b"\0" + Path(args.structure).read_bytes() + b"\0" + str(config.seed).encode()
    run_id = sha256(payload).hexdigest()[:12]
    Path(args.out).write_text(_results_csv(result, run_id), encoding="utf-8")
    last = result.records[-1]
    print(
        f"rounds={last.t} final_error_rate={last.error_rate:.6f} "
        f"total_bytes={last.bytes_up + last.bytes_down} -> {args.out}"
    )
    return EXIT_OK


def _read_theta_file(path) -> tuple[int, list[int]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read theta file {path}: {exc}") from exc
    bits: int | None = None
    theta: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if bits is None:
            if len(parts) != 2 or parts[0] != "bits":
                raise DataError(f"{path}:{lineno}: first line must be `bits <k>`")
            try:
                bits = int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad bit count {parts[1]!r}") from None
            continue
        for tok in parts:
            try:
                theta.append(int(tok))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad parameter value {tok!r}") from None
    if bits is None:
        raise DataError(f"{path}: empty theta file")
    return bits, theta


def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    structure = _load_structure(args.structure)
    bits, theta = _read_theta_file(args.theta)
    try:
        params = IntParams(structure, bits, tuple(theta))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    rows = synth_tree_data(structure, params, args.n, derive_seed(args.seed, "synth"))
    write_csv_dataset(args.out, [v.name for v in structure.variables], rows)
    print(f"wrote {len(rows)} rows over {structure.n_vertices} variables -> {args.out}")
    return EXIT_OK


def _parse_m_range(spec: str) -> list[int]:
    values: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                pieces = [int(v) for v in part.split(":")]
                if len(pieces) == 2:
                    lo, hi, step = pieces[0], pieces[1], 1
                elif len(pieces) == 3:
                    lo, hi, step = pieces
                else:
                    raise ValueError
                if step < 1 or hi < lo:
                    raise ValueError
                values.extend(range(lo, hi + 1, step))
            else:
                values.append(int(part))
        except ValueError:
            raise UsageError(f"bad m-range entry {part!r} (use `m` or `lo:hi[:step]`)") from None
    if not values:
        raise UsageError("empty m-range")
    return values


def cmd_energy(args) -> int:
    if args.params and args.preset:
        raise UsageError("choose either --params or --preset, not both")
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; available: {', '.join(sorted(PRESETS))}")
        params = PRESETS[args.preset]
    elif args.params:
        try:
            params = EnergyParams.from_mapping(parse_kv_file(args.params))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        params = PRESETS["3g-low"]
    rows = scaling_curves(params, _parse_m_range(args.m_range))
    lines = ["m,central_wh,parallel_wh,ratio"]
    for m, e_c, e_p, ratio in rows:
        lines.append(f"{m},{e_c:.12g},{e_p:.12g},{ratio:.12g}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} rows -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from . import report

    try:
        written = report.render_report(args.results, args.energy, args.out)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="intfam", description="Distributed integer model learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("structure", help="learn a tree structure from a dataset")
    s.add_argument("--config", required=True, help="key=value experiment config")
    s.add_argument("--dataset", required=True, help="input CSV with header row")
    s.add_argument("--out", required=True, help="output structure file")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.set_defaults(func=cmd_structure)

    r = sub.add_parser("run", help="run a distributed learning experiment")
    r.add_argument("--config", required=True, help="key=value experiment config")
    r.add_argument("--dataset", required=True, help="input CSV with header row")
    r.add_argument("--structure", required=True, help="structure file from `structure`")
    r.add_argument("--out", required=True, help="output results CSV")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--threads", type=int, default=1, help="parallel learner workers")
    r.set_defaults(func=cmd_run)

    y = sub.add_parser("synth", help="sample a dataset from an integer model")
    y.add_argument("--structure", required=True, help="structure file")
    y.add_argument("--theta", required=True, help="theta file: `bits <k>` then one value per line")
    y.add_argument("--n", type=int, required=True, help="number of rows to sample")
    y.add_argument("--out", required=True, help="output dataset CSV")
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_synth)

    e = sub.add_parser("energy", help="tabulate the energy estimate across learner counts")
    e.add_argument("--params", default=None, help="key=value energy parameter file")
    e.add_argument("--preset", default=None, help=f"named parameter preset ({', '.join(sorted(PRESETS))})")
    e.add_argument("--m-range", default=DEFAULT_M_RANGE, help="learner counts: `m,...` or `lo:hi[:step]`")
    e.add_argument("--out", required=True, help="output table CSV")
    e.set_defaults(func=cmd_energy)

    p = sub.add_parser("report", help="render figures from results/energy CSVs")
    p.add_argument("--results", nargs="*", default=[], help="results CSV files")
    p.add_argument("--energy", default=None, help="energy table CSV")
    p.add_argument("--out", required=True, help="output directory for figures")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # intentionally broad: anything else is an internal fault
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
