"""Command-line entry point.

Subcommands: simulate, design, predict, store {ingest,list,retrieve}, bench,
eval. Configuration comes from an optional JSON file (--config) with flags
overriding it; the API key for live runs comes only from the environment.
All outputs land in a run-stamped subdirectory of the output directory.

Exit codes: 0 success (including non-converged designs), 2 usage/config/
validation errors, 3 transport errors, 4 parse failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluate as ev
from .dissolution import derived_metrics, psd_from_lognormal, simulate_dissolution
from .errors import (
    FormukitError,
    ParseError,
    RequestError,
    TransportError,
    ValidationError,
)
from .inverse import DesignSpec, LognormalParameterization, design_psd, design_report
from .llm import LLMClient, LLMConfig, TranscriptRecorder, make_backend
from .prompts import (
    STRATEGY_ALIASES,
    build_prompt,
    parse_profile_response,
    validate_profile,
)
from .store import (
    VERBATIM_TO_CANONICAL,
    RecordStore,
    import_verbatim_file,
    load_records,
)
from .svgplot import profile_overlay_svg
from .types import (
    DEFAULT_OUTPUT_GRID_HR,
    FEATURE_NAMES,
    DissolutionConditions,
    DissolutionProfile,
    FormulationInput,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRANSPORT = 3
EXIT_PARSE = 4


@dataclass
class AppConfig:
    llm: LLMConfig = field(default_factory=LLMConfig)
    conditions: DissolutionConditions = field(default_factory=DissolutionConditions)
    store_path: str = "formukit_store.jsonl"
    fixtures_path: str | None = None
    output_dir: str = "formukit_out"
    seed: int = 0

    @classmethod
    def load(cls, path: str | None) -> "AppConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        known_cond = {f for f in DissolutionConditions.__dataclass_fields__}
        cond_kwargs = {k: v for k, v in obj.get("conditions", {}).items() if k in known_cond}
        return cls(
            llm=LLMConfig.from_dict(obj.get("llm", {})),
            conditions=DissolutionConditions(**cond_kwargs),
            store_path=obj.get("store_path", cls.store_path),
            fixtures_path=obj.get("fixtures_path"),
            output_dir=obj.get("output_dir", cls.output_dir),
            seed=int(obj.get("seed", 0)),
        )


def _run_dir(config: AppConfig, args) -> Path:
    base = Path(args.output_dir or config.output_dir)
    stamp = args.run_id or time.strftime("run-%Y%m%d-%H%M%S", time.gmtime())
    path = base / stamp
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_features(args) -> FormulationInput:
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            obj = json.load(fh)
        if isinstance(obj, dict) and "Input" in obj:
            obj = obj["Input"]
        canonical = {}
        for key, value in obj.items():
            name = VERBATIM_TO_CANONICAL.get(key, key)
            if name in FEATURE_NAMES:
                canonical[name] = float(value)
        missing = [n for n in ("d50_um",) if n not in canonical]
        if missing:
            raise ValidationError(
                f"input file {args.input} is missing required field(s): {', '.join(missing)}")
        return FormulationInput(**canonical)
    if args.d50 is None:
        raise ValidationError("provide --input FILE or --d50 (required field: d50_um)")
    kwargs = {"d50_um": args.d50}
    for flag, name in (("aspect_ratio", "aspect_ratio"), ("roundness", "roundness"),
                       ("solubility", "solubility_mg_ml"), ("diffusivity", "diffusivity_m2_s"),
                       ("density", "true_density_g_ml"), ("ssa", "ssa_m2_g"),
                       ("vol_eq", "vol_eq_um")):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[name] = value
    return FormulationInput(**kwargs)


def _conditions_with_overrides(config: AppConfig, args) -> DissolutionConditions:
    overrides = {}
    for flag, name in (("medium_volume", "medium_volume_ml"), ("dose", "dose_mg"),
                       ("rpm", "paddle_rpm"), ("velocity_factor", "velocity_factor")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "sink", False):
        overrides["sink_override"] = True
    if not overrides:
        return config.conditions
    base = {f: getattr(config.conditions, f)
            for f in DissolutionConditions.__dataclass_fields__}
    base.update(overrides)
    return DissolutionConditions(**base)


def _parse_grid(text: str | None):
    if not text:
        return DEFAULT_OUTPUT_GRID_HR
    return tuple(float(tok) for tok in text.split(","))


def _write_profile_csv(path: Path, profile: DissolutionProfile) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time_hr", "released_pct"])
        for t, v in profile.points():
            writer.writerow([repr(float(t)), repr(float(v))])


def _read_profile_file(path: str) -> DissolutionProfile:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".csv"):
        rows = list(csv.reader(text.splitlines()))
        if not rows or rows[0][:2] != ["time_hr", "released_pct"]:
            raise ValidationError(f"{path}: expected header time_hr,released_pct")
        points = [(float(t), float(v)) for t, v, *_ in rows[1:] if t.strip()]
        return DissolutionProfile.from_points(points)
    return parse_profile_response(text)


def _write_profile_json(path: Path, profile: DissolutionProfile) -> None:
    from .prompts import render_profile_json

    path.write_text(render_profile_json(profile) + "\n", encoding="utf-8")


def _open_store(config: AppConfig, args) -> RecordStore:
    return RecordStore(getattr(args, "store", None) or config.store_path)


def _load_dataset(path: str):
    if path.endswith(".jsonl"):
        return load_records(path)
    return import_verbatim_file(path)


def cmd_simulate(config: AppConfig, args) -> int:
    features = _load_features(args)
    conditions = _conditions_with_overrides(config, args)
    psd = psd_from_lognormal(features.d50_um, args.geo_sigma, args.n_bins)
    grid = _parse_grid(args.grid)
    profile = simulate_dissolution(features.drug(), features.morphology(), psd,
                                   conditions, grid)
    out = _run_dir(config, args)
    _write_profile_csv(out / "profile.csv", profile)
    _write_profile_json(out / "profile.json", profile)
    if args.svg:
        (out / "profile.svg").write_text(
            profile_overlay_svg(None, {"simulated": profile}), encoding="utf-8")
    ssa, vol_eq = derived_metrics(psd, features.morphology(), features.drug())
    print(f"simulated release for d50={features.d50_um:g} um "
          f"(geo_sigma={args.geo_sigma:g}, {args.n_bins} bins); "
          f"derived SSA {ssa:.4g} m^2/g, vol-eq size {vol_eq:.4g} um")
    print("time_hr,released_pct")
    for t, v in profile.points():
        print(f"{t:g},{v:.4f}")
    print(f"outputs: {out}")
    return EXIT_OK


def cmd_design(config: AppConfig, args) -> int:
    target = _read_profile_file(args.target)
    if args.d50_bounds:
        lo, hi = (float(x) for x in args.d50_bounds.split(","))
    else:
        lo, hi = 5.0, 1000.0
    if args.sigma_bounds:
        slo, shi = (float(x) for x in args.sigma_bounds.split(","))
    else:
        slo, shi = 1.01, 3.0
    features = _load_features(args) if (args.input or args.d50 is not None) else \
        FormulationInput(d50_um=args.start_d50)
    spec = DesignSpec(
        target=target,
        drug=features.drug(),
        morph=features.morphology(),
        conditions=_conditions_with_overrides(config, args),
        parameterization=LognormalParameterization(args.start_d50, args.start_sigma,
                                                   n_bins=args.n_bins),
        bounds=((lo, hi), (slo, shi)),
    )
    result = design_psd(spec, seed=args.seed if args.seed is not None else config.seed,
                        n_starts=args.n_starts)
    out = _run_dir(config, args)
    report = design_report(result, spec)
    payload = {
        "parameters": result.parameters,
        "d50_um": result.psd.d50_um,
        "residual_mse_pct2": result.residual_mse,
        "iterations": result.iterations,
        "converged": result.converged,
        "start_index": result.start_index,
        "achieved": [[float(t), float(v)] for t, v in result.achieved.points()],
    }
    (out / "design.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    (out / "design_report.txt").write_text(report, encoding="utf-8")
    _write_profile_csv(out / "achieved.csv", result.achieved)
    print(report)
    print(f"outputs: {out}")
    return EXIT_OK


def _build_client(config: AppConfig, args, recorder: TranscriptRecorder) -> LLMClient:
    backend = make_backend(args.backend, config.llm,
                           replay_path=getattr(args, "replay", None),
                           conditions=config.conditions)
    return LLMClient(config=config.llm, backend=backend, recorder=recorder,
                     seed=args.seed if args.seed is not None else config.seed)


def _examples_for_predict(config: AppConfig, args, features: FormulationInput):
    strategy = STRATEGY_ALIASES[args.strategy]
    if not strategy.needs_examples:
        return None
    if strategy.name == "RAG":
        store = _open_store(config, args)
        hits = store.retrieve(features, k=args.k)
        return [record for record, _ in hits]
    if args.examples:
        return _load_dataset(args.examples)
    raise ValidationError(f"strategy {args.strategy} requires --examples FILE")


def cmd_predict(config: AppConfig, args) -> int:
    if args.strategy not in STRATEGY_ALIASES:
        raise ValidationError(f"unknown strategy {args.strategy!r}")
    features = _load_features(args)
    strategy = STRATEGY_ALIASES[args.strategy]
    examples = _examples_for_predict(config, args, features)
    prompt = build_prompt(strategy, features, examples=examples)
    out = _run_dir(config, args)
    recorder = TranscriptRecorder(out / "transcript.jsonl")
    client = _build_client(config, args, recorder)
    result = client.complete(prompt)
    profile, report = parse_profile_response(result.text, full_output=True)
    _write_profile_csv(out / "profile.csv", profile)
    _write_profile_json(out / "profile.json", profile)
    findings = validate_profile(profile)
    (out / "parse_report.json").write_text(json.dumps({
        "parse": report.to_dict(),
        "rule_findings": [{"rule": f.rule, "severity": f.severity, "message": f.message}
                          for f in findings],
    }, indent=2) + "\n", encoding="utf-8")
    print(f"strategy {strategy.value} via {args.backend} backend")
    print("time_hr,released_pct")
    for t, v in profile.points():
        print(f"{t:g},{v:.4f}")
    for finding in findings:
        print(f"[{finding.severity}] {finding.rule}: {finding.message}")
    print(f"outputs: {out}")
    return EXIT_OK


def cmd_store(config: AppConfig, args) -> int:
    if args.store_cmd == "ingest":
        store = _open_store(config, args)
        records = _load_dataset(args.file)
        for record in records:
            store.ingest(record, overwrite=args.overwrite)
        print(f"ingested {len(records)} record(s) into {store.path} "
              f"(store size {len(store)})")
        return EXIT_OK
    if args.store_cmd == "list":
        store = _open_store(config, args)
        print(f"{'id':<20} {'d50_um':>8} {'ssa_m2_g':>9} {'provenance':>12}  source")
        for record in store.records:
            print(f"{record.id:<20} {record.features.d50_um:>8g} "
                  f"{record.features.ssa_m2_g:>9g} {record.provenance:>12}  {record.source}")
        print(f"{len(store)} record(s)")
        return EXIT_OK
    if args.store_cmd == "retrieve":
        store = _open_store(config, args)
        query_fields = {"d50_um": args.d50}
        for flag, name in (("ssa", "ssa_m2_g"), ("vol_eq", "vol_eq_um"),
                           ("aspect_ratio", "aspect_ratio"), ("roundness", "roundness")):
            value = getattr(args, flag, None)
            if value is not None:
                query_fields[name] = value
        query = FormulationInput(**query_fields)
        hits = store.retrieve(query, k=args.k, feature_subset=tuple(query_fields))
        print(f"{'rank':<5} {'id':<20} {'score':>10} {'d50_um':>8}")
        for rank, (record, score) in enumerate(hits, start=1):
            print(f"{rank:<5} {record.id:<20} {score:>10.6f} {record.features.d50_um:>8g}")
        return EXIT_OK
    raise ValidationError(f"unknown store subcommand {args.store_cmd!r}")


def cmd_bench(config: AppConfig, args) -> int:
    dataset = _load_dataset(args.dataset)
    store = _open_store(config, args) if args.store else None
    out = _run_dir(config, args)
    recorder = TranscriptRecorder(out / "transcripts.jsonl")
    client = _build_client(config, args, recorder)
    result = ev.run_benchmark(dataset, client=client, store=store)
    (out / "report.txt").write_text(result.report.to_text(), encoding="utf-8")
    (out / "report.csv").write_text(result.report.to_csv(), encoding="utf-8")
    (out / "report.json").write_text(result.report.to_json(), encoding="utf-8")
    (out / "residuals.csv").write_text(result.residuals_csv(), encoding="utf-8")
    for rec_id, reference in result.references.items():
        curves = {s: result.predictions[s][rec_id]
                  for s in result.predictions if rec_id in result.predictions[s]}
        if curves:
            svg = profile_overlay_svg(reference, curves, title=f"record {rec_id}")
            (out / f"overlay_{rec_id}.svg").write_text(svg, encoding="utf-8")
    print(result.report.to_text())
    print(f"outputs: {out}")
    if all(not row.evaluable for row in result.report.rows):
        print("error: every strategy was unevaluable (all parses failed)", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


def cmd_eval(config: AppConfig, args) -> int:
    reference = _read_profile_file(args.reference)
    predicted = _read_profile_file(args.predicted)
    pair = ev.align_profiles(reference, predicted)
    metrics = {"mse_pct2": ev.mse(pair), "r_squared": ev.r_squared(pair), "n": pair.n}
    out = _run_dir(config, args)
    (out / "eval.json").write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    print(f"MSE: {metrics['mse_pct2']:.6g} %^2")
    print(f"R^2: {metrics['r_squared']:.6g}")
    print(f"n:   {metrics['n']}")
    print(f"outputs: {out}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--output-dir", help="base directory for run outputs")
    parser.add_argument("--run-id", help="name of the run subdirectory (default: timestamp)")
    parser.add_argument("--seed", type=int, help="seed for stochastic components")


def _add_feature_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="formulation JSON file (canonical or verbatim keys)")
    parser.add_argument("--d50", type=float, help="mass-median particle size [um]")
    parser.add_argument("--aspect-ratio", dest="aspect_ratio", type=float,
                        help="particle aspect ratio [-], >= 1")
    parser.add_argument("--roundness", type=float, help="particle roundness [-], (0, 1]")
    parser.add_argument("--solubility", type=float, help="drug solubility [mg/mL]")
    parser.add_argument("--diffusivity", type=float, help="diffusion coefficient [m^2/s]")
    parser.add_argument("--density", type=float, help="true density [g/mL]")
    parser.add_argument("--ssa", type=float, help="specific surface area [m^2/g]")
    parser.add_argument("--vol-eq", dest="vol_eq", type=float,
                        help="volume-equivalent particle size [um]")


def _add_condition_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--medium-volume", dest="medium_volume", type=float,
                        help="dissolution medium volume [mL]")
    parser.add_argument("--dose", type=float, help="drug dose [mg]")
    parser.add_argument("--rpm", type=float, help="paddle speed [rev/min]")
    parser.add_argument("--velocity-factor", dest="velocity_factor", type=float,
                        help="fraction of paddle tip speed felt by particles [-]")
    parser.add_argument("--sink", action="store_true", help="force sink conditions (C_b = 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formukit",
        description="Solid-dosage formulation toolkit: simulate release curves "
                    "[% vs hr], design particle size distributions [um], run "
                    "prompt strategies and benchmark them (MSE [%^2], R^2).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a release curve from particle properties")
    _add_common(p)
    _add_feature_flags(p)
    _add_condition_flags(p)
    p.add_argument("--geo-sigma", dest="geo_sigma", type=float, default=1.5,
                   help="geometric standard deviation of the log-normal PSD [-]")
    p.add_argument("--n-bins", dest="n_bins", type=int, default=50, help="PSD bin count")
    p.add_argument("--grid", help="comma-separated output times [hr], e.g. 0,0.5,1")
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="inverse-design a PSD for a target release curve")
    _add_common(p)
    _add_feature_flags(p)
    _add_condition_flags(p)
    p.add_argument("--target", required=True,
                   help="target profile file (CSV time_hr,released_pct or JSON table)")
    p.add_argument("--start-d50", dest="start_d50", type=float, default=100.0,
                   help="starting d50 [um]")
    p.add_argument("--start-sigma", dest="start_sigma", type=float, default=1.5,
                   help="starting geometric standard deviation [-]")
    p.add_argument("--d50-bounds", dest="d50_bounds", help="d50 bounds LO,HI [um]")
    p.add_argument("--sigma-bounds", dest="sigma_bounds", help="geo-sigma bounds LO,HI [-]")
    p.add_argument("--n-bins", dest="n_bins", type=int, default=50, help="PSD bin count")
    p.add_argument("--n-starts", dest="n_starts", type=int, default=4,
                   help="number of optimizer starts")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("predict", help="predict a release curve through an LLM backend")
    _add_common(p)
    _add_feature_flags(p)
    p.add_argument("--strategy", required=True,
                   help="zs | zs-cot | fs | fs-cot | rag")
    p.add_argument("--backend", default="mock", choices=("live", "mock", "replay"))
    p.add_argument("--examples", help="example records file for few-shot (JSONL or JSON)")
    p.add_argument("--store", help="record store for RAG retrieval (JSONL)")
    p.add_argument("--replay", help="transcript JSONL for the replay backend")
    p.add_argument("-k", type=int, default=3, help="retrieved examples for RAG")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("store", help="manage the formulation record store")
    store_sub = p.add_subparsers(dest="store_cmd", required=True)
    ps = store_sub.add_parser("ingest", help="ingest records from a file")
    _add_common(ps)
    ps.add_argument("--file", required=True, help="records file (JSONL canonical or JSON verbatim)")
    ps.add_argument("--store", help="store path (JSONL)")
    ps.add_argument("--overwrite", action="store_true", help="replace records with existing ids")
    ps.set_defaults(func=cmd_store)
    ps = store_sub.add_parser("list", help="list store contents")
    _add_common(ps)
    ps.add_argument("--store", help="store path (JSONL)")
    ps.set_defaults(func=cmd_store)
    ps = store_sub.add_parser("retrieve", help="retrieve nearest records")
    _add_common(ps)
    ps.add_argument("--store", help="store path (JSONL)")
    ps.add_argument("--d50", type=float, required=True, help="query d50 [um]")
    ps.add_argument("--ssa", type=float, help="query specific surface area [m^2/g]")
    ps.add_argument("--vol-eq", dest="vol_eq", type=float,
                    help="query volume-equivalent size [um]")
    ps.add_argument("--aspect-ratio", dest="aspect_ratio", type=float,
                    help="query aspect ratio [-]")
    ps.add_argument("--roundness", type=float, help="query roundness [-]")
    ps.add_argument("-k", type=int, default=3, help="number of records to return")
    ps.set_defaults(func=cmd_store)

    p = sub.add_parser("bench", help="run the five-strategy benchmark on a dataset")
    _add_common(p)
    p.add_argument("--dataset", required=True,
                   help="measured records (JSONL canonical or JSON verbatim)")
    p.add_argument("--backend", default="mock", choices=("live", "mock", "replay"))
    p.add_argument("--replay", help="transcript JSONL for the replay backend")
    p.add_argument("--store", help="record store for RAG (defaults to the dataset)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="MSE [%%^2] and R^2 between two profile files")
    _add_common(p)
    p.add_argument("--reference", required=True, help="measured profile (CSV or JSON)")
    p.add_argument("--predicted", required=True, help="predicted profile (CSV or JSON)")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = AppConfig.load(args.config)
        return args.func(config, args)
    except (TransportError, RequestError) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FormukitError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
