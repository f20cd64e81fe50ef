"""Command-line surface.

Subcommands: `ground` (grounding text -> query JSON), `gen` (scenario
generation), `search` (run the keyframe search), `eval` (score a result
against annotations), `bench` (relations vs detection-only suite).

Exit codes: 0 success, 2 bad input, 3 I/O failure, 4 backend failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .bench import DEFAULT_DELTA_FRAMES, default_suite, run_suite
from .errors import BackendError, InputError
from .metrics import (
    label_jaccard_similarity,
    metrics_report,
    set_precision,
    set_recall,
    ssim,
    temporal_coverage,
)
from .query import (
    GroundingParseError,
    QuerySpec,
    parse_grounding_text,
    query_from_json,
    query_to_json,
    validate_query,
)
from .search import SearchConfig, SearchResult, run_search
from .synth import (
    OracleBackend,
    ScenarioTemplate,
    frame_labels,
    generate_scenario,
    load_scenario,
    oracle_detect,
    render_frame,
    save_scenario,
)
from .wire import ScenarioFrameSource, open_backend

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SearchConfig)}


def _load_query_file(path: Path) -> QuerySpec:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if path.suffix == ".json" or stripped.startswith("{"):
        query = query_from_json(stripped)
    else:
        query = parse_grounding_text(text)
    return validate_query(query)


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("config file must hold a JSON object")
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _build_config(args, file_cfg: dict) -> SearchConfig:
    merged = dict(file_cfg)
    for name in (
        "top_k", "alpha", "tau", "delta_t", "diffusion_window", "diffusion_kernel",
        "diffusion_sigma", "sampler", "thompson_alpha0", "thompson_beta0",
        "k_max", "found_threshold", "budget", "seed",
        "gamma_spatial", "gamma_attribute", "gamma_time", "gamma_causal",
    ):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if getattr(args, "gamma", None) is not None:
        for name in ("gamma_spatial", "gamma_attribute", "gamma_time", "gamma_causal"):
            merged[name] = args.gamma
    if getattr(args, "no_relations", False):
        merged["relations_enabled"] = False
    return SearchConfig(**merged)


def _add_config_flags(parser: argparse.ArgumentParser):
    grp = parser.add_argument_group("search configuration (overrides --config)")
    grp.add_argument("--top-k", type=int, dest="top_k")
    grp.add_argument("--alpha", type=float)
    grp.add_argument("--gamma", type=float, help="set all four relation weights at once")
    grp.add_argument("--gamma-spatial", type=float, dest="gamma_spatial")
    grp.add_argument("--gamma-attribute", type=float, dest="gamma_attribute")
    grp.add_argument("--gamma-time", type=float, dest="gamma_time")
    grp.add_argument("--gamma-causal", type=float, dest="gamma_causal")
    grp.add_argument("--tau", type=float)
    grp.add_argument("--delta-t", type=int, dest="delta_t")
    grp.add_argument("--diffusion-window", type=int, dest="diffusion_window")
    grp.add_argument("--diffusion-kernel", choices=["inverse_distance", "gaussian"],
                     dest="diffusion_kernel")
    grp.add_argument("--diffusion-sigma", type=float, dest="diffusion_sigma")
    grp.add_argument("--sampler", choices=["score_proportional", "thompson"])
    grp.add_argument("--thompson-alpha0", type=float, dest="thompson_alpha0")
    grp.add_argument("--thompson-beta0", type=float, dest="thompson_beta0")
    grp.add_argument("--k-max", type=int, dest="k_max")
    grp.add_argument("--found-threshold", type=float, dest="found_threshold")
    grp.add_argument("--budget", type=int)
    grp.add_argument("--seed", type=int)
    grp.add_argument("--no-relations", action="store_true", dest="no_relations",
                     help="disable the relation code paths entirely")


# ---------------------------------------------------------------- ground

def cmd_ground(args) -> int:
    in_path = Path(args.input)
    try:
        text = in_path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        print(f"error: cannot read {in_path}: {exc}", file=sys.stderr)
        return 3
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            query = validate_query(parse_grounding_text(text))
    except GroundingParseError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out_path = Path(args.output)
    out_path.write_text(
        json.dumps(query_to_json(query), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    template = ScenarioTemplate(
        kind=args.template,
        n_frames=args.n_frames,
        fps=args.fps,
        event_length=args.event_length,
        distractor_count=args.distractors,
        noise=args.noise,
    )
    scenario = generate_scenario(template, args.seed)
    save_scenario(scenario, args.output)
    for i, q in enumerate(scenario.queries):
        gt = list(q.gt_keyframes)
        print(f"q{i}: {q.spec.question!r} gt_keyframes={gt}")
    if args.annotations_out:
        ann = [
            {
                "query_id": f"q{i}",
                "gt_frames": list(q.gt_keyframes),
                "gt_timestamps": [f / scenario.fps for f in q.gt_keyframes],
            }
            for i, q in enumerate(scenario.queries)
        ]
        Path(args.annotations_out).write_text(
            json.dumps(ann, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
    if args.detections_out:
        query = validate_query(scenario.queries[0].spec)
        dets = oracle_detect(scenario, range(scenario.n_frames), query.vocabulary())
        doc = {
            "detections": [
                {
                    "frame_index": d.frame_index,
                    "label": d.label,
                    "confidence": d.confidence,
                    "bbox": [d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1],
                }
                for d in dets
            ]
        }
        Path(args.detections_out).write_text(
            json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------- search

def _resolve_source(args) -> tuple[str, str]:
    """Returns (mode, path_or_spec); exactly one frame source allowed."""
    scenario_path = args.scenario
    backend_spec = args.backend
    if backend_spec and backend_spec.startswith("scenario:"):
        if scenario_path:
            raise InputError("give either --scenario or --backend scenario:, not both")
        scenario_path = backend_spec[len("scenario:"):]
        backend_spec = None
    if scenario_path and args.video:
        raise InputError("give either --scenario or --video, not both")
    if scenario_path:
        if backend_spec:
            raise InputError("--backend is only for --video runs")
        return "scenario", scenario_path
    if args.video:
        if not backend_spec:
            raise InputError("--video needs --backend pipe:CMD or tcp:HOST:PORT")
        return "wire", backend_spec
    raise InputError("no frame source: give --scenario or --video plus --backend")


def _write_result(out_dir: Path, result: SearchResult, wall_ms: float):
    doc = {
        "keyframes": [{"frame": f, "score": s} for f, s in result.keyframes],
        "iterations": result.iterations_used,
        "frames_detected": result.frames_detected,
        "wall_ms": wall_ms,
    }
    (out_dir / "result.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_trace(out_dir: Path, result: SearchResult, stride: int):
    with open(out_dir / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "frame_index", "score", "sampled", "p_after_refresh"])
        for rec in result.trace:
            n = len(rec.registry_after)
            rows = set(rec.touched) | set(rec.sampled) | set(rec.patched)
            rows.update(range(0, n, max(1, stride)))
            sampled_set = set(rec.sampled)
            for f in sorted(rows):
                writer.writerow([
                    rec.iteration,
                    f,
                    repr(float(rec.registry_after[f])),
                    1 if f in sampled_set else 0,
                    repr(float(rec.p_after[f])),
                ])


def cmd_search(args) -> int:
    mode, source_spec = _resolve_source(args)
    cfg = _build_config(args, _load_config_file(Path(args.config) if args.config else None))

    if mode == "scenario":
        scenario = load_scenario(source_spec)
        backend = OracleBackend(scenario)
        n_frames, duration = scenario.n_frames, scenario.duration_seconds
        embedded = scenario.queries
    else:
        video_path = Path(args.video)
        if not video_path.exists():
            raise InputError(f"video file {video_path} does not exist")
        # desk-scale frame source: a scenario file stands in for the video;
        # real decoders plug in behind the same FrameSource seam
        scenario = load_scenario(video_path)
        source = ScenarioFrameSource(
            scenario, str(video_path), send_images=args.send_images
        )
        backend = open_backend(source_spec, source, grid_k=args.grid_k)
        n_frames, duration = source.n_frames, scenario.duration_seconds
        embedded = scenario.queries

    if args.query:
        query = _load_query_file(Path(args.query))
    elif embedded:
        if not 0 <= args.query_index < len(embedded):
            raise InputError(
                f"query index {args.query_index} out of range "
                f"(scenario has {len(embedded)})"
            )
        query = validate_query(embedded[args.query_index].spec)
    else:
        raise InputError("no query: give --query or use a scenario with one embedded")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = run_search(n_frames, duration, query, backend, cfg)
    finally:
        if hasattr(backend, "close"):
            backend.close()
    wall_ms = (time.perf_counter() - t0) * 1000.0

    if len(result.keyframes) < cfg.top_k:
        print(
            f"warning: only {len(result.keyframes)} frames have known scores "
            f"(asked for {cfg.top_k})",
            file=sys.stderr,
        )
    _write_result(out_dir, result, wall_ms)
    _write_trace(out_dir, result, args.trace_stride)
    frames = [f for f, _ in result.keyframes]
    print(
        f"keyframes={frames} iterations={result.iterations_used} "
        f"frames_detected={result.frames_detected} wall_ms={wall_ms:.1f}"
    )
    return 0


# ---------------------------------------------------------------- eval

def _load_annotation(path: Path, query_id: str) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"annotation file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise InputError("annotation file must hold a JSON list")
    for entry in doc:
        if entry.get("query_id") == query_id:
            return entry
    raise InputError(f"query_id {query_id!r} not found in {path}")


def cmd_eval(args) -> int:
    result_doc = json.loads(Path(args.result).read_text(encoding="utf-8"))
    pred_frames = [int(kf["frame"]) for kf in result_doc.get("keyframes", [])]
    ann = _load_annotation(Path(args.annotations), args.query_id)
    gt_frames = [int(f) for f in ann.get("gt_frames", [])]
    if not gt_frames:
        raise InputError(f"annotation {args.query_id!r} has an empty gt set")

    if args.scenario:
        scenario = load_scenario(args.scenario)
        fps = scenario.fps
        if args.phi == "jaccard":
            as_entry = lambda f: frame_labels(scenario, f)  # noqa: E731
            phi = label_jaccard_similarity
        else:
            as_entry = lambda f: render_frame(scenario, f)  # noqa: E731
            phi = ssim
    elif args.image_dir:
        from PIL import Image

        image_dir = Path(args.image_dir)
        fps = 1.0
        if args.phi != "ssim":
            raise InputError("--image-dir evaluation only supports --phi ssim")

        def as_entry(f):
            path = image_dir / f"{f}.png"
            if not path.exists():
                raise InputError(f"missing frame image {path}")
            return np.asarray(Image.open(path).convert("L"))

        phi = ssim
    else:
        raise InputError("give --scenario or --image-dir for frame content")

    gt_ts = [float(t) for t in ann.get("gt_timestamps", [])] or [f / fps for f in gt_frames]
    pred_ts = [f / fps for f in pred_frames]
    tc = temporal_coverage(pred_ts, gt_ts, args.delta)
    if pred_frames:
        pred_entries = [as_entry(f) for f in pred_frames]
        gt_entries = [as_entry(f) for f in gt_frames]
        precision = set_precision(pred_entries, gt_entries, phi)
        recall = set_recall(pred_entries, gt_entries, phi)
    else:
        precision = recall = 0.0
    report = metrics_report(
        tc=tc,
        delta=args.delta,
        precision=precision,
        recall=recall,
        phi_name="ssim" if args.phi == "ssim" else "label_jaccard",
        n_pred=len(pred_frames),
        n_gt=len(gt_frames),
    )
    out = json.dumps(report, indent=1, sort_keys=True)
    if args.output:
        Path(args.output).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


# ---------------------------------------------------------------- bench

def _load_suite(path: Path) -> list[tuple[ScenarioTemplate, int]]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    entries = doc.get("scenarios", doc if isinstance(doc, list) else None)
    if not entries:
        raise InputError("suite file lists no scenarios")
    suite = []
    for entry in entries:
        template = ScenarioTemplate(
            kind=entry["template"],
            n_frames=int(entry.get("n_frames", 480)),
            fps=float(entry.get("fps", 1.0)),
            event_length=int(entry.get("event_length", 10)),
            distractor_count=int(entry.get("distractor_count", 3)),
            noise=float(entry.get("noise", 0.05)),
        )
        suite.append((template, int(entry["seed"])))
    return suite


def cmd_bench(args) -> int:
    if args.suite:
        suite = _load_suite(Path(args.suite))
    else:
        suite = default_suite(args.size)
    if not suite:
        raise InputError("benchmark suite is empty")
    cfg = _build_config(args, _load_config_file(Path(args.config) if args.config else None))
    report = run_suite(suite, cfg, delta=args.delta)
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    for variant, agg in report["variants"].items():
        print(
            f"{variant}: tc={agg['mean_tc']:.3f} precision={agg['mean_precision']:.3f} "
            f"recall={agg['mean_recall']:.3f} iterations={agg['mean_iterations']:.2f} "
            f"wall_ms={agg['mean_wall_ms']:.1f}"
        )
    print(
        f"tc improved on {report['tc_improved_scenarios']}/{report['completed']} scenarios; "
        f"{len(report['failures'])} failures"
    )
    return 0


# ---------------------------------------------------------------- wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framescout", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="parse grounding text into a query JSON file")
    p.add_argument("input", help="text file with Key Objects / Cue Objects / Rel lines")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(handler=cmd_ground)

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    p.add_argument("template", choices=["spatial", "attribute", "time", "causal",
                                        "mixed", "adversarial_empty"])
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n-frames", type=int, default=480, dest="n_frames")
    p.add_argument("--fps", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--event-length", type=int, default=10, dest="event_length")
    p.add_argument("--distractors", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--annotations-out", dest="annotations_out")
    p.add_argument("--detections-out", dest="detections_out",
                   help="dump oracle detections for every frame (stub fixtures)")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("search", help="run the keyframe search")
    p.add_argument("--scenario", help="scenario JSON driving the built-in oracle backend")
    p.add_argument("--video", help="frame source for an external backend")
    p.add_argument("--backend", help="pipe:CMD | tcp:HOST:PORT | scenario:PATH")
    p.add_argument("--query", help="grounding text or query JSON file")
    p.add_argument("--query-index", type=int, default=0, dest="query_index")
    p.add_argument("--config", help="JSON file mirroring the config fields")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.add_argument("--trace-stride", type=int, default=1, dest="trace_stride",
                   help="thin the distribution snapshot rows in trace.csv")
    p.add_argument("--send-images", action="store_true", dest="send_images",
                   help="attach rendered PNGs to wire requests")
    p.add_argument("--grid-k", type=int, dest="grid_k",
                   help="composite sampled frames into k-by-k grids client-side")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("eval", help="score a search result against annotations")
    p.add_argument("--result", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--query-id", default="q0", dest="query_id")
    p.add_argument("--scenario")
    p.add_argument("--image-dir", dest="image_dir")
    p.add_argument("--phi", choices=["jaccard", "ssim"], default="jaccard")
    p.add_argument("--delta", type=float, default=5.0)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bench", help="relations vs detection-only suite")
    p.add_argument("--suite", help="JSON suite file; omit for the default 50-scenario grid")
    p.add_argument("--size", type=int, default=50, help="default suite size")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA_FRAMES)
    p.add_argument("--config")
    p.add_argument("-o", "--output")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 4
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
