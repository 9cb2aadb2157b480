"""Command-line entry points: enhance, detect, classify, eval, serve.

Exit codes: 0 ok, 1 runtime failure, 2 usage. JSON goes to stdout, logs to
stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .backends.reference import FixtureRecognizer, KeywordNLIScorer
from .backends.registry import resolve_backends
from .errors import BackendUnavailable, ConfigError, TextriageError
from .evaluation import DatasetManifest, convert_totaltext, run_eval
from .imaging import load_image, save_image
from .pipeline import PipelineConfig, apply_overrides, load_config, process_image

log = logging.getLogger("textriage")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _base_config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {}
    for key, attr in (
        ("detect.global_thresh", "thresh"),
        ("detect.min_height", "min_h"),
        ("detect.max_height", "max_h"),
        ("tiles.scale", "scale"),
        ("tiles.tile", "tile"),
        ("tiles.overlap", "overlap"),
        ("clahe.clip_factor", "clahe_clip"),
        ("stage_order", "stages"),
        ("labels", "labels"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    grid = getattr(args, "clahe_grid", None)
    if grid is not None:
        try:
            cols, rows = grid.lower().split("x")
            overrides["clahe.grid_cols"] = int(cols)
            overrides["clahe.grid_rows"] = int(rows)
        except ValueError:
            raise ConfigError(f"--clahe-grid expects COLSxROWS, got {grid!r}")
    backend = getattr(args, "backend", None)
    if backend is not None:
        overrides["backends.detector"] = backend
    scorer = getattr(args, "scorer", None)
    if scorer is not None:
        overrides["backends.nli"] = scorer
    return apply_overrides(cfg, overrides)


def cmd_enhance(args) -> int:
    cfg = _base_config(args)
    img = load_image(args.input)
    backends = resolve_backends(cfg)
    from .imaging import clahe, to_grayscale, upscale_tiled

    current = img
    for stage in cfg.stage_order:
        if stage == "grayscale":
            current = to_grayscale(current, allow_gray=True)
        elif stage == "upscale":
            current = upscale_tiled(current, cfg.tiles, backends.scaler)
        elif stage == "clahe":
            current = clahe(current, cfg.clahe)
    save_image(args.output, current)
    log.info("wrote %s (%dx%d)", args.output, current.width, current.height)
    return EXIT_OK


def _sidecar_overrides(args, cfg) -> tuple[dict[str, object], object]:
    """Launch the sidecar when any backend selection names it."""
    names = {getattr(cfg.backends, slot) for slot in
             ("scaler", "detector", "recognizer", "nli")}
    if "sidecar" not in names:
        return {}, None
    command = getattr(args, "sidecar_cmd", None) or os.environ.get("TEXTRIAGE_SIDECAR")
    if not command:
        raise BackendUnavailable(
            "a sidecar backend is selected but no launch command is set "
            "(pass --sidecar-cmd or set $TEXTRIAGE_SIDECAR)"
        )
    from .backends.sidecar import SidecarProcess, sidecar_backend_overrides

    proc = SidecarProcess(command)
    overrides = sidecar_backend_overrides(proc, scale=cfg.tiles.scale)
    wanted = {slot for slot in ("scaler", "detector", "recognizer", "nli")
              if getattr(cfg.backends, slot) == "sidecar"}
    return {slot: overrides[slot] for slot in wanted}, proc


def cmd_detect(args) -> int:
    cfg = _base_config(args)
    # detection debugging works in the input's own coordinates: grayscale only
    cfg = apply_overrides(cfg, {"stage_order": "grayscale"})
    img = load_image(args.input)
    overrides, proc = _sidecar_overrides(args, cfg)
    try:
        backends = resolve_backends(cfg, overrides=overrides)
        result = process_image(img, cfg, backends=backends, source=str(args.input))
    finally:
        if proc is not None:
            proc.close()
    instances = result.to_payload()["instances"]
    if args.json:
        print(json.dumps({"instances": instances}, indent=2))
    else:
        if not instances:
            print("[]")
        for inst in instances:
            x, y, w, h = inst["bbox"]
            print(f"bbox=({x},{y},{w},{h}) score={inst['score']:.3f} "
                  f"vertices={len(inst['polygon'])}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _base_config(args)
    img = load_image(args.input)
    backend_overrides, proc = _sidecar_overrides(args, cfg)
    sidecar_json = Path(args.input).with_suffix(".json")
    if cfg.backends.recognizer == "fixture" and sidecar_json.exists():
        upscale_factor = cfg.tiles.scale if "upscale" in cfg.stage_order else 1
        backend_overrides["recognizer"] = FixtureRecognizer.from_file(
            sidecar_json, scale=upscale_factor)
    if args.keywords is not None:
        backend_overrides["nli"] = KeywordNLIScorer.from_file(args.keywords)
    try:
        backends = resolve_backends(cfg, overrides=backend_overrides)
        result = process_image(img, cfg, backends=backends, source=str(args.input))
    finally:
        if proc is not None:
            proc.close()
    decision = result.decision
    if args.json:
        print(json.dumps({
            "label": decision.label,
            "label_probs": decision.label_probs(),
            "premise": decision.premise,
        }, indent=2))
    else:
        print(decision.label)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _base_config(args)
    manifest = DatasetManifest.load(args.manifest)
    report = run_eval(manifest, cfg, iou_thresh=args.iou)
    failures = sum(1 for im in report.per_image if im.failed)
    if failures > len(report.per_image) // 2:
        log.error("more than half the corpus failed to load (%d/%d)",
                  failures, len(report.per_image))
        return EXIT_RUNTIME
    if args.out:
        Path(args.out).write_text(report.to_json(), "utf-8")
        log.info("wrote %s", args.out)
    print(f"{report.detection_rate:.2f}")
    return EXIT_OK


def cmd_convert_totaltext(args) -> int:
    manifest = convert_totaltext(args.gt_dir, args.image_dir)
    Path(args.out).write_text(manifest.to_json(), "utf-8")
    print(f"{len(manifest.entries)} entries -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _base_config(args)
    backend_overrides = {}
    sidecar_proc = None
    if args.sidecar:
        from .backends.sidecar import SidecarProcess, sidecar_backend_overrides

        sidecar_proc = SidecarProcess(args.sidecar)
        backend_overrides = sidecar_backend_overrides(sidecar_proc, scale=cfg.tiles.scale)
    static_dir = args.static or _default_static_dir()
    app = create_app(config=cfg, backend_overrides=backend_overrides,
                     static_dir=static_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        if sidecar_proc is not None:
            sidecar_proc.close()
    return EXIT_OK


def _default_static_dir() -> Path | None:
    for candidate in (Path.cwd() / "frontend" / "dist",
                      Path(__file__).resolve().parents[2] / "frontend" / "dist"):
        if candidate.is_dir():
            return candidate
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textriage")
    parser.add_argument("--config", help="config file (overrides $TEXTRIAGE_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="preprocess an image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--clahe-clip", dest="clahe_clip", type=float)
    p.add_argument("--clahe-grid", dest="clahe_grid")
    p.add_argument("--scale", type=int)
    p.add_argument("--tile", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--stages")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("detect", help="detect text instances")
    p.add_argument("input")
    p.add_argument("--thresh", type=float)
    p.add_argument("--min-h", dest="min_h", type=int)
    p.add_argument("--max-h", dest="max_h", type=int)
    p.add_argument("--backend", choices=["stencil", "sidecar"])
    p.add_argument("--sidecar-cmd", dest="sidecar_cmd",
                   help="command launching the model sidecar (or $TEXTRIAGE_SIDECAR)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify", help="classify a document image")
    p.add_argument("input")
    p.add_argument("--labels")
    p.add_argument("--scorer", choices=["keyword", "sidecar"])
    p.add_argument("--sidecar-cmd", dest="sidecar_cmd",
                   help="command launching the model sidecar (or $TEXTRIAGE_SIDECAR)")
    p.add_argument("--keywords", help="keyword table file for the keyword scorer")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="evaluate against a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convert-totaltext", help="Total-Text ground truth -> manifest")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--image-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert_totaltext)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sidecar", help="command launching the model sidecar")
    p.add_argument("--static", help="directory with the built UI bundle")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except TextriageError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
