"""Command-line entry point.

Exit status is 0 on success, 1 when an input is outside the domain of an
operation, and 2 for usage mistakes and unreadable or missing files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import benchmark, dataset, lineart, liquid_sim, neuralnet, training
from .config import DEFAULT_CONFIG, Config
from .errors import ConfigError, DomainError, FormatError
from .grid import build_grid
from .pipeline import Prediction, predict_curves, truth_prediction

log = logging.getLogger("saucebot")


def _config(args) -> Config:
    return Config.load(args.config) if args.config else DEFAULT_CONFIG


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    rows = dataset.generate(cfg, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_jsonl(rows, out, cfg, args.seed)
    missing = sum(r.stacking_knots is None for r in rows)
    print(f"wrote {len(rows)} rows to {out} ({missing} without stacking labels)")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    _, rows = dataset.read_jsonl(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = training.KINDS if args.which == "all" else (args.which,)
    for which in kinds:
        result, err = training.fit(rows, which, cfg, args.seed)
        neuralnet.save_model(result.model, out / f"{which}.json")
        neuralnet.write_history_csv(result.history, out / f"{which}_loss.csv")
        print(f"{which}: held-out 5-point error {err:.9f} on {', '.join(result.model.meta['val_liquids'])}")
    return 0


def _resolve_liquid(args, cfg: Config) -> liquid_sim.LiquidSpec:
    if args.liquid:
        try:
            return build_grid(cfg).liquid(args.liquid)
        except KeyError:
            raise DomainError(f"unknown liquid {args.liquid!r}") from None
    if args.viscosity is None or args.density is None:
        raise DomainError("give --liquid or both --viscosity and --density")
    return liquid_sim.LiquidSpec(args.viscosity, args.density, "custom")


def cmd_predict(args) -> int:
    cfg = _config(args)
    liquid = _resolve_liquid(args, cfg)
    models = benchmark.load_models(args.models, ("ours",))
    feature = dataset.observe(liquid, args.fill, args.seed, cfg)
    pred = predict_curves(feature, *models.pair("ours"), cfg)
    payload = {
        "format_version": 1,
        "liquid": liquid.name,
        "fill_ml": args.fill,
        "seed": args.seed,
        "feature": feature.as_array().tolist(),
        "flow": {"time_s": pred.flow.knot_x.tolist(), "flow_ml_per_s": pred.flow.knot_y.tolist()},
        "stacking": {"thickness_mm": pred.stacking.knot_x.tolist(),
                     "volume_per_length_ml_per_cm": pred.stacking.knot_y.tolist()},
        "notes": list(pred.notes),
    }
    if args.out:
        out = Path(args.out)
        _write_json(out, payload)
        pred.flow.to_csv(out.with_name(out.stem + "_flow.csv"))
        pred.stacking.to_csv(out.with_name(out.stem + "_stacking.csv"))
    else:
        print(json.dumps(payload, indent=2))
    return 0


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    methods = benchmark.parse_methods(args.methods)
    models = benchmark.load_models(args.models, methods)
    report = benchmark.run_benchmark(models, methods, cfg, args.seed)
    report["config"] = cfg.to_dict()
    _write_json(Path(args.out), report)
    print(benchmark.format_report(report))
    return 0


def cmd_draw(args) -> int:
    cfg = _config(args)
    drawing = lineart.load_drawing(args.drawing, cfg)
    grid = build_grid(cfg)
    truth, preds = {}, {}
    models = None if args.truth_curves else benchmark.load_models(args.models, ("ours",))
    for k, name in enumerate(drawing.liquids):
        try:
            truth[name] = grid.liquid(name)
        except KeyError:
            raise DomainError(f"drawing uses unknown liquid {name!r}") from None
        if models is None:
            preds[name] = truth_prediction(truth[name], cfg.draw_fill_ml, cfg)
        else:
            feature = dataset.observe(truth[name], cfg.draw_fill_ml, args.seed + k, cfg)
            preds[name] = predict_curves(feature, *models.pair("ours"), cfg)
    traj = lineart.plan_trajectory(drawing, preds, cfg)
    svg, rendered = lineart.render_result(traj, truth, args.seed, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    strokes = [{
        "polyline": r.stroke.polyline_index,
        "liquid": r.stroke.liquid,
        "squeeze_start_s": r.stroke.squeeze_start_s,
        "s_start_cm": r.stroke.s_start_cm,
        "s_end_cm": r.stroke.s_end_cm,
        "clamped_speed_samples": int(r.stroke.profile.clamped.sum()),
        "clamped_cells": int(r.result.clamped.sum()),
        **r.result.metrics.as_dict(),
    } for r in rendered]
    _write_json(out.with_suffix(".json"), {"format_version": 1, "seed": args.seed, "strokes": strokes})
    print(f"wrote {out} with {len(rendered)} squeeze cycle(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saucebot", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="simulate the training grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="fit a predictor")
    p.add_argument("dataset")
    p.add_argument("--which", choices=(*training.KINDS, "all"), default="all")
    p.add_argument("--out", required=True, help="model directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="explore a liquid and print its curves")
    p.add_argument("--models", required=True)
    p.add_argument("--liquid", help="grid liquid name, e.g. test-2")
    p.add_argument("--viscosity", type=float)
    p.add_argument("--density", type=float)
    p.add_argument("--fill", type=float, default=300.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", parents=[common], help="compare methods on the test liquids")
    p.add_argument("--models", required=True)
    p.add_argument("--methods", default=",".join(benchmark.METHODS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("draw", parents=[common], help="plan and render a line drawing")
    p.add_argument("drawing")
    p.add_argument("--models")
    p.add_argument("--truth-curves", action="store_true", help="use simulator truth instead of models")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_draw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "draw" and not args.truth_curves and not args.models:
        parser.error("draw needs --models unless --truth-curves is given")
    try:
        return args.func(args)
    except (OSError, FormatError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
