"""Command-line entry point: ``ssp-hlstm <subcommand> [options]``.

Every subcommand reads an optional TOML config with the sections
``[data]``, ``[train]``, ``[synth]``, ``[compare]`` and ``[gradcheck]``;
command-line flags override it. When ``--out`` is given the config file is
copied there verbatim and the resolved settings are written to ``run.json``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import baselines, synth
from .errors import InvalidInputError, ModelFormatError, NumericInputError
from .hierarchy import forecast, load_model, save_model, train_hierarchical, validate
from .lstm import Gradients, backward, gradient_check, init_params, sequence_forward
from .profile import LayeredSeries, build_series, full_depth_grid, read_manifest, read_profile_csv
from .training import TrainConfig, default_window_length, write_loss_history

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

SECTIONS = {
    "data": {"manifest", "train_steps", "truth_index", "query_spacing"},
    "train": {"hidden_size", "learning_rate", "epochs", "window_length", "optimizer", "seed", "shuffle"},
    "synth": {"kind", "steps", "amplitude", "decay_depth", "period", "trend", "noise",
              "phase", "phase_lag", "seed"},
    "compare": {"poly_degree", "poly_history", "bp_hidden"},
    "gradcheck": {"hidden_sizes", "window_lengths", "seeds", "epsilon", "tolerance"},
}

GRADCHECK_DEFAULTS = {"hidden_sizes": [2, 8, 32], "window_lengths": [3, 12], "seeds": 5,
                      "epsilon": 1e-5, "tolerance": 1e-4}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)
    path: Path | None = None

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        raw = tomllib.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read config {p}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"malformed config {p}: {e}") from e
    for name, body in raw.items():
        if name not in SECTIONS or not isinstance(body, dict):
            raise UsageError(f"unknown config section [{name}]")
        extra = set(body) - SECTIONS[name]
        if extra:
            raise UsageError(f"unknown keys in [{name}]: {', '.join(sorted(extra))}")
    return RunConfig(raw, p)


# --- argument parsing -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ssp-hlstm", description="Layered LSTM sound speed profile forecasting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, manifest=False, model=False, horizon=False):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--workers", type=int, default=1, help="max threads for per-layer work")
        if manifest:
            sp.add_argument("--manifest", help="dataset manifest JSON")
        if model:
            sp.add_argument("--model", help="model file")
        if horizon:
            sp.add_argument("--horizon", type=int, default=1, help="forecast steps")

    common(sub.add_parser("synth", help="generate a synthetic dataset"))
    common(sub.add_parser("train", help="train one LSTM per layer"), manifest=True, model=True)
    common(sub.add_parser("predict", help="forecast future layers and profiles"),
           manifest=True, model=True, horizon=True)
    ev = sub.add_parser("evaluate", help="score a one-step forecast against a held-out profile")
    common(ev, manifest=True, model=True)
    ev.add_argument("--truth", help="truth profile CSV (default: from the manifest)")
    cp = sub.add_parser("compare", help="score the H-LSTM and the three baselines")
    common(cp, manifest=True, model=True)
    cp.add_argument("--truth", help="truth profile CSV (default: from the manifest)")
    gc = sub.add_parser("gradcheck", help="check BPTT gradients against finite differences")
    common(gc)
    gc.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    return p


# --- helpers --------------------------------------------------------------------------


def _workers(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return args.workers


def _prepare_out(args, cfg: RunConfig, resolved: dict) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.path is not None:
            shutil.copyfile(cfg.path, out / "config.toml")
        (out / "run.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n",
                                      encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write to {out}: {e}") from e
    return out


def _require_out(args) -> None:
    if not args.out:
        raise UsageError("--out is required")


def _manifest_path(args, cfg: RunConfig) -> Path:
    m = args.manifest or cfg.section("data").get("manifest")
    if not m:
        raise UsageError("--manifest is required")
    p = Path(m)
    if args.manifest is None and cfg.path is not None and not p.is_absolute():
        p = cfg.path.parent / p
    return p


def _load_data(args, cfg: RunConfig):
    path = _manifest_path(args, cfg)
    scheme, profiles = read_manifest(path)
    return path, scheme, profiles, build_series(profiles, scheme)


def _train_steps(cfg: RunConfig, n: int) -> int:
    k = int(cfg.section("data").get("train_steps", n - 1))
    if not 2 <= k <= n:
        raise InvalidInputError(f"train_steps must be in [2, {n}], got {k}")
    return k


def _truth(args, cfg: RunConfig, profiles, k: int):
    if getattr(args, "truth", None):
        return read_profile_csv(args.truth)
    idx = int(cfg.section("data").get("truth_index", k))
    if not 0 <= idx < len(profiles):
        raise InvalidInputError(f"truth_index {idx} outside the {len(profiles)} profiles")
    return profiles[idx]


def _query_depths(cfg: RunConfig, series: LayeredSeries):
    spacing = cfg.section("data").get("query_spacing")
    if spacing is None:
        return None
    return full_depth_grid(series.scheme, float(spacing))


def train_config(cfg: RunConfig, seed, series: LayeredSeries | None = None) -> TrainConfig:
    t = cfg.section("train")
    window = t.get("window_length")
    if window is None:
        window = default_window_length(series.timestamps) if series is not None else 12
    return TrainConfig(
        hidden_size=int(t.get("hidden_size", 128)),
        learning_rate=float(t.get("learning_rate", 0.01)),
        epochs=int(t.get("epochs", 300)),
        window_length=int(window),
        optimizer=t.get("optimizer", "adam"),
        rng_seed=int(seed if seed is not None else t.get("seed", 0)),
        shuffle=bool(t.get("shuffle", False)),
    )


def synth_spec(cfg: RunConfig, seed) -> synth.SynthSpec:
    s = cfg.section("synth")
    kind = s.pop("kind", "argo")
    factories = {"argo": synth.argo_mimic_spec, "experiment": synth.experiment_mimic_spec}
    if kind not in factories:
        raise UsageError(f"synth kind must be one of {sorted(factories)}")
    if "seed" in s:
        s["rng_seed"] = int(s.pop("seed"))
    if seed is not None:
        s["rng_seed"] = seed
    return factories[kind](**s)


def _f4(x) -> str:
    return f"{float(x):.4f}"


# --- subcommands --------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    _require_out(args)
    spec = synth_spec(cfg, args.seed)
    resolved = {"command": "synth", "steps": spec.steps, "layers": spec.scheme.n_layers,
                "rng_seed": spec.rng_seed, "noise": spec.noise}
    out = _prepare_out(args, cfg, resolved)
    profiles, series = synth.generate(spec)
    try:
        manifest = synth.write_dataset(out, profiles, spec.scheme)
    except OSError as e:
        raise DataError(f"cannot write dataset: {e}") from e
    print(f"wrote {len(profiles)} profiles over {series.n_layers} layers to {manifest}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    workers = _workers(args)
    path, scheme, profiles, series = _load_data(args, cfg)
    k = _train_steps(cfg, series.n_steps)
    history = series.head(k)
    config = train_config(cfg, args.seed, history)
    if not args.out and not args.model:
        raise UsageError("--out or --model is required")
    resolved = {"command": "train", "manifest": str(path), "train_steps": k, "train": config.to_dict()}
    out = _prepare_out(args, cfg, resolved)
    model = train_hierarchical(history, config, workers)
    model_path = Path(args.model) if args.model else out / "model.ssp"
    save_model(model, model_path)
    losses = model.final_losses()
    if out is not None:
        loss_dir = out / "loss"
        loss_dir.mkdir(exist_ok=True)
        width = len(str(model.n_layers))
        for i, h in enumerate(model.loss_histories):
            write_loss_history(loss_dir / f"layer_{i + 1:0{width}d}.csv", h)
    for i, (d, loss) in enumerate(zip(scheme.depths, losses)):
        print(f"layer {i + 1} ({float(d):g} m): final loss {loss:.4e}", file=sys.stderr)
    print(f"trained {model.n_layers} layers on {k} steps; model written to {model_path}")
    return EXIT_OK


def _load_model(args):
    if not args.model:
        raise UsageError("--model is required")
    return load_model(args.model)


def cmd_predict(args, cfg: RunConfig) -> int:
    workers = _workers(args)
    if args.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    _require_out(args)
    model = _load_model(args)
    path, _, _, series = _load_data(args, cfg)
    resolved = {"command": "predict", "manifest": str(path), "horizon": args.horizon}
    out = _prepare_out(args, cfg, resolved)
    rep = forecast(model, series, args.horizon, _query_depths(cfg, series), workers)
    rep.write_forecast_csv(out / "forecast.csv")
    rep.write_json(out / "forecast.json")
    rep.write_full_depth_csv(out / "full_depth.csv")
    print(f"forecast {rep.horizon} step(s) x {model.n_layers} layers; "
          f"first step surface {_f4(rep.predicted[0, 0])} m/s")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    workers = _workers(args)
    _require_out(args)
    model = _load_model(args)
    path, _, profiles, series = _load_data(args, cfg)
    k = _train_steps(cfg, series.n_steps)
    truth = _truth(args, cfg, profiles, k)
    resolved = {"command": "evaluate", "manifest": str(path), "train_steps": k,
                "truth_timestamp": truth.timestamp}
    out = _prepare_out(args, cfg, resolved)
    rep = validate(model, series.head(k), truth, _query_depths(cfg, series), workers)
    rep.write_layer_csv(out / "layer_rmse.csv")
    rep.write_full_depth_csv(out / "full_depth.csv")
    rep.write_json(out / "evaluate.json")
    print(f"full-depth RMSE {_f4(rep.full_depth_rmse)} m/s; "
          f"max layer RMSE {_f4(rep.layer_rmse.max())} m/s")
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig) -> int:
    workers = _workers(args)
    _require_out(args)
    path, _, profiles, series = _load_data(args, cfg)
    k = _train_steps(cfg, series.n_steps)
    truth = _truth(args, cfg, profiles, k)
    history = series.head(k)
    config = train_config(cfg, args.seed, history)
    c = cfg.section("compare")
    opts = {
        "poly_degree": int(c.get("poly_degree", baselines.DEFAULT_POLY_DEGREE)),
        "poly_history": int(c.get("poly_history", baselines.DEFAULT_POLY_HISTORY)),
        "bp_hidden": int(c.get("bp_hidden", baselines.DEFAULT_BP_HIDDEN)),
    }
    resolved = {"command": "compare", "manifest": str(path), "train_steps": k,
                "truth_timestamp": truth.timestamp, "train": config.to_dict(), "compare": opts}
    out = _prepare_out(args, cfg, resolved)
    model = _load_model(args) if args.model else None
    reports = baselines.compare_methods(history, truth, config, query_depths=_query_depths(cfg, series),
                                        workers=workers, model=model, **opts)
    rows = [(name, r.full_depth_rmse, float(r.layer_rmse.max())) for name, r in reports.items()]
    lines = ["method,full_depth_rmse,max_layer_rmse"]
    lines += [f"{n},{a!r},{b!r}" for n, a, b in rows]
    (out / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    doc = {n: r.to_dict() for n, r in reports.items()}
    (out / "compare.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    width = max(len(n) for n, _, _ in rows)
    for n, a, b in rows:
        print(f"{n:<{width}}  RMSE {_f4(a)} m/s  (max layer {_f4(b)})")
    return EXIT_OK


def _corrupt(g: Gradients) -> Gradients:
    W, b, w_fc, b_fc = g.arrays()
    W[0, 0] += 1e-3 + 0.5 * abs(W[0, 0])
    return Gradients(W, b, w_fc, b_fc[0])


def run_gradcheck(hidden_sizes, window_lengths, seeds, epsilon, seed0=0, corrupt=False):
    """Yield ``(hidden, window, seed, error)`` over the test matrix."""
    for h in hidden_sizes:
        for w in window_lengths:
            for s in range(seed0, seed0 + seeds):
                params = init_params(int(h), 1, s)
                rng = np.random.default_rng([s, int(h), int(w)])
                x = rng.uniform(0, 1, size=int(w))
                target = float(rng.uniform(0, 1))
                analytic = None
                if corrupt:
                    pred, cache = sequence_forward(params, x)
                    analytic = _corrupt(backward(params, cache, 2.0 * (pred - target)))
                err = gradient_check(params, x, "squared_error", epsilon, target, analytic)
                yield int(h), int(w), s, err


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    g = {**GRADCHECK_DEFAULTS, **cfg.section("gradcheck")}
    seed0 = args.seed if args.seed is not None else 0
    resolved = {"command": "gradcheck", "seed": seed0, **g}
    out = _prepare_out(args, cfg, resolved)
    rows = list(run_gradcheck(g["hidden_sizes"], g["window_lengths"], int(g["seeds"]),
                              float(g["epsilon"]), seed0, args.corrupt_gradient))
    worst = max(r[3] for r in rows)
    if out is not None:
        lines = ["hidden,window,seed,max_rel_error"] + [f"{h},{w},{s},{e!r}" for h, w, s, e in rows]
        (out / "gradcheck.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ok = worst < float(g["tolerance"])
    print(f"gradcheck {'PASS' if ok else 'FAIL'}: {len(rows)} cases, "
          f"max relative error {worst:.4e} (tolerance {float(g['tolerance']):.0e})")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"ssp-hlstm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericInputError as e:
        print(f"ssp-hlstm: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, InvalidInputError, ModelFormatError, OSError, ValueError, TypeError) as e:
        print(f"ssp-hlstm: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
