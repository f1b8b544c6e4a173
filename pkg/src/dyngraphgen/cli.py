"""``dyngraphgen`` command line: synth, ingest, train, generate, evaluate, diff, report.

Every command reads one JSON run config (``--config``), applies the flag
overrides, writes the fully resolved config as ``resolved_config.json`` in its
output directory and exits 0 on success. Outputs live under ``out``::

    out/data/        canonical graph directory (synth, ingest)
    out/model/       parameter snapshot + train_report.json
    out/generated/   generated graph directory
    out/evaluation/  metrics.json
    out/diff/        diff.json
    out/report/      loss_curves.png, metrics.png, diff_series.png
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import report as plots
from .graph_store import IngestError, IngestSpec, ingest_attributes, ingest_edge_list, read_graph, standardize, write_graph
from .inference import GenerateConfig, GenerationConfigError, generate
from .metrics import MmdConfig, diff_series, evaluate
from .model import ModelConfig, load_model, save_model
from .synthetic import planted_graph
from .training import TrainConfig, TrainingDiverged, train

log = logging.getLogger("dyngraphgen")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_SHAPE = 4

COMMANDS = ("synth", "ingest", "train", "generate", "evaluate", "diff", "report")
RESOLVED = "resolved_config.json"


class ConfigError(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass
class DataSection:
    edges: Optional[str] = None  # raw event file for ingest
    attributes: Optional[str] = None  # long-format attribute file for ingest
    graph: Optional[str] = None  # canonical graph directory; defaults to out/data
    generated: Optional[str] = None  # defaults to out/generated
    standardize: bool = True


@dataclass
class SynthSection:
    num_nodes: int = 40
    num_steps: int = 8
    active_size: int = 20
    p_active: float = 0.5
    p_quiet: float = 0.02
    p_cross: float = 0.01
    noise: float = 0.05


MODEL_KEYS = tuple(f.name for f in fields(ModelConfig) if f.name not in ("num_nodes", "attr_dim"))


@dataclass
class RunConfig:
    out: str = "run"
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    ingest: IngestSpec = field(default_factory=IngestSpec)
    synth: SynthSection = field(default_factory=SynthSection)
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    generate: dict = field(default_factory=dict)  # GenerateConfig minus num_steps default
    metrics: MmdConfig = field(default_factory=MmdConfig)

    def resolved(self) -> dict:
        d = asdict(self)
        defaults = asdict(ModelConfig(num_nodes=0, attr_dim=0))
        d["model"] = {k: self.model.get(k, defaults[k]) for k in MODEL_KEYS}
        d["generate"] = {"num_steps": self.generate.get("num_steps"), "seed": self.generate.get("seed", self.seed),
                         "adjacency_mode": self.generate.get("adjacency_mode", "sample"),
                         "threshold": self.generate.get("threshold", 0.5)}
        return d


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    raw = dict(raw)
    if cls is TrainConfig and "loss_weights" in raw:
        raw["loss_weights"] = tuple(raw["loss_weights"])
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def _check_keys(raw, allowed, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    return dict(raw)


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    top = {"out", "seed", "data", "ingest", "synth", "model", "train", "generate", "metrics"}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")

    seed = overrides.get("seed", raw.get("seed", 0))
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    train_raw = dict(raw.get("train") or {})
    if "seed" in overrides or "seed" not in train_raw:
        train_raw["seed"] = seed
    if overrides.get("epochs") is not None:
        train_raw["epochs"] = overrides["epochs"]
    gen_raw = _check_keys(raw.get("generate") or {}, ("num_steps", "seed", "adjacency_mode", "threshold"), "generate")
    if "seed" in overrides:
        gen_raw["seed"] = seed
    synth_raw = dict(raw.get("synth") or {})
    if overrides.get("timesteps") is not None:
        gen_raw["num_steps"] = overrides["timesteps"]
        synth_raw["num_steps"] = overrides["timesteps"]

    cfg = RunConfig(
        out=overrides.get("out") or raw.get("out", "run"),
        seed=seed,
        data=_section(DataSection, raw.get("data"), "data"),
        ingest=_section(IngestSpec, raw.get("ingest"), "ingest"),
        synth=_section(SynthSection, synth_raw, "synth"),
        model=_check_keys(raw.get("model") or {}, MODEL_KEYS, "model"),
        train=_section(TrainConfig, train_raw, "train"),
        generate=gen_raw,
        metrics=_section(MmdConfig, raw.get("metrics"), "metrics"),
    )
    try:
        ModelConfig(num_nodes=1, attr_dim=0, **cfg.model)
    except TypeError as exc:
        raise ConfigError(f"section 'model': {exc}") from exc
    return cfg


# --------------------------------------------------------------------------- commands


def _paths(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    return {
        "data": Path(cfg.data.graph) if cfg.data.graph else out / "data",
        "model": out / "model",
        "generated": Path(cfg.data.generated) if cfg.data.generated else out / "generated",
        "evaluation": out / "evaluation",
        "diff": out / "diff",
        "report": out / "report",
    }


def _echo(cfg: RunConfig, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / RESOLVED, "w", encoding="utf-8") as fh:
        json.dump(cfg.resolved(), fh, indent=2, sort_keys=True)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _write_json(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload + "\n", encoding="utf-8")


def cmd_synth(cfg: RunConfig, p: dict) -> None:
    g = planted_graph(seed=cfg.seed, **asdict(cfg.synth))
    write_graph(g, p["data"])
    _echo(cfg, p["data"])
    log.info("planted graph N=%d T=%d written to %s", g.num_nodes, g.num_steps, p["data"])


def cmd_ingest(cfg: RunConfig, p: dict) -> None:
    if cfg.data.edges is None:
        raise ConfigError("ingest needs data.edges")
    g = ingest_edge_list(_require(Path(cfg.data.edges), "edge file"), cfg.ingest)
    if cfg.data.attributes is not None:
        g = ingest_attributes(g, _require(Path(cfg.data.attributes), "attribute file"))
    write_graph(g, p["data"])
    _echo(cfg, p["data"])
    log.info("ingested N=%d T=%d F=%d into %s", g.num_nodes, g.num_steps, g.attr_dim, p["data"])


def _load_data(cfg: RunConfig, p: dict):
    _require(p["data"], "graph directory")
    return read_graph(p["data"], standardize_attrs=False)


def cmd_train(cfg: RunConfig, p: dict) -> None:
    g = _load_data(cfg, p)
    if cfg.data.standardize and g.attr_dim > 0:
        g = standardize(g)
    mcfg = ModelConfig(num_nodes=g.num_nodes, attr_dim=g.attr_dim, **cfg.model)
    try:
        model, rep = train(g, cfg.train, mcfg)
    except TrainingDiverged as exc:
        raise RuntimeError(f"training diverged: {exc}") from exc
    save_model(model, p["model"], extra={"trained_steps": g.num_steps})
    # wall-clock timings go to their own file so the report stays byte-identical across reruns
    record = rep.to_dict()
    seconds = record.pop("epoch_seconds")
    _write_json(p["model"] / "train_report.json", json.dumps(record, indent=2))
    _write_json(p["model"] / "timing.json", json.dumps({"epoch_seconds": seconds}))
    _echo(cfg, p["model"])
    if rep.epoch_total:
        log.info("trained %d epochs: loss %.4g -> %.4g", len(rep.epoch_total), rep.epoch_total[0], rep.epoch_total[-1])


def cmd_generate(cfg: RunConfig, p: dict) -> None:
    model_dir = _require(p["model"], "model snapshot")
    model = load_model(model_dir)
    steps = cfg.generate.get("num_steps")
    if steps is None:
        manifest = json.loads((model_dir / "model.json").read_text(encoding="utf-8"))
        steps = manifest.get("trained_steps", 1)
    gcfg = GenerateConfig(num_steps=steps, seed=cfg.generate.get("seed", cfg.seed),
                          adjacency_mode=cfg.generate.get("adjacency_mode", "sample"),
                          threshold=cfg.generate.get("threshold", 0.5))
    try:
        g = generate(model, gcfg)
    except GenerationConfigError as exc:
        raise ConfigError(str(exc)) from exc
    write_graph(g, p["generated"])
    _echo(cfg, p["generated"])
    log.info("generated %d snapshots into %s", g.num_steps, p["generated"])


def _pair(cfg: RunConfig, p: dict):
    orig = _load_data(cfg, p)
    _require(p["generated"], "generated graph directory")
    gen = read_graph(p["generated"], standardize_attrs=False)
    shape_o = (orig.num_nodes, orig.num_steps, orig.attr_dim)
    shape_g = (gen.num_nodes, gen.num_steps, gen.attr_dim)
    if shape_o != shape_g:
        raise ShapeMismatch(f"original (N, T, F) = {shape_o} but generated = {shape_g}")
    return orig, gen


def cmd_evaluate(cfg: RunConfig, p: dict) -> None:
    orig, gen = _pair(cfg, p)
    rep = evaluate(orig, gen, cfg.metrics)
    _write_json(p["evaluation"] / "metrics.json", rep.dumps())
    _echo(cfg, p["evaluation"])
    log.info("in-deg MMD %.4g, out-deg MMD %.4g, attr JSD %.4g", rep.in_deg_mmd, rep.out_deg_mmd, rep.attr_jsd)


def cmd_diff(cfg: RunConfig, p: dict) -> None:
    orig = _load_data(cfg, p)
    payload = {"orig": diff_series(orig)}
    if p["generated"].exists():
        _, gen = _pair(cfg, p)
        payload["gen"] = diff_series(gen)
    _write_json(p["diff"] / "diff.json", json.dumps(payload, indent=2))
    _echo(cfg, p["diff"])


def cmd_report(cfg: RunConfig, p: dict) -> None:
    out = p["report"]
    out.mkdir(parents=True, exist_ok=True)
    made = []
    train_json = p["model"] / "train_report.json"
    if train_json.exists():
        rep = json.loads(train_json.read_text(encoding="utf-8"))
        if rep["epoch_total"]:
            made.append(plots.loss_curves(rep, out / "loss_curves.png"))
    metrics_json = p["evaluation"] / "metrics.json"
    if metrics_json.exists():
        made.append(plots.metric_table(json.loads(metrics_json.read_text(encoding="utf-8")), out / "metrics.png"))
    diff_json = p["diff"] / "diff.json"
    if diff_json.exists():
        d = json.loads(diff_json.read_text(encoding="utf-8"))
        made.append(plots.diff_series_plot(d["orig"], d.get("gen"), out / "diff_series.png"))
    if not made:
        raise FileNotFoundError(f"nothing to report under {cfg.out}: run train/evaluate/diff first")
    _echo(cfg, out)
    log.info("wrote %s", ", ".join(str(m) for m in made))


HANDLERS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "train": cmd_train, "generate": cmd_generate,
    "evaluate": cmd_evaluate, "diff": cmd_diff, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyngraphgen", description="Dynamic attributed graph generator.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--timesteps", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in (("seed", args.seed), ("out", args.out), ("epochs", args.epochs),
                                   ("timesteps", args.timesteps)) if v is not None}
    try:
        cfg = load_config(args.config, overrides)
        HANDLERS[args.command](cfg, _paths(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ShapeMismatch as exc:
        print(f"shape mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (IngestError, KeyError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
