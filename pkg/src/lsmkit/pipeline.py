"""Declarative end-to-end runs: diagnose, train, evaluate, explain, map.

A run is described by one YAML file (schema in ``DEFAULTS``). All outputs go
to ``<output>/<config hash>/``; the hash covers the resolved configuration
and the content of every input file, so identical configurations and inputs
reuse the same directory and produce byte-identical files.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import inspect
import json
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .attribution import (LimeConfig, background_sample, consistency_report, deeplift, global_importance,
                          lime_explain, shapley_exact, shapley_sampled, write_attributions)
from .bivariate import write_weight_tables
from .data import load_factor_table, split_train_test, standardize
from .diagnostics import ols_regression, vif
from .evaluation import auc_score, confusion_metrics, density_by_class, write_metrics_csv
from .factors import CATEGORICAL, FACTOR_SETS, FactorMeta, resolve_factor_set, tgra_schema
from .grid import RasterGrid, read_ascii_grid, write_ascii_grid
from .learners import TrainedModel, load_model, save_model, train_gbt, train_logistic, train_svm
from .learners.lsi import train_lsi
from .learners.search import SEARCH_SPACES, grid_search
from .mapping import classify_grid, export_ascii_grid, jenks_breaks
from .neural import train_cnn, train_lstm
from .synthetic import slug

STAGES = ("diagnose", "train", "evaluate", "explain", "map")
STAT_MODELS = ("IV", "WoE", "FR")
ML_MODELS = ("LR", "SVM", "GBT", "CNN", "LSTM")
MODEL_NAMES = STAT_MODELS + ML_MODELS
MODEL_ALIASES = {"XGBoost": "GBT", "XGB": "GBT"}
NEURAL_MODELS = ("CNN", "LSTM")
METHODS = ("shapley", "lime", "deeplift")

TRAINERS = {"LR": train_logistic, "SVM": train_svm, "GBT": train_gbt, "CNN": train_cnn, "LSTM": train_lstm}

DEFAULT_HYPERPARAMETERS = {
    "LR": {"C": 50, "penalty": "l1"},
    "SVM": {"C": 5, "kernel": "rbf"},
    "GBT": {"n_estimators": 150, "learning_rate": 0.1, "max_depth": 15, "gamma": 0.08},
    "CNN": {"filters": 64, "kernel_width": 3, "dropout": 0.2, "activation": "relu", "epochs": 30,
            "learning_rate": 0.02},
    "LSTM": {"units": 100, "dropout": 0.2, "activation": "tanh", "epochs": 30, "learning_rate": 0.1},
}

DEFAULTS = {
    "inputs": {"samples": None, "rasters": None, "landslides": None},
    "factor_sets": ["all_19", "triggering_9"],
    "models": list(MODEL_NAMES),
    "hyperparameters": {},
    "search": {"enabled": False, "folds": 3, "spaces": {}},
    "split": {"test_fraction": 0.3},
    "binning": {"classes": 5},
    "evaluation": {"threshold": 0.5},
    "explain": {"methods": list(METHODS), "instances": 10, "background": 100, "permutations": 500,
                "exact_max_factors": 10, "top_k": 3,
                "lime": {"n_perturbations": 2000, "kernel_width": None, "perturbation_scale": 1.0, "ridge": 1e-3}},
    "mapping": {"classes": 5, "max_sample": 100000},
    "seed": 0,
    "output": "runs",
}


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and ``cause`` holds the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _canonical_model(name):
    return MODEL_ALIASES.get(name, name)


@dataclass
class PipelineConfig:
    data: dict
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        data = _merge(DEFAULTS, d)
        data["models"] = [_canonical_model(m) for m in data["models"]]
        data["hyperparameters"] = {_canonical_model(k): v for k, v in (data["hyperparameters"] or {}).items()}
        return cls(data, os.fspath(base_dir))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{os.fspath(path)}: top level must be a mapping")
        return cls.from_dict(raw, os.path.dirname(os.path.abspath(path)))

    def path(self, value):
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def override(self, *, seed=None, out=None, factor_sets=None, models=None, methods=None) -> "PipelineConfig":
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
        if out is not None:
            d["output"] = os.path.abspath(out)
        if factor_sets:
            by_name = {(e["name"] if isinstance(e, dict) else e): e for e in d["factor_sets"]}
            d["factor_sets"] = [by_name.get(n, n) for n in factor_sets]
        if models:
            d["models"] = [_canonical_model(m) for m in models]
        if methods:
            d["explain"]["methods"] = list(methods)
        return PipelineConfig(d, self.base_dir)

    def hyperparameters(self, model):
        return _merge(DEFAULT_HYPERPARAMETERS.get(model, {}), self.data["hyperparameters"].get(model, {}))

    def factor_sets(self, available):
        """(label, factor names) per configured set."""
        out = []
        for entry in self.data["factor_sets"]:
            if isinstance(entry, dict):
                out.append((str(entry["name"]), resolve_factor_set(entry["factors"], available)))
            else:
                out.append((entry, resolve_factor_set(entry, available)))
        return out


# validation

_TOP_KEYS = set(DEFAULTS)


def _trainer_params(model):
    sig = inspect.signature(TRAINERS[model])
    return {p.name for p in sig.parameters.values() if p.kind == p.KEYWORD_ONLY}


def _csv_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [h.strip() for h in next(csv.reader(fh), [])]


def validate_config(path) -> list:
    """Every schema problem in the configuration file, as readable messages."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        return [f"YAML syntax error: {exc}"]
    if not isinstance(raw, dict):
        return ["top level must be a mapping"]
    return check_config(raw, os.path.dirname(os.path.abspath(path)))


def check_config(raw, base_dir=".") -> list:
    diags = []
    for k in raw:
        if k not in _TOP_KEYS:
            diags.append(f"unknown top-level key {k!r}")
    cfg = PipelineConfig.from_dict({k: v for k, v in raw.items() if k in _TOP_KEYS}, base_dir)
    d = cfg.data

    samples = d["inputs"].get("samples")
    header = None
    if not samples:
        diags.append("inputs.samples is required")
    elif not os.path.isfile(cfg.path(samples)):
        diags.append(f"inputs.samples: file not found: {cfg.path(samples)}")
    else:
        try:
            header = [h for h in _csv_header(cfg.path(samples)) if h not in ("label", "x", "y")]
        except (OSError, UnicodeDecodeError) as exc:
            diags.append(f"inputs.samples: unreadable: {exc}")
    for key in ("rasters",):
        p = d["inputs"].get(key)
        if p and not os.path.isdir(cfg.path(p)):
            diags.append(f"inputs.{key}: directory not found: {cfg.path(p)}")
    p = d["inputs"].get("landslides")
    if p and not os.path.isfile(cfg.path(p)):
        diags.append(f"inputs.landslides: file not found: {cfg.path(p)}")

    if not isinstance(d["models"], list) or not d["models"]:
        diags.append("models must be a non-empty list")
    else:
        for m in d["models"]:
            if m not in MODEL_NAMES:
                diags.append(f"unknown model {m!r}; expected one of {list(MODEL_NAMES)}")

    for model, params in d["hyperparameters"].items():
        if model not in MODEL_NAMES:
            diags.append(f"hyperparameters: unknown model {model!r}")
        elif model in STAT_MODELS:
            diags.append(f"hyperparameters: {model} takes none (use binning.classes)")
        elif not isinstance(params, dict):
            diags.append(f"hyperparameters.{model} must be a mapping")
        else:
            allowed = _trainer_params(model)
            for name in params:
                if name not in allowed:
                    diags.append(f"hyperparameters.{model}: unknown parameter {name!r}")

    fsets = d["factor_sets"]
    if not isinstance(fsets, list) or not fsets:
        diags.append("factor_sets must be a non-empty list")
    else:
        for entry in fsets:
            if isinstance(entry, dict):
                if "name" not in entry or "factors" not in entry:
                    diags.append("explicit factor sets need 'name' and 'factors'")
                    continue
                sel, label = entry["factors"], entry["name"]
            else:
                sel, label = entry, entry
                if entry not in FACTOR_SETS:
                    diags.append(f"unknown factor set {entry!r}; expected one of {sorted(FACTOR_SETS)} or "
                                 "{name, factors}")
                    continue
            if header is not None:
                try:
                    resolve_factor_set(sel, header)
                except KeyError as exc:
                    diags.append(f"factor set {label!r}: {exc.args[0]}")

    for m in d["explain"].get("methods") or []:
        if m not in METHODS:
            diags.append(f"unknown explanation method {m!r}; expected one of {list(METHODS)}")
    tf = d["split"].get("test_fraction")
    if not isinstance(tf, (int, float)) or not 0 < tf < 1:
        diags.append("split.test_fraction must lie strictly between 0 and 1")
    if not isinstance(d["seed"], int) or isinstance(d["seed"], bool):
        diags.append("seed must be an integer")
    for key in ("instances", "background", "permutations", "top_k"):
        v = d["explain"].get(key)
        if not isinstance(v, int) or v < 1:
            diags.append(f"explain.{key} must be a positive integer")
    try:
        LimeConfig(**d["explain"]["lime"])
    except (TypeError, ValueError) as exc:
        diags.append(f"explain.lime: {exc}")
    if not isinstance(d["binning"].get("classes"), int) or d["binning"]["classes"] < 2:
        diags.append("binning.classes must be an integer >= 2")
    if not isinstance(d["mapping"].get("classes"), int) or d["mapping"]["classes"] < 2:
        diags.append("mapping.classes must be an integer >= 2")
    if d["search"].get("enabled") and (not isinstance(d["search"].get("folds"), int) or d["search"]["folds"] < 2):
        diags.append("search.folds must be an integer >= 2")
    return diags


# run


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_files(cfg):
    files = []
    for key in ("samples", "landslides"):
        p = cfg.path(cfg.data["inputs"].get(key))
        if p:
            files.append(p)
    rdir = cfg.path(cfg.data["inputs"].get("rasters"))
    if rdir and os.path.isdir(rdir):
        files += [os.path.join(rdir, f) for f in sorted(os.listdir(rdir)) if f.endswith(".asc")]
    return files


def config_digest(cfg: PipelineConfig) -> str:
    body = {k: v for k, v in cfg.data.items() if k != "output"}
    inputs = {os.path.relpath(p, cfg.base_dir): _sha256(p) for p in _input_files(cfg) if os.path.isfile(p)}
    blob = json.dumps({"config": body, "inputs": inputs}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v):
    return "undefined" if v is None else repr(float(v))


@dataclass
class RunResult:
    run_dir: str
    manifest: dict
    metrics: list = field(default_factory=list)


class _Run:
    def __init__(self, cfg: PipelineConfig, stages):
        self.cfg = cfg
        self.d = cfg.data
        self.seed = int(self.d["seed"])
        self.stages = stages
        self.digest = config_digest(cfg)
        self.run_dir = os.path.join(cfg.path(self.d["output"]), self.digest)
        os.makedirs(self.run_dir, exist_ok=True)
        self.outputs = []
        self.status = {s: "not requested" for s in STAGES}
        self.models = {}
        self.weight_tables = {}
        self.metrics = []
        self._load_inputs()

    # helpers

    def out(self, *parts):
        path = os.path.join(self.run_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        rel = os.path.relpath(path, self.run_dir)
        if rel not in self.outputs:
            self.outputs.append(rel)
        return path

    def _load_inputs(self):
        schema = dict(tgra_schema())
        path = self.cfg.path(self.d["inputs"]["samples"])
        header = [h for h in _csv_header(path) if h not in ("label", "x", "y")]
        for h in header:
            schema.setdefault(h, FactorMeta(h))
        table = load_factor_table(path, schema)
        if table.labels is None:
            raise ValueError(f"{path}: samples need a 'label' column")
        self.table = table
        self.fsets = self.cfg.factor_sets(table.names)
        self.train, self.test = split_train_test(table, self.d["split"]["test_fraction"], self.seed)

    def model_names(self):
        return list(self.d["models"])

    def model_path(self, fs, name):
        return self.out(fs, "models", f"{name}.json")

    # stages

    def diagnose(self):
        for fs, names in self.fsets:
            tr = self.train.select(names)
            vif(tr).write_csv(self.out(fs, "vif.csv"))
            ols_regression(tr).write_csv(self.out(fs, "ols.csv"))

    def _fit(self, fs, names, name):
        tr = self.train.select(names)
        if name in STAT_MODELS:
            est, tables = train_lsi(tr, name, k=self.d["binning"]["classes"])
            self.weight_tables[fs] = tables
            return TrainedModel(est, names, None)
        std, scaler = standardize(tr)
        params = self.cfg.hyperparameters(name)
        extra = {"seed": self.seed} if "seed" in _trainer_params(name) else {}
        if self.d["search"].get("enabled"):
            space = self.d["search"]["spaces"].get(name) or SEARCH_SPACES[name]
            trainer = TRAINERS[name]
            res = grid_search(lambda X, y, **kw: trainer(X, y, **{**extra, **kw}), space, std.rows, std.labels,
                              folds=self.d["search"]["folds"], seed=self.seed, fixed=params)
            with open(self.out(fs, "search", f"{name}.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                keys = list(space)
                w.writerow(keys + ["mean_auc"] + [f"fold_{i + 1}" for i in range(self.d["search"]["folds"])])
                for conf, mean, folds in res.table:
                    w.writerow([conf[k] for k in keys] + [repr(mean)] + [repr(f) for f in folds])
            params = {**params, **res.best_config}
        est = TRAINERS[name](std.rows, std.labels, **extra, **params)
        return TrainedModel(est, names, scaler)

    def model(self, fs, names, name):
        key = (fs, name)
        if key not in self.models:
            path = os.path.join(self.run_dir, fs, "models", f"{name}.json")
            if "train" not in self.stages and os.path.isfile(path):
                self.models[key] = load_model(path)
                self.out(fs, "models", f"{name}.json")
            else:
                m = self._fit(fs, names, name)
                save_model(m, self.model_path(fs, name))
                self.models[key] = load_model(self.model_path(fs, name))
        return self.models[key]

    def train_stage(self):
        for fs, names in self.fsets:
            for name in self.model_names():
                self.model(fs, names, name)
            if fs in self.weight_tables:
                write_weight_tables(self.weight_tables[fs], self.out(fs, "weights.csv"))

    def evaluate(self):
        thr = self.d["evaluation"]["threshold"]
        rows = []
        for fs, names in self.fsets:
            te = self.test.select(names)
            for name in self.model_names():
                scores = self.model(fs, names, name).predict_proba(te.rows)
                rows.append((name, fs, confusion_metrics(scores, te.labels, thr), auc_score(scores, te.labels)))
        write_metrics_csv(rows, self.out("metrics.csv"))
        self.metrics = rows

    def explain(self):
        ex = self.d["explain"]
        lime_cfg = LimeConfig(**ex["lime"])
        rng = np.random.default_rng(self.seed)
        pick = np.sort(rng.choice(self.test.n, min(ex["instances"], self.test.n), replace=False))
        for fs, names in self.fsets:
            tr = self.train.select(names)
            te = self.test.select(names)
            bg = background_sample(tr, ex["background"], self.seed)
            categories = {j: np.unique(tr.rows[:, j]) for j, meta in enumerate(tr.metas)
                          if meta.kind == CATEGORICAL}
            spread = tr.rows.std(axis=0)
            spread[spread == 0] = 1.0
            rankings, local = [], {}
            for name in self.model_names():
                model = self.model(fs, names, name)
                for method in ex["methods"]:
                    if method == "deeplift" and name not in NEURAL_MODELS:
                        continue
                    attrs = []
                    for k, i in enumerate(pick):
                        x = te.rows[i]
                        iid = str(int(i))
                        if method == "shapley":
                            if len(names) <= ex["exact_max_factors"]:
                                a = shapley_exact(model, bg, x, model_id=name, instance_id=iid)
                            else:
                                a = shapley_sampled(model, bg, x, ex["permutations"], self.seed + k,
                                                    model_id=name, instance_id=iid)
                        elif method == "lime":
                            a = lime_explain(model, x, lime_cfg, self.seed + k, model_id=name, instance_id=iid,
                                             perturbation_std=spread, categories=categories)
                        else:
                            a = deeplift(model, x, background=bg, model_id=name, instance_id=iid)
                        attrs.append(a)
                    write_attributions(attrs, self.out(fs, "attributions", f"{name}_{method}.csv"))
                    gi = global_importance(attrs)
                    rankings.append(gi)
                    local[gi.label] = attrs
            with open(self.out(fs, "importance.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["combination", "factor", "mean_abs", "rank"])
                for gi in rankings:
                    for f, v, r in zip(gi.factors, gi.mean_abs, gi.ranks):
                        w.writerow([gi.label, f, repr(float(v)), int(r)])
            if len(rankings) >= 2:
                rep = consistency_report(rankings, local, ex["top_k"])
                rep.write_matrix_csv(self.out(fs, "consistency_matrix.csv"))
                rep.write_topk_csv(self.out(fs, "consistency_topk.csv"))

    def _rasters(self, names):
        rdir = self.cfg.path(self.d["inputs"]["rasters"])
        grids = {}
        for n in names:
            p = os.path.join(rdir, slug(n) + ".asc")
            if not os.path.isfile(p):
                raise FileNotFoundError(f"no raster for factor {n!r} (expected {p})")
            grids[n] = read_ascii_grid(p)
        ref = grids[names[0]]
        for n, g in grids.items():
            if (g.ncols, g.nrows, g.xllcorner, g.yllcorner, g.cellsize) != \
                    (ref.ncols, ref.nrows, ref.xllcorner, ref.yllcorner, ref.cellsize):
                raise ValueError(f"raster for {n!r} is not aligned with {names[0]!r}")
        return grids

    def map_stage(self):
        if not self.d["inputs"].get("rasters"):
            self.status["map"] = "skipped: no rasters configured"
            return False
        mp = self.d["mapping"]
        mask = None
        if self.d["inputs"].get("landslides"):
            mask_grid = read_ascii_grid(self.cfg.path(self.d["inputs"]["landslides"]))
            mask = mask_grid.valid & (mask_grid.values > 0)
        for fs, names in self.fsets:
            grids = self._rasters(names)
            ref = grids[names[0]]
            valid = np.logical_and.reduce([g.valid for g in grids.values()])
            rows = np.column_stack([grids[n].values[valid] for n in names])
            density_rows = []
            for name in self.model_names():
                model = self.model(fs, names, name)
                scores = np.concatenate([model.predict_proba(rows[s:s + 20000])
                                         for s in range(0, len(rows), 20000)])
                values = np.full(valid.shape, ref.nodata)
                values[valid] = scores
                score_grid = RasterGrid.like(ref, values)
                write_ascii_grid(score_grid, self.out(fs, "maps", f"{name}_score.asc"))
                breaks = jenks_breaks(scores, mp["classes"], max_sample=mp["max_sample"], seed=self.seed)
                sus = classify_grid(score_grid, breaks)
                export_ascii_grid(sus, self.out(fs, "maps", f"{name}.asc"))
                self.out(fs, "maps", f"{name}.legend.txt")
                if mask is not None:
                    density_rows.append((name, density_by_class(sus, mask, mp["classes"])))
            if density_rows:
                with open(self.out(fs, "density.csv"), "w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["Model"] + list(sus.level_names))
                    for name, pct in density_rows:
                        w.writerow([name] + [repr(float(v)) for v in pct])
        return True

    def manifest(self, status, error=None):
        m = {
            "format": "lsmkit-run",
            "version": 1,
            "config_hash": self.digest,
            "config": {k: v for k, v in self.d.items() if k != "output"},
            "seeds": {"master": self.seed, "split": self.seed, "models": self.seed, "background": self.seed,
                      "explanations": f"{self.seed} + instance index", "jenks": self.seed},
            "inputs": {os.path.relpath(p, self.cfg.base_dir): _sha256(p) for p in _input_files(self.cfg)},
            "stages": self.status,
            "status": status,
            "outputs": {rel: _sha256(os.path.join(self.run_dir, rel)) for rel in sorted(self.outputs)
                        if os.path.isfile(os.path.join(self.run_dir, rel))},
        }
        if error is not None:
            m["error"] = error
            m["partial"] = True
        with open(os.path.join(self.run_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(m, fh, sort_keys=True, indent=1, default=str)
            fh.write("\n")
        return m


def run_pipeline(config, *, stages=None, **overrides) -> RunResult:
    """Run the requested stages (all by default) and write the report bundle.

    ``config`` is a PipelineConfig, a mapping or a YAML path. Overrides:
    ``seed``, ``out``, ``factor_sets``, ``models``, ``methods``.
    """
    if isinstance(config, (str, os.PathLike)):
        config = PipelineConfig.load(config)
    elif isinstance(config, dict):
        config = PipelineConfig.from_dict(config)
    config = config.override(**overrides)
    diags = check_config({k: v for k, v in config.data.items()}, config.base_dir)
    if diags:
        raise PipelineError("validate", "; ".join(diags))
    stages = tuple(s for s in STAGES if s in (stages or STAGES))
    try:
        run = _Run(config, stages)
    except Exception as exc:
        raise PipelineError("ingest", exc) from exc
    actions = {"diagnose": run.diagnose, "train": run.train_stage, "evaluate": run.evaluate,
               "explain": run.explain, "map": run.map_stage}
    for stage in stages:
        try:
            done = actions[stage]()
        except Exception as exc:
            run.status[stage] = "failed"
            run.manifest("failed", {"stage": stage, "cause": f"{type(exc).__name__}: {exc}"})
            raise PipelineError(stage, exc) from exc
        if done is not False:
            run.status[stage] = "complete"
    manifest = run.manifest("complete")
    return RunResult(run.run_dir, manifest, run.metrics)


__all__ = ["PipelineConfig", "PipelineError", "RunResult", "run_pipeline", "validate_config", "check_config",
           "config_digest", "STAGES", "MODEL_NAMES", "METHODS", "DEFAULTS", "DEFAULT_HYPERPARAMETERS"]
