"""Study configuration and the file-based pipeline stages.

Artifacts inside ``output_dir``::

    design.csv, design.json         sample stage
    store/, records.json            run stage
    run_summary.json                run stage (launch counts)
    surrogates/index.json           fit stage
    surrogates/step_NNN.json        fit stage, one surrogate per timestep
    moments.csv, sobol.csv          analyze stage
    pdf_<channel>.csv               analyze stage
    report.md                       report stage

Every stage reads its predecessor's artifacts from disk, so each can be
invoked on its own. Files are only rewritten when their content changes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, schemas
from .basis import basis_size, total_degree_set
from .errors import ConfigError, StageOrderError, UndersamplingError
from .harness import EnsembleStore, RunRecord, SimulatorSpec, extract_channels, run_ensemble
from .regression import CONDITION_LIMIT, SurrogateModel, build_design, fit_surrogate
from .sampling import InputVariable, SampleDesign, check_unique_names, families, sample, sidecar_json

log = logging.getLogger(__name__)

WARN_RATIO = 1.5
STAGES = ("sample", "run", "fit", "analyze", "report")


@dataclass(frozen=True)
class AnalysisOptions:
    pdf_resamples: int = 100_000
    pdf_method: str = "histogram"
    pdf_step: int = -1
    condition_limit: float = CONDITION_LIMIT


@dataclass(frozen=True)
class StudyConfig:
    inputs: tuple
    order: int
    samples: int
    seed: int
    simulator: SimulatorSpec
    output_dir: Path
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    source: Path | None = None

    @property
    def names(self):
        return [v.name for v in self.inputs]

    @property
    def terms(self) -> int:
        return basis_size(len(self.inputs), self.order)

    @property
    def ratio(self) -> float:
        return self.samples / self.terms

    def basis(self):
        return total_degree_set(len(self.inputs), self.order, families(self.inputs))

    def check_sampling(self):
        """Raise when m < P+1; warn below the 1.5x oversampling ratio."""
        if self.samples < self.terms:
            raise UndersamplingError(self.samples, self.terms)
        if self.samples < WARN_RATIO * self.terms:
            log.warning("oversampling ratio %.2f is below %.1f (m=%d, P+1=%d)",
                        self.ratio, WARN_RATIO, self.samples, self.terms)


def load_config(path, seed: int | None = None) -> StudyConfig:
    """Parse and validate a study JSON document; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise schemas.SchemaValidationError(path, "", f"not valid JSON: {exc}") from None
    schemas.validate(doc, schemas.CONFIG, path)
    base = path.resolve().parent
    try:
        inputs = tuple(InputVariable.from_dict(d) for d in doc["inputs"])
        check_unique_names(inputs)
        simulator = SimulatorSpec.from_dict(doc["simulator"], base_dir=base)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    simulator.validate([v.name for v in inputs])
    opts = AnalysisOptions(**doc.get("analysis", {}))
    return StudyConfig(
        inputs=inputs,
        order=doc["order"],
        samples=doc["samples"],
        seed=doc["seed"] if seed is None else seed,
        simulator=simulator,
        output_dir=base / doc.get("output_dir", "study_output"),
        analysis=opts,
        source=path,
    )


def write_if_changed(path: Path, text: str) -> bool:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists() and path.read_text() == text:
        return False
    path.write_text(text)
    return True


def _require(path: Path) -> Path:
    if not path.exists():
        raise StageOrderError(path)
    return path


def _dumps(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


# sample

def stage_sample(cfg: StudyConfig) -> SampleDesign:
    cfg.check_sampling()
    design = sample(cfg.inputs, cfg.samples, cfg.seed)
    out = cfg.output_dir
    write_if_changed(out / "design.csv", design.to_csv())
    write_if_changed(out / "design.json", sidecar_json(design))
    print(f"basis terms P+1 = {cfg.terms} (n={len(cfg.inputs)}, p={cfg.order}); "
          f"samples m = {cfg.samples}; oversampling ratio = {cfg.ratio:.2f}")
    return design


def load_design(cfg: StudyConfig) -> SampleDesign:
    csv_text = _require(cfg.output_dir / "design.csv").read_text()
    side = json.loads(_require(cfg.output_dir / "design.json").read_text())
    design = SampleDesign.from_files(csv_text, side)
    if design.names != cfg.names:
        raise ConfigError("design.csv inputs differ from the config; rerun the sample stage")
    return design


# run

def stage_run(cfg: StudyConfig, parallelism: int = 1, force: bool = False) -> list[RunRecord]:
    design = load_design(cfg)
    store = EnsembleStore(cfg.output_dir / "store")
    records = run_ensemble(cfg.simulator, design, parallelism=parallelism, store=store, force=force)
    out = cfg.output_dir
    write_if_changed(out / "records.json", _dumps([r.to_dict() for r in records]))
    failed = [r.index for r in records if not r.ok]
    summary = {"rows": len(records), "launched": store.launched, "cached": len(records) - store.launched,
               "failed_rows": failed}
    write_if_changed(out / "run_summary.json", _dumps(summary))
    print(f"runs: {len(records)} rows, {store.launched} launched, {len(failed)} failed")
    return records


def load_records(cfg: StudyConfig) -> list[RunRecord]:
    doc = json.loads(_require(cfg.output_dir / "records.json").read_text())
    return [RunRecord.from_dict(d) for d in doc]


# fit

def fit_models(cfg: StudyConfig, design: SampleDesign, records: list[RunRecord]) -> list[SurrogateModel]:
    """Fit one surrogate per timestep from the surviving (ok) records."""
    ok = [r for r in records if r.ok]
    if len(ok) < len(records):
        log.warning("fitting on %d of %d rows; failed rows %s", len(ok), len(records),
                    [r.index for r in records if not r.ok])
    spec = cfg.basis()
    if len(ok) < len(spec):
        raise UndersamplingError(len(ok), len(spec))
    rows = [r.index for r in ok]
    A = build_design(spec, design.germ[rows])

    per_step: dict[int, dict] = {}
    for rule in cfg.simulator.outputs:
        resp = extract_channels(ok, rule.channel)
        for k in range(resp.steps):
            slot = per_step.setdefault(k, {"responses": {}, "times": {}})
            slot["responses"][rule.channel] = resp.values[k]
            slot["times"][rule.channel] = None if resp.times is None else float(resp.times[k])

    models = []
    for k in sorted(per_step):
        meta = {"step": k, "times": per_step[k]["times"], "rows": rows}
        models.append(fit_surrogate(A, per_step[k]["responses"], meta, cfg.analysis.condition_limit))
    return models


def stage_fit(cfg: StudyConfig) -> list[SurrogateModel]:
    design = load_design(cfg)
    records = load_records(cfg)
    models = fit_models(cfg, design, records)
    sdir = cfg.output_dir / "surrogates"
    index = []
    for model in models:
        name = f"step_{model.meta['step']:03d}.json"
        write_if_changed(sdir / name, model.to_json())
        index.append({"step": model.meta["step"], "file": name, "times": model.meta["times"]})
    write_if_changed(sdir / "index.json", _dumps({"steps": index}))
    print(f"fit: {len(models)} timestep surrogates, {len(cfg.simulator.outputs)} channels, "
          f"{len(cfg.basis())} terms each")
    return models


def load_models(cfg: StudyConfig) -> list[SurrogateModel]:
    sdir = cfg.output_dir / "surrogates"
    index = json.loads(_require(sdir / "index.json").read_text())
    models = []
    for entry in index["steps"]:
        path = _require(sdir / entry["file"])
        models.append(SurrogateModel.from_json(path.read_text(), source=path))
    return models


# analyze

def channel_series(models: list[SurrogateModel], channel: str):
    """(time, model) pairs for every step that carries ``channel``, in step order."""
    return [(m.meta["times"][channel], m) for m in models if channel in m.channels]


def summarize(cfg: StudyConfig, models: list[SurrogateModel]) -> dict:
    return {rule.channel: analysis.timeseries_summary(channel_series(models, rule.channel), rule.channel)
            for rule in cfg.simulator.outputs}


def stage_analyze(cfg: StudyConfig, models: list[SurrogateModel] | None = None) -> dict:
    models = load_models(cfg) if models is None else models
    summaries = summarize(cfg, models)
    out = cfg.output_dir
    write_if_changed(out / "moments.csv", analysis.moments_csv(summaries))
    write_if_changed(out / "sobol.csv", analysis.sobol_csv(summaries, cfg.names))
    opts = cfg.analysis
    for rule in cfg.simulator.outputs:
        series = channel_series(models, rule.channel)
        _, model = series[opts.pdf_step]
        est = analysis.surrogate_pdf(model, rule.channel, opts.pdf_resamples, cfg.seed, opts.pdf_method)
        write_if_changed(out / f"pdf_{rule.channel}.csv", analysis.pdf_csv(est))
    print(f"analyze: wrote moments.csv, sobol.csv and {len(cfg.simulator.outputs)} pdf files")
    return summaries


# report

def _g(x, digits=5):
    return "" if x is None else f"{x:.{digits}g}"


def render_report(cfg: StudyConfig, summaries: dict) -> str:
    lines = ["# Uncertainty and sensitivity report", ""]
    if cfg.source is not None:
        lines += [f"Study: `{cfg.source.name}`", ""]
    lines += [
        f"- basis terms P+1 = {cfg.terms} (n = {len(cfg.inputs)}, total order p = {cfg.order})",
        f"- samples m = {cfg.samples}, oversampling ratio = {cfg.ratio:.2f}, seed = {cfg.seed}",
        "",
        "## Input distributions",
        "",
        "| # | input | units | distribution | mean | std | CV |",
        "|---|---|---|---|---|---|---|",
    ]
    for k, v in enumerate(cfg.inputs, 1):
        d = v.distribution
        if d.kind == "normal":
            mu, sd = d.mean, d.std
        else:
            mu, sd = 0.5 * (d.low + d.high), (d.high - d.low) / math.sqrt(12.0)
        cv = _g(sd / mu, 3) if mu else ""
        lines.append(f"| {k} | {v.name} | {v.units} | {d.kind} | {_g(mu)} | {_g(sd)} | {cv} |")

    for channel, rows in summaries.items():
        lines += ["", f"## {channel}", "", "### Mean and 3-sigma band", "",
                  "| time | mean | std | mean-3σ | mean+3σ |", "|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {_g(r.time)} | {_g(r.mean)} | {_g(r.std)} | {_g(r.lower)} | {_g(r.upper)} |")
        last = next((r for r in reversed(rows) if not r.degenerate), None)
        at = "" if last is None or last.time is None else f" at time {_g(last.time)}"
        lines += ["", "### Sobol indices" + at, ""]
        if last is None:
            lines.append("Zero variance at every step; indices undefined.")
            continue
        lines += ["| # | input | first order | total |", "|---|---|---|---|"]
        for k, name in enumerate(cfg.names):
            lines.append(f"| {k + 1} | {name} | {last.first_order[k]:.4f} | {last.total[k]:.4f} |")
        pdf = cfg.output_dir / f"pdf_{channel}.csv"
        if pdf.exists():
            lines += ["", f"Output density: `{pdf.name}`"]
    lines.append("")
    return "\n".join(lines)


def stage_report(cfg: StudyConfig) -> Path:
    for name in ("moments.csv", "sobol.csv"):
        _require(cfg.output_dir / name)
    summaries = summarize(cfg, load_models(cfg))
    path = cfg.output_dir / "report.md"
    path.write_text(render_report(cfg, summaries))
    print(f"report: {path}")
    return path


def run_stages(cfg: StudyConfig, stage: str = "all", parallelism: int = 1, force: bool = False):
    todo = STAGES if stage == "all" else (stage,)
    if stage != "all" and stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if "sample" in todo:
        stage_sample(cfg)
    if "run" in todo:
        stage_run(cfg, parallelism, force)
    if "fit" in todo:
        stage_fit(cfg)
    if "analyze" in todo:
        stage_analyze(cfg)
    if "report" in todo:
        stage_report(cfg)
