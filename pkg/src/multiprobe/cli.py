"""Pipeline orchestration and command-line entry points.

Stages run in a fixed order (compose, probe, emit, evaluate, report), each
persisting one or two JSONL/JSON artifacts into the run directory. A
manifest records the config hash, seed, template hash, backend id, and
per-stage artifact checksums; re-running a completed stage with unchanged
inputs is a no-op. Artifacts are plain files so runs stay diffable.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import boundary as boundary_mod
from . import metrics as metrics_mod
from .composer import MultiProblem, PromptTemplate, compose, default_template, load_template
from .data_model import (
    DataError,
    Dataset,
    Problem,
    Setting,
    load_dataset,
    problem_from_dict,
    problem_to_dict,
    serialize,
    validate,
)
from .metrics import MetricError, PredictionRecord, build_report
from .model_client import (
    Backend,
    BackendError,
    ConfidenceBehavior,
    MockBackend,
    MockModelSpec,
    ModelClient,
    RemoteBackend,
)
from .sft_emitter import (
    QASource,
    RecordKind,
    build_multqa,
    build_multqa_conf,
    emit,
)

CANONICAL_STAGES = ("compose", "probe", "emit", "evaluate", "report")

ARTIFACTS = {
    "compose": ("composition.jsonl",),
    "probe": ("boundary.jsonl",),
    "emit": ("multqa.jsonl", "multqa_conf.jsonl"),
    "evaluate": ("predictions.jsonl", "report.json"),
    "report": ("report.txt", "bins.csv"),
}


class UsageError(Exception):
    """Bad flags or config (maps to exit code 1)."""


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    dataset: str
    setting: str
    output_dir: str
    n: int = 3
    seed: int = 0
    template: str | None = None
    exemplar: str | None = None
    backend: dict = field(default_factory=lambda: {"kind": "mock", "accuracy": 1.0, "seed": 0})
    stages: tuple[str, ...] = CANONICAL_STAGES
    parallelism: int = 4
    max_tokens: int = 512
    qa_source: str = QASource.MODEL_ANSWERS.value
    lenient: bool = False
    cache_dir: str | None = None  # defaults to <output_dir>/cache

    def check(self) -> None:
        if self.n < 1:
            raise UsageError(f"n must be >= 1, got {self.n}")
        if list(self.stages) != list(CANONICAL_STAGES[: len(self.stages)]):
            raise UsageError(
                f"stages must be a prefix of {list(CANONICAL_STAGES)}, got {list(self.stages)}"
            )
        try:
            Setting(self.setting)
        except ValueError:
            raise UsageError(f"unknown setting {self.setting!r}") from None
        try:
            QASource(self.qa_source)
        except ValueError:
            raise UsageError(f"unknown qa_source {self.qa_source!r}") from None
        if self.backend.get("kind", "mock") not in ("mock", "remote"):
            raise UsageError(f"unknown backend kind {self.backend.get('kind')!r}")

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        """Load the JSON config document; flag overrides win over file values."""
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        if "stages" in obj:
            obj["stages"] = tuple(obj["stages"])
        try:
            config = cls(**obj)
        except TypeError as exc:
            raise UsageError(f"bad config: {exc}") from exc
        return config


@dataclass
class RunSummary:
    executed: list[str]
    skipped: list[str]
    artifacts: dict[str, str]
    report: metrics_mod.CalibrationReport | None


# ---------------------------------------------------------------------------
# Artifact I/O
# ---------------------------------------------------------------------------


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: Path) -> str:
    return _sha256_bytes(path.read_bytes())


def write_composition(multis: list[MultiProblem], dataset_name: str, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for m in multis:
            obj = {
                "multi_id": m.multi_id,
                "n": m.n,
                "setting": m.setting.value,
                "dataset": dataset_name,
                "shared_context": m.shared_context,
                "prompt": m.prompt,
                "members": [problem_to_dict(p) for p in m.members],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_composition(path: Path) -> list[MultiProblem]:
    multis = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                members = tuple(
                    problem_from_dict(p, obj["dataset"]) for p in obj["members"]
                )
                multis.append(
                    MultiProblem(
                        multi_id=obj["multi_id"],
                        members=members,
                        n=obj["n"],
                        setting=Setting(obj["setting"]),
                        shared_context=obj["shared_context"],
                        prompt=obj["prompt"],
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path.name} line {line_no}: {exc}") from exc
    return multis


def write_boundary(records: list[boundary_mod.BoundaryRecord], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "multi_id": r.multi.multi_id,
                "answers": list(r.parsed.answers),
                "matches": list(r.matches),
                "labels": [label.rendered for label in r.labels],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_boundary(path: Path, multis: list[MultiProblem]) -> list[boundary_mod.BoundaryRecord]:
    by_id = {m.multi_id: m for m in multis}
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                multi = by_id[obj["multi_id"]]
                records.append(
                    boundary_mod.BoundaryRecord(
                        multi=multi,
                        parsed=boundary_mod.ParsedAnswers(
                            answers=tuple(obj["answers"]), parse_warnings=()
                        ),
                        matches=tuple(bool(v) for v in obj["matches"]),
                        labels=tuple(
                            metrics_mod.label_from_text(t) for t in obj["labels"]
                        ),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path.name} line {line_no}: {exc}") from exc
    return records


def write_predictions(records: list[PredictionRecord], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "question_id": r.question_id,
                "correct": r.correct,
                "confidence": r.confidence,
                "label": r.label.rendered,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_predictions(path: Path) -> list[PredictionRecord]:
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    PredictionRecord(
                        question_id=obj["question_id"],
                        correct=bool(obj["correct"]),
                        confidence=float(obj["confidence"]),
                        label=metrics_mod.label_from_text(obj["label"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path.name} line {line_no}: {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# Backend construction
# ---------------------------------------------------------------------------


def build_backend(spec: dict, problems: list[Problem]) -> Backend:
    kind = spec.get("kind", "mock")
    if kind == "mock":
        mock_spec = MockModelSpec(
            accuracy=float(spec.get("accuracy", 1.0)),
            wrong_answer_text=spec.get("wrong_answer_text", "I do not recall"),
            seed=int(spec.get("seed", 0)),
            confidence_behavior=ConfidenceBehavior(spec.get("confidence_behavior", "Honest")),
        )
        return MockBackend(mock_spec, problems)
    if kind == "remote":
        try:
            return RemoteBackend(
                base_url=spec["base_url"],
                model=spec["model"],
                api_key_env=spec.get("api_key_env", "MULTIPROBE_API_KEY"),
                timeout=float(spec.get("timeout", 120.0)),
            )
        except KeyError as exc:
            raise UsageError(f"remote backend config missing {exc}") from exc
    raise UsageError(f"unknown backend kind {kind!r}")


# ---------------------------------------------------------------------------
# Run orchestration
# ---------------------------------------------------------------------------


class _Run:
    def __init__(self, config: RunConfig):
        config.check()
        self.config = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.dataset = load_dataset(
            config.dataset, Setting(config.setting), lenient=config.lenient
        )
        self.template = self._load_template()
        self.template_hash = _sha256_bytes(self._template_fingerprint().encode("utf-8"))
        self.dataset_hash = _sha256_file(Path(config.dataset))
        cache_dir = config.cache_dir if config.cache_dir is not None else self.out / "cache"
        self.client = ModelClient(
            build_backend(config.backend, list(self.dataset.problems)),
            cache_dir=cache_dir,
        )
        self.config_hash = self._config_hash()
        self.manifest = self._load_manifest()

    def _load_template(self) -> PromptTemplate:
        if self.config.template is not None:
            return load_template(self.config.template, exemplar=self.config.exemplar)
        return default_template(exemplar=self.config.exemplar)

    def _template_fingerprint(self) -> str:
        t = self.template
        return json.dumps(
            [t.header, t.item_format, t.answer_directive, t.exemplar], ensure_ascii=False
        )

    def _config_hash(self) -> str:
        # Output/cache locations are deliberately excluded: the same logical
        # run must have the same hash wherever its files land.
        payload = json.dumps(
            {
                "dataset_sha256": self.dataset_hash,
                "setting": self.config.setting,
                "n": self.config.n,
                "seed": self.config.seed,
                "template_sha256": self.template_hash,
                "backend": self.config.backend,
                "max_tokens": self.config.max_tokens,
                "qa_source": self.config.qa_source,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return _sha256_bytes(payload.encode("utf-8"))

    # -- manifest plumbing --

    def _manifest_path(self) -> Path:
        return self.out / "manifest.json"

    def _load_manifest(self) -> dict:
        path = self._manifest_path()
        if path.exists():
            manifest = json.loads(path.read_text(encoding="utf-8"))
            if manifest.get("config_hash") == self.config_hash:
                return manifest
        return {
            "config_hash": self.config_hash,
            "dataset_sha256": self.dataset_hash,
            "template_sha256": self.template_hash,
            "backend_id": self.client.backend_id,
            "seed": self.config.seed,
            "n": self.config.n,
            "qa_source": self.config.qa_source,
            "discriminating_tokens": [metrics_mod.SURE_TOKEN, metrics_mod.UNSURE_TOKEN],
            "stages": {},
        }

    def _write_manifest(self) -> None:
        text = json.dumps(self.manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        self._manifest_path().write_text(text, encoding="utf-8")

    def _inputs_hash(self, stage: str) -> str:
        upstream = []
        index = CANONICAL_STAGES.index(stage)
        for prior in CANONICAL_STAGES[:index]:
            for name in ARTIFACTS[prior]:
                upstream.append(self.manifest["stages"].get(prior, {}).get("artifacts", {}).get(name, ""))
        return _sha256_bytes(":".join([self.config_hash, *upstream]).encode("utf-8"))

    def _stage_is_current(self, stage: str) -> bool:
        entry = self.manifest["stages"].get(stage)
        if entry is None or entry.get("inputs_hash") != self._inputs_hash(stage):
            return False
        for name, digest in entry.get("artifacts", {}).items():
            path = self.out / name
            if not path.exists() or _sha256_file(path) != digest:
                return False
        return True

    def _record_stage(self, stage: str) -> None:
        artifacts = {name: _sha256_file(self.out / name) for name in ARTIFACTS[stage]}
        self.manifest["stages"][stage] = {
            "inputs_hash": self._inputs_hash(stage),
            "artifacts": artifacts,
        }
        self._write_manifest()

    # -- stages --

    def stage_compose(self) -> None:
        serialize(self.dataset, self.out / "dataset.normalized.jsonl")
        multis = compose(self.dataset, self.config.n, self.config.seed, self.template)
        write_composition(multis, self.dataset.name, self.out / "composition.jsonl")

    def stage_probe(self) -> None:
        multis = read_composition(self.out / "composition.jsonl")
        records = boundary_mod.probe(
            multis,
            self.client,
            self.template,
            parallelism=self.config.parallelism,
            max_tokens=self.config.max_tokens,
        )
        write_boundary(records, self.out / "boundary.jsonl")

    def stage_emit(self) -> None:
        multis = read_composition(self.out / "composition.jsonl")
        records = read_boundary(self.out / "boundary.jsonl", multis)
        qa = [build_multqa(m, self.template) for m in multis]
        conf = [build_multqa_conf(r, QASource(self.config.qa_source)) for r in records]
        emit(qa, RecordKind.MULTQA, self.out / "multqa.jsonl")
        emit(conf, RecordKind.MULTQAC, self.out / "multqa_conf.jsonl")

    def stage_evaluate(self) -> None:
        multis = read_composition(self.out / "composition.jsonl")
        records = read_boundary(self.out / "boundary.jsonl", multis)
        predictions = evaluate_confidence(
            records,
            self.client,
            qa_source=QASource(self.config.qa_source),
            parallelism=self.config.parallelism,
            max_tokens=self.config.max_tokens,
        )
        write_predictions(predictions, self.out / "predictions.jsonl")
        report = build_report(predictions)
        text = json.dumps(
            metrics_mod.report_to_dict(report), indent=2, sort_keys=True, ensure_ascii=False
        )
        (self.out / "report.json").write_text(text + "\n", encoding="utf-8")

    def stage_report(self) -> None:
        report = metrics_mod.report_from_dict(
            json.loads((self.out / "report.json").read_text(encoding="utf-8"))
        )
        (self.out / "report.txt").write_text(metrics_mod.render_table(report), encoding="utf-8")
        metrics_mod.write_bins_csv(report, self.out / "bins.csv")

    def execute(self) -> RunSummary:
        handlers = {
            "compose": self.stage_compose,
            "probe": self.stage_probe,
            "emit": self.stage_emit,
            "evaluate": self.stage_evaluate,
            "report": self.stage_report,
        }
        executed: list[str] = []
        skipped: list[str] = []
        artifacts: dict[str, str] = {}
        for stage in self.config.stages:
            if self._stage_is_current(stage):
                skipped.append(stage)
            else:
                try:
                    handlers[stage]()
                except Exception as exc:
                    # Name the failed stage; prior artifacts stay intact.
                    exc.args = (f"stage {stage!r} failed: {exc}",)
                    raise
                self._record_stage(stage)
                executed.append(stage)
            for name in ARTIFACTS[stage]:
                artifacts[name] = str(self.out / name)

        report = None
        report_path = self.out / "report.json"
        if "evaluate" in self.config.stages and report_path.exists():
            report = metrics_mod.report_from_dict(
                json.loads(report_path.read_text(encoding="utf-8"))
            )
        return RunSummary(executed=executed, skipped=skipped, artifacts=artifacts, report=report)


def run(config: RunConfig) -> RunSummary:
    """Execute the configured stage prefix, reusing any current artifacts."""
    return _Run(config).execute()


def evaluate_confidence(
    records: list[boundary_mod.BoundaryRecord],
    client: ModelClient,
    qa_source: QASource = QASource.MODEL_ANSWERS,
    parallelism: int = 4,
    max_tokens: int = 256,
) -> list[PredictionRecord]:
    """Query the model with stage-2 confidence prompts and score every slot.

    Correctness comes from the boundary record; the label is the phrase the
    model actually produced; the confidence is the discriminating-token score.
    """
    from .model_client import CompletionRequest

    prompts = [build_multqa_conf(r, qa_source).input for r in records]
    requests = [
        CompletionRequest(prompt=p, max_tokens=max_tokens, logprob_request=True)
        for p in prompts
    ]
    responses = client.complete_batch(requests, parallelism=parallelism)
    predictions: list[PredictionRecord] = []
    for i, (record, response) in enumerate(zip(records, responses)):
        if isinstance(response, Exception):
            raise BackendError(
                f"confidence query failed at MultiProblem index {i}: {response}"
            ) from response
        phrases = metrics_mod.PHRASE_RE.findall(response.text)
        for slot, member in enumerate(record.multi.members):
            score = metrics_mod.confidence_score(response, slot)
            label = (
                boundary_mod.ConfidenceLabel.UNSURE
                if phrases[slot] == "un"
                else boundary_mod.ConfidenceLabel.SURE
            )
            predictions.append(
                PredictionRecord(
                    question_id=member.id,
                    correct=record.matches[slot],
                    confidence=score,
                    label=label,
                )
            )
    return predictions


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_backend_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--backend",
        help="backend spec as inline JSON or a path to a JSON file (default: perfect mock)",
    )


def _parse_backend(value: str | None) -> dict:
    if value is None:
        return {"kind": "mock", "accuracy": 1.0, "seed": 0}
    candidate = Path(value)
    try:
        if candidate.suffix == ".json" and candidate.exists():
            return json.loads(candidate.read_text(encoding="utf-8"))
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--backend is not valid JSON: {exc}") from exc


def _template_arg(value: str | None) -> PromptTemplate:
    return load_template(value) if value else default_template()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multiprobe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[], help="check a dataset against the schema")
    p.add_argument("--dataset", required=True)
    p.add_argument("--setting", required=True, choices=[s.value for s in Setting])
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("compose", help="build multi-problem instances")
    p.add_argument("--dataset", required=True)
    p.add_argument("--setting", required=True, choices=[s.value for s in Setting])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--template")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("probe", help="probe the knowledge boundary")
    p.add_argument("--composition", required=True)
    p.add_argument("--template")
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--cache-dir")
    _add_backend_arg(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("emit", help="emit a tuning stage as JSONL")
    p.add_argument("--composition", required=True)
    p.add_argument("--boundary", help="required for --stage qa-conf")
    p.add_argument("--stage", required=True, choices=["qa", "qa-conf"])
    p.add_argument("--template")
    p.add_argument("--qa-source", choices=[s.value for s in QASource], default=QASource.MODEL_ANSWERS.value)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score calibrated confidence")
    p.add_argument("--composition", help="required unless --predictions is given")
    p.add_argument("--boundary", help="required unless --predictions is given")
    p.add_argument("--predictions", help="score this existing predictions file instead of querying")
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--qa-source", choices=[s.value for s in QASource], default=QASource.MODEL_ANSWERS.value)
    p.add_argument("--cache-dir")
    _add_backend_arg(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("report", help="render a report as text and CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("run", help="execute the configured stage prefix")
    p.add_argument("--config", required=True, help="run config JSON document")
    p.add_argument("--dataset")
    p.add_argument("--setting", choices=[s.value for s in Setting])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--template")
    p.add_argument("--out")
    p.add_argument("--stages", help="comma-separated stage prefix")
    return parser


def _cmd_validate(args: argparse.Namespace) -> int:
    problems = []
    with open(args.dataset, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            problems.append(
                problem_from_dict(
                    obj, Path(args.dataset).stem, lenient=args.lenient, line_no=line_no
                )
            )
    dataset = Dataset(
        name=Path(args.dataset).stem, setting=Setting(args.setting), problems=tuple(problems)
    )
    violations = validate(dataset)
    for v in violations:
        print(v)
    if violations:
        return 2
    print(f"ok: {len(problems)} problems")
    return 0


def _cmd_compose(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset, Setting(args.setting), lenient=args.lenient)
    multis = compose(dataset, args.n, args.seed, _template_arg(args.template))
    write_composition(multis, dataset.name, Path(args.out))
    print(f"wrote {len(multis)} multi-problems to {args.out}")
    return 0


def _cmd_probe(args: argparse.Namespace) -> int:
    multis = read_composition(Path(args.composition))
    problems = [p for m in multis for p in m.members]
    client = ModelClient(
        build_backend(_parse_backend(args.backend), problems), cache_dir=args.cache_dir
    )
    records = boundary_mod.probe(
        multis,
        client,
        _template_arg(args.template),
        parallelism=args.parallelism,
        max_tokens=args.max_tokens,
    )
    write_boundary(records, Path(args.out))
    print(f"wrote {len(records)} boundary records to {args.out}")
    return 0


def _cmd_emit(args: argparse.Namespace) -> int:
    multis = read_composition(Path(args.composition))
    if args.stage == "qa":
        template = _template_arg(args.template)
        records = [build_multqa(m, template) for m in multis]
        count = emit(records, RecordKind.MULTQA, Path(args.out))
    else:
        if not args.boundary:
            raise UsageError("--stage qa-conf needs --boundary")
        boundary_records = read_boundary(Path(args.boundary), multis)
        records = [
            build_multqa_conf(r, QASource(args.qa_source)) for r in boundary_records
        ]
        count = emit(records, RecordKind.MULTQAC, Path(args.out))
    print(f"wrote {count} tuning records to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.predictions:
        predictions = read_predictions(Path(args.predictions))
    else:
        if not args.composition or not args.boundary:
            raise UsageError("evaluate needs --composition and --boundary (or --predictions)")
        multis = read_composition(Path(args.composition))
        records = read_boundary(Path(args.boundary), multis)
        problems = [p for m in multis for p in m.members]
        client = ModelClient(
            build_backend(_parse_backend(args.backend), problems), cache_dir=args.cache_dir
        )
        predictions = evaluate_confidence(
            records,
            client,
            qa_source=QASource(args.qa_source),
            parallelism=args.parallelism,
            max_tokens=args.max_tokens,
        )
        write_predictions(predictions, out_dir / "predictions.jsonl")
    report = build_report(predictions)
    text = json.dumps(
        metrics_mod.report_to_dict(report), indent=2, sort_keys=True, ensure_ascii=False
    )
    (out_dir / "report.json").write_text(text + "\n", encoding="utf-8")
    print(metrics_mod.render_table(report), end="")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = metrics_mod.report_from_dict(
        json.loads(Path(args.report).read_text(encoding="utf-8"))
    )
    (out_dir / "report.txt").write_text(metrics_mod.render_table(report), encoding="utf-8")
    metrics_mod.write_bins_csv(report, out_dir / "bins.csv")
    print(metrics_mod.render_table(report), end="")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "dataset": args.dataset,
        "setting": args.setting,
        "n": args.n,
        "seed": args.seed,
        "template": args.template,
        "output_dir": args.out,
        "stages": tuple(args.stages.split(",")) if args.stages else None,
    }
    config = RunConfig.from_file(args.config, overrides)
    summary = run(config)
    print(f"executed: {summary.executed or '-'}  skipped: {summary.skipped or '-'}")
    if summary.report is not None:
        print(metrics_mod.render_table(summary.report), end="")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "compose": _cmd_compose,
    "probe": _cmd_probe,
    "emit": _cmd_emit,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, MetricError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
