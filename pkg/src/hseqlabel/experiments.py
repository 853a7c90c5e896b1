"""Multi-seed experiment drivers: architecture variants and ablations."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .evaluation import evaluate, flatten_metrics, replication_report
from .features import FeatureConfig
from .ingest import CorpusRecord
from .model import ModelConfig
from .training import build_documents, section_config, section_subrecords, train, train_section_specific

logger = logging.getLogger(__name__)

# name -> (description, config overrides)
ABLATION_VARIANTS = {
    "v1": ("IF+BiRNN+CRF", {}),
    "v2": ("IF+BiRNN+Softmax", {"head": "softmax"}),
    "v3": ("IF+CRF", {"use_token_birnn": False, "use_line_birnn": False}),
}
EXTERNAL_VARIANT = ("v4", "XF+BiRNN+CRF", {"feature_source": "external"})

TASK_VARIANTS = {
    "multi": ("multi-task", {"task": "multi"}),
    "tokens_only": ("single-task tokens", {"task": "tokens_only"}),
    "lines_only": ("single-task lines", {"task": "lines_only"}),
}


def variant_config(base: ModelConfig, overrides: dict, seed: int) -> ModelConfig:
    return dataclasses.replace(base, **overrides, seed=seed)


@dataclass
class VariantRuns:
    name: str
    description: str
    runs: list[dict] = field(default_factory=list)
    losses: list[list[float]] = field(default_factory=list)
    models: list = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        return replication_report(self.runs)

    def mean(self, metric: str) -> float:
        return self.summary()[metric]["mean"]


def run_variant(
    name: str,
    description: str,
    base: ModelConfig,
    overrides: dict,
    train_records: Sequence[CorpusRecord],
    test_records: Sequence[CorpusRecord],
    features: FeatureConfig,
    seeds: Sequence[int],
    progress: Callable[[str], None] | None = None,
    keep_models: bool = False,
) -> VariantRuns:
    out = VariantRuns(name, description)
    for seed in seeds:
        cfg = variant_config(base, overrides, seed)
        tr, te = build_documents(train_records, cfg), build_documents(test_records, cfg)
        t0 = time.perf_counter()
        result = train(cfg, tr, features)
        out.seconds.append(time.perf_counter() - t0)
        if keep_models:
            out.models.append(result.model)
        report = evaluate(result.model, te)
        report.pop("per_label")
        out.runs.append(flatten_metrics(report))
        out.losses.append(result.losses)
        if progress is not None:
            progress(f"{name} seed={seed} " + " ".join(f"{k}={v:.4f}" for k, v in out.runs[-1].items()
                                                       if k.endswith("micro_f1")))
    return out


def run_ablation(
    base: ModelConfig,
    train_records: Sequence[CorpusRecord],
    test_records: Sequence[CorpusRecord],
    features: FeatureConfig,
    seeds: Sequence[int],
    external: FeatureConfig | None = None,
    variants: Sequence[str] = tuple(ABLATION_VARIANTS),
    progress: Callable[[str], None] | None = None,
) -> dict[str, VariantRuns]:
    """Train and evaluate each ablation variant once per seed."""
    out = {}
    for name in variants:
        desc, overrides = ABLATION_VARIANTS[name]
        out[name] = run_variant(name, desc, base, overrides, train_records, test_records, features, seeds, progress)
    if external is not None:
        name, desc, overrides = EXTERNAL_VARIANT
        out[name] = run_variant(name, desc, base, overrides, train_records, test_records, external, seeds, progress)
    return out


def run_section_specific(
    base: ModelConfig,
    section: str,
    train_records: Sequence[CorpusRecord],
    test_records: Sequence[CorpusRecord],
    features: FeatureConfig,
) -> dict:
    """Token report of a section-specific model on gold segments of ``section``."""
    result = train_section_specific(base, train_records, section, features)
    te = build_documents(section_subrecords(test_records, section), section_config(base, section))
    report = evaluate(result.model, te)
    report.pop("per_label")
    return report


def comparison_table(results: dict[str, VariantRuns], metrics: Sequence[str] = ("tokens.micro_f1", "lines.micro_f1")) -> str:
    """Plain-text table of mean [min, max] per variant, in percent."""
    header = f"{'variant':<8} {'model':<20} " + " ".join(f"{m:>26}" for m in metrics)
    rows = [header]
    for name, vr in results.items():
        summ = vr.summary()
        cells = []
        for m in metrics:
            if m in summ:
                s = summ[m]
                cells.append(f"{100 * s['mean']:7.2f} [{100 * s['min']:6.2f}, {100 * s['max']:6.2f}]")
            else:
                cells.append("-")
        rows.append(f"{name:<8} {vr.description:<20} " + " ".join(f"{c:>26}" for c in cells))
    return "\n".join(rows)
