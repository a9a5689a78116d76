"""Post-synthesis disclosure control: replicated-unique removal, noise, stamping."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .tabular import Categorical, Column, Dataset, Numeric


@dataclass(frozen=True)
class SdcConfig:
    key_variables: tuple[str, ...] = ()     # empty = no unique-removal
    noise_targets: tuple[str, ...] = ()
    noise_scale: float = 0.0                # fraction of column sd; 0 = off
    label: str = "synthetic"

    def __post_init__(self):
        if self.noise_scale < 0:
            raise DataError("noise_scale must be >= 0")


def sdc_from_json(doc: dict | None) -> SdcConfig | None:
    if not doc:
        return None
    return SdcConfig(
        key_variables=tuple(doc.get("key_variables", ())),
        noise_targets=tuple(doc.get("noise_targets", ())),
        noise_scale=float(doc.get("noise_scale", 0.0)),
        label=doc.get("label", "synthetic"),
    )


def _key_tuples(data: Dataset, keys) -> list[tuple]:
    cols = []
    for k in keys:
        col = data.column(k)
        if isinstance(col.kind, Categorical):
            cols.append(col.decoded())
        else:
            # NaN != NaN would break matching; use a token for missing
            cols.append(["NA" if np.isnan(v) else repr(float(v)) for v in col.values])
    return list(zip(*cols)) if cols else []


def remove_replicated_uniques(
    original: Dataset, synthetic: Dataset, keys
) -> tuple[Dataset, int]:
    """Drop synthetic rows whose key-tuple is unique in BOTH datasets.

    A tuple unique in the original but appearing twice in the synthetic is
    kept; so is anything non-unique in the original.
    """
    keys = tuple(keys)
    if not keys:
        raise DataError("replicated-unique removal needs a non-empty key set")
    for k in keys:
        if k not in original or k not in synthetic:
            raise DataError(f"key column {k!r} missing from a dataset")
    orig_counts = Counter(_key_tuples(original, keys))
    syn_tuples = _key_tuples(synthetic, keys)
    syn_counts = Counter(syn_tuples)
    drop = np.array(
        [orig_counts.get(t) == 1 and syn_counts[t] == 1 for t in syn_tuples],
        dtype=bool,
    )
    removed = int(drop.sum())
    if removed == 0:
        return synthetic, 0
    return synthetic.take(np.flatnonzero(~drop)), removed


def add_noise(
    synthetic: Dataset, targets, noise_scale: float, rng: np.random.Generator
) -> Dataset:
    """Add N(0, (noise_scale * column sd)^2) to non-missing numeric cells."""
    if noise_scale < 0:
        raise DataError("noise_scale must be >= 0")
    out = synthetic
    for name in targets:
        col = synthetic.column(name)
        if not isinstance(col.kind, Numeric):
            raise DataError(f"noise target {name!r} is not numeric")
        if noise_scale == 0:
            continue
        v = col.values.copy()
        obs = ~np.isnan(v)
        if obs.sum() >= 2:
            sd = float(np.std(v[obs], ddof=1))
            if sd > 0:
                v[obs] = v[obs] + rng.normal(0.0, noise_scale * sd, int(obs.sum()))
        out = out.with_column(Column(name, col.kind, v))
    return out


def stamp_synthetic(dataset: Dataset, label: str = "synthetic") -> Dataset:
    """Mark a dataset as synthetic; write_csv renders the stamp as a leading
    '# SYNTHETIC DATA: ...' comment line.  An empty label still stamps, with
    a generation timestamp."""
    if not label:
        label = "generated " + datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return dataset.with_label(label)


def apply_sdc(
    original: Dataset,
    synthetic: Dataset,
    config: SdcConfig,
    rng: np.random.Generator,
) -> tuple[Dataset, dict]:
    """Run the configured SDC steps; returns (dataset, report fragment)."""
    report: dict = {"removed_replicated_uniques": 0, "noise": {}, "label": None}
    out = synthetic
    if config.key_variables:
        out, removed = remove_replicated_uniques(original, out, config.key_variables)
        report["removed_replicated_uniques"] = removed
    if config.noise_targets and config.noise_scale > 0:
        out = add_noise(out, config.noise_targets, config.noise_scale, rng)
        report["noise"] = {t: config.noise_scale for t in config.noise_targets}
    out = stamp_synthetic(out, config.label)
    report["label"] = out.label
    return out, report
