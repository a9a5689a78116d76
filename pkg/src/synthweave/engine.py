"""One-variable-at-a-time synthesis driver.

Fits every conditional on the original data and samples with the synthetic
values of the predecessors (plug-in sequential scheme).  Rows matching a
rule's condition are excluded from that variable's fit and receive the forced
value in the output, so rules hold exactly.  Numeric targets with missing
cells get a synthesized missingness indicator; stratified runs synthesize
each stratum independently on its own RNG substream.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DataError, MethodError, PlanError
from .models import (
    fit_cart_model,
    fit_logit,
    fit_multinomial,
    fit_nested,
    fit_normrank,
    fit_sample,
    fit_transform_normal,
    SampleFit,
)
from .plan import (
    Atom,
    Cart,
    Logit,
    Multinomial,
    Nested,
    NormRank,
    Sample,
    SynthesisPlan,
    TransformNormal,
    method_name,
    plan_errors,
    validate_plan,
)
from .tabular import Categorical, Column, Dataset, Numeric


@dataclass(frozen=True)
class VariableSummary:
    name: str
    method: str
    n_fit: int
    elapsed: float
    rule_forced: int
    missing_indicator: bool
    warnings: tuple[str, ...]
    stratum: str | None = None


@dataclass(frozen=True)
class SynthesisRun:
    plan: SynthesisPlan
    original: Dataset
    synthetic: Dataset
    summaries: tuple[VariableSummary, ...]
    warnings: tuple[str, ...]
    strata: tuple[tuple[str, int], ...] | None = None


def _level_code(kind: Categorical, value) -> int:
    """Map a rule literal onto a level code, tolerating 16.0 vs "16"."""
    candidates = [str(value)]
    if isinstance(value, float) and value.is_integer():
        candidates.append(str(int(value)))
    for cand in candidates:
        if cand in kind.levels:
            return kind.levels.index(cand)
    raise PlanError(f"{value!r} is not a level of the target")


def _eval_atoms(atoms: tuple[Atom, ...], columns: dict[str, Column], n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    for atom in atoms:
        col = columns[atom.var]
        if isinstance(col.kind, Categorical):
            code = _level_code(col.kind, atom.value)
            hit = col.values == code
            mask &= hit if atom.op == "==" else ~hit
        else:
            v = col.values
            x = float(atom.value)
            if atom.op == "==":
                hit = v == x
            elif atom.op == "!=":
                hit = v != x
            elif atom.op == "<":
                hit = v < x
            elif atom.op == "<=":
                hit = v <= x
            elif atom.op == ">":
                hit = v > x
            else:
                hit = v >= x
            # NaN compares false: a missing cell never satisfies a condition
            mask &= np.where(np.isnan(v), False, hit)
    return mask


def _expand_missing_predictors(
    fit_preds: Dataset | None, sample_preds: Dataset | None
) -> tuple[Dataset | None, Dataset | None]:
    """Replace numeric predictors that carry missing cells (on either side)
    with a present/missing indicator plus the zero-filled values, so trees
    and regressions alike can condition on missingness."""
    if fit_preds is None:
        return None, None
    fit_cols: list[Column] = []
    sample_cols: list[Column] = []
    for col in fit_preds.columns:
        s_col = sample_preds.column(col.name)
        if isinstance(col.kind, Numeric):
            f_missing = np.isnan(col.values)
            s_missing = np.isnan(s_col.values)
            if f_missing.any() or s_missing.any():
                ind_kind = Categorical(("present", "missing"))
                fit_cols.append(
                    Column(f"{col.name}:missing", ind_kind, f_missing.astype(np.int64))
                )
                sample_cols.append(
                    Column(f"{col.name}:missing", ind_kind, s_missing.astype(np.int64))
                )
                fv = col.values.copy()
                fv[f_missing] = 0.0
                sv = s_col.values.copy()
                sv[s_missing] = 0.0
                fit_cols.append(Column(col.name, col.kind, fv))
                sample_cols.append(Column(col.name, col.kind, sv))
                continue
        fit_cols.append(col)
        sample_cols.append(s_col)
    return Dataset(tuple(fit_cols)), Dataset(tuple(sample_cols))


def _fit_plain(spec, target: Column, predictors: Dataset | None):
    if isinstance(spec, Sample):
        return fit_sample(target)
    if isinstance(spec, Cart):
        return fit_cart_model(target, predictors, spec.min_bucket, spec.complexity)
    if isinstance(spec, NormRank):
        return fit_normrank(target, predictors, spec.residual_scale)
    if isinstance(spec, TransformNormal):
        return fit_transform_normal(target, predictors, spec.transform)
    if isinstance(spec, Logit):
        return fit_logit(target, predictors, spec.max_iter, spec.tol)
    if isinstance(spec, Multinomial):
        return fit_multinomial(target, predictors, spec.max_iter, spec.tol)
    raise MethodError(f"cannot fit method {method_name(spec)!r} here")


def synthesize_numeric_with_missing(
    target: Column,
    orig_preds: Dataset | None,
    spec,
    syn_preds: Dataset | None,
    rng: np.random.Generator,
    n_out: int,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Two-step synthesis of a numeric column with missing cells.

    A binary missingness indicator is synthesized first (CART for cart
    targets, logit for the parametric methods, plain bootstrap under the
    sample method where the joint draw already carries the rate); the numeric
    model is fit on complete rows only, and sampled values are blanked where
    the indicator says missing.
    """
    missing = target.missing_mask()
    if missing.all():
        raise MethodError(f"{target.name}: all values missing")
    if isinstance(spec, Sample):
        fit = SampleFit(target.name, target.kind, target.values)
        return fit.sample(None, rng, n_out), ()
    ind = Column(
        f"{target.name}:missing",
        Categorical(("present", "missing")),
        missing.astype(np.int64),
    )
    if isinstance(spec, Cart):
        ind_fit = fit_cart_model(ind, orig_preds, spec.min_bucket, spec.complexity)
    else:
        ind_fit = fit_logit(ind, orig_preds)
    ind_syn = ind_fit.sample(syn_preds, rng, n_out)
    keep = np.flatnonzero(~missing)
    model = _fit_plain(
        spec,
        target.take(keep),
        orig_preds.take(keep) if orig_preds is not None else None,
    )
    values = model.sample(syn_preds, rng, n_out).astype(np.float64)
    values[ind_syn == 1] = np.nan
    return values, tuple(ind_fit.warnings) + tuple(model.warnings)


def _synthesize_stratum(
    original: Dataset,
    plan: SynthesisPlan,
    stratum_index: int = 0,
    n_rows: int | None = None,
    stratum_label: str | None = None,
) -> SynthesisRun:
    """Synthesize one stratum; RNG substreams keyed by (stratum, position)."""
    n_out = n_rows if n_rows is not None else original.n_rows
    entropy = plan.seed % (2**63)
    synth: dict[str, Column] = {}
    orig_cols = {c.name: c for c in original.columns}
    summaries: list[VariableSummary] = []
    run_warnings: list[str] = []

    for pos, name in enumerate(plan.visit_sequence):
        started = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence([entropy, stratum_index, pos]))
        target = original.column(name)
        spec = plan.methods[name]
        pred_names = plan.predictors_of(name)
        rules = plan.rules_for(name)

        excl = np.zeros(original.n_rows, dtype=bool)
        for rule in rules:
            excl |= _eval_atoms(rule.atoms(), orig_cols, original.n_rows)
        fit_idx = np.flatnonzero(~excl)
        if fit_idx.size == 0:
            raise MethodError(f"{name}: every original row is excluded by rules")

        t_fit = target.take(fit_idx)
        orig_preds = (
            original.select(pred_names).take(fit_idx) if pred_names else None
        )
        syn_preds = (
            Dataset(tuple(synth[p] for p in pred_names)) if pred_names else None
        )
        orig_preds, syn_preds = _expand_missing_predictors(orig_preds, syn_preds)

        used_indicator = False
        if isinstance(spec, Nested):
            group = original.column(spec.group_column).take(fit_idx)
            model = fit_nested(t_fit, group)
            values = model.sample(
                Dataset((synth[spec.group_column],)), rng, n_out
            )
            fit_warnings = tuple(model.warnings)
        elif isinstance(target.kind, Numeric) and t_fit.missing_mask().any():
            used_indicator = True
            values, fit_warnings = synthesize_numeric_with_missing(
                t_fit, orig_preds, spec, syn_preds, rng, n_out
            )
        else:
            model = _fit_plain(spec, t_fit, orig_preds)
            values = model.sample(syn_preds, rng, n_out)
            fit_warnings = tuple(model.warnings)

        dtype = np.int64 if isinstance(target.kind, Categorical) else np.float64
        values = np.array(values, dtype=dtype)  # fresh writable copy for rules

        forced = 0
        if rules:
            assigned = np.zeros(n_out, dtype=bool)
            for rule in rules:
                cond = _eval_atoms(rule.atoms(), synth, n_out)
                apply = cond & ~assigned
                if isinstance(target.kind, Categorical):
                    values[apply] = _level_code(target.kind, rule.value)
                else:
                    values[apply] = float(rule.value)
                assigned |= cond
                forced += int(apply.sum())

        synth[name] = Column(name, target.kind, values)
        for w in fit_warnings:
            run_warnings.append(f"{name}: {w}")
        summaries.append(
            VariableSummary(
                name=name,
                method=method_name(spec),
                n_fit=int(fit_idx.size),
                elapsed=time.perf_counter() - started,
                rule_forced=forced,
                missing_indicator=used_indicator,
                warnings=fit_warnings,
                stratum=stratum_label,
            )
        )

    synthetic = Dataset(
        tuple(synth[c] for c in plan.visit_sequence), name=f"{original.name}_synth"
    )
    return SynthesisRun(
        plan=plan,
        original=original,
        synthetic=synthetic,
        summaries=tuple(summaries),
        warnings=tuple(run_warnings),
    )


def _validated(plan: SynthesisPlan, original: Dataset) -> list[str]:
    if original.n_rows == 0:
        raise DataError("empty dataset")
    diags = validate_plan(plan, original)
    errs = plan_errors(diags)
    if errs:
        raise PlanError("plan invalid: " + "; ".join(d.message for d in errs))
    return [d.message for d in diags if not d.is_error]


def synthesize(original: Dataset, plan: SynthesisPlan, n_rows: int | None = None) -> SynthesisRun:
    """Full synthesis of ``original`` under ``plan`` (stratified if it says so)."""
    warnings0 = _validated(plan, original)
    if plan.stratifier is not None:
        if n_rows is not None:
            raise PlanError(
                "stratified synthesis fixes the output to the stratum sizes; "
                "n_rows cannot be overridden"
            )
        return synthesize_stratified(original, plan)
    run = _synthesize_stratum(original, plan, stratum_index=0, n_rows=n_rows)
    return SynthesisRun(
        plan=run.plan,
        original=run.original,
        synthetic=run.synthetic,
        summaries=run.summaries,
        warnings=tuple(warnings0) + run.warnings,
    )


def synthesize_stratified(
    original: Dataset, plan: SynthesisPlan, min_stratum_rows: int = 100
) -> SynthesisRun:
    """Independent synthesis within each stratum of ``plan.stratifier``.

    The stratifier column is copied verbatim within each stratum, so any
    table of stratifier by other variables is well fitted by construction.
    Strata below ``min_stratum_rows`` are pooled into one remainder stratum.
    """
    warnings0 = list(_validated(plan, original))
    if plan.stratifier is None:
        raise PlanError("plan has no stratifier")
    strat_col = original.column(plan.stratifier)
    levels = strat_col.kind.levels

    sub_plan = SynthesisPlan(
        visit_sequence=tuple(c for c in plan.visit_sequence if c != plan.stratifier),
        methods={c: m for c, m in plan.methods.items() if c != plan.stratifier},
        predictor_matrix=None
        if plan.predictor_matrix is None
        else {
            t: tuple(p for p in preds if p != plan.stratifier)
            for t, preds in plan.predictor_matrix.items()
            if t != plan.stratifier
        },
        rules=plan.rules,
        stratifier=None,
        nesting=plan.nesting,
        seed=plan.seed,
    )

    groups: list[tuple[str, np.ndarray]] = []
    pooled: list[np.ndarray] = []
    pooled_levels: list[str] = []
    for code, level in enumerate(levels):
        idx = np.flatnonzero(strat_col.values == code)
        if idx.size == 0:
            continue
        if idx.size < min_stratum_rows:
            pooled.append(idx)
            pooled_levels.append(level)
        else:
            groups.append((level, idx))
    if pooled:
        groups.append(("(other)", np.concatenate(pooled)))
        warnings0.append(
            f"strata below {min_stratum_rows} rows pooled into one: "
            + ", ".join(pooled_levels)
        )

    parts: list[Dataset] = []
    summaries: list[VariableSummary] = []
    run_warnings: list[str] = list(warnings0)
    strata_sizes: list[tuple[str, int]] = []
    for s_index, (label, idx) in enumerate(groups):
        sub = original.take(idx)
        run = _synthesize_stratum(
            sub, sub_plan, stratum_index=s_index, stratum_label=label
        )
        strat_copy = Column(plan.stratifier, strat_col.kind, strat_col.values[idx])
        parts.append(
            Dataset((strat_copy,) + run.synthetic.columns, name=run.synthetic.name)
        )
        summaries.extend(run.summaries)
        run_warnings.extend(f"[{label}] {w}" for w in run.warnings)
        strata_sizes.append((label, int(idx.size)))

    names = parts[0].names
    cols = []
    for name in names:
        kind = parts[0].column(name).kind
        values = np.concatenate([p.column(name).values for p in parts])
        cols.append(Column(name, kind, values))
    synthetic = Dataset(tuple(cols), name=f"{original.name}_synth")
    return SynthesisRun(
        plan=plan,
        original=original,
        synthetic=synthetic,
        summaries=tuple(summaries),
        warnings=tuple(run_warnings),
        strata=tuple(strata_sizes),
    )


def run_report(run: SynthesisRun) -> dict:
    """JSON-ready report of what a synthesis run did."""
    doc: dict = {
        "rows": run.synthetic.n_rows,
        "columns": list(run.synthetic.names),
        "seed": run.plan.seed,
        "stratified": run.strata is not None,
        "variables": [
            {
                "name": s.name,
                "method": s.method,
                "stratum": s.stratum,
                "n_fit": s.n_fit,
                "elapsed_s": round(s.elapsed, 6),
                "rule_forced": s.rule_forced,
                "missing_indicator": s.missing_indicator,
                "warnings": list(s.warnings),
            }
            for s in run.summaries
        ],
        "warnings": list(run.warnings),
    }
    if run.strata is not None:
        doc["strata"] = [{"level": lv, "rows": n} for lv, n in run.strata]
    return doc
