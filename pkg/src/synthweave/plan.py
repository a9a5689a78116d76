"""Declarative synthesis plans: methods, visit order, predictors, rules.

A plan is validated against a concrete Dataset before any fitting happens;
`validate_plan` returns diagnostics rather than raising so a caller can show
every problem at once.  Guideline checks (too many categories, high-cardinality
variables early in the sequence) surface as warnings, never errors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import PlanError
from .tabular import Categorical, Dataset, Numeric

# Categorical variables above this many levels trigger grouping / ordering
# warnings.  Chosen between the level counts that were workable (<= 29) and
# the ones that were not (76+) in large census extracts.
HIGH_CARDINALITY_THRESHOLD = 40


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    """Bootstrap: draw i.i.d. from the observed values."""


@dataclass(frozen=True)
class Cart:
    min_bucket: int = 5
    complexity: float = 1e-8

    def __post_init__(self):
        if self.min_bucket < 1:
            raise PlanError("cart: min_bucket must be >= 1")
        if self.complexity < 0:
            raise PlanError("cart: complexity must be >= 0")


@dataclass(frozen=True)
class NormRank:
    """Normal-scores regression with empirical-quantile back-transform."""

    residual_scale: float = 1.0

    def __post_init__(self):
        if self.residual_scale < 0:
            raise PlanError("normrank: residual_scale must be >= 0")


@dataclass(frozen=True)
class TransformNormal:
    transform: str = "identity"  # sqrt | cuberoot | identity

    def __post_init__(self):
        if self.transform not in ("sqrt", "cuberoot", "identity"):
            raise PlanError(f"unknown transform {self.transform!r}")


@dataclass(frozen=True)
class Logit:
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise PlanError("logit: max_iter must be >= 1")
        if self.tol <= 0:
            raise PlanError("logit: tol must be > 0")


@dataclass(frozen=True)
class Multinomial:
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise PlanError("multinomial: max_iter must be >= 1")
        if self.tol <= 0:
            raise PlanError("multinomial: tol must be > 0")


@dataclass(frozen=True)
class Nested:
    """Bootstrap within an already-synthesized grouping column."""

    group_column: str


MethodSpec = Union[Sample, Cart, NormRank, TransformNormal, Logit, Multinomial, Nested]

_METHOD_NAMES = {
    Sample: "sample",
    Cart: "cart",
    NormRank: "normrank",
    TransformNormal: "transform_normal",
    Logit: "logit",
    Multinomial: "multinomial",
    Nested: "nested",
}
_METHOD_BY_NAME = {v: k for k, v in _METHOD_NAMES.items()}


def method_name(spec: MethodSpec) -> str:
    return _METHOD_NAMES[type(spec)]


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

_OP_ALIASES = {"=": "==", "≠": "!=", "≤": "<=", "≥": ">="}
_OPS = ("==", "!=", "<=", ">=", "<", ">")

_ATOM_RE = re.compile(
    r"^\s*([A-Za-z_][A-Za-z0-9_.-]*)\s*(==|!=|<=|>=|<|>|=|≠|≤|≥)\s*(.+?)\s*$"
)


@dataclass(frozen=True)
class Atom:
    var: str
    op: str  # one of _OPS
    value: Union[str, float]

    def describe(self) -> str:
        v = self.value if isinstance(self.value, str) else repr(self.value)
        return f"{self.var} {self.op} {v}"


def _parse_literal(text: str) -> Union[str, float]:
    text = text.strip()
    if (text.startswith("'") and text.endswith("'") and len(text) >= 2) or (
        text.startswith('"') and text.endswith('"') and len(text) >= 2
    ):
        return text[1:-1]
    try:
        return float(text)
    except ValueError:
        return text  # bare word: a categorical level


def parse_condition(text: str) -> tuple[Atom, ...]:
    """Parse a conjunction like ``age < 16 and sex == 'F'`` into atoms.

    Only AND is supported; a disjunction is written as several rules with
    the same target.
    """
    parts = re.split(r"\s+(?:and|AND|&&?)\s+", text.strip())
    atoms = []
    for part in parts:
        m = _ATOM_RE.match(part)
        if not m:
            raise PlanError(f"malformed condition atom: {part!r}")
        var, op, lit = m.groups()
        atoms.append(Atom(var, _OP_ALIASES.get(op, op), _parse_literal(lit)))
    if not atoms:
        raise PlanError(f"empty condition: {text!r}")
    return tuple(atoms)


@dataclass(frozen=True)
class Rule:
    """condition over earlier columns  =>  forced value for target."""

    target: str
    condition: str
    value: Union[str, float]

    def atoms(self) -> tuple[Atom, ...]:
        return parse_condition(self.condition)


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthesisPlan:
    visit_sequence: tuple[str, ...]
    methods: Mapping[str, MethodSpec] = field(default_factory=dict)
    predictor_matrix: Mapping[str, tuple[str, ...]] | None = None
    rules: tuple[Rule, ...] = ()
    stratifier: str | None = None
    nesting: Mapping[str, str] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "visit_sequence", tuple(self.visit_sequence))
        object.__setattr__(self, "rules", tuple(self.rules))
        methods = dict(self.methods)
        for i, col in enumerate(self.visit_sequence):
            if col not in methods:
                methods[col] = Sample() if i == 0 else Cart()
        object.__setattr__(self, "methods", methods)
        if self.predictor_matrix is not None:
            object.__setattr__(
                self,
                "predictor_matrix",
                {t: tuple(ps) for t, ps in self.predictor_matrix.items()},
            )
        object.__setattr__(self, "nesting", dict(self.nesting))

    def predictors_of(self, target: str) -> tuple[str, ...]:
        """Selected predictors: explicit row if given, else all preceding."""
        pos = self.visit_sequence.index(target)
        preceding = self.visit_sequence[:pos]
        if self.predictor_matrix is None or target not in self.predictor_matrix:
            return preceding
        chosen = self.predictor_matrix[target]
        return tuple(p for p in preceding if p in chosen)

    def rules_for(self, target: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.target == target)


@dataclass(frozen=True)
class PlanDiagnostic:
    severity: str  # "error" | "warning"
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


def _err(msg: str) -> PlanDiagnostic:
    return PlanDiagnostic("error", msg)


def _warn(msg: str) -> PlanDiagnostic:
    return PlanDiagnostic("warning", msg)


def validate_plan(
    plan: SynthesisPlan,
    data: Dataset,
    high_cardinality_threshold: int = HIGH_CARDINALITY_THRESHOLD,
) -> list[PlanDiagnostic]:
    """Check every plan invariant against the data; pure, returns diagnostics.

    An empty error set means the plan is runnable; guideline warnings may
    still be present.
    """
    out: list[PlanDiagnostic] = []
    seq = plan.visit_sequence
    if not seq:
        out.append(_err("visit_sequence is empty"))
        return out
    if len(set(seq)) != len(seq):
        out.append(_err("visit_sequence contains duplicates"))
    for col in seq:
        if col not in data:
            out.append(_err(f"visit_sequence names unknown column {col!r}"))
    known = [c for c in seq if c in data]
    position = {c: i for i, c in enumerate(seq)}

    # Predictor precedence.
    if plan.predictor_matrix is not None:
        for target, preds in plan.predictor_matrix.items():
            if target not in position:
                out.append(_err(f"predictor_matrix row for non-synthesized {target!r}"))
                continue
            for p in preds:
                if p not in position:
                    out.append(
                        _err(f"predictor_matrix[{target!r}] names unknown column {p!r}")
                    )
                elif position[p] >= position[target]:
                    out.append(
                        _err(
                            f"predictor {p!r} does not precede target {target!r} "
                            "in visit_sequence"
                        )
                    )

    # First variable: no predictors, bootstrap method.
    first = seq[0]
    if not isinstance(plan.methods.get(first), Sample):
        out.append(_err(f"first variable {first!r} must use the sample method"))
    if plan.predictor_matrix is not None and plan.predictor_matrix.get(first):
        out.append(_err(f"first variable {first!r} cannot have predictors"))

    # Method / column-kind compatibility.
    for col in known:
        spec = plan.methods[col]
        kind = data.column(col).kind
        mname = method_name(spec)
        if isinstance(spec, (NormRank, TransformNormal)) and not isinstance(kind, Numeric):
            out.append(_err(f"{mname} method requires numeric target, got {col!r}"))
        if isinstance(spec, (Logit, Multinomial, Nested)) and not isinstance(
            kind, Categorical
        ):
            out.append(_err(f"{mname} method requires categorical target, got {col!r}"))
        if isinstance(spec, Logit) and isinstance(kind, Categorical) and len(kind.levels) != 2:
            out.append(
                _err(f"logit method requires a binary target, {col!r} has {len(kind.levels)} levels")
            )

    # Nesting map consistency.
    for target, group in plan.nesting.items():
        spec = plan.methods.get(target)
        if not isinstance(spec, Nested):
            out.append(_err(f"nesting target {target!r} must use the nested method"))
        elif spec.group_column != group:
            out.append(
                _err(
                    f"nesting map says {target!r} groups by {group!r} but its method "
                    f"says {spec.group_column!r}"
                )
            )
        if target in position and group in position:
            if position[group] >= position[target]:
                out.append(
                    _err(f"grouping column {group!r} must precede nested target {target!r}")
                )
        elif group not in position:
            out.append(_err(f"grouping column {group!r} is not in visit_sequence"))
    for col in known:
        spec = plan.methods[col]
        if isinstance(spec, Nested) and col not in plan.nesting:
            out.append(_err(f"nested method on {col!r} missing from the nesting map"))

    # Rules.
    for i, rule in enumerate(plan.rules):
        if rule.target not in position:
            out.append(_err(f"rule {i}: target {rule.target!r} not in visit_sequence"))
            continue
        try:
            atoms = rule.atoms()
        except PlanError as exc:
            out.append(_err(f"rule {i}: {exc}"))
            continue
        for atom in atoms:
            if atom.var not in position:
                out.append(
                    _err(f"rule {i}: condition column {atom.var!r} not in visit_sequence")
                )
            elif position[atom.var] >= position[rule.target]:
                out.append(
                    _err(
                        f"rule {i}: condition column {atom.var!r} does not precede "
                        f"target {rule.target!r}"
                    )
                )
            if atom.var in data:
                ckind = data.column(atom.var).kind
                if isinstance(ckind, Categorical):
                    if atom.op not in ("==", "!="):
                        out.append(
                            _err(
                                f"rule {i}: ordering comparison {atom.op!r} on "
                                f"categorical column {atom.var!r}"
                            )
                        )
                    elif str(atom.value) not in ckind.levels:
                        out.append(
                            _err(
                                f"rule {i}: {atom.value!r} is not a level of {atom.var!r}"
                            )
                        )
                elif not isinstance(atom.value, float):
                    out.append(
                        _err(f"rule {i}: numeric column {atom.var!r} compared to text")
                    )
        if rule.target in data:
            tkind = data.column(rule.target).kind
            if isinstance(tkind, Categorical):
                if str(rule.value) not in tkind.levels:
                    out.append(
                        _err(
                            f"rule {i}: forced value {rule.value!r} is not a level of "
                            f"{rule.target!r}"
                        )
                    )
            elif isinstance(rule.value, str):
                out.append(
                    _err(f"rule {i}: numeric target {rule.target!r} forced to text value")
                )

    # Stratifier.
    if plan.stratifier is not None:
        if plan.stratifier not in data:
            out.append(_err(f"stratifier {plan.stratifier!r} is not a data column"))
        elif not isinstance(data.column(plan.stratifier).kind, Categorical):
            out.append(_err(f"stratifier {plan.stratifier!r} must be categorical"))
        if plan.stratifier in position:
            out.append(
                _warn(
                    f"stratifier {plan.stratifier!r} also appears in visit_sequence; "
                    "it is copied verbatim within each stratum, not synthesized"
                )
            )

    # Guideline warnings (non-fatal).
    n_high = 0
    for col in known:
        kind = data.column(col).kind
        if isinstance(kind, Categorical) and len(kind.levels) > high_cardinality_threshold:
            n_high += 1
            if not isinstance(plan.methods[col], Nested):
                out.append(
                    _warn(
                        f"guideline 3: {col!r} has {len(kind.levels)} levels; consider "
                        "grouping it and synthesizing with the nested method"
                    )
                )
    if n_high:
        tail = set(seq[-n_high:])
        for col in known:
            kind = data.column(col).kind
            if (
                isinstance(kind, Categorical)
                and len(kind.levels) > high_cardinality_threshold
                and col not in tail
            ):
                out.append(
                    _warn(
                        f"guideline 6: move variables with many categories to the end "
                        f"of the synthesis ({col!r} has {len(kind.levels)} levels at "
                        f"position {position[col] + 1} of {len(seq)})"
                    )
                )
    return out


def plan_errors(diags: Sequence[PlanDiagnostic]) -> list[PlanDiagnostic]:
    return [d for d in diags if d.is_error]


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _method_to_json(spec: MethodSpec):
    name = method_name(spec)
    if isinstance(spec, Sample):
        return name
    if isinstance(spec, Cart):
        return {"kind": name, "min_bucket": spec.min_bucket, "complexity": spec.complexity}
    if isinstance(spec, NormRank):
        return {"kind": name, "residual_scale": spec.residual_scale}
    if isinstance(spec, TransformNormal):
        return {"kind": name, "transform": spec.transform}
    if isinstance(spec, (Logit, Multinomial)):
        return {"kind": name, "max_iter": spec.max_iter, "tol": spec.tol}
    if isinstance(spec, Nested):
        return {"kind": name, "group_column": spec.group_column}
    raise PlanError(f"unknown method {spec!r}")


def _method_from_json(obj, colname: str) -> MethodSpec:
    if isinstance(obj, str):
        cls = _METHOD_BY_NAME.get(obj)
        if cls is None:
            raise PlanError(f"methods[{colname!r}]: unknown method {obj!r}")
        if cls is Nested:
            raise PlanError(f"methods[{colname!r}]: nested needs a group_column")
        return cls()
    if isinstance(obj, dict):
        obj = dict(obj)
        kind = obj.pop("kind", None)
        cls = _METHOD_BY_NAME.get(kind)
        if cls is None:
            raise PlanError(f"methods[{colname!r}]: unknown method kind {kind!r}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise PlanError(f"methods[{colname!r}]: {exc}")
    raise PlanError(f"methods[{colname!r}]: expected string or object")


def plan_to_json(plan: SynthesisPlan) -> dict:
    doc: dict = {
        "visit_sequence": list(plan.visit_sequence),
        "methods": {c: _method_to_json(m) for c, m in plan.methods.items()},
        "seed": plan.seed,
    }
    if plan.predictor_matrix is not None:
        doc["predictor_matrix"] = {t: list(p) for t, p in plan.predictor_matrix.items()}
    if plan.rules:
        doc["rules"] = [
            {"target": r.target, "condition": r.condition, "value": r.value}
            for r in plan.rules
        ]
    if plan.stratifier is not None:
        doc["stratifier"] = plan.stratifier
    if plan.nesting:
        doc["nesting"] = dict(plan.nesting)
    return doc


def plan_from_json(doc: Mapping) -> SynthesisPlan:
    if "visit_sequence" not in doc:
        raise PlanError("plan document lacks visit_sequence")
    seq = tuple(doc["visit_sequence"])
    methods = {
        c: _method_from_json(m, c) for c, m in dict(doc.get("methods", {})).items()
    }
    matrix = doc.get("predictor_matrix")
    if matrix is not None:
        matrix = {t: tuple(p) for t, p in matrix.items()}
    rules = tuple(
        Rule(r["target"], r["condition"], r["value"]) for r in doc.get("rules", ())
    )
    nesting = dict(doc.get("nesting", {}))
    # Methods may rely on the nesting map instead of spelling group_column.
    for target, group in nesting.items():
        methods.setdefault(target, Nested(group))
    return SynthesisPlan(
        visit_sequence=seq,
        methods=methods,
        predictor_matrix=matrix,
        rules=rules,
        stratifier=doc.get("stratifier"),
        nesting=nesting,
        seed=int(doc.get("seed", 0)),
    )


def load_plan(path: str | Path) -> SynthesisPlan:
    with Path(path).open(encoding="utf-8") as fh:
        return plan_from_json(json.load(fh))


def save_plan(plan: SynthesisPlan, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(plan_to_json(plan), fh, indent=2)
        fh.write("\n")


def reorder_visit(plan: SynthesisPlan, column: str, position) -> SynthesisPlan:
    """Move one column within the visit sequence, repairing what that breaks.

    ``position`` is "start", "end", or a target index.  The predictor matrix
    keeps only selections that still respect precedence; a column moved to the
    front is coerced to the sample method (emits a warning entry through the
    plan's validation, and here immediately).
    """
    import warnings as _warnings

    if column not in plan.visit_sequence:
        raise PlanError(f"{column!r} is not in the visit sequence")
    seq = [c for c in plan.visit_sequence if c != column]
    if position == "start":
        idx = 0
    elif position == "end":
        idx = len(seq)
    else:
        idx = int(position)
        if not 0 <= idx <= len(seq):
            raise PlanError(f"position {idx} out of range")
    seq.insert(idx, column)
    new_seq = tuple(seq)
    if new_seq == plan.visit_sequence:
        return plan

    pos = {c: i for i, c in enumerate(new_seq)}
    matrix = plan.predictor_matrix
    if matrix is not None:
        matrix = {
            t: tuple(p for p in preds if pos[p] < pos[t])
            for t, preds in matrix.items()
        }
        matrix.pop(new_seq[0], None)
    methods = dict(plan.methods)
    if not isinstance(methods.get(new_seq[0]), Sample):
        _warnings.warn(
            f"{new_seq[0]!r} moved to the front of the visit sequence; "
            "method coerced to sample"
        )
        methods[new_seq[0]] = Sample()
    return replace(plan, visit_sequence=new_seq, methods=methods, predictor_matrix=matrix)
