"""Seeded batch experiments and their JSON reports.

Trial i of a run draws its seed as derive_seed(master, command_code, i), so
extending a run never changes earlier trials.  Report bodies are
deterministic; wall-clock numbers live under a separate ``timing`` key that
is excluded from comparisons.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULT, Tolerances
from .errors import InvalidConfig, PreconditionViolation, SchemaMismatch, TauflatError
from .gauge import align_conjugation, apply_action, is_generic, random_gauge, stabilizer_dimension
from .groups import GroupId, center_table
from .involution import (fiber_of_I, find_fixed_witness, lift_and_obstruct, lift_commutator_residual, phi_map,
                         project_center, twist_class, verify_lift_commutator_identity)
from .oracle import BUILTIN, builtin_group, exact_fiber_degree
from .seeding import derive_seed
from .variety import DoubledTuple, SurfaceKind, SurfacePresentation, diagonal_embed, relation_residual, \
    sample_point

log = logging.getLogger(__name__)

SCHEMA = 1
COMMANDS = ("sample", "involution-check", "fiber-count", "surjectivity-probe", "phi-check",
            "lift-degree", "oracle", "report")
_CODE = {c: i for i, c in enumerate(COMMANDS)}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    group: Optional[GroupId] = None
    finite_group: Optional[str] = None
    surface: Optional[SurfacePresentation] = None
    twist: int = 0
    trials: int = 1
    seed: int = 0
    tolerances: Tolerances = DEFAULT
    out: Optional[str] = None
    max_failure_rate: float = 0.1
    perturbations: int = 10
    workers: int = 1
    inputs: tuple = ()

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if self.trials < 1:
            raise InvalidConfig("trials must be at least 1")
        if not 0.0 <= self.max_failure_rate <= 1.0:
            raise InvalidConfig("max_failure_rate must lie in [0, 1]")
        if self.command == "report":
            if not self.inputs:
                raise InvalidConfig("report needs at least one input report")
            return
        if self.command == "oracle":
            if self.finite_group not in BUILTIN:
                raise InvalidConfig(f"oracle needs one of {BUILTIN}, got {self.finite_group!r}")
        elif self.group is None:
            raise InvalidConfig(f"{self.command} needs --group")
        if self.surface is None:
            raise InvalidConfig(f"{self.command} needs --surface")
        if self.surface.orientable:
            raise InvalidConfig("experiments run on nonorientable surfaces")
        if self.command == "phi-check" and (self.surface.kind is not SurfaceKind.RP2Sum or self.surface.ell < 1):
            raise InvalidConfig("phi-check needs an RP2 sum with ell >= 1")
        if self.group is not None and not 0 <= self.twist < center_table(self.group).order:
            raise InvalidConfig(f"twist index {self.twist} outside the center of {self.group}")

    def to_dict(self) -> dict:
        return {"command": self.command,
                "group": self.group.to_dict() if self.group else None,
                "finite_group": self.finite_group,
                "surface": self.surface.to_dict() if self.surface else None,
                "twist": self.twist, "trials": self.trials, "seed": self.seed,
                "max_failure_rate": self.max_failure_rate, "perturbations": self.perturbations,
                "inputs": list(self.inputs)}

    def trial_seed(self, i: int) -> int:
        return derive_seed(self.seed, _CODE[self.command], i)


@dataclass
class Report:
    config: dict
    tolerances: dict
    records: list
    summary: dict
    timing: dict = field(default_factory=dict)
    version: str = __version__
    schema: int = SCHEMA

    def body(self) -> dict:
        """Everything except wall-clock data."""
        return {"schema": self.schema, "version": self.version, "config": self.config,
                "tolerances": self.tolerances, "records": self.records, "summary": self.summary}

    def to_dict(self) -> dict:
        return {**self.body(), "timing": self.timing}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("schema") != SCHEMA:
            raise SchemaMismatch(f"report schema {d.get('schema')!r}, expected {SCHEMA}")
        return cls(d["config"], d["tolerances"], d["records"], d["summary"], d.get("timing", {}),
                   d["version"], d["schema"])

    @classmethod
    def load(cls, path: str) -> "Report":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @property
    def failure_rate(self) -> float:
        return self.summary.get("failure_rate", 0.0)


# ------------------------------------------------------------- trials


def _sample(cfg: ExperimentConfig, seed: int):
    return sample_point(cfg.surface, cfg.group, cfg.twist, seed=seed, tol=cfg.tolerances.rel)


def _twisted_double(x) -> DoubledTuple:
    table = center_table(x.group)
    minus = x.entries[:-1] + (x.c @ table.elements[x.twist],)
    return DoubledTuple(x.surface, x.group, x.entries, minus)


def trial_sample(cfg, seed):
    x = _sample(cfg, seed)
    return {"status": "ok", "residual": relation_residual(x),
            "stabilizer_dimension": stabilizer_dimension(x, cfg.tolerances.sigma)}


def trial_fiber(cfg, seed):
    tol = cfg.tolerances
    x = sample_point(cfg.surface, cfg.group, 0, seed=seed, tol=tol.rel)
    res = relation_residual(x)
    if res >= tol.rel or not is_generic(diagonal_embed(x, tol.rel), tol.sigma):
        return {"status": "excluded", "reason": "non-generic sample", "residual": res}
    fib = fiber_of_I(x, seed=seed, tol=tol)
    return {"status": "ok" if fib.certified else "excluded",
            "reason": None if fib.certified else "invariant separation failed",
            "residual": res, "degree": fib.degree, "evidence": fib.evidence}


def trial_involution(cfg, seed):
    tol = cfg.tolerances
    x = _sample(cfg, seed)
    d = _twisted_double(x)
    w = find_fixed_witness(d, seed=seed, tol=tol)
    if w is None:
        return {"status": "failed", "reason": "no witness", "residual": relation_residual(d)}
    got = twist_class(d, w)
    want = center_table(x.group).quotient_class(x.twist)
    return {"status": "ok" if got == want else "failed", "witness_residual": w.residual,
            "twist_class": repr(got), "expected_class": repr(want)}


def trial_surjectivity(cfg, seed):
    tol = cfg.tolerances
    x = _sample(cfg, seed)
    d = _twisted_double(x)
    w = find_fixed_witness(d, seed=seed, tol=tol)
    if w is None:
        return {"status": "failed", "reason": "no witness"}
    base = twist_class(d, w)
    classes, worst = [], w.residual
    for j in range(cfg.perturbations):
        k = random_gauge(x.group, derive_seed(seed, j))
        y = apply_action(k, d)
        wy = find_fixed_witness(y, seed=derive_seed(seed, j, 1), tol=tol)
        if wy is None:
            classes.append(None)
            continue
        worst = max(worst, wy.residual)
        classes.append(repr(twist_class(y, wy)))
    stable = all(c == repr(base) for c in classes)
    want = center_table(x.group).quotient_class(x.twist)
    return {"status": "ok" if stable and base == want else "failed", "twist_class": repr(base),
            "perturbed_classes": classes, "worst_witness_residual": worst, "stable": stable}


def trial_phi(cfg, seed):
    tol = cfg.tolerances
    x = _sample(cfg, seed)
    d = _twisted_double(x)
    y = phi_map(d, tol)
    res = relation_residual(y)
    k = random_gauge(x.group, derive_seed(seed, 1))
    y2 = phi_map(apply_action(k, d), tol)
    al = align_conjugation(y, y2, seed=derive_seed(seed, 2), tol=tol)
    ok = res < tol.rel and al.found and al.residual < tol.align_polish
    return {"status": "ok" if ok else "failed", "image_residual": res,
            "aligned": al.found, "align_residual": al.residual, "starts_used": al.starts_used}


def trial_lift(cfg, seed):
    tol = cfg.tolerances
    x = _sample(cfg, seed)
    ident = verify_lift_commutator_identity(x, tol=tol)
    cls = lift_and_obstruct(project_center(x), seed=seed, tol=tol)
    want = center_table(x.group).quotient_class(x.twist)
    return {"status": "ok" if ident and cls == want else "failed", "identity_holds": ident,
            "lift_residual": lift_commutator_residual(x),
            "obstruction_class": repr(cls), "expected_class": repr(want)}


def trial_oracle(cfg, seed):
    rep = exact_fiber_degree(builtin_group(cfg.finite_group), cfg.surface)
    ok = rep.degree_matches and rep.same_class_equal and rep.generic_disjoint
    return {"status": "ok" if ok else "failed", "oracle": rep.to_dict()}


TRIALS = {"sample": trial_sample, "fiber-count": trial_fiber, "involution-check": trial_involution,
          "surjectivity-probe": trial_surjectivity, "phi-check": trial_phi, "lift-degree": trial_lift,
          "oracle": trial_oracle}


def _run_trial(args):
    cfg, i = args
    seed = cfg.trial_seed(i)
    t0 = time.perf_counter()
    try:
        rec = TRIALS[cfg.command](cfg, seed)
    except TauflatError as exc:
        rec = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    return {"trial": i, "seed": seed, **rec}, time.perf_counter() - t0


def _quantiles(values: Sequence[float]) -> dict:
    if not values:
        return {}
    q = np.quantile(np.asarray(values, dtype=float), [0.0, 0.5, 0.9, 1.0])
    return dict(zip(["min", "median", "p90", "max"], (float(v) for v in q)))


def _summarize_records(cfg: ExperimentConfig, records: list) -> dict:
    status = Counter(r["status"] for r in records)
    n = len(records)
    out = {"trials": n, "status_counts": dict(sorted(status.items())),
           "failure_rate": status.get("error", 0) / n,
           "success_rate": status.get("ok", 0) / n}
    residuals = [r[k] for r in records for k in ("residual", "image_residual", "witness_residual",
                                                   "worst_witness_residual") if r.get(k) is not None]
    out["residual_quantiles"] = _quantiles(residuals)
    if cfg.command == "fiber-count":
        hist = Counter(r["degree"] for r in records if r["status"] == "ok")
        counted = sum(hist.values())
        predicted = center_table(cfg.group).quotient_order
        modal = max(sorted(hist), key=lambda k: hist[k]) if hist else None
        out.update({"degree_histogram": {str(k): v for k, v in sorted(hist.items())},
                    "countable_trials": counted, "modal_degree": modal, "predicted_degree": predicted,
                    "agreement_rate": hist.get(predicted, 0) / counted if counted else 0.0})
    if cfg.command == "lift-degree":
        out["distinct_classes"] = sorted({r["obstruction_class"] for r in records if "obstruction_class" in r})
    return out


def run(cfg: ExperimentConfig) -> Report:
    """Execute every trial of cfg and assemble the report in trial order."""
    if cfg.command == "report":
        raise InvalidConfig("use summarize() for the report command")
    t0 = time.perf_counter()
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    records = [r for r, _ in results]
    timing = {"total_seconds": time.perf_counter() - t0, "trial_seconds": [t for _, t in results]}
    return Report(cfg.to_dict(), cfg.tolerances.as_dict(), records, _summarize_records(cfg, records), timing)


# ------------------------------------------------------------ summaries


@dataclass
class SummaryRow:
    group: str
    center_order: int
    quotient_order: int
    observed: Optional[int]
    predicted: int
    agreement: bool
    trials: int


def summarize(reports: Sequence[Report]) -> list[SummaryRow]:
    """Degree table, one row per (group, surface); duplicates are merged."""
    if not reports:
        raise PreconditionViolation("summarize needs at least one report")
    versions = {(r.schema, r.version.split(".")[0]) for r in reports}
    if len(versions) > 1:
        raise SchemaMismatch(f"incompatible report versions: {sorted(versions)}")
    merged: dict = {}
    for rep in reports:
        cfg = rep.config
        if cfg["command"] != "fiber-count":
            continue
        key = (json.dumps(cfg["group"], sort_keys=True), json.dumps(cfg["surface"], sort_keys=True))
        slot = merged.setdefault(key, {"group": GroupId.from_dict(cfg["group"]), "hist": Counter(), "trials": 0})
        slot["trials"] += rep.summary["trials"]
        slot["hist"].update({int(k): v for k, v in rep.summary["degree_histogram"].items()})
    rows = []
    for slot in merged.values():
        g, hist = slot["group"], slot["hist"]
        table = center_table(g)
        observed = max(sorted(hist), key=lambda k: hist[k]) if hist else None
        rows.append(SummaryRow(str(g), table.order, table.quotient_order, observed, table.quotient_order,
                               observed == table.quotient_order, slot["trials"]))
    return rows


_HEADER = [f.name for f in fields(SummaryRow)]


def rows_to_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADER)
    for r in rows:
        w.writerow([getattr(r, h) for h in _HEADER])
    return buf.getvalue()


def rows_to_text(rows: Sequence[SummaryRow]) -> str:
    table = [_HEADER] + [[str(getattr(r, h)) for h in _HEADER] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(_HEADER))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in table) + "\n"
