"""
Ensemble runner.

An experiment draws `replicates` input sequences from one source (replicate r
uses seed base + r, wrapping at 2^64), runs every configured rule on each, and
records bias, deficiency, rule complexity and the bound. On top of the raw
records sit the calibration of c, the crystal stability comparison and the
held-out envelope check.

Config files are flat `key = value` text:

    source = uniform
    seed = 1
    n = 2^20
    rules = identity, transient:1-8, random:seeds=1-20:states=16, file:my.rule
    replicates = 20
    c = calibrate
    output = results/ensemble_a.csv
"""

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Literal, Optional, TextIO, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from shared.config import config
from shared.paths import resolve_against

from .bitstream import MAX_LENGTH, SourceSpec, generate
from .complexity import DEFAULT_BLOCK, MAX_BLOCK, Estimator, deficiency
from .errors import CalibrationError, ConfigError, EmptySelectionError
from .metrics import bias, eq2_bound, normalized_bias
from .prng import MASK64
from .rule_dsl import load_rule
from .rulevm import (
    SelectionRule,
    constant_skip_rule,
    crystal_rule,
    every_k_rule,
    halting_rule,
    identity_rule,
    random_rule,
    rule_complexity,
    run_rule,
    transient_response_rule,
)

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]
CALIBRATION_MIN_SUB_LEN = 100
CALIBRATION_MIN_RECORDS = 10
CRYSTAL_MIN_N = 2**16
CRYSTAL_ENSEMBLE_SEEDS = tuple(range(1, 11))
CRYSTAL_ENSEMBLE_STATES = 16

CONFIG_KEYS = {
    "source", "seed", "p", "pattern", "source_path", "source_format",
    "n", "rules", "estimator", "block", "c", "replicates", "output",
    "format", "workers",
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: SourceSpec
    n: int = Field(ge=1, le=MAX_LENGTH)
    rules: tuple[str, ...] = Field(min_length=1)
    estimator: Estimator = "lz78"
    block: int = Field(default=DEFAULT_BLOCK, ge=1, le=MAX_BLOCK)
    c: Union[Literal["calibrate"], float, None] = None
    replicates: int = Field(default=1, ge=1)
    output: Optional[Path] = None
    format: OutputFormat = "csv"
    workers: int = Field(default_factory=lambda: config.workers, ge=1)
    base_dir: Optional[Path] = None

    @field_validator("c")
    @classmethod
    def _positive_c(cls, value):
        if isinstance(value, float) and value <= 0:
            raise ValueError(f"c must be positive or 'calibrate', got {value}")
        return value

    def with_source_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"source": self.source.with_seed(seed)})


def _parse_int(text: str) -> int:
    """Accepts plain integers and powers written as 2^k."""
    text = text.strip()
    if "^" in text:
        base, _, exponent = text.partition("^")
        return int(base) ** int(exponent)
    return int(text)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    raw = dotenv_values(stream=io.StringIO(path.read_text(encoding="utf-8")), interpolate=False)
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    missing = sorted(key for key, value in raw.items() if value is None)
    if missing:
        raise ConfigError(f"{path}: keys without a value: {', '.join(missing)}")
    for required in ("source", "n", "rules"):
        if required not in raw:
            raise ConfigError(f"{path}: missing required key {required!r}")

    base_dir = path.parent
    try:
        source = SourceSpec(
            kind=raw["source"].strip(),
            seed=_parse_int(raw.get("seed", "0")),
            p=raw.get("p"),
            pattern=raw.get("pattern"),
            path=resolve_against(raw["source_path"], base_dir) if "source_path" in raw else None,
            path_format=raw.get("source_format", "packed").strip(),
        )
        values = {
            "source": source,
            "n": _parse_int(raw["n"]),
            "rules": tuple(ref.strip() for ref in raw["rules"].split(",") if ref.strip()),
            "base_dir": base_dir,
        }
        for key in ("estimator", "format"):
            if key in raw:
                values[key] = raw[key].strip()
        for key in ("block", "replicates", "workers"):
            if key in raw:
                values[key] = _parse_int(raw[key])
        if "c" in raw:
            c = raw["c"].strip()
            values["c"] = c if c == "calibrate" else float(c)
        if "output" in raw:
            values["output"] = resolve_against(raw["output"].strip(), base_dir)
    except (ConfigError, ValidationError):
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig(**values)


def _parse_range(text: str, ref: str) -> range:
    match = re.fullmatch(r"(\d+)(?:-(\d+))?", text)
    if match is None:
        raise ConfigError(f"rule reference {ref!r}: expected N or A-B, got {text!r}")
    low = int(match.group(1))
    high = int(match.group(2) or low)
    if high < low:
        raise ConfigError(f"rule reference {ref!r}: empty range {text}")
    return range(low, high + 1)


def _parse_params(parts: list[str], ref: str) -> dict[str, str]:
    params = {}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep:
            raise ConfigError(f"rule reference {ref!r}: expected key=value, got {part!r}")
        params[key] = value
    return params


def _load_rule_file(path_text: str, ref: str, base_dir: Optional[Path]) -> SelectionRule:
    path = resolve_against(path_text, base_dir)
    try:
        rule = load_rule(path)
    except OSError as exc:
        raise ConfigError(f"rule reference {ref!r}: cannot read {path}: {exc.strerror}") from exc
    return replace(rule, name=ref if ref.startswith("file:") else f"file:{path_text}")


def resolve_rule_ref(ref: str, base_dir: Optional[Path] = None) -> list[SelectionRule]:
    """
    Expand one rule reference into the rules it names.

    identity | crystal | halt | every:k | skip:k | transient:d | transient:a-b |
    random:seed=s:states=k | random:seeds=a-b:states=k | file:path
    A bare path ending in .rule is read as a rule file.
    """
    kind, _, rest = ref.partition(":")
    try:
        if ref == "identity":
            return [identity_rule()]
        if ref == "crystal":
            return [crystal_rule()]
        if ref == "halt":
            return [halting_rule()]
        if kind == "every" and rest:
            return [every_k_rule(int(rest))]
        if kind == "skip" and rest:
            return [constant_skip_rule(int(rest))]
        if kind == "transient" and rest:
            return [transient_response_rule(d) for d in _parse_range(rest, ref)]
        if kind == "random" and rest:
            params = _parse_params(rest.split(":"), ref)
            if set(params) not in ({"seed", "states"}, {"seeds", "states"}):
                raise ConfigError(f"rule reference {ref!r}: expected seed= or seeds= with states=")
            states = int(params["states"])
            seeds = _parse_range(params["seeds"], ref) if "seeds" in params else [int(params["seed"])]
            return [random_rule(seed, states) for seed in seeds]
        if kind == "file" and rest:
            return [_load_rule_file(rest, ref, base_dir)]
        if ref.endswith(".rule"):
            return [_load_rule_file(ref, ref, base_dir)]
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"rule reference {ref!r}: {exc}") from exc
    raise ConfigError(f"unknown rule reference {ref!r}")


def resolve_rules(refs: Iterable[str], base_dir: Optional[Path] = None) -> list[SelectionRule]:
    return [rule for ref in refs for rule in resolve_rule_ref(ref, base_dir)]


@dataclass(frozen=True)
class ExperimentRecord:
    """One (rule, replicate) outcome. bias, bound and satisfied are None on an empty selection."""
    rule_id: str
    k_rule_bits: int
    seed: int
    sub_len: int
    bias: Optional[float]
    delta_hat_bits: float
    bound: Optional[float]
    satisfied: Optional[bool]
    halt_reason: str

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


RECORD_FIELDS = tuple(f.name for f in fields(ExperimentRecord))


def replicate_seed(base_seed: int, replicate: int) -> int:
    return (base_seed + replicate) & MASK64


def _measure_replicate(
    cfg: ExperimentConfig, rules: list[tuple[SelectionRule, int]], replicate: int
) -> list[ExperimentRecord]:
    seed = replicate_seed(cfg.source.seed, replicate)
    x = generate(cfg.source.with_seed(seed), cfg.n)
    delta_hat = deficiency(x, cfg.estimator, cfg.block)
    logger.info("replicate=%d seed=%d delta_hat=%.1f", replicate, seed, delta_hat)
    records = []
    for rule, k_rule in rules:
        selection = run_rule(rule, x)
        measured = float(bias(selection.selected)) if selection.sub_len else None
        records.append(
            ExperimentRecord(
                rule_id=rule.label(),
                k_rule_bits=k_rule,
                seed=seed,
                sub_len=selection.sub_len,
                bias=measured,
                delta_hat_bits=delta_hat,
                bound=None,
                satisfied=None,
                halt_reason=selection.halt_reason,
            )
        )
    return records


def measure(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """Raw records without a bound, ordered by rule and then by replicate."""
    rules = [(rule, rule_complexity(rule)) for rule in resolve_rules(cfg.rules, cfg.base_dir)]
    logger.info(
        "source=%s n=%d rules=%d replicates=%d workers=%d",
        cfg.source.describe(), cfg.n, len(rules), cfg.replicates, cfg.workers,
    )
    replicates = range(cfg.replicates)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            by_replicate = list(pool.map(lambda r: _measure_replicate(cfg, rules, r), replicates))
    else:
        by_replicate = [_measure_replicate(cfg, rules, r) for r in replicates]
    return [by_replicate[r][k] for k in range(len(rules)) for r in replicates]


def with_bound(records: Iterable[ExperimentRecord], c: float) -> list[ExperimentRecord]:
    bounded = []
    for record in records:
        if record.bias is None:
            bounded.append(record)
            continue
        bound = eq2_bound(record.delta_hat_bits, record.k_rule_bits, record.sub_len, c)
        bounded.append(replace(record, bound=bound, satisfied=record.bias <= bound))
    return bounded


def c_hat_from_records(
    records: Iterable[ExperimentRecord],
    min_sub_len: int = CALIBRATION_MIN_SUB_LEN,
    min_records: int = CALIBRATION_MIN_RECORDS,
) -> float:
    """ĉ = max of bias·sqrt(sub_len / denominator) over records selecting >= min_sub_len bits."""
    qualifying = [r for r in records if r.bias is not None and r.sub_len >= min_sub_len]
    if len(qualifying) < min_records:
        raise CalibrationError(
            f"{len(qualifying)} records with sub_len >= {min_sub_len}, at least {min_records} needed"
        )
    return max(
        normalized_bias(r.bias, r.delta_hat_bits, r.k_rule_bits, r.sub_len) for r in qualifying
    )


def calibrate_c(cfg: ExperimentConfig) -> float:
    c_hat = c_hat_from_records(measure(cfg))
    logger.info("c_hat=%r", c_hat)
    return c_hat


def run_experiment(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """
    One record per (rule, replicate). With c = "calibrate" the same records
    first calibrate ĉ and are then bounded with it.
    """
    records = measure(cfg)
    if cfg.c == "calibrate":
        c = c_hat_from_records(records)
        if c == 0:
            raise CalibrationError("calibrated c is 0, every qualifying selection is balanced")
        logger.info("c_hat=%r", c)
    else:
        c = config.default_c if cfg.c is None else cfg.c
    return with_bound(records, c)


def records_frame(records: Iterable[ExperimentRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in records], columns=list(RECORD_FIELDS))


def summarize(records: Iterable[ExperimentRecord]) -> pd.DataFrame:
    """Per rule-complexity group: record count, empty selections, mean bias, mean sub_len, max bias·sqrt(sub_len)."""
    df = records_frame(records)
    df["bias"] = pd.to_numeric(df["bias"], errors="coerce")
    df["scaled_bias"] = df["bias"] * np.sqrt(df["sub_len"].astype(float))
    return (
        df.groupby("k_rule_bits")
        .agg(
            records=("rule_id", "size"),
            empty=("bias", lambda s: int(s.isna().sum())),
            mean_bias=("bias", "mean"),
            mean_sub_len=("sub_len", "mean"),
            max_scaled_bias=("scaled_bias", "max"),
        )
        .reset_index()
    )


@dataclass(frozen=True)
class GroupStat:
    group: str
    mean_bias: float
    sem: float
    count: int


@dataclass(frozen=True)
class CrystalSummary:
    n: int
    replicates: int
    crystal: GroupStat
    groups: tuple[GroupStat, ...]
    excluded: tuple[str, ...]
    low_power: bool
    passed: bool


def crystal_stability_check(
    n: int,
    replicates: int,
    seed: int = 1,
    ensemble_seeds: Iterable[int] = CRYSTAL_ENSEMBLE_SEEDS,
    num_states: int = CRYSTAL_ENSEMBLE_STATES,
    estimator: Estimator = "lz78",
) -> CrystalSummary:
    """
    Compare the crystal (identity) rule with a fixed ensemble of random rules
    on uniform inputs: the crystal's mean bias must not exceed any group's
    mean bias by more than 3 combined standard errors. Groups whose every
    selection is empty are excluded; a single replicate gives no standard
    error and is flagged low-power.
    """
    if n < CRYSTAL_MIN_N:
        raise ValueError(f"crystal check needs n >= {CRYSTAL_MIN_N}, got {n}")
    cfg = ExperimentConfig(
        source=SourceSpec(kind="uniform", seed=seed),
        n=n,
        rules=("crystal", *(f"random:seed={s}:states={num_states}" for s in ensemble_seeds)),
        estimator=estimator,
        replicates=replicates,
    )
    df = records_frame(measure(cfg))
    df["bias"] = pd.to_numeric(df["bias"], errors="coerce")
    stats = df.groupby("rule_id", sort=False)["bias"].agg(["mean", "sem", "count"])

    def stat(group: str) -> GroupStat:
        row = stats.loc[group]
        sem = float(row["sem"]) if not math.isnan(row["sem"]) else 0.0
        return GroupStat(group, float(row["mean"]), sem, int(row["count"]))

    crystal = stat("crystal")
    groups, excluded = [], []
    for group in stats.index:
        if group == "crystal":
            continue
        if stats.loc[group, "count"] == 0:
            excluded.append(group)
        else:
            groups.append(stat(group))

    passed = all(
        crystal.mean_bias <= g.mean_bias + 3 * math.hypot(crystal.sem, g.sem) for g in groups
    )
    if excluded:
        logger.info("excluded groups with only empty selections: %s", ", ".join(excluded))
    return CrystalSummary(
        n=n,
        replicates=replicates,
        crystal=crystal,
        groups=tuple(groups),
        excluded=tuple(excluded),
        low_power=replicates < 2,
        passed=passed,
    )


@dataclass(frozen=True)
class EnvelopeReport:
    c_hat_a: float
    c_hat_b: float
    records_b: int
    violations: int
    within_factor: bool
    passed: bool


def envelope_check(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig) -> EnvelopeReport:
    """
    Calibrate ĉ on ensemble A, then count records of the held-out ensemble B
    whose bias exceeds the bound at 2·ĉ_A. Also compares ĉ_A with ĉ_B.
    """
    c_a = c_hat_from_records(measure(cfg_a))
    records_b = measure(cfg_b)
    c_b = c_hat_from_records(records_b)
    violations = sum(
        1
        for r in records_b
        if r.bias is not None
        and normalized_bias(r.bias, r.delta_hat_bits, r.k_rule_bits, r.sub_len) > 2 * c_a
    )
    within_factor = c_b <= 2 * c_a and c_a <= 2 * c_b
    logger.info("c_hat_a=%r c_hat_b=%r violations=%d", c_a, c_b, violations)
    return EnvelopeReport(
        c_hat_a=c_a,
        c_hat_b=c_b,
        records_b=len(records_b),
        violations=violations,
        within_factor=within_factor,
        passed=violations == 0 and within_factor,
    )


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records: Iterable[ExperimentRecord], stream: TextIO, format: OutputFormat) -> None:
    if format == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for record in records:
            writer.writerow([_csv_cell(getattr(record, name)) for name in RECORD_FIELDS])
    elif format == "json":
        json.dump([r.to_dict() for r in records], stream, indent=2)
        stream.write("\n")
    else:
        raise ValueError(f"unknown output format {format!r}, expected csv or json")


def emit(records: Iterable[ExperimentRecord], path: Union[str, Path], format: OutputFormat) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_records(records, f, format)
    logger.info("wrote %s (%s)", path, format)
