import glob
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict

from data_engine.interactions import ColumnSchema
from data_engine.loader import ValidationReport, load_interaction_log, validate
from src.agents import create_policy
from src.core import Environment
from src.manifest import MANIFEST_SUFFIX, build_environment, create_manifest, load_manifest, manifest_hash, save_manifest
from src.offpolicy import (
    ESTIMATORS,
    ConstantRewardModel,
    ValueEstimate,
    direct_method,
    doubly_robust,
    fit_ridge_model,
    ips_estimate,
    logged_decisions_from_log,
    overlap_report,
    replay_evaluate,
    snips_estimate,
)
from src.reward import RewardSpec
from src.simulator import DesignAssumptions
from src.state_repr import StatePipelineSpec
from src.orchastrate import RunReport, Transcript, build_run_report, canonical_json, run_episodes
from src.tools import (
    write_canonical_json,
    write_reward_curve_svg,
    write_rows_csv,
    write_trajectory_csv,
)
from utils.config import settings
from utils.errors import MixedManifests, NoMatches, RSEnvError
from utils.logger import get_logger

logger = get_logger(__name__)

COMPARE_COLUMNS = [
    "report", "manifest_hash", "policy", "params", "seed", "steps",
    "cumulative_reward", "mean_reward", "fingerprint", "mixed_group",
]


# ===================== SCHEMA =====================
def parse_schema(text: Optional[str]) -> ColumnSchema:
    """A ColumnSchema from a JSON file path or a 'role=column,...' string."""
    if not text:
        return ColumnSchema()
    if os.path.isfile(text):
        with open(text, "r", encoding="utf-8") as f:
            return ColumnSchema.model_validate(json.load(f))

    fields: Dict[str, object] = {}
    for pair in text.split(","):
        key, sep, value = pair.strip().partition("=")
        if not sep:
            raise ValueError(f"expected role=column in schema, got {pair!r}")
        key, value = key.strip(), value.strip()
        if key == "feedback_range":
            low, _, high = value.partition(":")
            fields[key] = (float(low), float(high))
        elif key == "propensity" and value in ("", "none"):
            fields[key] = None
        else:
            fields[key] = value
    return ColumnSchema.model_validate(fields)


# ===================== VALIDATE DATA =====================
def validate_data(input_path: str, schema: Optional[ColumnSchema] = None) -> ValidationReport:
    try:
        schema = schema or ColumnSchema()
        log = load_interaction_log(input_path, schema)
        report = validate(log, schema.feedback_range)
        logger.info(f"Validated {input_path}: {report.event_count} events, density {report.density:.4f}")
        return report
    except RSEnvError as e:
        logger.error(f"Data validation failed for {input_path}: {e}")
        raise


# ===================== AUTHOR MANIFEST =====================
class ManifestConfig(BaseModel):
    """Authoring input for create-manifest; omitted values fall back to settings."""
    model_config = ConfigDict(extra="forbid")

    assumptions: Dict[str, Any]
    reward: RewardSpec
    state: StatePipelineSpec
    seed: int = 0
    slate_k: Optional[int] = None


def author_manifest(
    input_path: str,
    config_path: str,
    out_path: str,
    schema: Optional[ColumnSchema] = None,
) -> Tuple[str, str]:
    """Writes a manifest for a dataset and returns (path, manifest hash)."""
    if not out_path.endswith(MANIFEST_SUFFIX):
        logger.warning(f"Manifest path {out_path} does not end with {MANIFEST_SUFFIX}")
    with open(config_path, "r", encoding="utf-8") as f:
        config = ManifestConfig.model_validate(json.load(f))

    assumptions = dict(config.assumptions)
    assumptions.setdefault("episode_length_max", settings.default_episode_length_max)
    try:
        m = create_manifest(
            input_path,
            DesignAssumptions.model_validate(assumptions),
            config.reward,
            config.state,
            config.seed,
            schema=schema,
            slate_k=config.slate_k or settings.default_slate_k,
            manifest_dir=os.path.dirname(os.path.abspath(out_path)),
        )
        save_manifest(m, out_path)
        return out_path, manifest_hash(m)
    except RSEnvError as e:
        logger.error(f"Manifest authoring failed for {input_path}: {e}")
        raise


# ===================== RUN =====================
def _run_seed(env: Environment, m_hash: str, policy_name: str, params: Dict, seed: int, steps: int, slate_k: int) -> Tuple[RunReport, Transcript]:
    policy = create_policy(policy_name, params, seed=seed, slate_k=slate_k)
    transcript = run_episodes(env, policy, steps, seed)
    report = build_run_report(m_hash, policy, transcript, env.diagnostics())
    return report, transcript


def write_run_artifacts(report: RunReport, transcript: Transcript, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    write_trajectory_csv(transcript, os.path.join(out_dir, "trajectory.csv"))
    write_reward_curve_svg(transcript, os.path.join(out_dir, "reward_curve.svg"))
    write_canonical_json(report.model_dump(mode="json"), os.path.join(out_dir, "report.json"))


def run_experiment(
    manifest_path: str,
    policy_name: str,
    params: Optional[Dict] = None,
    steps: int = 100,
    seeds: Optional[Sequence[int]] = None,
    out_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> List[RunReport]:
    """
    Runs one policy against a manifest-built environment for every seed.
    Seeds run in parallel threads on independent environment clones; artifacts
    are written after all of them finish, in seed order.
    """
    params = params or {}
    out_dir = out_dir or settings.output_dir
    workers = workers or settings.run_workers

    try:
        m = load_manifest(manifest_path)
        seeds = list(seeds) if seeds else [m.seed]
        # surfaces UnknownPolicy before any environment work
        create_policy(policy_name, params, seed=seeds[0], slate_k=m.slate_k)
        m_hash = manifest_hash(m)
        env = build_environment(m, os.path.dirname(os.path.abspath(manifest_path)))

        def job(seed: int):
            return _run_seed(env.clone(), m_hash, policy_name, params, seed, steps, m.slate_k)

        with ThreadPoolExecutor(max_workers=max(1, min(workers, len(seeds)))) as pool:
            results = list(pool.map(job, seeds))
    except RSEnvError as e:
        logger.error(f"Run failed for {manifest_path}: {e}")
        raise

    for seed, (report, transcript) in zip(seeds, results):
        target = out_dir if len(seeds) == 1 else os.path.join(out_dir, f"seed-{seed}")
        write_run_artifacts(report, transcript, target)
        if report.clamped_rewards:
            logger.warning(f"Seed {seed}: {report.clamped_rewards} rewards were clamped to bounds")
        logger.info(f"Seed {seed}: cumulative reward {report.cumulative_reward}, fingerprint {report.fingerprint[:12]}")
    return [report for report, _ in results]


# ===================== OFF-POLICY =====================
def parse_reward_model(text: str, decisions):
    if text == "ridge":
        return fit_ridge_model(decisions)
    kind, sep, value = text.partition(":")
    if kind == "constant" and sep:
        return ConstantRewardModel(float(value))
    raise ValueError(f"unknown reward model {text!r}; expected 'ridge' or 'constant:<value>'")


def evaluate_offpolicy(
    log_path: str,
    policy_name: str,
    params: Optional[Dict] = None,
    estimators: Sequence[str] = ("replay", "ips", "dm", "dr"),
    clip: Optional[float] = None,
    schema: Optional[ColumnSchema] = None,
    context_keys: Sequence[str] = (),
    reward_model: str = "ridge",
    seed: int = 0,
    catalog: Sequence[str] = (),
) -> List[Dict[str, object]]:
    """One row per estimator, then the overlap report row."""
    unknown = [name for name in estimators if name not in ESTIMATORS]
    if unknown:
        raise ValueError(f"unknown estimators {unknown}; known: {', '.join(ESTIMATORS)}")

    try:
        log = load_interaction_log(log_path, schema or ColumnSchema())
        decisions = logged_decisions_from_log(log, context_keys, catalog)
        policy = create_policy(policy_name, params, seed=seed)
        model = None
        if any(name in ("dm", "dr") for name in estimators):
            model = parse_reward_model(reward_model, decisions)

        rows = []
        for name in estimators:
            try:
                if name == "replay":
                    estimate = replay_evaluate(decisions, policy)
                elif name == "ips":
                    estimate = ips_estimate(decisions, policy, clip)
                elif name == "snips":
                    estimate = snips_estimate(decisions, policy)
                elif name == "dm":
                    estimate = direct_method(decisions, model, policy)
                else:
                    estimate = doubly_robust(decisions, model, policy, clip)
            except NoMatches as e:
                logger.warning(f"{name}: {e}")
                estimate = ValueEstimate.infeasible(name, len(decisions), clip if name in ("ips", "dr") else None)
            rows.append(estimate.to_row())

        rows.append(overlap_report(decisions, policy).to_row())
        return rows
    except RSEnvError as e:
        logger.error(f"Off-policy evaluation failed for {log_path}: {e}")
        raise


# ===================== COMPARE =====================
def compare_reports(reports_dir: str, allow_mixed: bool = False, out_path: Optional[str] = None) -> pd.DataFrame:
    paths = sorted(glob.glob(os.path.join(reports_dir, "**", "report.json"), recursive=True))
    if not paths:
        raise ValueError(f"no report.json found under {reports_dir}")

    reports = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as f:
            reports.append((path, RunReport.model_validate(json.load(f))))

    hashes = {r.manifest_hash for _, r in reports}
    mixed = len(hashes) > 1
    if mixed and not allow_mixed:
        error = MixedManifests(hashes)
        logger.error(str(error))
        raise error
    if mixed:
        logger.warning(f"Comparing runs from {len(hashes)} different manifests")

    rows = [
        {
            "report": os.path.relpath(path, reports_dir).replace(os.sep, "/"),
            "manifest_hash": r.manifest_hash,
            "policy": r.policy,
            "params": canonical_json(r.params),
            "seed": r.seed,
            "steps": r.steps,
            "cumulative_reward": r.cumulative_reward,
            "mean_reward": r.mean_reward,
            "fingerprint": r.fingerprint,
            "mixed_group": r.manifest_hash[:12] if mixed else "",
        }
        for path, r in reports
    ]
    if out_path:
        write_rows_csv(rows, COMPARE_COLUMNS, out_path)
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)
