"""
Environment manifests: a canonical, content-hashed JSON document holding
everything needed to rebuild an Environment.

The dataset is referenced by path and sha256, never embedded. Fitted state
statistics and imputation means are stored in the manifest, so building
from it never refits anything.
"""

import hashlib
import json
import os
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from data_engine.interactions import ColumnSchema
from data_engine.loader import load_interaction_log
from src.core import Environment, compose_environment
from src.orchastrate import canonical_json, run_episodes, sha256_hex
from src.reward import RewardSpec, make_reward_fn
from src.simulator import DesignAssumptions, FeedbackStatistics, build_simulator
from src.state_repr import FrozenStatePipeline, StatePipelineSpec, StateRepresentation, build_state_repr
from utils.errors import HashMismatch, SchemaError, VersionUnsupported
from utils.logger import get_logger
from utils.prng import PRNG_ALGORITHM

logger = get_logger(__name__)

FORMAT_VERSION = 1
MANIFEST_SUFFIX = ".rsenv.json"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)


# ===================== MANIFEST MODEL =====================
class _Strict(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class DatasetRef(_Strict):
    path: str
    sha256: str = Field(pattern=r"^[0-9a-f]{64}$")
    columns: ColumnSchema
    feedback_range: Tuple[float, float]


class EnvironmentManifest(_Strict):
    format_version: int
    dataset: DatasetRef
    assumptions: DesignAssumptions
    reward: RewardSpec
    state: FrozenStatePipeline
    imputation: FeedbackStatistics
    bounds: Tuple[float, float]
    seed: int = Field(ge=0, lt=2**64)
    slate_k: int = Field(ge=1)
    prng: str

    @model_validator(mode="after")
    def _consistent(self):
        if self.prng != PRNG_ALGORITHM:
            raise ValueError(f"prng must be {PRNG_ALGORITHM!r}, got {self.prng!r}")
        if tuple(self.bounds) != tuple(self.reward.bounds):
            raise ValueError(f"bounds {list(self.bounds)} must equal reward bounds {list(self.reward.bounds)}")
        return self

    def to_document(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def manifest_bytes(m: EnvironmentManifest) -> bytes:
    return canonical_json(m.to_document()).encode("utf-8")


def manifest_hash(m: EnvironmentManifest) -> str:
    return sha256_hex(manifest_bytes(m))


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def resolve_dataset_path(m: EnvironmentManifest, base_dir: Optional[str] = None) -> str:
    if os.path.isabs(m.dataset.path) or base_dir is None:
        return m.dataset.path
    return os.path.join(base_dir, m.dataset.path)


def verify_dataset(m: EnvironmentManifest, base_dir: Optional[str] = None) -> str:
    path = resolve_dataset_path(m, base_dir)
    if not os.path.isfile(path):
        raise SchemaError("dataset.path", f"dataset file not found: {path}")
    actual = sha256_file(path)
    if actual != m.dataset.sha256:
        raise HashMismatch(path, m.dataset.sha256, actual)
    return path


# ===================== SAVE / LOAD =====================
def save_manifest(m: EnvironmentManifest, path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(manifest_bytes(m))
    logger.info(f"Manifest saved to: {path} ({manifest_hash(m)[:12]})")
    return path


def _missing_fields(raw: Any, dumped: Any, path: str = "") -> List[str]:
    """Paths present in the serialized model but absent from the raw document."""
    if isinstance(dumped, dict) and isinstance(raw, dict):
        missing = []
        for key, value in dumped.items():
            child = f"{path}.{key}" if path else key
            if key not in raw:
                missing.append(child)
            else:
                missing.extend(_missing_fields(raw[key], value, child))
        return missing
    if isinstance(dumped, list) and isinstance(raw, list):
        missing = []
        for i, (r, d) in enumerate(zip(raw, dumped)):
            missing.extend(_missing_fields(r, d, f"{path}[{i}]"))
        return missing
    return []


def _error_path(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out or "$"


def parse_manifest(document: Any) -> EnvironmentManifest:
    if not isinstance(document, dict):
        raise SchemaError("$", "manifest must be a JSON object")
    if "format_version" not in document:
        raise SchemaError("format_version", "missing field")
    if document["format_version"] not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(document["format_version"])

    try:
        m = EnvironmentManifest.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise SchemaError(_error_path(first["loc"]), first["msg"], f"{e.error_count()} error(s)") from e

    missing = _missing_fields(document, m.to_document())
    if missing:
        raise SchemaError(missing[0], "missing field")
    return m


def _reject_constant(name: str):
    raise SchemaError("$", f"non-finite number {name} is not valid JSON")


def load_manifest(path: str, verify: bool = True) -> EnvironmentManifest:
    with open(path, "rb") as f:
        raw = f.read()
    try:
        document = json.loads(raw.decode("utf-8"), parse_constant=_reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError("$", "not valid UTF-8 JSON", str(e)) from e

    m = parse_manifest(document)
    if verify:
        verify_dataset(m, os.path.dirname(os.path.abspath(path)))
    logger.info(f"Loaded manifest {path} ({manifest_hash(m)[:12]})")
    return m


# ===================== AUTHORING =====================
def create_manifest(
    dataset_path: str,
    assumptions: DesignAssumptions,
    reward: RewardSpec,
    state: StatePipelineSpec,
    seed: int,
    schema: Optional[ColumnSchema] = None,
    slate_k: int = 1,
    manifest_dir: Optional[str] = None,
) -> EnvironmentManifest:
    """Loads and hashes the dataset, fits frozen statistics, returns a complete manifest."""
    schema = schema or ColumnSchema()
    log = load_interaction_log(dataset_path, schema)
    feedback_range = schema.feedback_range or log.feedback_range

    # fail early on a reward spec the environment could never build
    make_reward_fn(reward, feedback_range, slate_k)
    frozen = build_state_repr(state, log).frozen()

    stored_path = dataset_path
    if manifest_dir is not None:
        stored_path = os.path.relpath(os.path.abspath(dataset_path), os.path.abspath(manifest_dir))

    m = EnvironmentManifest(
        format_version=FORMAT_VERSION,
        dataset=DatasetRef(
            path=stored_path.replace(os.sep, "/"),
            sha256=sha256_file(dataset_path),
            columns=schema,
            feedback_range=feedback_range,
        ),
        assumptions=assumptions,
        reward=reward,
        state=frozen,
        imputation=FeedbackStatistics.from_log(log),
        bounds=reward.bounds,
        seed=seed,
        slate_k=slate_k,
        prng=PRNG_ALGORITHM,
    )
    logger.info(f"Created manifest for {dataset_path}: {len(log)} events, seed {seed}")
    return m


# ===================== BUILD =====================
def build_environment(m: EnvironmentManifest, base_dir: Optional[str] = None) -> Environment:
    path = verify_dataset(m, base_dir)
    log = load_interaction_log(path, m.dataset.columns)
    sim = build_simulator(log, m.assumptions, m.imputation)
    rf = make_reward_fn(m.reward, m.dataset.feedback_range, m.slate_k)
    sr = StateRepresentation.from_frozen(m.state)
    return compose_environment(sim, rf, sr, m.bounds, m.slate_k)


def fingerprint_trajectory(
    m: EnvironmentManifest,
    policy,
    steps: int,
    seed: Optional[int] = None,
    base_dir: Optional[str] = None,
) -> str:
    env = build_environment(m, base_dir)
    transcript = run_episodes(env, policy, steps, m.seed if seed is None else seed)
    return transcript.fingerprint()
