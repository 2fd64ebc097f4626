"""
The agent/environment loop: act, step, update. Runs record a transcript
whose canonical serialization is hashed into a trajectory fingerprint.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List

from pydantic import BaseModel

from src.core import Action, Environment, State
from utils.logger import get_logger
from utils.prng import derive_seed

logger = get_logger(__name__)

TRANSCRIPT_FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    """Sorted keys at every level, no insignificant whitespace, shortest round-trip reals."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ===================== TRANSCRIPT =====================
@dataclass(frozen=True)
class TranscriptStep:
    step: int
    state: State
    action: Action
    reward: float
    done: bool

    def to_record(self) -> dict:
        return {
            "state": self.state.to_record(),
            "action": list(self.action.slate),
            "reward": self.reward,
            "done": self.done,
        }


@dataclass
class Transcript:
    seed: int
    steps: List[TranscriptStep] = field(default_factory=list)
    episodes: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> List[float]:
        return [s.reward for s in self.steps]

    @property
    def cumulative_reward(self) -> float:
        total = 0.0
        for s in self.steps:
            total += s.reward
        return total

    @property
    def mean_reward(self) -> float:
        return self.cumulative_reward / len(self.steps) if self.steps else 0.0

    def cumulative_means(self) -> List[float]:
        out = []
        total = 0.0
        for i, s in enumerate(self.steps, start=1):
            total += s.reward
            out.append(total / i)
        return out

    def fingerprint(self) -> str:
        return fingerprint_transcript(self)


def fingerprint_transcript(transcript: Transcript) -> str:
    document = {
        "format_version": TRANSCRIPT_FORMAT_VERSION,
        "transcript": [s.to_record() for s in transcript.steps],
    }
    return sha256_hex(canonical_json(document).encode("utf-8"))


def episode_seed(seed: int, episode: int) -> int:
    return seed if episode == 0 else derive_seed(seed, f"episode:{episode}")


# ===================== EPISODE RUNNER =====================
def run_episodes(env: Environment, policy, steps: int, seed: int) -> Transcript:
    """
    Runs `steps` agent/environment interactions. When an episode ends early the
    environment is reset with a per-episode seed derived from `seed`.
    """
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    transcript = Transcript(seed=seed)
    if steps == 0:
        return transcript

    state = env.reset(episode_seed(seed, 0))
    transcript.episodes = 1
    for t in range(steps):
        if env.done:
            state = env.reset(episode_seed(seed, transcript.episodes))
            transcript.episodes += 1
            if env.done:
                logger.warning(f"Episode {transcript.episodes - 1} ended at reset; stopping after {t} steps")
                break
        action = policy.act(state)
        result = env.step(action)
        policy.update(state, action, result.reward)
        transcript.steps.append(TranscriptStep(t, state, action, result.reward, result.done))
        state = result.next_state
    return transcript


# ===================== RUN REPORT =====================
class RunReport(BaseModel):
    manifest_hash: str
    policy: str
    params: Dict[str, object]
    seed: int
    steps: int
    episodes: int
    cumulative_reward: float
    mean_reward: float
    fingerprint: str
    trajectory: str = "trajectory.csv"
    footprint: Dict[str, int]
    assumption_footprint: float
    clamped_rewards: int
    clamped_features: int


def build_run_report(
    manifest_hash: str,
    policy,
    transcript: Transcript,
    diagnostics,
) -> RunReport:
    return RunReport(
        manifest_hash=manifest_hash,
        policy=policy.name,
        params=policy.params(),
        seed=transcript.seed,
        steps=len(transcript),
        episodes=transcript.episodes,
        cumulative_reward=transcript.cumulative_reward,
        mean_reward=transcript.mean_reward,
        fingerprint=transcript.fingerprint(),
        footprint=dict(sorted(diagnostics.slot_sources.items())),
        assumption_footprint=diagnostics.assumption_footprint,
        clamped_rewards=diagnostics.clamped_rewards,
        clamped_features=diagnostics.clamped_features,
    )
