from typing import Optional


class RSEnvError(Exception):
    """Root of every error raised by the environment framework."""


# ===================== ENVIRONMENT =====================
class SchemaMismatch(RSEnvError):
    def __init__(self, missing_keys):
        self.missing_keys = sorted(missing_keys)
        super().__init__(
            f"State representation needs context keys the simulator never emits: {self.missing_keys}"
        )


class InvalidBounds(RSEnvError):
    pass


class InvalidAction(RSEnvError):
    pass


class EpisodeFinished(RSEnvError):
    def __init__(self):
        super().__init__("Episode is finished; call reset() before stepping again")


class EpisodeNotStarted(RSEnvError):
    def __init__(self):
        super().__init__("Environment has not been reset; call reset(seed) first")


class InvalidSeed(RSEnvError, ValueError):
    def __init__(self, seed):
        self.seed = seed
        super().__init__(f"seed must be an unsigned 64-bit integer, got {seed!r}")


# ===================== DATA =====================
class DataError(RSEnvError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, reason: str):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class MissingColumn(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Missing declared column: {column!r}")


class EmptyLog(RSEnvError):
    def __init__(self):
        super().__init__("Interaction log has no events")


# ===================== REWARD / STATE =====================
class InvalidSpec(RSEnvError):
    def __init__(self, constraint: str):
        self.constraint = constraint
        super().__init__(f"Invalid reward spec: {constraint}")


class EmptyPipeline(RSEnvError):
    def __init__(self):
        super().__init__("State pipeline needs at least one stage")


# ===================== OFF-POLICY =====================
class EstimatorError(RSEnvError):
    pass


class NoMatches(EstimatorError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"Target policy matched none of the {n} logged actions")


class MissingPropensity(EstimatorError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Logged decision {index} has no propensity")


class NoData(EstimatorError):
    def __init__(self):
        super().__init__("Cannot estimate a value over an empty log")


# ===================== AGENTS =====================
class EmptyCandidates(RSEnvError):
    def __init__(self):
        super().__init__("State has no candidate items")


class DimensionMismatch(RSEnvError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"Expected feature dimension {expected}, got {got}")


class UnknownPolicy(RSEnvError):
    def __init__(self, name: str, known):
        self.name = name
        super().__init__(f"Unknown policy {name!r}; known policies: {', '.join(sorted(known))}")


# ===================== MANIFEST =====================
class ManifestError(RSEnvError):
    pass


class HashMismatch(ManifestError):
    def __init__(self, path: str, expected: str, actual: str):
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dataset {path} hash {actual} does not match manifest hash {expected}")


class VersionUnsupported(ManifestError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"Unsupported manifest format_version: {version!r}")


class SchemaError(ManifestError):
    def __init__(self, path: str, reason: str, detail: Optional[str] = None):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" + (f" ({detail})" if detail else ""))


# ===================== REPORTS =====================
class MixedManifests(RSEnvError):
    def __init__(self, hashes):
        self.hashes = sorted(hashes)
        super().__init__(
            f"Reports come from {len(self.hashes)} different manifests; pass --allow-mixed to compare them anyway"
        )
