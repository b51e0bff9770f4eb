"""Exception hierarchy shared by every stage.

Each class carries the process exit code the CLI maps it to:
1 data error, 2 config/credential error, 3 provider error.
"""


class ProvsemError(Exception):
    exit_code = 1


class DataError(ProvsemError):
    exit_code = 1


class ParseError(DataError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaError(DataError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class IngestError(DataError):
    pass


class SamplingError(DataError):
    pass


class SplitError(DataError):
    pass


class RocError(DataError):
    pass


class ProjectionError(DataError):
    pass


class TrainingError(DataError):
    pass


class ShapeError(DataError):
    """Width or shape mismatch between inputs."""


class StageError(DataError):
    """A pipeline stage is missing an upstream artifact."""


class ConfigError(ProvsemError):
    exit_code = 2


class CredentialError(ConfigError):
    pass


class ProviderError(ProvsemError):
    exit_code = 3


class AugmentationError(ProviderError):
    def __init__(self, message: str, request_key: str):
        super().__init__(f"{message} [request {request_key}]")
        self.request_key = request_key


class ContentError(ProviderError):
    pass


class EmbeddingError(ProviderError):
    def __init__(self, message: str, batch_indices: list[int]):
        super().__init__(message)
        self.batch_indices = batch_indices


class ProviderContractError(ProviderError):
    pass
