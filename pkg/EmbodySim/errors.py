"""Exception hierarchy for EmbodySim."""

from typing import Optional


class EmbodySimError(Exception):
    """Base class for all EmbodySim errors."""


class CatalogError(EmbodySimError):
    """The object catalog or a shipped data table is malformed."""


class SceneValidationError(EmbodySimError):
    """A scene or scene config violates an invariant."""


class PlacementError(EmbodySimError):
    """Object placement failed after the configured number of retries."""


class TwinInjectionError(EmbodySimError):
    """Twin objects cannot be injected into the scene."""


class SensorError(EmbodySimError):
    """A sensor precondition was violated (bad site index, force, ...)."""


class EncodingError(EmbodySimError):
    """A payload does not match the requested modality."""


class TrainingDivergenceError(EmbodySimError):
    """Training loss exceeded the divergence threshold."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss:.4g})")
        self.epoch = epoch
        self.loss = loss


class ProtocolError(EmbodySimError):
    """A token violates the action/state grammar or the legality automaton."""

    def __init__(self, rule, detail: str = "", index: Optional[int] = None):
        message = rule.message if not detail else f"{rule.message} {detail}"
        if index is not None:
            message = f"{message} (token {index})"
        super().__init__(message)
        self.rule = rule
        self.detail = detail
        self.index = index


class ParseError(EmbodySimError):
    """Token text could not be parsed."""

    def __init__(self, message: str, offset: int, rule=None):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.rule = rule


class WireError(EmbodySimError):
    """A wire message could not be decoded."""

    def __init__(self, code: str, message: str, echo: str = ""):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.echo = echo


class ActionError(EmbodySimError):
    """The environment refused to execute an action."""


class TaskGenerationError(EmbodySimError):
    """No task of the requested kinds can be generated for a scene."""


class DatasetError(EmbodySimError):
    """A dataset file is unreadable or inconsistent."""


class DeterminismError(EmbodySimError):
    """A replay produced observations different from the recording."""


class EvaluationError(EmbodySimError):
    """A benchmark cannot be run with the requested policy."""
