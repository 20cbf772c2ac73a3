class ConfigError(ValueError):
    """Invalid configuration or shape; the message names the violated constraint."""


class PostSelectionError(RuntimeError):
    """Ancilla post-selection probability fell below the failure threshold."""

    def __init__(self, message, success_prob=None, patch=None, sample=None):
        super().__init__(message)
        self.success_prob = success_prob
        self.patch = patch
        self.sample = sample


class ParseError(ValueError):
    """Malformed IDX or parameter file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
