"""Exception types shared across the package."""


class ParseError(ValueError):
    """A corpus, embedding, or vectors file is malformed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class EmptyCorpusError(ParseError):
    """The corpus file contains no dialogues."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class NumericalError(ArithmeticError):
    """A numerical operation lost positive definiteness or otherwise failed."""


class StatsConsistencyError(RuntimeError):
    """Incrementally maintained statistics diverged from a full recount."""
