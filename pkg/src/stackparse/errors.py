"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class StackUnderflow(IndexError):
    """Pop requested on a stack holding only its guard entry."""


class IllegalTransition(ValueError):
    """An action was applied to a configuration that does not permit it."""


class NotProjective(ValueError):
    """A tree with crossing arcs was handed to the arc-standard oracle."""


class ConllFormatError(ValueError):
    """Malformed treebank or embedding input; carries the offending location."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ModelFormatError(ValueError):
    """A model file is corrupt or disagrees with the requested configuration."""
