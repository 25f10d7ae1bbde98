class InputError(ValueError):
    """Malformed user input (files, configs, parameters)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UnroutableGraphError(ValueError):
    """An eigenmode cannot be mapped onto the cavity mode with local sign flips."""

    def __init__(self, columns, message: str | None = None):
        self.columns = list(columns)
        super().__init__(message or f"unroutable mode(s): columns {self.columns} are not +-1/sqrt(M) sign patterns")


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or a verification check failed."""
