"""Exception types shared across the package."""


class FetalCTGError(Exception):
    pass


class SchemaError(FetalCTGError, ValueError):
    """Input has the wrong shape, columns or structure."""


class ParseError(FetalCTGError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class LabelError(FetalCTGError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DegenerateError(FetalCTGError, ValueError):
    """A split, class or fit has too few samples to be meaningful."""


class ConvergenceError(FetalCTGError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(FetalCTGError, ArithmeticError):
    pass


class NumericError(FetalCTGError, ArithmeticError):
    pass


class TrainingError(FetalCTGError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
