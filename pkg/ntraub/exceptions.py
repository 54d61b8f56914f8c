# Exceptions raised by ntraub. Everything derives from NTraubError so callers (and the CLI) can catch the whole
# family at once, while the builtin bases keep `except ValueError` style handling working.


class NTraubError(Exception):
    pass


class DomainError(NTraubError, ValueError):
    """An argument lies outside the domain of an average function, or interval bounds are out of order."""


class QuadratureError(NTraubError, ArithmeticError):
    """The adaptive quadrature could not meet its tolerance within the evaluation budget."""


class ModelError(NTraubError, ValueError):
    """A Lipschitz model violates the hypotheses required by the requested operation."""


class NoRadiusError(NTraubError, ArithmeticError):
    pass


class NotFoundError(NTraubError, ArithmeticError):
    pass


class SingularMatrix(NTraubError, ArithmeticError):
    pass


class SingularJacobian(SingularMatrix):
    """Raised by the solver when one of the two Jacobian factorizations of a step is singular.

    Parameters
    ----------
    message : str
        Human readable description
    which : str
        'x' if G'(x_t) failed, 'y' if G'(y_t) failed
    trace : solver.IterationTrace or None
        Iterations completed before the failure
    """

    def __init__(self, message, which='x', trace=None):
        super().__init__(message)
        self.which = which
        self.trace = trace
        return


class InsufficientData(NTraubError, ValueError):
    pass


class ConfigError(NTraubError, ValueError):
    pass
