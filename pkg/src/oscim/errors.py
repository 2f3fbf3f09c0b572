"""Exception hierarchy shared by every oscim module."""

import numpy as np


class OscimError(Exception):
    """Base class for all errors raised by oscim."""


class InvalidInstanceError(OscimError, ValueError):
    pass


class BudgetExceededError(OscimError, ValueError):
    pass


class ConventionError(OscimError, ValueError):
    pass


class DimensionError(OscimError, ValueError):
    pass


class SymmetryError(OscimError, ValueError):
    pass


class IntegrationDiverged(OscimError, RuntimeError):
    """Raised when a step produces a non-finite state.

    ``step`` is the index of the offending step and ``last_state`` the last
    finite state (a copy, safe to keep).
    """

    def __init__(self, step, last_state, t=None, context=None):
        self.step = step
        self.t = t
        self.last_state = None if last_state is None else np.array(last_state, copy=True)
        self.context = dict(context or {})
        msg = f"integration diverged at step {step}"
        if t is not None:
            msg += f" (t={t:.6g})"
        if self.context:
            msg += " [" + ", ".join(f"{k}={v}" for k, v in self.context.items()) + "]"
        super().__init__(msg)
