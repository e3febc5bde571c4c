"""Exceptions raised by the numerical gates."""


class NumericalGateError(RuntimeError):
    """A numerical quality gate failed (norm drift, unitarity, convergence).

    The ``gate`` attribute names the failing gate so front ends can report it.
    """

    def __init__(self, gate: str, message: str):
        self.gate = gate
        super().__init__(f"[{gate}] {message}")


class IntegrationError(NumericalGateError):
    """Norm drift of the cycle integrator exceeded its tolerance."""

    def __init__(self, message: str):
        super().__init__("norm-drift", message)
