"""Exception hierarchy shared by all walkrank modules."""


class WalkrankError(Exception):
    """Base class for every error raised by walkrank."""


class ParseError(WalkrankError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DomainError(WalkrankError, ValueError):
    """An argument is outside the domain of the operation."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SizeError(DomainError):
    """Problem too large for a dense method."""


class DanglingNodeError(DomainError):
    def __init__(self, nodes):
        self.nodes = sorted(nodes)
        super().__init__(f"dangling nodes (zero out-strength): {self.nodes}")


class ColdStartError(DomainError):
    """User has no collected items, so diffusion has nothing to spread."""


class ConvergenceError(WalkrankError, ArithmeticError):
    """Iteration did not converge; carries the last iterate and its residual."""

    def __init__(self, message, last=None, residual=None, iterations=None):
        self.last = last
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class ReachabilityError(WalkrankError, ArithmeticError):
    """Some nodes cannot reach the absorbing/boundary set."""

    def __init__(self, message, nodes=()):
        self.nodes = sorted(nodes)
        super().__init__(f"{message}: {self.nodes}")


class ConnectivityError(ReachabilityError):
    def __init__(self, message="graph is not connected", nodes=()):
        super().__init__(message, nodes)


class AcyclicityError(DomainError):
    def __init__(self, nodes=()):
        self.nodes = sorted(nodes)
        super().__init__(f"graph has a directed cycle through nodes {self.nodes}")


class InsufficientSamplesError(WalkrankError, ArithmeticError):
    def __init__(self, nodes, returns, minimum):
        self.nodes = sorted(nodes)
        self.returns = returns
        super().__init__(
            f"nodes {self.nodes} returned fewer than {minimum} times; "
            "increase walk_steps"
        )
