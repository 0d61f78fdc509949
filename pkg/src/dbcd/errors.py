"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """Malformed input data (bad LIBSVM line, inconsistent dimensions, ...)."""


class ConfigurationError(ValueError):
    """Invalid solver, partition, or cluster configuration."""


class LineSearchError(RuntimeError):
    """Backtracking line search exhausted its trial budget."""


class NodeTaskError(RuntimeError):
    """A simulated node task raised an exception.

    Carries the id of the failing node so cluster-level failures are
    attributable.
    """

    def __init__(self, node_id: int, message: str):
        super().__init__(f"node {node_id}: {message}")
        self.node_id = node_id
