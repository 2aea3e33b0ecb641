"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DecisiveError(Exception):
    """Base class for every error raised by this package."""

    def to_dict(self) -> dict:
        return {"type": type(self).__name__, "message": str(self)}


class FormulaSyntaxError(DecisiveError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(line=self.line, column=self.column)
        return d


class UnknownVariable(FormulaSyntaxError):
    pass


class NonLinear(FormulaSyntaxError):
    pass


class MissingVariable(DecisiveError):
    pass


class QuantifierPresent(DecisiveError):
    pass


class FreeVariablePresent(DecisiveError):
    pass


class WrongArity(DecisiveError):
    pass


class ResourceExceeded(DecisiveError):
    """Fourier-Motzkin produced more atoms than the configured cap."""

    def __init__(self, atoms: int, cap: int):
        self.atoms = atoms
        self.cap = cap
        super().__init__(f"quantifier elimination produced {atoms} atoms (cap {cap})")


class ModelError(DecisiveError):
    """Structurally malformed hybrid system (dangling names, bad weights, ...)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")

    def to_dict(self) -> dict:
        d = super().to_dict()
        if self.line is not None:
            d.update(line=self.line, column=self.column)
        return d


class EdgeLocationMismatch(DecisiveError):
    pass


class DimensionMismatch(DecisiveError):
    pass


class SingularSystem(DecisiveError):
    pass


class NotCycleReset(DecisiveError):
    def __init__(self, witness: tuple[str, ...]):
        self.witness = tuple(witness)
        super().__init__("system is not cycle-reset; non-strong cycle: " + " -> ".join(self.witness))

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["witness_cycle"] = list(self.witness)
        return d


class CapExceeded(DecisiveError):
    """Partition refinement did not stabilise within the iteration cap.

    Carries the partial partition and the per-iteration trace so callers can
    inspect the divergence pattern.
    """

    def __init__(self, partition, trace: list[dict], max_iter: int):
        self.partition = partition
        self.trace = trace
        self.max_iter = max_iter
        super().__init__(f"refinement not stable after {max_iter} iterations "
                         f"({len(partition.blocks)} blocks)")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["max_iter"] = self.max_iter
        d["block_counts"] = [t["blocks"] for t in self.trace]
        return d


class BlockingBlock(DecisiveError):
    pass


class QuantModeViolation(DecisiveError):
    def __init__(self, message: str, edge: str | None = None):
        self.edge = edge
        super().__init__(message)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["edge"] = self.edge
        return d


class QuadratureBudgetExceeded(DecisiveError):
    pass


class BlockedState(DecisiveError):
    pass
