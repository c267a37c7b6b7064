"""
Base classes and utilities for smart contracts.

Contracts are plain functions registered against a ``ContractRegistry`` under a
(contract, operation) name. Execution runs against a read-only state view and
records every read and proposed write; nothing is applied to state here.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Tuple, Type, TypeVar

from pydantic import BaseModel, ValidationError

from src.app.core.errors import EdgeChainError
from src.app.ledger.state import StateEntry
from src.app.models.pydantic.common import Version
from src.app.models.pydantic.contracts import ContractCall, ReadWriteSet
from src.app.models.pydantic.ledger import KVRead, KVWrite

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ContractError(EdgeChainError):
    """Base exception for contract execution errors."""

    pass


class UnknownContract(ContractError):
    pass


class ContractRuntimeError(ContractError):
    """Malformed arguments or a failed contract precondition."""

    pass


class PseudonymMismatch(ContractRuntimeError):
    pass


class ImageHashMismatch(ContractRuntimeError):
    pass


class StateView(Protocol):
    """Read-only state access used by contracts."""

    def get(self, key: str) -> Optional[StateEntry]: ...

    def scan(self, prefix: str) -> List[Tuple[str, StateEntry]]: ...


@dataclass
class ContractContext:
    """Per-execution context: caller, proposal id and the recorded rw-set."""

    state: StateView
    call: ContractCall
    creator: Optional[bytes] = None
    proposal_id: Optional[bytes] = None
    _reads: Dict[str, Optional[Version]] = field(default_factory=dict, init=False, repr=False)
    _writes: Dict[str, bytes] = field(default_factory=dict, init=False, repr=False)

    def get(self, key: str) -> Optional[bytes]:
        """Read a key, recording the version observed (None when absent)."""
        if key in self._writes:
            return self._writes[key]
        entry = self.state.get(key)
        self._reads.setdefault(key, entry.version if entry else None)
        return entry.value if entry else None

    def scan(self, prefix: str) -> List[Tuple[str, bytes]]:
        rows = []
        for key, entry in self.state.scan(prefix):
            self._reads.setdefault(key, entry.version)
            rows.append((key, entry.value))
        return rows

    def put(self, key: str, value: bytes) -> None:
        self._writes[key] = bytes(value)

    def arg_model(self, index: int, model: Type[ModelT]) -> ModelT:
        """Parse ``args[index]`` as a canonical JSON document of ``model``."""
        if index >= len(self.call.args):
            raise ContractRuntimeError(
                f"{self.call.contract}.{self.call.operation} expects argument {index}"
            )
        try:
            return model.model_validate_json(self.call.args[index])
        except ValidationError as e:
            raise ContractRuntimeError(f"malformed {model.__name__} argument: {e}")

    def arg_text(self, index: int) -> str:
        if index >= len(self.call.args):
            raise ContractRuntimeError(
                f"{self.call.contract}.{self.call.operation} expects argument {index}"
            )
        try:
            return self.call.args[index].decode("utf-8")
        except UnicodeDecodeError as e:
            raise ContractRuntimeError(f"argument {index} is not UTF-8: {e}")

    def rw_set(self) -> ReadWriteSet:
        return ReadWriteSet(
            reads=tuple(KVRead(key=k, version=v) for k, v in sorted(self._reads.items())),
            writes=tuple(KVWrite(key=k, value=v) for k, v in sorted(self._writes.items())),
        )


Handler = Callable[[ContractContext], Optional[bytes]]


@dataclass(frozen=True)
class Operation:
    contract: str
    name: str
    handler: Handler
    read_only: bool = False


@dataclass(frozen=True)
class ExecutionResult:
    rw_set: ReadWriteSet
    result: Optional[bytes] = None


class ContractRegistry:
    """Fixed set of contract operations, resolved by (contract, operation) name."""

    def __init__(self) -> None:
        self._operations: Dict[Tuple[str, str], Operation] = {}

    def operation(self, contract: str, name: str, read_only: bool = False):
        """Decorator registering ``handler`` as ``contract.name``."""

        def decorator(handler: Handler) -> Handler:
            key = (contract, name)
            if key in self._operations:
                raise ValueError(f"operation {contract}.{name} already registered")
            self._operations[key] = Operation(contract, name, handler, read_only)
            logger.debug("Registered contract operation %s.%s", contract, name)
            return handler

        return decorator

    def resolve(self, contract: str, name: str) -> Operation:
        try:
            return self._operations[(contract, name)]
        except KeyError:
            raise UnknownContract(f"unknown contract operation {contract}.{name}")

    def __contains__(self, key: Tuple[str, str]) -> bool:
        return key in self._operations

    def names(self) -> List[str]:
        return sorted(f"{c}.{o}" for c, o in self._operations)

    def evaluate(
        self,
        call: ContractCall,
        state: StateView,
        creator: Optional[bytes] = None,
        proposal_id: Optional[bytes] = None,
    ) -> ExecutionResult:
        operation = self.resolve(call.contract, call.operation)
        context = ContractContext(state=state, call=call, creator=creator, proposal_id=proposal_id)
        try:
            result = operation.handler(context)
        except ContractError:
            raise
        except (ValueError, KeyError, json.JSONDecodeError) as e:
            raise ContractRuntimeError(f"{call.contract}.{call.operation} failed: {e}")
        return ExecutionResult(rw_set=context.rw_set(), result=result)

    def execute(
        self,
        call: ContractCall,
        state: StateView,
        creator: Optional[bytes] = None,
        proposal_id: Optional[bytes] = None,
    ) -> ReadWriteSet:
        """Simulate ``call`` against ``state`` and return its read/write set."""
        return self.evaluate(call, state, creator, proposal_id).rw_set
