"""
Built-in smart contracts and the shared registry they are installed in.
"""

from .base import (
    ContractContext,
    ContractError,
    ContractRegistry,
    ContractRuntimeError,
    ExecutionResult,
    ImageHashMismatch,
    PseudonymMismatch,
    UnknownContract,
)
from .priority import classify_priority
from .query_contract import register_query_contract
from .situation_contract import register_situation_contract
from .vehicle_contract import register_vehicle_contract


def build_registry() -> ContractRegistry:
    registry = ContractRegistry()
    register_vehicle_contract(registry)
    register_situation_contract(registry)
    register_query_contract(registry)
    return registry


# Global instance
contract_registry = build_registry()

__all__ = [
    "ContractContext",
    "ContractError",
    "ContractRegistry",
    "ContractRuntimeError",
    "ExecutionResult",
    "ImageHashMismatch",
    "PseudonymMismatch",
    "UnknownContract",
    "build_registry",
    "classify_priority",
    "contract_registry",
]
