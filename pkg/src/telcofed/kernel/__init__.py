"""Minimal agent kernel."""

from telcofed.kernel.bus import InsightBus, MalformedTopicError, Subscription, topic_matches
from telcofed.kernel.contracts import (
    AgentDescriptor,
    AgentKind,
    DataScope,
    Insight,
    ReadRequest,
    WorkflowEdge,
    WorkflowSpec,
    find_cycle,
)
from telcofed.kernel.core import (
    AgentContext,
    AgentExecutionError,
    AuthorizationDenied,
    CostModel,
    DuplicateAgentError,
    Health,
    InvalidDescriptorError,
    InvalidSignatureError,
    Kernel,
    KernelError,
    OutputContractError,
    SovereigntyError,
    UnknownAgentError,
    WorkflowCycleError,
)

__all__ = [
    "AgentContext",
    "AgentDescriptor",
    "AgentExecutionError",
    "AgentKind",
    "AuthorizationDenied",
    "CostModel",
    "DataScope",
    "DuplicateAgentError",
    "Health",
    "Insight",
    "InsightBus",
    "InvalidDescriptorError",
    "InvalidSignatureError",
    "Kernel",
    "KernelError",
    "MalformedTopicError",
    "OutputContractError",
    "ReadRequest",
    "SovereigntyError",
    "Subscription",
    "UnknownAgentError",
    "WorkflowCycleError",
    "WorkflowEdge",
    "WorkflowSpec",
    "find_cycle",
    "topic_matches",
]
