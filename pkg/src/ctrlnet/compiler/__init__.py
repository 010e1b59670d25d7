from .export import network_from_dict, network_to_dict, to_dot, to_json
from .instantiate import instantiate
from .merge import MergeError, match_nodes, merge
from .network import ComponentNetwork, ComponentNode, Connection, NetworkError, PortRef, validate_network
from .ports import PortType
from .resolve import ResolvedModel, resolve

__all__ = [
    "ComponentNetwork",
    "ComponentNode",
    "Connection",
    "MergeError",
    "NetworkError",
    "PortRef",
    "PortType",
    "ResolvedModel",
    "instantiate",
    "match_nodes",
    "merge",
    "network_from_dict",
    "network_to_dict",
    "resolve",
    "to_dot",
    "to_json",
    "validate_network",
]
