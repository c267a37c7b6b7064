from .simulator import DeadlineExceeded, Network, NetworkEvent, SimNode, UnknownAddress

__all__ = ["DeadlineExceeded", "Network", "NetworkEvent", "SimNode", "UnknownAddress"]
