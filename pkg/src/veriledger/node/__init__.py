from .config import DeviceConfig, NodeConfig, PeerConfig, load_config, load_membership_file
from .client import HttpTransport, NodeClient
from .service import NodeService, Outbound, Request, Response, WallClock, sign_headers

__all__ = [
    "DeviceConfig",
    "HttpTransport",
    "NodeClient",
    "NodeConfig",
    "NodeService",
    "Outbound",
    "PeerConfig",
    "Request",
    "Response",
    "WallClock",
    "load_config",
    "load_membership_file",
    "sign_headers",
]
