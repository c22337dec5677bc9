from .model import ModelBundle, ServiceInfo, SidecarError
from .service import create_app, serve

__all__ = ["ModelBundle", "ServiceInfo", "SidecarError", "create_app", "serve"]
__version__ = "0.1.0"
