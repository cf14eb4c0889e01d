"""Reference external policy client for the motionlab tick wire protocol."""

from .client import ClientSession, serve_policy
from .kinematics import DEFAULT_PARAMS, AgentState, VehicleParams
from .protocol import ProtocolError, ServerClosed, SocketChannel, StdioChannel, WIRE_VERSION
from .rollout import ConstantPolicy, PursuitPolicy, make_policy

__version__ = "0.1.0"
