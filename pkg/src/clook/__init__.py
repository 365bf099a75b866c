"""clook: software twin of a gaze-reactive two-ring clock."""

from .attention import (AttentionState, Debouncer, GazeObservation,
                        classify_frame, debounce)
from .motor import (Direction, DrivePlanner, GearTrain, RingId, RingPlanner,
                    RingState, StepCommand, apply_steps, hand_skew,
                    skew_degrees, target_angles)
from .presence import (PeerConfig, PresenceNode, PresenceState,
                       decode_message, encode_message, local_civil_tod)
from .scenario import (RunMetrics, Scenario, ScenarioError, SimConfig,
                       TraceEvent, load_config, load_scenario,
                       metrics_from_trace, parse_scenario)
from .serial_link import (Channel, LinkModel, StepBatch, Ping, Ack,
                          crc8, decode, encode)
from .sim import Simulation, dense_oracle, run
from .timewarp import (HALF_DAY_MS, Resync, WarpPolicy, WarpedClock,
                       MonotonicityError)

__version__ = "0.1.0"
