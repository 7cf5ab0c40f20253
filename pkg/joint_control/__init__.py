from .controller import ControllerFault, ControllerSettings, GainSet, JointServo, hybrid_control
from .observer import ObserverState, dob_update, init_observer, observe, rfob_update
