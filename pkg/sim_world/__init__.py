from .physics import SimulationFault, contact_torque, mechanical_energy, step_dynamics
from .operator import OperatorModel, operator_torque
from .state import ArmModel, CommandFrame, ContactModel, JointState, WorldState
from .tasks import WorldFactory, build_operator, build_world
