"""Home health care routing where caregivers can be dropped at a patient and picked up later."""
from .core import (CaregiverNotAboardError, DummyBeforePatientError, Instance, Objective, Solution,
                   StructureError, Timeline, UnreturnedCaregiverError, Violation, check_feasibility,
                   evaluate, is_feasible, objective, total_cost)

__version__ = "0.1.0"
