"""Dynamic UPF placement simulator for vehicular 5G scenarios."""

from .allocation import ALGORITHMS, Allocation, Allocator, ue_latency_profile
from .association import ActiveLoad, AssociationState, PathLossModel, associate_slot, path_loss
from .harness import ResultsTable, SweepConfig, emit_results, run_sweep, simulate
from .mobility import TimeSlotSnapshot, TraceEntry, limit_slots, stream_slots
from .topology import BaseStation, NetworkGraph, build_network, parse_bs_deployment

__version__ = "0.1.0"
