"""Nonlinear distributed average consensus with bounded transmissions."""

from nlconsensus.graph import Spectrum, Topology, generate, is_connected, laplacian, spectrum
from nlconsensus.transmit import TransmitFunction, db_to_linear, parse_designator
from nlconsensus.dynamics import NoiseModel, Schedule, Trajectory, init_measurements, run, step

__all__ = [
    "NoiseModel",
    "Schedule",
    "Spectrum",
    "Topology",
    "Trajectory",
    "TransmitFunction",
    "db_to_linear",
    "generate",
    "init_measurements",
    "is_connected",
    "laplacian",
    "parse_designator",
    "run",
    "spectrum",
    "step",
]
