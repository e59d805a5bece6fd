"""
Models package for the contact-geometric PMP solver.

This package contains the problem definition, the projective costate value
type, trajectory containers and the pydantic documents used for JSON input
and reports.
"""

from .problem import (
    TimeModeKind,
    TimeMode,
    ExtendedState,
    ControlSet,
    BoxControlSet,
    FiniteControlSet,
    TargetSet,
    TerminalCost,
    OcpProblem,
)
from .costate import ChartKind, ChartTag, ProjectiveCostate
from .trajectory import ControlSignal, SampledTrajectory, ContactState, ExtremalTrajectory
from .documents import ProblemDocument, RunConfig, ShootingReport

__all__ = [
    'TimeModeKind',
    'TimeMode',
    'ExtendedState',
    'ControlSet',
    'BoxControlSet',
    'FiniteControlSet',
    'TargetSet',
    'TerminalCost',
    'OcpProblem',
    'ChartKind',
    'ChartTag',
    'ProjectiveCostate',
    'ControlSignal',
    'SampledTrajectory',
    'ContactState',
    'ExtremalTrajectory',
    'ProblemDocument',
    'RunConfig',
    'ShootingReport',
]
