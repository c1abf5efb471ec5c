"""Lie systems: superposition rules, Vessiot-Guldberg algebras, quasi-Lie schemes."""
from . import exprlang, groupflow, integcond, liealg, numerics, odecore, quasilie, superpose
from .exprlang import parse, evaluate, diff_t, lambdify, to_source
from .odecore import (BACKEND, StepUnderflow, StoppedAtSingularity, TDVectorField,
                      Trajectory, integrate)
from .liealg import PolyVectorField, bracket, lie_closure, minimal_m
from .superpose import get_rule, verify_rule
from .groupflow import solve_group_equation, wei_norman_sl2
from .quasilie import get_scheme, verify_scheme

__version__ = "0.1.0"

__all__ = [
    "exprlang", "groupflow", "integcond", "liealg", "numerics", "odecore", "quasilie",
    "superpose", "parse", "evaluate", "diff_t", "lambdify", "to_source", "BACKEND",
    "StepUnderflow", "StoppedAtSingularity", "TDVectorField", "Trajectory", "integrate",
    "PolyVectorField", "bracket", "lie_closure", "minimal_m", "get_rule", "verify_rule",
    "solve_group_equation", "wei_norman_sl2", "get_scheme", "verify_scheme", "__version__",
]
