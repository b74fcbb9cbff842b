"""convlim - exact convolution systems, projective limits and L2 product systems.

Main entry points:
    load_description / parse_description: ingest a system description
    cmd_verify: run the verification suites
    cmd_export / cmd_sample / cmd_tower: artifact commands
    run_mutations: mutation-sensitivity catalogue
"""
from .commands import cmd_export, cmd_sample, cmd_tower, context_from_description, load_context
from .convsys import ConvolutionSystem, FiniteSemigroup, cyclic_group, from_idempotent, from_semigroup_generator
from .description import load_description, parse_description, serialize
from .errors import DescriptionError, MeasureError, PartitionError, SystemConstructionError
from .finprob import FinProbSpace, ProbMorphism
from .mutations import CATALOGUE, detection_table, run_mutations
from .order_partition import Partition, TimeSet
from .protocols import CheckResult, Report, SystemDescription, Witness
from .suites import SUITES, SuiteContext, cmd_verify

__version__ = "1.0.0"

__all__ = [
    "CATALOGUE",
    "SUITES",
    "CheckResult",
    "ConvolutionSystem",
    "DescriptionError",
    "FinProbSpace",
    "FiniteSemigroup",
    "MeasureError",
    "Partition",
    "PartitionError",
    "ProbMorphism",
    "Report",
    "SuiteContext",
    "SystemConstructionError",
    "SystemDescription",
    "TimeSet",
    "Witness",
    "cmd_export",
    "cmd_sample",
    "cmd_tower",
    "cmd_verify",
    "context_from_description",
    "cyclic_group",
    "detection_table",
    "from_idempotent",
    "from_semigroup_generator",
    "load_context",
    "load_description",
    "parse_description",
    "run_mutations",
    "serialize",
]
