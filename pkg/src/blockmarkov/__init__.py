"""Block-diagonal Markov models of bursty binary error channels."""

from .equivalence import (ConditionReport, TransformW, check_conditions,
                          construct_equivalent, verify_equivalence)
from .errors import *  # noqa: F401,F403
from .inference import (Counters, EStepResult, FitReport, ForwardBackwardState,
                        backward, conventional_baum_welch_step,
                        conventional_forward_backward, estep, fit, forward,
                        log_likelihood, mstep)
from .markov import (BINARY, BLOCK_DIAGONAL, GENERAL, PartitionedModel,
                     StatePartition, SymbolAlphabet, emission_matrix,
                     simulate, stationary_distribution, validate_model)
from .rle import (EfrdTable, RunLengthSequence, decode, efrd, encode,
                  error_probability)

__version__ = "0.1.0"
