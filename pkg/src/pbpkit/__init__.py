"""Permutation-block-permutation (PBP) kernels for pruned fully-connected layers."""
from . import blocksparse, graphopt, pbp, perm, prune, simgpu
from .blocksparse import Block, BlockPattern, Layout, PackedBlocks, pack, unpack
from .errors import (DimensionError, FormatError, NoEliminableOutput, PatternError,
                     PbpError, PermutationError, StrayNonzero)
from .pbp import PbpMatrix, fill_in, from_masked, matvec, to_dense
from .perm import Permutation

__version__ = "0.1.0"
