"""Branching random walks on Cayley graphs and the networks they trace out."""
from __future__ import annotations

__version__ = "0.1.0"

from .groups import (GroupElement, GroupSpec, GroupSpecError, decode_element, encode_element,
                     identity, inverse, multiply, neighbors, parse_group_spec, srw_step, word_length)
from .trees import (OffspringDist, RootedTree, TreeBudgetError, TreeKind, extract_stretched_binary,
                    mean_offspring, parse_offspring, sample_tree)
from .network import Network
from .stats import (RandomStreamSpec, TestReport, chi_square, derive_stream, growth_rate_fit,
                    mtp_check)
from .brw import (LabelledTree, PositionMap, TraceNetwork, build_trace, classify_recurrence,
                  run_brw, simulate_trace)
from .tracenet import (SpectralEstimate, WalkStats, biased_walk_pn, estimate_ends,
                       estimate_spectral_radius, find_cutpoints, find_line_segments, srw_on_trace,
                       volume_growth)
from .electrical import (EnergyReport, FlowAssignment, SubtreeTN, build_t_n, cutset_infimum,
                         effective_resistance, flow_energy, induce_flow, unit_flow_on_tree)
from .percolation import PercolationSample, crossing_probability, estimate_pc, percolate
from .kernels import BACKEND
