"""Project probabilistic reference models onto interpretable trees and linear proxies."""

from .data import Dataset, SplitSpec, load_bundled, load_csv, split, synth_smooth_1d
from .projection import NeighborhoodSpec, explain_global, explain_local, fit_linear_proxy_per_draw
from .reference import EnsembleConfig, GpConfig, fit_ensemble, fit_gp, fit_reference
from .tree import GrowConfig, FitTargets, ProxyTree, grow, predict, prune_path, select_alpha, fit_size_constrained

__version__ = "0.1.0"
