"""Sparse-to-dense depth completion with a piecewise-planar CRF.

Dense depth and 3D point clouds from very sparse depth samples plus a color
image: SLIC superpixels carry one 3D plane each, optimized by particle
belief propagation with a TRW-S inner solver.  The constrained "cardboard
world" mode additionally segments drivable free space.
"""

from .config import PipelineConfig
from .data import DenseDepth, FrameBundle, SparseDepth, crop_lower_half, sparsify
from .energy import EnergyParams, total_energy
from .geometry import (
    CameraIntrinsics,
    PixelDepth,
    Plane,
    Point3,
    backproject,
    fit_plane_lsq,
    plane_depth_at,
    point_plane_distance,
    ransac_plane,
)
from .inference import (
    Labeling,
    ParticleSet,
    SolverConfig,
    free_space_mask,
    pcbp_run,
    render_depth,
    sample_particles_cardboard,
    sample_particles_planar,
)
from .initialization import init_cardboard, init_planes, pls_interpolate
from .metrics import EvalReport, evaluate
from .mrf import HAVE_EXTENSION, TrwsResult, trws_solve
from .pipeline import CompletionResult, complete_frame
from .segmentation import SuperpixelGraph, build_adjacency, slic_segment
from .synthetic import SceneObject, SyntheticScene, demo_scene, generate_synthetic

__version__ = "0.1.0"
