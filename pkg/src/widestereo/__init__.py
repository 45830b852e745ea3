"""Wide-FOV stereo dataset toolkit.

Double-sphere fisheye camera model, projection warps (equirectangular,
Cassini, cubemap, pinhole), virtual stereo rig construction, the
epipolar-row disparity/depth relation on spherical grids, deterministic
point-cloud rendering with multi-scan hole filling, evaluation metrics,
and the dataset file formats (PFM, 16-bit depth PNG, binary PLY, JSON
manifests). The ``widestereo`` console script exposes the batch tools.
"""

from .camera_models import (
    DoubleSphereIntrinsics,
    PinholeIntrinsics,
    ds_project,
    ds_unproject,
    intrinsics_from_dict,
    pinhole_project,
    pinhole_unproject,
)
from .cloud_render import (
    PointCloud,
    PolygonMask,
    RenderResult,
    RenderSettings,
    StereoSample,
    mask_regions,
    render,
    render_with_hole_fill,
    synthesize_stereo_sample,
)
from .errors import (
    ConfigError,
    DataError,
    DataFormatError,
    GeometryDomainError,
    WideStereoError,
)
from .geometry import (
    RigidTransform,
    is_rotation,
    normalize,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
)
from .metrics import (
    DELTA_THRESHOLDS,
    EntropyStats,
    EvalReport,
    MetricValue,
    depth_histogram,
    depth_metrics,
    disparity_metrics,
    local_entropy_stats,
    rel_epe,
)
from .projections import (
    CUBE_FACE_ORDER,
    PROJECTION_KINDS,
    CropRotateRecord,
    ProjectionSpec,
    RayGrid,
    crop_and_rotate_for_stereo,
    cubemap_assemble,
    cubemap_split,
    make_ray_grid,
    project_to_pixels,
    sample_image,
    undo_crop_and_rotate,
    warp,
)
from .spherical_stereo import (
    EPS_DISP,
    DepthMap,
    DisparityMap,
    depth_between_frames,
    depth_from_disparity,
    depth_to_disparity,
    disparity_from_depth,
    disparity_to_depth,
    row_latitudes,
    transfer_ranges,
)
from .virtual_rig import (
    ORIENTATION_KINDS,
    BenchmarkGrid,
    RigDescriptor,
    StereoRig,
    VirtualIntrinsicsPolicy,
    build_rig,
    enumerate_benchmark,
    virtual_intrinsics,
)
from . import dataset_io

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "dataset_io",
    # errors
    "WideStereoError",
    "ConfigError",
    "DataError",
    "DataFormatError",
    "GeometryDomainError",
    # geometry
    "RigidTransform",
    "is_rotation",
    "normalize",
    "rotation_about_x",
    "rotation_about_y",
    "rotation_about_z",
    # camera models
    "DoubleSphereIntrinsics",
    "PinholeIntrinsics",
    "intrinsics_from_dict",
    "ds_project",
    "ds_unproject",
    "pinhole_project",
    "pinhole_unproject",
    # projections
    "PROJECTION_KINDS",
    "CUBE_FACE_ORDER",
    "ProjectionSpec",
    "RayGrid",
    "make_ray_grid",
    "project_to_pixels",
    "sample_image",
    "warp",
    "CropRotateRecord",
    "crop_and_rotate_for_stereo",
    "undo_crop_and_rotate",
    "cubemap_assemble",
    "cubemap_split",
    # virtual rig
    "ORIENTATION_KINDS",
    "VirtualIntrinsicsPolicy",
    "virtual_intrinsics",
    "StereoRig",
    "build_rig",
    "BenchmarkGrid",
    "RigDescriptor",
    "enumerate_benchmark",
    # spherical stereo
    "EPS_DISP",
    "row_latitudes",
    "DepthMap",
    "DisparityMap",
    "disparity_to_depth",
    "depth_to_disparity",
    "depth_from_disparity",
    "disparity_from_depth",
    "transfer_ranges",
    "depth_between_frames",
    # rendering
    "PointCloud",
    "RenderSettings",
    "RenderResult",
    "render",
    "render_with_hole_fill",
    "StereoSample",
    "synthesize_stereo_sample",
    "PolygonMask",
    "mask_regions",
    # metrics
    "MetricValue",
    "EvalReport",
    "disparity_metrics",
    "depth_metrics",
    "rel_epe",
    "EntropyStats",
    "local_entropy_stats",
    "depth_histogram",
    "DELTA_THRESHOLDS",
]
