"""Point-cloud to bird's-eye-view toolkit for KITTI-style 3D detection pipelines."""

__version__ = "0.1.0"

from .bev import BevGrid, BirdNetEncoder, ChannelSelector, GridConfig, MV3DEncoder, encode_birdnet, encode_mv3d, select_channels
from .boxes import BevBox, Box3D, ClassHeightPrior, iou_2d, iou_3d, iou_bev, lift_to_3d
from .evaluation import EvalSpec, evaluate, evaluate_table
from .front_view import FrontViewConfig, FrontViewEncoder, encode_front_view
from .fusion import FusionSpec, fuse_detections, join
from .ground_plane import GroundPlaneRANSAC, Plane, fit_ground_plane
from .kitti_io import Calibration, DetectionRecord, GroundTruthObject
from .pointcloud import FovCrop, RangeClip, clip_range, crop_to_fov

__all__ = [
    "BevBox", "BevGrid", "BirdNetEncoder", "Box3D", "Calibration", "ChannelSelector",
    "ClassHeightPrior", "DetectionRecord", "EvalSpec", "FovCrop", "FrontViewConfig",
    "FrontViewEncoder", "FusionSpec", "GridConfig", "GroundPlaneRANSAC", "GroundTruthObject",
    "MV3DEncoder", "Plane", "RangeClip", "clip_range", "crop_to_fov", "encode_birdnet",
    "encode_front_view", "encode_mv3d", "evaluate", "evaluate_table", "fit_ground_plane",
    "fuse_detections", "iou_2d", "iou_3d", "iou_bev", "join", "lift_to_3d", "select_channels",
]
