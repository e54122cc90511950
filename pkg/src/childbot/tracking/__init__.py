"""Colour detection plus depth particle filtering of bricks, and connection checks."""
from .camera import CameraModel, NoValidDepth, box_hits, lift_to_3d, look_at, render_depth
from .detect import ColorModel, DetectionResult, EmptyModel, backproject, detect_color
from .geometry import (ANGLE_TOL, POS_TOL, ObjectModel, Pose6DoF, Socket, boxes_intersect, brick,
                       check_connection, quat_angle, socket_world)
from .pf import (COLLISION_FACTOR, N_PARTICLES, DegenerateWeights, ParticleSet, PFParams, StepInfo,
                 collision_mask, explained_by, input_vector, log_likelihood, pf_step, pixel_residuals,
                 systematic_resample)
from .session import (EmptyEvaluation, Frame, Scene, TrackingSession, assembly_scene,
                      connection_records, desk_camera, eval_identification, load_scene,
                      occlusion_scene, read_frame, run_scene, save_scene, visible_point,
                      write_frames)

__all__ = [n for n in dir() if not n.startswith("_")]
