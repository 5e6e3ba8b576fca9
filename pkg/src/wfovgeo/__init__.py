"""Wide field-of-view multi-view geometry toolkit."""

from .align import ICPResult, Similarity, align_pipeline, icp, solve_optimal_scale, umeyama
from .augment import ViewSample, erp_rotate, pinhole_to_fisheye, softmax_splat
from .camera import (CameraClass, CameraModel, Equirectangular, KannalaBrandt,
                     Pinhole, PointMap, RadialMap, RayField, ScalarMap,
                     UncertaintyMap, camera_class, camera_from_dict,
                     camera_to_dict, kb_theta_distort, kb_theta_inverse,
                     pointmap_from_rays, project, ray_field)
from .errors import InputError, NumericalError
from .losses import (LossWeights, NormalMap, PointLossResult, TotalLossResult,
                     ViewGroundTruth, ViewPrediction, huber, normal_loss,
                     normals_from_pointmap, point_loss, pose_loss, radial_loss,
                     ray_loss, total_loss, uncertainty_loss)
from .metrics import (accuracy_completion, ate, auc_at, depth_metrics,
                      normal_consistency, pairwise_pose_errors, rpe, rra_rta)
from .pose import Pose, relative_pose, rotation_geodesic
from .sampler import (distance_matrix_from_positions, probability_matrix,
                      sample_views)
from .sh import (CoeffBank, SHBasis, SHCoeffs, angles_from_dir, angular_error,
                 dir_from_angles, fit_coeffs, grid_angles, reconstruct_rays,
                 sh_eval)
from .synth import BoxScene, RenderedView, make_trajectory, render_view

__version__ = "0.1.0"
