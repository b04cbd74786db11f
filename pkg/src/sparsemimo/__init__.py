"""MIMO-FMCW radar simulation and sparse-array range/angle detection."""

from .radar import (ArrayGeometry, IfDataCube, RadarParams, Target, TargetScene,
                    noise_sigma_from_snr, random_sparse_geometry, synthesize_cube,
                    total_delay)
from .rangedet import (RangeDetectionSet, SpectrumPlane, bin_to_range,
                       binary_integrate, detect_peaks, dft_all,
                       focus_kernel_magnitude)
from .angledet import (AngleEstimateSet, AngleGrid, BinMeasurement,
                       SteeringDictionary, build_dictionary,
                       extract_bin_measurements, omp, somp, steering_vector,
                       threshold_support)
from .classical import (FullArrayGeometry, classical_angle_detect,
                        classical_range_detect, full_array_geometry)
from .harness import (DetectionSettings, GeometrySpec, MetricsRow, SceneSpec,
                      TrialConfig, TrialOutcome, calibrate_threshold, match_hits,
                      monte_carlo, random_scene, run_trial)

__version__ = "0.1.0"
