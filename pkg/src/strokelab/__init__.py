"""Table-tennis ball trajectory analytics toolkit.

Segments 2D ball trajectories into strokes, classifies stroke outcomes
(valid / serve / missed-net / missed-out) and stroke types (6 classes),
evaluates tracker outputs against ground truth, and generates labeled
synthetic trajectories for training and verification.
"""

from .errors import DomainError, FormatError, StrokeLabError
from .geometry import Homography, apply_homography, fit_homography, pitch_table_position
from .knn import KnnModel, knn_classify, train_knn
from .nn import (Conv1dSpec, DenseSpec, EvalReport, ModelDescriptor, TrainConfig,
                 count_params, default_fcnn_architecture, default_tcn_architecture,
                 evaluate_model, nn_forward, nn_train)
from .pipeline import (DatasetSplit, StrokeLabel, StrokeSample, flatten,
                       prepare_sample, split_dataset)
from .segmenter import (ExtremumEvent, ExtremumKind, PitchEvent, SegmenterConfig,
                        StrokeDirection, StrokeOutcome, StrokeSegment,
                        annotate_strokes, classify_outcome, detect_pitches,
                        find_windowed_extrema, segment_strokes)
from .synth import (CameraModel, PhysicsParams, RallyAnnotation, StrokeTemplate,
                    build_rally, degrade, labeled_stroke_samples, simulate_rally,
                    simulate_stroke)
from .tracker_eval import (ConfusionCounts, FramePair, Metrics, compute_metrics,
                           frame_outcome)
from .trajectory import BallObservation, Trajectory, drop_missing, load_trajectory

__version__ = "0.1.0"
