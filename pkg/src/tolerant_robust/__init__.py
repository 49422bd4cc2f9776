"""Tolerant adversarially robust learning over metric perturbation balls."""

from .compression import (CompressionOutput, FiniteApproximation, InflatedDistribution,
                          bbm_weights, boost_by_majority, boosting_rounds,
                          build_finite_approximation, compress, compression_sample_bound,
                          decompress, epsnet_check, generalization_bound, sample_inflated,
                          theoretical_approximation_size, verify_tolerant_compression, weak_learn)
from .errors import *  # noqa: F401,F403
from .hypotheses import (AxisRectangle, AxisRectangles, Constant, FiniteTable, Interval,
                         Intervals, LabeledSample, MajorityVote, Perturbation, TableHypothesis,
                         Threshold, Thresholds, erm_realizable, parse_family, parse_hypothesis,
                         predict, robust_erm, vc_dimension)
from .metric import (Ball, Boundary, DoublingParameters, EuclideanSpace, FiniteSpace, distance,
                     doubling_ratio_bound, measure_ball, sample_ball, verify_doubling_euclidean)
from .robust_loss import (DiscreteMixture, Exact, Grid, MonteCarlo, UniformOnBalls,
                          adversarial_point_loss, binary_loss, empirical_adversarial_loss,
                          expected_adversarial_loss)
from .rng import substream
from .tpas import (ErrorMassQuantities, SmoothedClassifier, TpasConfig, lambda_threshold,
                   error_mass_quantities, smoothed_predict, tpas_sample_bound, tpas_train)

__version__ = "0.1.0"
