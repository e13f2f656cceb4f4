"""Target distributions for the sampler."""
from .base import DensityTarget, Target
from .banana import BananaTarget, banana_target
from .covariance import CovarianceTarget, covariance_target
from .logistic import LogisticTarget, logistic_target
from .msn import SkewNormalMixtureTarget, SkewNormalParams, msn_target
from .all_targets import ALL_TARGETS, TARGET_BY_NAME, make_target
