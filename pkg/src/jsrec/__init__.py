"""Joint sparse recovery for multiple measurement vectors with compressive MUSIC."""

from .estimators import MUSIC, SOMP, Canonicalizer, CompressiveMUSIC, SubspaceAugmentedMUSIC
from .mmv import (
    CanonicalProblem, NoisyInstance, SupportSet, canonicalize, generate_instance,
    l0_uniqueness_bound, snr_of, spark_bruteforce, support_distance,
)
from .recovery import (
    PartialSupport, SupportEstimate, cs_music, cs_music_optimized, generalized_music_stats,
    music, noise_subspace, recover, sa_music, somp, subspace_fit_stats, subspace_somp,
    two_thresholding,
)

__version__ = "0.1.0"
