"""Shared constants for mesh-spectra."""

TOOL_VERSION = "0.1.0"

# Small number guarding the frequency loss and MSNR denominators.
SPECTRAL_EPSILON = 1.0e-8

MSNR_CAP = 8.0
MSNR_FLOOR = -8.0

# log10(amplitude + floor) keeps exact zeros finite in spectrum profiles.
PROFILE_LOG_FLOOR = 1.0e-12

DENSE_CEILING = 4096
MAX_ICOSPHERE_LEVEL = 5

# Octave bands of the 12337-vertex level-3 mesh.
CANONICAL_BASIS_SIZE = 12337
CANONICAL_BAND_STARTS = (60, 120, 240, 480, 960, 1920, 3840, 7680)

DEFAULT_NOISE_MAX_AMPLITUDE = 0.6
DEFAULT_NOISE_AMPLITUDE_COUNT = 10
DEFAULT_NOISE_TRIALS = 20

# Total loss weights used for the three mesh levels.
DEFAULT_LAMBDA_J = 1.0
DEFAULT_LAMBDA_V = (1.0, 1.0, 1.0)
DEFAULT_LAMBDA_F = (60.0, 60.0, 100.0)
LOSS_LEVELS = 3

BASIS_CACHE_SCHEMA_VERSION = 1
HAND_MODEL_SCHEMA_VERSION = 1
