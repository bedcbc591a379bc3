# Copyright (c) 2025 sepdl developers

"""Shared package constants."""

# Lipschitz constants below this value mean the block gradient is identically
# zero; the block update is skipped.
LIPSCHITZ_FLOOR = 1e-12

DEFAULT_REL_TOL = 1e-6
REL_TOL_FLOOR = 1e-10
REL_TOL_DECAY = 0.5
DEFAULT_MAX_ITERS = 5000

DEFAULT_CERT_TOL = 1e-6
POWER_ITERS = 200
POWER_TOL = 1e-10

DEFAULT_MAX_ROUNDS = 500
STALL_LIMIT = 2

# Shrunk singular values at or below this fraction of the largest one count as zero.
RANK_REL_THRESHOLD = 1e-10

SDT1_MAGIC = b"SDT1"
CSV_FLOAT_FORMAT = ".17g"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_NOT_OPTIMAL = 3
