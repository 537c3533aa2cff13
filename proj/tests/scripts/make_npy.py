"""Writes a 1 MiB float32 tensor with numpy for the byte-exact round-trip test."""
import sys

import numpy as np

out = sys.argv[1]
rng = np.random.default_rng(20240611)
np.save(out, rng.standard_normal((64, 64, 64)).astype("<f4"))
