"""Reference band-pass transfer functions from scipy.signal.butter."""
import numpy as np
from scipy import signal

BANDS = [
    (22.09, 44.2), (44.19, 88.38), (88.38, 176.77), (176.77, 353.55),
    (353.55, 707.10), (707.10, 1414.21), (1414.21, 2828.0),
    (2828.43, 5656.0), (5656.85, 11313.0),
]

np.set_printoptions(precision=17)
for fs in (24000,):
    for i, (lo, hi) in enumerate(BANDS):
        b, a = signal.butter(2, [lo, hi], btype="bandpass", fs=fs)
        print(f"// fs {fs} band {i + 1}")
        print("b:", ", ".join(repr(float(v)) for v in b))
        print("a:", ", ".join(repr(float(v)) for v in a))
