"""Reference fit for the Swedish motorcycle claims data (4 states, E+ of size 2)."""

import numpy as np

from .dataio import ModelDocument
from .jointmodel import JointModel

ALPHA = [0.94, 0.06, 0.0, 0.0]

# Rates rounded to three significant digits. The last diagonal entry is set by
# row balance (state 4 has no direct exit); with -3.53e-4 the model's sojourn
# profile is far from the reported one.
T_MAT = [
    [-1.21e-4, 1.66e-6, 0.0, 3.63e-5],
    [0.0, -5.5e-4, 0.0, 0.0],
    [8.5e-7, 4.03e-7, -3.53e-5, 0.0],
    [0.0, 2.21e-6, 3.31e-5, -(2.21e-6 + 3.31e-5)],
]

SOJOURN = (7817.415, 172.4597, 7633.909, 8143.15)
VISITS = (0.95, 0.10, 0.27, 0.29)
MIXED_MOMENT = 25396.084


def reference_model():
    return JointModel.from_arrays(np.array(ALPHA), np.array(T_MAT), 2)


def reference_document(shift=None):
    return ModelDocument.from_model(
        reference_model(), shift=shift, metadata={"source": "swmotorcycle reference fit"}
    )
