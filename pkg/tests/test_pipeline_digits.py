"""End-to-end digit pipeline on real handwritten data.

Uses the small UCI 8x8 digit set (via scikit-learn, skipped when
absent) upscaled into the 18x12 column pipeline.  The stand-in is far
coarser than the reference digit corpus, so no absolute accuracy band
is asserted here; what must hold is the reservoir's memory effect:
with feedback the readout sees the column history through the adapted
reflectivities and beats the memoryless configuration, which collapses
toward chance because only the final column reaches it.
"""

import numpy as np
import pytest

sklearn_datasets = pytest.importorskip("sklearn.datasets")

from qumem.readout import (
    ReadoutModel,
    image_features,
    standardize,
    to_readout_features,
    train,
)
from qumem.reservoir import Reservoir, ReservoirConfig


@pytest.fixture(scope="module")
def digit_arrays():
    data = sklearn_datasets.load_digits()
    keep = np.isin(data.target, (0, 3, 8))
    images8 = data.images[keep] / 16.0
    labels = np.array([(0, 3, 8).index(t) for t in data.target[keep]])
    rows = np.clip((np.arange(18) * 8) // 18, 0, 7)
    cols = np.clip((np.arange(12) * 8) // 12, 0, 7)
    images = images8[:, rows][:, :, cols]
    order = np.random.default_rng(0).permutation(len(images))
    return images, labels, order[:350], order[350:]


def pipeline_accuracy(digit_arrays, feedback):
    images, labels, tr, te = digit_arrays
    reservoir = Reservoir(ReservoirConfig(mesh_seed=2021, window=12,
                                          feedback=feedback, sample_seed=0))
    f_train, f_test = standardize(
        to_readout_features(image_features(reservoir, images[tr], "quantum")),
        to_readout_features(image_features(reservoir, images[te], "quantum")),
    )
    model = ReadoutModel.initialize(reservoir.basis.size, 10, 3, seed=0)
    result = train(model, (f_train, labels[tr]), epochs=15, lr=0.05, seed=0,
                   test_data=(f_test, labels[te]))
    return result.test_accuracy


def test_feedback_memory_beats_memoryless_readout(digit_arrays):
    with_memory = pipeline_accuracy(digit_arrays, feedback=True)
    memoryless = pipeline_accuracy(digit_arrays, feedback=False)
    # memoryless classification hangs on the final column alone
    assert memoryless <= 0.45
    assert with_memory >= memoryless + 0.10
