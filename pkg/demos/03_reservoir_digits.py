"""End-to-end digit classification through the quantum reservoir.

The published task uses the MNIST digits {0, 3, 8} cropped to 18x12.
If QUMEM_DATA_DIR points at the standard IDX files this script runs the
real thing (1000 train / 1000 test).  Otherwise it falls back to the
small UCI handwritten-digit set (8x8, upscaled into the same pipeline)
purely to exercise the machinery; that stand-in is far coarser than
MNIST, so its absolute accuracies say nothing about the published
numbers.

Compares the three operating points: quantum encoding with feedback,
coherent-mixture encoding, and feedback off (memoryless reservoir).
"""

import os

import numpy as np

from qumem.readout import (
    ReadoutModel,
    image_features,
    load_mnist,
    standardize,
    to_readout_features,
    train,
)
from qumem.reservoir import Reservoir, ReservoirConfig


def mnist_images():
    data_dir = os.environ.get("QUMEM_DATA_DIR")
    if not data_dir:
        return None
    try:
        subset = load_mnist(data_dir, (0, 3, 8), 1000, 1000, seed=0)
    except Exception as exc:
        print(f"could not load MNIST ({exc}); falling back")
        return None
    print("using MNIST from", data_dir)
    return (subset.train_images, subset.train_labels,
            subset.test_images, subset.test_labels)


def fallback_images():
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        print("neither MNIST nor scikit-learn available; nothing to run")
        raise SystemExit(0)
    data = load_digits()
    keep = np.isin(data.target, (0, 3, 8))
    images8 = data.images[keep] / 16.0
    labels = np.array([(0, 3, 8).index(t) for t in data.target[keep]])
    rows = np.clip((np.arange(18) * 8) // 18, 0, 7)
    cols = np.clip((np.arange(12) * 8) // 12, 0, 7)
    images = images8[:, rows][:, :, cols]
    order = np.random.default_rng(0).permutation(len(images))
    tr, te = order[:350], order[350:]
    print("using the UCI 8x8 stand-in (coarse; demo only)")
    return images[tr], labels[tr], images[te], labels[te]


def run_variant(data, encoding, feedback):
    train_x, train_y, test_x, test_y = data
    reservoir = Reservoir(ReservoirConfig(mesh_seed=2021, window=12,
                                          feedback=feedback, sample_seed=0))
    f_train, f_test = standardize(
        to_readout_features(image_features(reservoir, train_x, encoding)),
        to_readout_features(image_features(reservoir, test_x, encoding)),
    )
    model = ReadoutModel.initialize(reservoir.basis.size, 10, 3, seed=0)
    result = train(model, (f_train, train_y), epochs=15, lr=0.05, seed=0,
                   test_data=(f_test, test_y))
    return result


def main():
    data = mnist_images() or fallback_images()
    print(f"{len(data[0])} training / {len(data[2])} test images\n")
    for encoding, feedback, label in (
        ("quantum", True, "quantum encoding, feedback on "),
        ("coherent", True, "coherent encoding, feedback on"),
        ("quantum", False, "quantum encoding, feedback off"),
    ):
        result = run_variant(data, encoding, feedback)
        print(f"{label}: train {result.train_accuracy:.3f} "
              f"test {result.test_accuracy:.3f} "
              f"({result.model.n_parameters} parameters)")


if __name__ == "__main__":
    main()
