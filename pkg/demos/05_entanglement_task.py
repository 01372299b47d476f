"""The entanglement-detection task, with its structural limit laid bare.

Feeds repeated copies of Haar-random entangled vs product states through
the reservoir and trains the linear readout on the final measured
distributions.  Also demonstrates *why* accuracy saturates far below a
useful detector here: both ensembles share the same mean density matrix
(I/d on the embedded subspace), so every linear functional of the
measured distribution has identical class means, and only the memristor
feedback (a quadratic, Haar-suppressed effect) separates them at all.

Scale is reduced relative to the 1000/1000 reference run so the demo
finishes in about a minute; pass --full for the reference scale.
"""

import sys

import numpy as np

from qumem.readout import (
    ReadoutModel,
    build_entanglement_dataset,
    standardize,
    state_features,
    to_readout_features,
    train,
)
from qumem.reservoir import Reservoir, ReservoirConfig


def main(full=False):
    n_per_class = 500 if full else 100
    copies = 100 if full else 30
    reservoir = Reservoir(ReservoirConfig(mesh_seed=2021, window=copies,
                                          sample_seed=0))
    train_states, train_y = build_entanglement_dataset(
        n_per_class, d_loc=12, seed=0, basis=reservoir.basis)
    test_states, test_y = build_entanglement_dataset(
        n_per_class, d_loc=12, seed=1, basis=reservoir.basis)
    print(f"{2 * n_per_class} training / {2 * n_per_class} test states, "
          f"{copies} copies each")

    x_train = state_features(reservoir, train_states, copies=copies)
    x_test = state_features(reservoir, test_states, copies=copies)

    mu_gap = np.linalg.norm(
        x_train[train_y == 1].mean(0) - x_train[train_y == 0].mean(0))
    noise = np.linalg.norm(x_train.std(0)) / np.sqrt(n_per_class)
    print(f"class-mean gap {mu_gap:.3e} vs sampling noise {noise:.3e} "
          "(the ensembles coincide to first order)")

    f_train, f_test = standardize(to_readout_features(x_train),
                                  to_readout_features(x_test))
    model = ReadoutModel.initialize(reservoir.basis.size, 10, 2, seed=0)
    result = train(model, (f_train, train_y), epochs=15, lr=0.05, seed=0,
                   test_data=(f_test, test_y))
    print(f"linear readout: train {result.train_accuracy:.3f} "
          f"test {result.test_accuracy:.3f}")
    print("(the linear-readout ceiling under this construction is far "
          "below a useful detector; see README, Known model notes)")


if __name__ == "__main__":
    main(full="--full" in sys.argv[1:])
