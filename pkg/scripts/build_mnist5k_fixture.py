"""Build the 5000-image MNIST subset used by the tests and acceptance runs.

The rows come from the ``mnist_5k.csv.gz`` file shipped inside the mlxtend
wheel (500 images per digit, taken from the public MNIST training set). They
are written as gzip-compressed IDX files so they go through the same loader as
the official distribution.

    pip download --no-deps mlxtend==0.24.0 -d /tmp/wheel
    python scripts/build_mnist5k_fixture.py /tmp/wheel/mlxtend-0.24.0-py3-none-any.whl tests/data/mnist5k
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from lassomlp.data import write_idx


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", images)
    write_idx(out / "train-labels-idx1-ubyte.gz", labels)
    print(f"wrote {len(labels)} images to {out}; counts per digit: {np.bincount(labels).tolist()}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
