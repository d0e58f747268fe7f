#!/usr/bin/env python3
"""Build an IDX image/label pair from the 10,000-digit MNIST sample shipped in
the `mnist` npm package (https://www.npmjs.com/package/mnist).

The package stores each digit as 784 floats already divided by 255 and rounded
to three decimals; rounding v * 255 recovers the original bytes exactly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset
"""
import argparse
import json
import pathlib
import struct

import numpy as np


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("digits_dir", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    args = parser.parse_args()

    images, labels = [], []
    for digit in range(10):
        raw = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        pixels = np.rint(np.asarray(raw, dtype=np.float64) * 255.0)
        if pixels.size % 784 or pixels.min() < 0 or pixels.max() > 255:
            raise SystemExit(f"unexpected pixel data in {digit}.json")
        pixels = pixels.astype(np.uint8).reshape(-1, 784)
        images.append(pixels)
        labels.append(np.full(len(pixels), digit, dtype=np.uint8))

    images = np.concatenate(images)
    labels = np.concatenate(labels)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(args.out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.tobytes())
    print(f"wrote {len(images)} images to {args.out_dir}")


if __name__ == "__main__":
    main()
