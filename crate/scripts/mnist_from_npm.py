#!/usr/bin/env python3
"""Rebuild IDX-format MNIST files from the `mnist` npm package (v1.1.0).

The package ships 10,000 MNIST digits as JSON arrays of byte/255 values
rounded to three decimals; rounding back to bytes is lossless because
adjacent byte levels are 1/255 apart.

usage: npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
       python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    images = bytearray()
    labels = bytearray()
    for digit in range(10):
        values = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(values) % 784 == 0
        for v in values:
            b = round(v * 255)
            assert 0 <= b <= 255 and abs(b / 255 - v) < 6e-4, v
            images.append(b)
        labels.extend([digit] * (len(values) // 784))
    n = len(labels)
    dst.mkdir(parents=True, exist_ok=True)
    # mtime=0 keeps the archives byte-stable
    with gzip.GzipFile(dst / "t10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28) + bytes(images))
    with gzip.GzipFile(dst / "t10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n) + bytes(labels))
    print(f"wrote {n} samples to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
