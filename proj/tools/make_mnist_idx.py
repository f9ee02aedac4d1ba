#!/usr/bin/env python3
"""Rebuild data/mnist10k-*-ubyte.gz from the `mnist` npm package.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist_idx.py package/src/digits data
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main(src, dst):
    images, labels = bytearray(), bytearray()
    count = 0
    for digit in range(10):
        raw = json.loads((Path(src) / f"{digit}.json").read_text())["data"]
        if len(raw) % 784:
            raise SystemExit(f"{digit}.json: length {len(raw)} is not a multiple of 784")
        images += bytes(min(255, max(0, round(v * 255))) for v in raw)
        n = len(raw) // 784
        labels += bytes([digit]) * n
        count += n
    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, count, 28, 28) + images)
    with gzip.GzipFile(dst / "mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, count) + labels)
    print(f"wrote {count} images")


if __name__ == "__main__":
    main(*sys.argv[1:3])
