#!/usr/bin/env python3
"""Convert the 5000-digit MNIST subset bundled with mlxtend into IDX files.

Usage: mnist_subset_to_idx.py <mlxtend wheel or mnist_5k.csv.gz> <out dir>
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def read_rows(src: Path):
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as z:
            raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        raw = src.read_bytes()
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        yield vals[:-1], vals[-1]


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    rows = list(read_rows(src))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for px, _ in rows:
            f.write(bytes(px))
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


if __name__ == "__main__":
    main()
