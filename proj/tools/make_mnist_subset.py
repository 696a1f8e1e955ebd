#!/usr/bin/env python3
"""Build a small MNIST split in IDX format from the 5000-sample CSV bundled
with the mlxtend wheel (one row per image: 784 pixels then the label).

    pip download --no-deps mlxtend -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist-5k

Per class, the first 400 rows go to train and the last 100 to test; each
split is then shuffled with a fixed seed. The output file names match the
official distribution so the real dataset can be dropped in instead.
"""
import gzip
import random
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
        yield bytes(vals[:-1]), vals[-1]


def write_idx(out: Path, stem: str, rows):
    images = out / f"{stem}-images-idx3-ubyte"
    labels = out / f"{stem}-labels-idx1-ubyte"
    with images.open("wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pix, _ in rows:
            f.write(pix)
    with labels.open("wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(lbl for _, lbl in rows))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    by_class = {}
    for pix, lbl in read_rows(src):
        by_class.setdefault(lbl, []).append((pix, lbl))
    train, test = [], []
    for lbl in sorted(by_class):
        rows = by_class[lbl]
        cut = len(rows) * 4 // 5
        train += rows[:cut]
        test += rows[cut:]
    rng = random.Random(20200707)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out, "train", train)
    write_idx(out, "t10k", test)
    print(f"wrote {len(train)} train / {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
