#!/usr/bin/env python3
"""Convert the digit JSON files of the `mnist` npm package into IDX files.

Each src/digits/<k>.json holds {"data": [...]} with 784 floats per image,
pixel/255 rounded to three decimals, so rint(v*255) recovers the bytes.
"""
import argparse
import gzip
import json
import struct
from pathlib import Path

import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path, help="directory with 0.json .. 9.json")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--stem", default="mnist-10k")
    args = ap.parse_args()

    images, labels = [], []
    for k in range(10):
        data = np.asarray(json.loads((args.digits_dir / f"{k}.json").read_text())["data"])
        block = np.rint(data * 255).astype(np.uint8).reshape(-1, 784)
        images.append(block)
        labels.append(np.full(len(block), k, np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    img_path = args.out_dir / f"{args.stem}-images-idx3-ubyte.gz"
    lab_path = args.out_dir / f"{args.stem}-labels-idx1-ubyte.gz"
    with gzip.GzipFile(img_path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        f.write(images.tobytes())
    with gzip.GzipFile(lab_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.tobytes())
    print(f"{len(images)} images -> {img_path}, {lab_path}")


if __name__ == "__main__":
    main()
