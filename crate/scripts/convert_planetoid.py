#!/usr/bin/env python3
"""Convert a Planetoid distribution (ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index})
into a GNNDS1 container readable by `gnnx`.

Split: train = the first len(y) nodes, val = the next 500 (fewer if allx
is shorter), test = the ids in
test.index. Node order follows the usual Planetoid reconstruction: allx rows,
then tx rows moved to their test.index positions. CiteSeer's test.index has
gaps; those ids get all-zero features and no label.

    python3 scripts/convert_planetoid.py --root planetoid/ --name cora --out data/cora.gnnds
"""

import argparse
import pickle
import struct
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MAGIC = b"GNNDS1"
UNLABELED = 0xFFFF
VAL_SIZE = 500

CLASS_NAMES = {
    "cora": ["Theory", "Reinforcement_Learning", "Genetic_Algorithms", "Neural_Networks",
             "Probabilistic_Methods", "Case_Based", "Rule_Learning"],
    "citeseer": ["Agents", "AI", "DB", "IR", "ML", "HCI"],
    "pubmed": ["Diabetes_Experimental", "Diabetes_Type_1", "Diabetes_Type_2"],
}


def _load(root, name, part):
    with open(Path(root) / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def _dense(m):
    return np.asarray(m.todense() if sp.issparse(m) else m, dtype=np.float32)


def load_planetoid(root, name):
    """Returns (features, labels, edges, train, val, test) with labels as
    int arrays (-1 for unlabeled) and edges canonical (u < v), sorted."""
    x, tx, allx = (_dense(_load(root, name, p)) for p in ("x", "tx", "allx"))
    y, ty, ally = (np.asarray(_load(root, name, p)) for p in ("y", "ty", "ally"))
    graph = _load(root, name, "graph")
    test_index = [int(line) for line in (Path(root) / f"ind.{name}.test.index").read_text().split()]
    test_sorted = sorted(test_index)

    span = test_sorted[-1] - test_sorted[0] + 1
    if span != len(test_index):
        # ids missing from test.index become isolated, unlabeled rows
        tx_full = np.zeros((span, tx.shape[1]), dtype=np.float32)
        ty_full = np.zeros((span, ty.shape[1]), dtype=ty.dtype)
        rows = [i - test_sorted[0] for i in test_sorted]
        tx_full[rows] = tx
        ty_full[rows] = ty
        tx, ty = tx_full, ty_full

    features = np.vstack([allx, tx])
    onehot = np.vstack([ally, ty])
    target = np.asarray(test_index)
    source = np.asarray(test_sorted)
    features[target] = features[source].copy()
    onehot[target] = onehot[source].copy()

    n = features.shape[0]
    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))
    train = list(range(len(y)))
    val = list(range(len(y), min(len(y) + VAL_SIZE, len(ally))))
    return features, labels, sorted(edges), train, val, test_sorted


def _mask_bytes(ids, n):
    bits = np.zeros(n, dtype=bool)
    bits[list(ids)] = True
    return np.packbits(bits, bitorder="little").tobytes()


def _string(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode_container(name, features, labels, edges, train, val, test, class_names, feature_names=None):
    """Serializes to the GNNDS1 layout (all integers little-endian)."""
    n, f = features.shape
    lab = np.where(labels < 0, UNLABELED, labels).astype("<u2")
    out = [MAGIC, struct.pack("<IIIIB", n, f, len(class_names), len(edges), 1 if feature_names else 0), _string(name)]
    out.append(features.astype("<f4").tobytes())
    out.append(np.asarray(edges, dtype="<u4").reshape(-1, 2).tobytes())
    out.append(lab.tobytes())
    for ids in (train, val, test):
        out.append(_mask_bytes(ids, n))
    out.extend(_string(c) for c in class_names)
    out.extend(_string(w) for w in feature_names or [])
    return b"".join(out)


def convert(root, name, class_names=None):
    features, labels, edges, train, val, test = load_planetoid(root, name)
    num_classes = int(labels.max()) + 1
    names = class_names or CLASS_NAMES.get(name) or [f"class-{k}" for k in range(num_classes)]
    if len(names) < num_classes:
        raise ValueError(f"{len(names)} class names for {num_classes} classes")
    # split members must carry a label
    labeled = set(np.flatnonzero(labels >= 0).tolist())
    dropped = {k: len([i for i in ids if i not in labeled]) for k, ids in (("train", train), ("val", val), ("test", test))}
    train, val, test = ([i for i in ids if i in labeled] for ids in (train, val, test))
    blob = encode_container(name, features, labels, edges, train, val, test, names[:num_classes])
    stats = {
        "nodes": features.shape[0], "features": features.shape[1], "classes": num_classes, "edges": len(edges),
        "train": len(train), "val": len(val), "test": len(test),
        "unlabeled": int((labels < 0).sum()), "dropped_from_splits": dropped,
    }
    return blob, stats


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", required=True, help="directory holding the ind.<name>.* files")
    p.add_argument("--name", required=True, help="dataset prefix, e.g. cora or citeseer")
    p.add_argument("--out", required=True, help="output .gnnds path")
    p.add_argument("--class-names", help="comma-separated names overriding the built-in order")
    a = p.parse_args(argv)
    names = a.class_names.split(",") if a.class_names else None
    blob, stats = convert(a.root, a.name, names)
    Path(a.out).write_bytes(blob)
    print(stats)
    return 0


if __name__ == "__main__":
    sys.exit(main())
