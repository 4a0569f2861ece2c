#!/usr/bin/env python3
"""Download the benchmark datasets into the data/ directory.

Fetches the standard flat-file archives from the TU graph-benchmark
collection. Run this on a machine with internet access; the library and
test suite only read the unpacked files and never download anything.

Usage:
    python scripts/fetch_tudatasets.py [--root data] [NAME ...]

Default names: MUTAG PTC_MR PROTEINS NCI1 IMDB-BINARY IMDB-MULTI

ZINC note: the 12k molecular-regression subset is not distributed in this
flat-file layout. To run the ZINC smoke test, convert your copy to the
same layout (``ZINC_A.txt``, ``ZINC_graph_indicator.txt``,
``ZINC_node_labels.txt``, ``ZINC_graph_attributes.txt``) plus the split
files ``ZINC_train_indices.txt`` / ``ZINC_val_indices.txt`` /
``ZINC_test_indices.txt`` (one 1-based graph index per line) under
``data/ZINC/``.
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

BASE_URL = "https://www.chrsmrrs.com/graphkerneldatasets"
DEFAULT = ["MUTAG", "PTC_MR", "PROTEINS", "NCI1", "IMDB-BINARY", "IMDB-MULTI"]


def fetch(name: str, root: Path) -> None:
    url = f"{BASE_URL}/{name}.zip"
    print(f"downloading {url} ...")
    with urllib.request.urlopen(url, timeout=120) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        zf.extractall(root)
    target = root / name
    if not (target / f"{name}_A.txt").is_file():
        raise SystemExit(f"{name}: archive did not contain {name}_A.txt")
    print(f"  unpacked into {target}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", default=DEFAULT)
    parser.add_argument("--root", default="data")
    args = parser.parse_args()
    root = Path(args.root)
    root.mkdir(parents=True, exist_ok=True)
    for name in args.names or DEFAULT:
        fetch(name, root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
