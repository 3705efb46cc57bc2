#!/usr/bin/env python3
"""Convert a directory of csv-single files into one jsonl-collection file.

Each CSV holds one series (header dim0,dim1,...). The entry id is the file
stem; the label is the stem's prefix before the first '_' or '-'
(so a_0001.csv and a-0002.csv both get label "a").

Usage:
    python scripts/convert_trajectories.py INPUT_DIR OUTPUT.jsonl
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from tscongruence.data import Dataset, DatasetEntry, load_dataset, save_dataset  # noqa: E402

logger = logging.getLogger("convert_trajectories")

_LABEL_SPLIT = re.compile(r"[_-]")


def label_for(stem: str) -> str | None:
    """Prefix before the first '_' or '-', or None if the stem has neither."""
    parts = _LABEL_SPLIT.split(stem, maxsplit=1)
    return parts[0] if len(parts) == 2 and parts[0] else None


def convert(input_dir: Path, output: Path) -> Dataset:
    if not input_dir.is_dir():
        raise FileNotFoundError(f"Input directory not found: {input_dir}")
    dataset = Dataset()
    for path in sorted(input_dir.glob("*.csv")):
        series = load_dataset(path, "csv-single").entries[0].series
        dataset.add(DatasetEntry(path.stem, series, label_for(path.stem)))
    if dataset.dimension is None:
        logger.warning("No .csv files found in %s", input_dir)
    save_dataset(dataset, output, "jsonl-collection")
    return dataset


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input_dir", type=Path)
    parser.add_argument("output", type=Path)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        dataset = convert(args.input_dir, args.output)
    except (ValueError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    print(f"Wrote {len(dataset)} series to {args.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
