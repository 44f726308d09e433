"""Place MovieLens 100K at data/ml-100k/u.data.

Tries the GroupLens archive first. When that host is unreachable (offline
mirrors, sandboxes) it falls back to the copy bundled in the
``pytorch-widedeep`` wheel, fetched with ``pip download`` and converted
from parquet back to the original tab-separated layout. The fallback needs
pandas and pyarrow.

The data is distributed under the GroupLens terms and is not committed.
"""

import argparse
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL = "pytorch-widedeep==1.7.0"
MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "data" / "ml-100k" / "u.data"


def from_grouplens(timeout: float) -> bytes:
    with urllib.request.urlopen(GROUPLENS, timeout=timeout) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data")


def from_wheel() -> bytes:
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-d", tmp, WHEEL],
                       check=True, stdout=subprocess.DEVNULL)
        wheel = next(Path(tmp).glob("*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            frame = pd.read_parquet(io.BytesIO(zf.read(MEMBER)))
    cols = ["user_id", "movie_id", "rating", "timestamp"]
    return frame[cols].to_csv(sep="\t", header=False, index=False).encode()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--timeout", type=float, default=20.0)
    args = ap.parse_args()

    try:
        raw = from_grouplens(args.timeout)
        source = "grouplens"
    except OSError as exc:
        print(f"GroupLens unavailable ({exc}); using the pytorch-widedeep copy", file=sys.stderr)
        raw = from_wheel()
        source = WHEEL

    rows = raw.decode().strip().splitlines()
    if len(rows) != 100000:
        sys.exit(f"unexpected row count {len(rows)} from {source}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(raw)
    print(f"wrote {len(rows)} rows from {source} to {args.out}")


if __name__ == "__main__":
    main()
