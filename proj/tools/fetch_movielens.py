#!/usr/bin/env python3
# Copyright 2026 The SharedMF Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes MovieLens ml-100k ratings in the original u.data layout.

Tries the GroupLens archive first, then the copy bundled inside the
pytorch-widedeep wheel (fetched with pip, not installed).
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL_MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"


def from_grouplens():
    with urllib.request.urlopen(GROUPLENS, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data")


def from_wheel():
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--timeout",
             "120", "-d", tmp, "pytorch-widedeep==1.7.0"],
            check=True, stdout=subprocess.DEVNULL)
        wheel = next(pathlib.Path(tmp).glob("*.whl"))
        raw = zipfile.ZipFile(wheel).read(WHEEL_MEMBER)
    df = pd.read_parquet(io.BytesIO(raw))
    df = df[["user_id", "movie_id", "rating", "timestamp"]]
    return df.to_csv(sep="\t", header=False, index=False).encode()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/ml-100k/u.data")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    if out.exists():
        print(f"{out} already present")
        return 0
    try:
        data = from_grouplens()
    except Exception as exc:  # noqa: BLE001
        print(f"GroupLens download failed ({exc}); using wheel copy")
        data = from_wheel()
    lines = data.count(b"\n")
    if lines != 100000:
        print(f"unexpected line count {lines}", file=sys.stderr)
        return 1
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    print(f"wrote {out} ({lines} ratings)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
