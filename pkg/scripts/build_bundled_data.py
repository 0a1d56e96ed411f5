"""Rebuild src/clam/data/{zoo,ecoli}.csv from pip-installable sources.

The UCI repository is not always reachable, so the bundled copies were
rebuilt from two packages on PyPI:

* Zoo: ``Orange/datasets/zoo.tab`` inside the Orange3 wheel.  The animal
  name column is dropped; ``legs`` stays numeric; ``type`` is the label.
* Ecoli: the KEEL one-vs-rest splits shipped by ``imbalanced_databases``
  (0.1.1).  Each split holds all 336 points with a binary label, which is
  enough to recover the 8 original classes:

  - ecoli1/2/3/4 positives are im / pp / imU / om;
  - ecoli-0_vs_1 positives not yet labelled are cp;
  - the remaining 9 points (omL, imL, imS) are told apart by the splits
    ecoli-0-2-6-7_vs_3-5, ecoli-0-1_vs_2-3-5 and ecoli-0-1-3-7_vs_2-6.
    Those three files print features without the leading "0." (0.40 is
    written as 4.0), so the leftover points are matched on that mangled
    form.

Usage::

    pip download --no-deps Orange3 imbalanced_databases==0.1.1 -d wheels
    python scripts/build_bundled_data.py wheels
"""
from __future__ import annotations

import csv
import io
import sys
import zipfile
from collections import Counter
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "clam" / "data"
ECOLI_ORDER = ["cp", "im", "pp", "imU", "om", "omL", "imL", "imS"]
ECOLI_COLUMNS = ["mcg", "gvh", "lip", "chg", "aac", "alm1", "alm2"]


def _member(wheel_dir: Path, prefix: str, suffix: str):
    for wheel in sorted(p for p in wheel_dir.iterdir() if p.name.lower().startswith(prefix.lower())):
        with zipfile.ZipFile(wheel) as zf:
            for name in zf.namelist():
                if name.endswith(suffix):
                    return zf.read(name).decode("utf-8")
    raise FileNotFoundError(f"no {suffix} in {prefix}* under {wheel_dir}")


def build_zoo(wheel_dir: Path) -> None:
    text = _member(wheel_dir, "Orange3", "datasets/zoo.tab")
    lines = text.splitlines()
    header = lines[0].split("\t")
    body = [line.split("\t") for line in lines[3:] if line.strip()]  # skip type/flag rows
    keep = [i for i, h in enumerate(header) if h != "name"]
    with open(OUT / "zoo.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([header[i] for i in keep])
        for row in body:
            writer.writerow([row[i] for i in keep])


def _keel(text: str, clean=True):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        parts = [p.strip() for p in line.split(",")]
        vals = tuple(round(float(p), 2) if clean else float(p) for p in parts[:-1])
        rows.append((vals, parts[-1]))
    return rows


def _positives(rows):
    return [f for f, c in rows if c == "positive"]


def _mangle(v):
    s = "%.2f" % v
    if s.startswith("1."):
        return None
    s = s[2:].rstrip("0") or "0"
    return float(s.lstrip("0") or "0")


def _matches(f, mangled):
    key = tuple(_mangle(v) for v in f)
    return any(all(a is None or a == b for a, b in zip(key, m)) for m in mangled)


def build_ecoli(wheel_dir: Path) -> None:
    def split(name, clean=True):
        return _keel(_member(wheel_dir, "imbalanced_databases", f"/{name}.dat"), clean)

    everything = [f for f, _ in split("ecoli1")]
    assert len(set(everything)) == 336
    label = {}
    for cls, name in [("im", "ecoli1"), ("pp", "ecoli2"), ("imU", "ecoli3"), ("om", "ecoli4")]:
        for f in _positives(split(name)):
            label[f] = cls
    for f in _positives(split("ecoli-0_vs_1")):
        label.setdefault(f, "cp")
    p35 = _positives(split("ecoli-0-2-6-7_vs_3-5", clean=False))
    p235 = _positives(split("ecoli-0-1_vs_2-3-5", clean=False))
    p26 = _positives(split("ecoli-0-1-3-7_vs_2-6", clean=False))
    for f in everything:
        if f in label:
            continue
        s35, s235, s26 = _matches(f, p35), _matches(f, p235), _matches(f, p26)
        if s35 and s235 and not s26:
            label[f] = "imS"
        elif s235 and s26 and not s35:
            label[f] = "imL"
        elif s26 and not (s35 or s235):
            label[f] = "omL"
    counts = Counter(label.values())
    assert counts == Counter(cp=143, im=77, pp=52, imU=35, om=20, omL=5, imL=2, imS=2), counts
    rows = sorted(everything, key=lambda f: ECOLI_ORDER.index(label[f]))
    with open(OUT / "ecoli.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ECOLI_COLUMNS + ["class"])
        for f in rows:
            writer.writerow(["%.2f" % x for x in f] + [label[f]])


if __name__ == "__main__":
    wheels = Path(sys.argv[1] if len(sys.argv) > 1 else "wheels")
    build_zoo(wheels)
    build_ecoli(wheels)
    print("wrote", OUT / "zoo.csv", "and", OUT / "ecoli.csv")
