#!/usr/bin/env python3
# Copyright 2026 The missref Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the bundled toy dataset (data/toy) used by the CLI chain tests.

20 abnormal and 20 normal images in VinDr-CXR table layout. Lesions sit in
distinct cells of a 3x3 grid over the 1024x1024 frame, so fused boxes of one
image never touch. Each lesion is marked by one to three readers with small
disagreements. Output is fully determined by SEED.
"""

import csv
import random
from pathlib import Path

SEED = 2026
FRAME = 1024.0
CLASSES = [
    "Aortic enlargement", "Atelectasis", "Calcification", "Cardiomegaly",
    "Consolidation", "ILD", "Infiltration", "Lung Opacity", "Nodule/Mass",
    "Other lesion", "Pleural effusion", "Pleural thickening", "Pneumothorax",
    "Pulmonary fibrosis",
]
READERS = ["R8", "R9", "R10"]
DIMS = [(2048, 2048), (2000, 2500), (2880, 2880), (1760, 2140), (3000, 2400)]


def main() -> None:
    rng = random.Random(SEED)
    out_dir = Path(__file__).resolve().parent.parent / "data" / "toy"
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    dims = []
    cell = FRAME / 3.0
    for i in range(1, 21):
        image_id = f"toy_a{i:02d}"
        w, h = DIMS[i % len(DIMS)]
        dims.append((image_id, w, h))
        n_lesions = [1, 2, 3][i % 3]
        cells = rng.sample(range(9), n_lesions)
        marked_by = set()
        for c in cells:
            cx0, cy0 = (c % 3) * cell, (c // 3) * cell
            size_w = rng.uniform(60, 180)
            size_h = rng.uniform(60, 180)
            x0 = cx0 + rng.uniform(40, cell - 40 - size_w)
            y0 = cy0 + rng.uniform(40, cell - 40 - size_h)
            label = rng.choice(CLASSES)
            readers = rng.sample(READERS, rng.choice([1, 2, 3]))
            for r in sorted(readers):
                marked_by.add(r)
                jx = size_w * 0.05
                jy = size_h * 0.05
                bx0 = x0 + rng.uniform(-jx, jx)
                by0 = y0 + rng.uniform(-jy, jy)
                bx1 = x0 + size_w + rng.uniform(-jx, jx)
                by1 = y0 + size_h + rng.uniform(-jy, jy)
                rows.append([image_id, label,
                             round(bx0 * w / FRAME, 2), round(by0 * h / FRAME, 2),
                             round(bx1 * w / FRAME, 2), round(by1 * h / FRAME, 2), r])
        for r in READERS:
            if r not in marked_by:
                rows.append([image_id, "No finding", "", "", "", "", r])
    for i in range(1, 21):
        image_id = f"toy_n{i:02d}"
        w, h = DIMS[(i + 2) % len(DIMS)]
        dims.append((image_id, w, h))
        for r in READERS:
            rows.append([image_id, "No finding", "", "", "", "", r])

    # One inverted box: must land in the rejects report, not in the data.
    rows.append(["toy_a05", "Nodule/Mass", 900.0, 300.0, 850.0, 420.0, "R9"])

    with open(out_dir / "annotations.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["image_id", "class_name", "x_min", "y_min", "x_max", "y_max", "rad_id"])
        writer.writerows(rows)
    with open(out_dir / "dims.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["image_id", "width", "height"])
        writer.writerows(dims)


if __name__ == "__main__":
    main()
