#!/usr/bin/env python3
"""Mean upper IoU of synthetic instances over image scale and CM scale.

    python scripts/upper_iou_sweep.py --kind ribbons --count 50 --seed 7
"""

import argparse
import csv
import sys

from botd import dataio
from botd.evaluate import upper_iou_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=dataio.KINDS, default="ribbons")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--image-scales", default="160,320,640,1280")
    ap.add_argument("--cm-scales", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    args = ap.parse_args(argv)

    data = dataio.synth_dataset(args.seed, args.count, args.kind)
    by_image, by_cm = upper_iou_study(data, [float(v) for v in args.image_scales.split(",")],
                                      [float(v) for v in args.cm_scales.split(",")])
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["axis", "value", "upper_iou"])
    for rep in (by_image, by_cm):
        for x, v in rep.rows():
            out.writerow([rep.axis_name, f"{x:g}", f"{v:.5f}"])


if __name__ == "__main__":
    main()
