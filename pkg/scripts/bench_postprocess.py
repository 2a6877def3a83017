#!/usr/bin/env python3
"""Time each decode stage on synthetic 640x640 label maps.

Wall-clock numbers depend on the machine; nothing here is a target.

    python scripts/bench_postprocess.py --count 50 --instances 10 --repetitions 3
"""

import argparse
import json

from botd import dataio
from botd.evaluate import bench_decode, frames_per_second
from botd.labelgen import label_image, render_label_maps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--kind", choices=dataio.KINDS, default="convex")
    ap.add_argument("--repetitions", type=int, default=3)
    ap.add_argument("--cm-scale", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    maps = [render_label_maps(label_image(anns, w, h, args.cm_scale), w, h)
            for (w, h), anns in dataio.synth_dataset(args.seed, args.count, args.kind, 640, args.instances)]
    rep = bench_decode(maps, args.cm_scale, args.repetitions)
    out = rep.to_dict()
    out["decode_only_fps"] = frames_per_second(rep)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
