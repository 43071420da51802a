"""fetch-convert: pull a public scene (checksum-verified, cached) and emit
the HSIC v1 container the classifier reads. `--scene synthetic` writes the
built-in fixture and never touches the network."""

import argparse
import json
import sys

from .convert import ConversionError, convert
from .fetch import ChecksumError, UnpinnedError, fetch
from .manifests import SCENES
from .synthetic import write_synthetic_scene


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fetch-convert")
    parser.add_argument("--scene", required=True, choices=sorted(SCENES) + ["synthetic"])
    parser.add_argument("--out", required=True, help="output container directory")
    parser.add_argument("--cache", default=".hsic-cache", help="download cache directory")
    parser.add_argument("--seed", type=int, default=0, help="synthetic scene seed")
    parser.add_argument("--pin", action="store_true",
                        help="record the first verified download's checksum")
    args = parser.parse_args(argv)

    try:
        if args.scene == "synthetic":
            write_synthetic_scene(args.out, seed=args.seed)
            print(json.dumps({"scene": "synthetic", "out": args.out}, sort_keys=True))
            return 0
        manifest = SCENES[args.scene]
        data_path, gt_path = fetch(manifest, args.cache, pin=args.pin)
        convert(data_path, gt_path, manifest, args.out)
        print(json.dumps({"scene": args.scene, "out": args.out,
                          "data": data_path, "gt": gt_path}, sort_keys=True))
        return 0
    except (ChecksumError, UnpinnedError, ConversionError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
