import argparse
import json
import logging
import sys

from pydantic import ValidationError

from edgeped import __version__
from edgeped.cli import commands
from edgeped.core.errors import EdgePedError, EmptyInputError, InfeasibleError
from edgeped.core.utils.logger import log_error, set_level
from edgeped.runtime.config import BSM_FPS, DEFAULT_FLOOR_DB, DEFAULT_GRID, DEFAULT_SEED

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeped",
        description="Compression vs pedestrian-detection accuracy trade-off tools",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="single source of randomness")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="encode a y4m video at one crf")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--crf", type=int, required=True)
    p.add_argument("--out", required=True, help="bitstream output")
    p.add_argument("--decoded", help="optional decoded y4m output")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=commands.cmd_compress)

    p = sub.add_parser("sweep", help="crf -> PSNR -> accuracy -> bandwidth table")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--gt", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--detections", help="JSONL detections from a real detector")
    source.add_argument("--profile", help="scenario1, scenario2 or a profile JSON file")
    p.add_argument("--grid", default=",".join(str(c) for c in DEFAULT_GRID))
    p.add_argument("--out", required=True)
    p.add_argument("--allow-fp", action="store_true", help="count frames with extra boxes as correct")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=commands.cmd_sweep)

    p = sub.add_parser("threshold", help="cheapest sweep level meeting an accuracy floor")
    p.add_argument("--sweep", required=True)
    p.add_argument("--floor", type=float, required=True)
    p.add_argument("--capacity-mbps", type=float, help="also report how many cameras fit this link")
    p.set_defaults(func=commands.cmd_threshold)

    p = sub.add_parser("stream", help="simulate the camera to edge link")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--capacity-mbps", type=float, required=True)
    p.add_argument("--policy", required=True, help=f"fixed:N or adaptive:FLOOR (e.g. adaptive:{DEFAULT_FLOOR_DB:g})")
    p.add_argument("--budget-s", type=float, required=True)
    p.add_argument("--queue-limit-bits", type=float)
    p.add_argument("--step-up", type=int, default=3)
    p.add_argument("--step-down", type=int, default=3)
    p.add_argument("--profile", default="scenario1")
    p.add_argument("--trace", help="optional per-frame CSV")
    p.set_defaults(func=commands.cmd_stream)

    p = sub.add_parser("synth", help="write a seeded synthetic video and its ground truth")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--fps", type=int, default=BSM_FPS)
    p.add_argument("--boxes", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=commands.cmd_synth)

    p = sub.add_parser("resample", help="drop frames down to a lower frame rate")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=commands.cmd_resample)

    return parser


def _fail(code: str, message: str, exit_code: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    log_error(message)
    return exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_level(logging.DEBUG)

    try:
        return args.func(args)
    except (InfeasibleError, EmptyInputError) as e:
        return _fail(e.code, e.message, EXIT_INFEASIBLE)
    except EdgePedError as e:
        return _fail(e.code, e.message, EXIT_USAGE)
    except ValidationError as e:
        return _fail("schema", str(e.errors()[0]["msg"]), EXIT_USAGE)
    except OSError as e:
        return _fail("io", str(e), EXIT_USAGE)
    except ValueError as e:
        return _fail("usage", str(e), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
