"""Command line for the detector service."""

from __future__ import annotations

import argparse
import sys

from .models import FixtureError
from .service import ServiceConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detector-service",
        description="Serve object detections over newline-delimited JSON "
                    "(stdio by default, TCP with --port).",
    )
    parser.add_argument("--stub", metavar="FIXTURE.json",
                        help="serve scripted detections from a fixture file")
    parser.add_argument("--model", help="dotted adapter path module.path:factory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--conf-floor", type=float, default=0.0, dest="conf_floor")
    parser.add_argument("--max-batch", type=int, default=64, dest="max_batch")
    parser.add_argument("--port", type=int, help="listen on TCP instead of stdio")
    args = parser.parse_args(argv)
    try:
        config = ServiceConfig(
            stub_fixture=args.stub,
            model=args.model,
            device=args.device,
            conf_floor=args.conf_floor,
            max_batch=args.max_batch,
            port=args.port,
        )
        serve(config)
    except (ValueError, FixtureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
