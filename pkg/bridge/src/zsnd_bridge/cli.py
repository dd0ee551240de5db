"""zsnd-bridge command line: serve a backend or conformance-check an endpoint."""

from __future__ import annotations

import argparse
import sys

from .conformance import conformance_check
from .server import ServerConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsnd-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a denoising backend over the wire protocol")
    p.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    p.add_argument("--backend", choices=["identity", "boxblur", "drunet"], default="identity")
    p.add_argument("--weights", default=None, help="checkpoint path (drunet backend)")
    p.add_argument("--device", default="cpu", help="torch device for the drunet backend")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0, help="tcp port (0 picks a free one)")
    p.add_argument("--max-side", type=int, default=4096, help="largest accepted image side")

    c = sub.add_parser("check", help="run protocol conformance checks against an endpoint")
    c.add_argument("endpoint", help="server command line or host:port")
    c.add_argument("--timeout", type=float, default=30.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        try:
            config = ServerConfig(
                transport=args.transport,
                backend=args.backend,
                weights_path=args.weights,
                device=args.device,
                host=args.host,
                port=args.port,
                max_side=args.max_side,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        serve(config)
        return 0
    report = conformance_check(args.endpoint, timeout=args.timeout)
    print(report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
