import argparse

from .service import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlm-sidecar", description="Serve a masked language model over the sidecar wire protocol"
    )
    parser.add_argument("--checkpoint", required=True, help="model name or local checkpoint path")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8799)
    args = parser.parse_args(argv)
    serve(args.checkpoint, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
