"""Command-line entry: ``python -m vlmimo <verb> [--config F] [--seed N]
[--workers N] [--out DIR]``.

Verbs: capacity, precoding, multicell, detect, focusing, eigen-cdf,
neumann-bench. The seed falls back to the ``VLMIMO_SEED`` environment
variable, then to the config file. On failure a JSON object with the error
category is printed to stderr and the exit code is nonzero.
"""

import argparse
import json
import os
import sys

from .errors import ConfigError, VlmimoError
from .harness.config import parse_config
from .harness.experiments import run_experiment

VERBS = ("capacity", "precoding", "multicell", "detect", "focusing", "eigen-cdf",
         "neumann-bench")
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser():
    ap = argparse.ArgumentParser(prog="vlmimo", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="JSON config file; its 'experiment' must match the verb")
    ap.add_argument("--seed", type=int, help="master seed (overrides VLMIMO_SEED and the file)")
    ap.add_argument("--workers", type=int, help="worker threads")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                    help="override one params entry, e.g. --set 'M=[10,100]'")
    return ap


def _document(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    kind = args.verb.replace("-", "_")
    if doc.get("experiment", kind).replace("-", "_") != kind:
        raise ConfigError("experiment", f"config is for {doc['experiment']!r}, not {args.verb!r}")
    doc["experiment"] = kind
    env = os.environ.get("VLMIMO_SEED")
    if args.seed is not None:
        doc["seed"] = args.seed
    elif env is not None:
        try:
            doc["seed"] = int(env)
        except ValueError:
            raise ConfigError("seed", "VLMIMO_SEED must be an integer") from None
    if args.workers is not None:
        doc["workers"] = args.workers
    if args.out is not None:
        doc["output"] = args.out
    params = dict(doc.get("params", {}))
    for item in args.set:
        key, _, val = item.partition("=")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            raise ConfigError(key, f"--set value for {key!r} is not JSON") from None
    if params:
        doc["params"] = params
    return doc


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(_document(args))
        paths = run_experiment(cfg)
    except ConfigError as e:
        print(json.dumps({"error": e.category, "key": e.name, "message": str(e)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except (VlmimoError, OSError, ValueError) as e:
        category = getattr(e, "category", type(e).__name__)
        print(json.dumps({"error": category, "message": str(e)}), file=sys.stderr)
        return EXIT_RUNTIME
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0
