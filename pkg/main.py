import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler

from config import (
    ConfigError, Settings, get_settings, load_experiment_config, load_model_document_file, parse_experiment_config,
)
from errors import BudgetExceeded, WzToolkitError
from experiment_manager import ExperimentManager
from reports import render

console = Console(stderr=True)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_IO = 4
EXIT_TOOLKIT = 5


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wz", description="Side-information source coding experiments.")
    parser.add_argument("--config", help="JSON experiment config; subcommand flags are ignored when given")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out-dir", help="artifact directory")
    parser.add_argument("--budget", type=int, help="enumeration budget for FSM searches")
    parser.add_argument("--log-level", help="logging level")
    sub = parser.add_subparsers(dest="command")

    drf = sub.add_parser("drf", help="informational distortion-rate curve")
    source = drf.add_mutually_exclusive_group()
    source.add_argument("--input", help="model document with the sequence")
    source.add_argument("--dms", type=_floats, help="i.i.d. source probabilities, comma separated")
    drf.add_argument("--channel", help="model document supplying channel and distortion")
    drf.add_argument("--block", type=int, default=1)
    drf.add_argument("--usize", type=int)
    drf.add_argument("--lambdas", type=_floats)
    drf.add_argument("--restarts", type=int, default=16)

    fsm = sub.add_parser("fsm-opt", help="exhaustive operational optimum")
    fsm.add_argument("--input", required=True)
    fsm.add_argument("--channel")
    fsm.add_argument("--states", type=int, default=1)
    fsm.add_argument("--delay", type=int, default=0)
    fsm.add_argument("--lmax", type=int, default=1)
    fsm.add_argument("--rate", type=float, default=0.0)

    codec = sub.add_parser("codec", help="universal block codec")
    codec.add_argument("action", choices=["encode", "decode"])
    codec.add_argument("--input", required=True, help="model document (sequence needed for encode)")
    codec.add_argument("--channel")
    codec.add_argument("--sideinfo", help="JSON list (or document with 'sequence') of side symbols")
    codec.add_argument("--stream", help="stream file to decode")
    codec.add_argument("--block", type=int, default=2)
    codec.add_argument("--rate", type=float, default=0.5)
    codec.add_argument("--out", help="alias of --out-dir")

    growth = sub.add_parser("growth", help="header growth and the wrapper codec")
    growth.add_argument("action", choices=["sweep", "wrap"])
    growth.add_argument("--theta", type=float, default=0.5)
    growth.add_argument("--ns", type=_ints)
    growth.add_argument("--input")
    growth.add_argument("--channel")
    growth.add_argument("--rate", type=float, default=0.0)
    growth.add_argument("--dist", type=float, default=0.0)
    growth.add_argument("--states", type=int, default=1)
    growth.add_argument("--delay", type=int, default=0)
    growth.add_argument("--lmax", type=int, default=1)

    sr = sub.add_parser("sr", help="two-stage region")
    sr.add_argument("action", choices=["region"])
    sr.add_argument("--input", required=True)
    sr.add_argument("--channel3", required=True, help="JSON x-by-y-by-z table P(y,z|x)")
    sr.add_argument("--block", type=int, default=1)
    sr.add_argument("--rate", type=float, default=0.5)
    sr.add_argument("--delta-rate", type=float, default=0.5)

    gen = sub.add_parser("gen", help="generate test corpora")
    gen.add_argument("action", choices=["converse", "dms"])
    gen.add_argument("--m", type=int, default=8)
    gen.add_argument("--blocks", type=int, default=32)
    gen.add_argument("--rate", type=float, default=0.5)
    gen.add_argument("--delta", type=float, default=0.11)
    gen.add_argument("--rho0", type=_floats)
    gen.add_argument("--p", type=_floats, default=[0.5, 0.5])
    gen.add_argument("--n", type=int, default=64)
    gen.add_argument("--input", help="model document whose channel the generated document keeps")

    check = sub.add_parser("check", help="cross-module acceptance sweeps")
    check.add_argument("target", choices=["theorem1"])
    check.add_argument("--sample", type=int, default=256, help="0 runs every sequence")
    check.add_argument("--length", type=int, default=12)
    return parser


def _read_json(path: str) -> Any:
    with open(path, mode="r", encoding="utf-8") as f:
        return json.load(f)


def _model(args) -> Optional[Dict[str, Any]]:
    """Model document from --input, with channel and distortion taken from --channel when given."""
    base = getattr(args, "input", None)
    channel = getattr(args, "channel", None)
    if base is None and channel is None:
        return None
    doc = load_model_document_file(base or channel).model_dump()
    if base and channel:
        other = load_model_document_file(channel)
        doc.update(channel=other.channel, distortion=other.distortion, alphabet_y=other.alphabet_y,
                   alphabet_xhat=other.alphabet_xhat)
    return doc


def config_from_args(args) -> Dict[str, Any]:
    """Experiment config document assembled from subcommand flags."""
    cmd = args.command
    data: Dict[str, Any] = {"model": _model(args)}
    if cmd == "drf":
        data.update(kind="drf", drf={"block": args.block, "usize": args.usize, "lambdas": args.lambdas,
                                     "restarts": args.restarts, "dms": args.dms})
    elif cmd == "fsm-opt":
        data.update(kind="fsm-opt", fsm_opt={"states": args.states, "delay": args.delay, "lmax": args.lmax,
                                             "rate": args.rate})
    elif cmd == "codec":
        sideinfo = None
        if args.sideinfo:
            raw = _read_json(args.sideinfo)
            sideinfo = raw["sequence"] if isinstance(raw, dict) else raw
        data.update(kind="codec", codec={"action": args.action, "block": args.block, "rate": args.rate,
                                         "stream": args.stream, "sideinfo": sideinfo})
        if args.out:
            data["out_dir"] = args.out
    elif cmd == "growth":
        growth = {"action": args.action, "theta": args.theta, "rate": args.rate, "dist": args.dist,
                  "states": args.states, "delay": args.delay, "lmax": args.lmax}
        if args.ns:
            growth["ns"] = args.ns
        data.update(kind="growth", growth=growth)
    elif cmd == "sr":
        data.update(kind="sr", sr={"block": args.block, "rate": args.rate, "delta_rate": args.delta_rate,
                                   "channel3": _read_json(args.channel3)})
    elif cmd == "gen":
        data.update(kind="gen", gen={"action": args.action, "m": args.m, "blocks": args.blocks, "rate": args.rate,
                                     "delta": args.delta, "rho0": args.rho0, "p": args.p, "n": args.n})
    elif cmd == "check":
        data.update(kind="theorem1-check", theorem1={"sample": args.sample or None, "length": args.length})
    return data


def setup_logging(settings: Settings, level: Optional[str] = None):
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(message)s",
        handlers=[RichHandler(console=console, show_time=False, show_path=False)],
        force=True,
    )


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = get_settings()
        setup_logging(settings, args.log_level)
        if args.config:
            cfg = load_experiment_config(args.config)
        elif args.command:
            cfg = parse_experiment_config(config_from_args(args))
        else:
            parser.print_help()
            return EXIT_CONFIG
        overrides = {k: v for k, v in (("seed", args.seed), ("out_dir", args.out_dir), ("budget", args.budget))
                     if v is not None}
        if overrides:
            cfg = cfg.model_copy(update=overrides)
        manager = ExperimentManager(settings)
        with console.status(f"[bold green]Running {cfg.kind}..."):
            summary = manager.run_experiment(cfg)
        for renderable in render(summary):
            console.print(renderable)
        if cfg.kind == "theorem1-check" and not summary["passed"]:
            return EXIT_TOOLKIT
        return EXIT_OK
    except ConfigError as e:
        console.print(f"[bold red]Config error:[/bold red] {e}")
        return EXIT_CONFIG
    except BudgetExceeded as e:
        console.print(f"[bold red]Budget exceeded:[/bold red] {e}")
        return EXIT_BUDGET
    except OSError as e:
        console.print(f"[bold red]I/O error:[/bold red] {e}")
        return EXIT_IO
    except WzToolkitError as e:
        console.print(f"[bold red]{type(e).__name__}:[/bold red] {e}")
        return e.exit_code
    except ValueError as e:
        console.print(f"[bold red]Invalid input:[/bold red] {e}")
        return EXIT_TOOLKIT


if __name__ == "__main__":
    sys.exit(run())
