"""``qfp`` command line.

Exit codes: 0 ok, 1 usage or config error, 2 verification failure, 3 I/O or
artifact error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .circuit import CircuitError, emit_json
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import (
    DISPLAY_NAMES, ArtifactError, cmd_defend, cmd_defense_eval, cmd_eval, cmd_gen, cmd_scaling, cmd_train,
)
from .transpiler import CouplingMap, transpile
from .verify import SUITES, cmd_verify

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qfp", description="Encoding fingerprinting attack and obfuscation defense.")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_ in (("gen", "generate labeled circuits and the feature CSV"),
                        ("train", "train the classifier on a generated dataset"),
                        ("eval", "evaluate the trained classifier on the test split")):
        _common(sub.add_parser(name, help=help_))

    p = sub.add_parser("scaling", help="gen+train+eval for several qubit counts")
    p.add_argument("--qubits", default="3,4,6,8", help="comma-separated qubit counts (default 3,4,6,8)")
    _common(p)

    p = sub.add_parser("defense-eval", help="score the trained classifier on defended circuits")
    p.add_argument("--retrain-adversary", action="store_true",
                   help="also train a fresh classifier on the defended circuits")
    _common(p)

    p = sub.add_parser("defend", help="insert a keyed cloak between an encoding and its PQC")
    p.add_argument("encoding", help="encoding circuit (.json IR or .qasm)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pqc", help="PQC circuit file")
    group.add_argument("--boundary", type=int, help="index of the first PQC instruction in ENCODING")
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.json and PREFIX.qasm")
    p.add_argument("--seed", type=int, help="key seed (default: base_seed)")
    p.add_argument("--transpile", action="store_true",
                   help="also write PREFIX.transpiled.json lowered for the configured coupling")
    _common(p)

    p = sub.add_parser("verify", help="run the oracle suites")
    p.add_argument("--suite", action="append", choices=list(SUITES), help="run only this suite (repeatable)")
    _common(p)
    return parser


def _run(args, cfg: ExperimentConfig) -> int:
    cmd = args.command
    if cmd == "gen":
        m = cmd_gen(cfg)
        print(f"wrote {m['rows']} rows x {m['n_features'] + 1} columns to {cfg.out / 'features.csv'}")
        print(f"config hash {m['config_hash']}")
    elif cmd == "train":
        s = cmd_train(cfg)
        print(f"epochs {s['epochs']}  train loss {s['first_train_loss']:.4f} -> {s['final_train_loss']:.4f}  "
              f"final val acc {s['final_val_acc']:.4f}")
        print(f"model {cfg.out / 'model.json'}  curves {cfg.out / 'curves.csv'}")
    elif cmd == "eval":
        print(cmd_eval(cfg).table(DISPLAY_NAMES), end="")
    elif cmd == "scaling":
        try:
            qubits = [int(q) for q in args.qubits.split(",") if q.strip()]
        except ValueError:
            raise ConfigError(f"--qubits expects integers, got {args.qubits!r}") from None
        cmd_scaling(cfg, qubits)
        print((cfg.out / "scaling.csv").read_text(), end="")
    elif cmd == "defense-eval":
        doc = cmd_defense_eval(cfg, retrain_adversary=args.retrain_adversary or None)
        print(f"undefended accuracy {doc['undefended_accuracy']:.4f}")
        print(f"defended accuracy   {doc['defended_accuracy']:.4f}  (chance 0.20)")
        if "retrained" in doc:
            print(f"retrained adversary {doc['retrained']['accuracy']:.4f}")
        print()
        print((cfg.out / "depth_table.txt").read_text(), end="")
        print()
        print((cfg.out / "defense_table.txt").read_text(), end="")
    elif cmd == "defend":
        seed = cfg.base_seed if args.seed is None else args.seed
        circ, jpath, qpath = cmd_defend(args.encoding, args.out, seed, pqc_path=args.pqc, boundary=args.boundary)
        print(f"key seed {seed}")
        print(f"wrote {jpath} and {qpath}")
        if args.transpile:
            res = transpile(circ, CouplingMap.preset(cfg.coupling, circ.n_qubits))
            tpath = jpath.with_name(jpath.name[:-len(".json")] + ".transpiled.json")
            tpath.write_text(emit_json(res.circuit))
            print(f"wrote {tpath} (depth {res.stats['depth_after']})")
    elif cmd == "verify":
        results = cmd_verify(cfg, args.suite)
        for r in results:
            print(r.line())
        if any(not r.passed and not r.skipped for r in results):
            return EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides)
        return _run(args, cfg)
    except CircuitError as exc:
        print(f"qfp: malformed input: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArtifactError, OSError) as exc:
        print(f"qfp: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # includes ConfigError
        print(f"qfp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
