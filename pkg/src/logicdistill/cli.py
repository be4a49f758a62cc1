"""Command-line front end.

Subcommands::

    logicdistill distill --kind logic-bit --m 2 --F 0.8
    logicdistill sweep   --kind logic-phase --grid 0.5 1.0 0.1 --output sweep.csv
    logicdistill iterate --F 0.6 --rounds 3 --verify-exact
    logicdistill state   --name Phi+ --m 3

Options may also come from a JSON file given with ``--config``; flags on
the command line override it.  Relative output paths are resolved against
``$LOGICDISTILL_OUTPUT_DIR`` when that variable is set.

Exit codes: 0 success, 2 invalid configuration, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Sequence

from . import analytics
from .channels import ERROR_NAMES, PHYSICAL_BIT, ErrorKind, make_mixture
from .protocols import ProtocolError, correct_physical_bitflip, distill_round
from .state import StateError, make_bell, make_ghz, make_logic_bell, make_upsilon

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
OUTPUT_DIR_ENV = "LOGICDISTILL_OUTPUT_DIR"

DISTILL_KEYS = ("F_in", "F_out_exact", "F_out_formula", "p_success_exact", "p_success_formula",
                "policy", "m", "kind", "mode", "trials", "seed")
SWEEP_HEADER = ("F_in", "F_out", "p_success", "kind", "policy", "m", "mode")
ITERATE_KEYS = ("f_sequence", "success_probs", "expected_yield", "verified")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str = "logic-bit"
    m: int = 2
    F: float | None = None
    grid: tuple[float, float, float] | None = None
    policy: str = "canonical"
    mode: str = "exact"
    trials: int = 100_000
    seed: int | None = None
    rounds: int = 1
    format: str = "json"
    output: str | None = None
    strategy: str = "localize"
    flip_index: int = 1
    verify_exact: bool = False

    def validate(self) -> None:
        if self.kind not in ERROR_NAMES:
            raise ConfigError(f"unknown kind {self.kind!r}")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        if self.policy not in ("canonical", "extended"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.mode not in ("exact", "montecarlo"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "montecarlo":
            if self.seed is None:
                raise ConfigError("montecarlo mode requires --seed")
            if self.trials < 1:
                raise ConfigError("trials must be at least 1")
            if self.kind == PHYSICAL_BIT:
                raise ConfigError("montecarlo mode is only available for the distillation kinds")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.strategy not in ("localize", "known_location"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 1 <= self.flip_index <= self.m:
            raise ConfigError(f"flip index {self.flip_index} outside 1..{self.m}")
        if self.F is not None and not 0 <= self.F <= 1:
            raise ConfigError(f"F out of range: {self.F}")
        if self.grid is not None:
            start, stop, step = self.grid
            if step <= 0:
                raise ConfigError("grid step must be positive")
            if not (0 <= start <= 1 and 0 <= stop <= 1) or stop < start:
                raise ConfigError(f"F out of range: grid {self.grid}")

    def error_kind(self) -> ErrorKind:
        return ErrorKind(self.kind, self.flip_index)

    def points(self) -> list[float]:
        if self.grid is not None:
            start, stop, step = self.grid
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        if self.F is None:
            raise ConfigError("give --F or --grid")
        return [self.F]


# --- serialization ---------------------------------------------------------------


def fmt_number(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "NaN"
        return format(x, ".17g")
    raise TypeError(x)


def dump_json(obj: Any, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits and keys in insertion order."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (bool, int, float)):
        return fmt_number(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dump_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_csv(header: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if row[k] is None else (row[k] if isinstance(row[k], str) else fmt_number(row[k]))
                         for k in header])
    return buf.getvalue()


def resolve_output(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def emit(text: str, path: str | None) -> None:
    target = resolve_output(path)
    if target is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {target}: {exc}") from exc


# --- commands -----------------------------------------------------------------------


def run_point(cfg: RunConfig, F: float) -> dict:
    kind = cfg.error_kind()
    mixed = make_mixture(kind, F, cfg.m)
    if kind.name == PHYSICAL_BIT:
        res = correct_physical_bitflip(mixed, cfg.m, cfg.strategy, cfg.flip_index)
        f_formula, p_formula = 1.0, 1.0
    else:
        res = distill_round(mixed, kind, cfg.m, cfg.policy, cfg.mode, cfg.trials, cfg.seed)
        f_formula = analytics.fidelity_map(F)
        p_formula = analytics.success_probability(F, cfg.policy, cfg.m, kind)
        if cfg.mode == "exact" and res.output is not None:
            logged = res.logged_fidelity()
            if abs(logged - res.output_fidelity) > 1e-10:
                raise ProtocolError(f"logged fidelity {logged} disagrees with output {res.output_fidelity}")
    policy = cfg.policy if kind.name != PHYSICAL_BIT else cfg.strategy
    return {
        "F_in": F,
        "F_out_exact": res.output_fidelity,
        "F_out_formula": f_formula,
        "p_success_exact": res.success_probability,
        "p_success_formula": p_formula,
        "policy": policy,
        "m": cfg.m,
        "kind": cfg.kind,
        "mode": cfg.mode,
        "trials": cfg.trials if cfg.mode == "montecarlo" else None,
        "seed": cfg.seed,
    }


def cmd_distill(cfg: RunConfig) -> str:
    records = [run_point(cfg, F) for F in cfg.points()]
    if cfg.format == "csv":
        return dump_csv(DISTILL_KEYS, records)
    return dump_json(records)


def cmd_sweep(cfg: RunConfig) -> str:
    if cfg.grid is None:
        raise ConfigError("sweep needs --grid START STOP STEP")
    rows = []
    for F in cfg.points():
        rec = run_point(cfg, F)
        rows.append({"F_in": F, "F_out": rec["F_out_exact"], "p_success": rec["p_success_exact"],
                     "kind": cfg.kind, "policy": rec["policy"], "m": cfg.m, "mode": cfg.mode})
    return dump_csv(SWEEP_HEADER, rows)


def cmd_iterate(cfg: RunConfig) -> str:
    if cfg.F is None:
        raise ConfigError("iterate needs --F (the starting fidelity)")
    if cfg.rounds < 1:
        raise ConfigError("rounds must be at least 1")
    if cfg.F <= 0.5:
        raise ConfigError(f"F0={cfg.F} does not improve: the map only raises fidelity when F > 1/2")
    if cfg.F >= 1:
        raise ConfigError("F0=1 is already a fixed point")
    kind = cfg.error_kind()
    if kind.name == PHYSICAL_BIT:
        raise ConfigError("iterate applies to the distillation kinds only")
    trace = analytics.iterate(cfg.F, cfg.rounds, cfg.policy, cfg.m, kind, cfg.verify_exact)
    out = {"f_sequence": trace.f_sequence, "success_probs": trace.success_probs,
           "expected_yield": trace.expected_yield, "verified": bool(trace.verified)}
    return dump_json(out)


def _named_state(name: str, m: int, flip_index: int):
    if name in ("Phi+", "Phi-", "Psi+", "Psi-"):
        return make_logic_bell(name, m)
    if name in ("phi+", "phi-", "psi+", "psi-"):
        return make_bell(name, ["a1", "a2"])
    if name in ("GHZ+", "GHZ-"):
        return make_ghz(name[-1], [f"a{i}" for i in range(1, m + 1)])
    if name == "Upsilon+":
        return make_upsilon(m, flip_index)
    raise ConfigError(f"unknown state {name!r}")


def cmd_state(cfg: RunConfig, name: str, as_json: bool = False) -> str:
    state = _named_state(name, cfg.m, cfg.flip_index)
    amps = sorted(state.amplitudes().items())
    if as_json:
        return dump_json({"name": name, "registry": list(state.registry),
                          "terms": {b: [a.real, a.imag] for b, a in amps}})
    lines = [f"# {name}  modes: {' '.join(state.registry)}"]
    lines += [f"{a.real:+.17g}{a.imag:+.17g}j  |{b}>" for b, a in amps]
    return "\n".join(lines) + "\n"


# --- argument handling --------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--kind", choices=ERROR_NAMES, default=S)
    p.add_argument("--m", type=int, default=S, help="photons per logic qubit")
    p.add_argument("--F", type=float, default=S, help="input fidelity")
    p.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"), default=S)
    p.add_argument("--policy", choices=("canonical", "extended"), default=S)
    p.add_argument("--mode", choices=("exact", "montecarlo"), default=S)
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--rounds", type=int, default=S)
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--output", "-o", default=S, help="output file (stdout if omitted)")
    p.add_argument("--strategy", choices=("localize", "known_location"), default=S)
    p.add_argument("--flip-index", dest="flip_index", type=int, default=S)
    p.add_argument("--verify-exact", dest="verify_exact", action="store_true", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logicdistill",
                                     description="Logic-qubit entanglement distillation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("distill", "run one round per F value"),
                        ("sweep", "sweep F over a grid and write CSV"),
                        ("iterate", "iterate the fidelity map over several rounds"),
                        ("state", "print a canonical state")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "state":
            p.add_argument("--name", default="Phi+")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in names:
        if hasattr(args, key):
            values[key] = getattr(args, key)
    if values.get("grid") is not None:
        values["grid"] = tuple(float(v) for v in values["grid"])
    cfg = RunConfig(**values)
    if args.command == "sweep" and "format" not in values:
        cfg.format = "csv"
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "distill":
            text = cmd_distill(cfg)
        elif args.command == "sweep":
            text = cmd_sweep(cfg)
        elif args.command == "iterate":
            text = cmd_iterate(cfg)
        else:
            text = cmd_state(cfg, args.name, getattr(args, "format", None) == "json")
        emit(text, cfg.output)
    except (ConfigError, StateError, ValueError) as exc:
        print(f"logicdistill: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"logicdistill: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
