"""Command-line runner: ``gromovlab <command> [--fixture NAME] [--config PATH] ...``.

Exit codes: 0 all gated checks pass, 1 a gated check failed, 2 bad config or
arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

COMMANDS = ("levi", "kobayashi", "cc", "gmetric", "dmetric", "delta", "qi-fit", "morse", "verify-all")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gromovlab", description="Metric experiments on model domains.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI experiment config")
    p.add_argument("--fixture", help="built-in domain (overrides [domain] fixture)")
    p.add_argument("--seed", type=int, help="overrides [run] seed")
    p.add_argument("--out", default="out", help="artifact directory (default: ./out)")
    p.add_argument("--threads", type=int, help="BLAS threads (set before numpy loads)")
    p.add_argument("--json", action="store_true", help="print report.json to stdout")
    return p


def _summary(command, cfg_ini, sections) -> str:
    lines = [f"gromovlab {command}", ""]
    for sec in sections:
        lines.append(f"[{sec.name}]")
        for c in sec.checks:
            status = "info" if c.passed is None else ("PASS" if c.passed else "FAIL")
            gate = f"  gate {c.gate}" if c.gate else ""
            lines.append(f"  {status:4s}  {c.name}: {c.claim} = {_short(c.value)}{gate}")
        lines.append("")
    lines += ["config:", cfg_ini]
    return "\n".join(lines)


def _short(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .config import ConfigError, ExperimentConfig, load_config, validate
    from .domain import DomainError
    from .experiments import PIPELINES, VERIFY_ALL
    from .report import dumps

    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.fixture:
            cfg.domain.fixture = args.fixture
            cfg.domain.rho = ""
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.threads:
            cfg.run.threads = args.threads
        validate(cfg)
        dom = None if (args.command == "delta" and cfg.delta.csv) else cfg.build_domain()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    if args.command == "verify-all":
        names = VERIFY_ALL.get(dom.n, VERIFY_ALL[2])
    else:
        names = (args.command,)
    sections = []
    try:
        for name in names:
            sections.append(PIPELINES[name](cfg, dom))
    except (DomainError, ArithmeticError, FloatingPointError, ValueError) as e:
        print(f"numerical failure in {names[len(sections)]}: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    ok = all(s.ok for s in sections)
    report = {"command": args.command, "ok": ok, "config": cfg.to_dict(),
              "sections": {s.name: s for s in sections}}
    text = dumps(report)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(text)
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(_summary(args.command, cfg.to_ini(), sections))
    for s in sections:
        for fname, body in s.csvs.items():
            with open(os.path.join(args.out, fname), "w") as fh:
                fh.write(body)
    if args.json:
        sys.stdout.write(text)
    else:
        for s in sections:
            for c in s.checks:
                if c.passed is not None:
                    print(f"{'PASS' if c.passed else 'FAIL'} {s.name}.{c.name} = {_short(c.value)} ({c.gate})")
        print(f"{'ok' if ok else 'FAILED'}: artifacts in {args.out}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
