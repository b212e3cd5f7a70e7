"""Command-line front end: simulate, attack, verify-lemmas, convert.

Exit codes: 0 pass, 1 disagreement, 2 guarantee violation, 3 attack
shortfall, 64 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import sys
from dataclasses import asdict, dataclass, field

from . import adversary, harness
from .classes import class_from_dict, entropy_class, monotone_bad_q
from .dist import DomainError, Pmf, ValidationError
from .harness import CSV_COLUMNS, estimate_bankruptcy, pool_reports
from .schemes import (
    EntropyScheme,
    bankruptcy_step,
    domination_from_insurance,
    insurance_bankruptcy_step,
    insurance_from_dict,
    insurance_from_domination,
    scheme_from_dict,
)

EXIT_OK, EXIT_DISAGREE, EXIT_VIOLATION, EXIT_SHORTFALL, EXIT_USAGE = 0, 1, 2, 3, 64

DECEPTIVE_NOTE = ("desk-scale demonstration: measured bankruptcy of one scheme under one "
                  "deceptive q; it illustrates non-insurability and proves nothing")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunConfig:
    command: str
    pmf: dict | None = None
    model_class: dict | None = None
    scheme: dict | None = None
    eta: float | None = None
    horizon: int | None = None
    trials: int | None = None
    seed: int = 0
    out: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


def _load_json_arg(text: str | None):
    """A JSON literal, ``@file`` or a file path ending in .json."""
    if text is None:
        return None
    t = text.strip()
    try:
        if t.startswith("@") or t.endswith(".json"):
            with open(t.lstrip("@")) as fh:
                return json.load(fh)
        return json.loads(t)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read JSON from {text!r}: {e}") from None


def _scheme_spec(args) -> dict | None:
    if getattr(args, "scheme", None) is None:
        return None
    if args.scheme.lstrip().startswith(("{", "@")) or args.scheme.endswith(".json"):
        return _load_json_arg(args.scheme)
    d = {"scheme": args.scheme}
    if args.eta is not None:
        d["eta"] = args.eta
    if args.scheme == "entropy" and args.h is not None:
        d["h"] = args.h
    if args.scheme == "generic" and args.quantization is not None:
        d["quantization"] = _load_json_arg(args.quantization)
    return d


def _class_spec(args) -> dict | None:
    c = getattr(args, "model_class", None)
    if c is None:
        return None
    if c.lstrip().startswith(("{", "@")) or c.endswith(".json"):
        return _load_json_arg(c)
    d = {"class": c}
    if args.max_M is not None:
        d["max_M"] = args.max_M
    if getattr(args, "class_h", None) is not None:
        d["h"] = args.class_h
    return d


def _resolve(args) -> RunConfig:
    base = _load_json_arg(args.config) if getattr(args, "config", None) else {}
    if not isinstance(base, dict):
        raise UsageError("config file must hold a JSON object")
    known = {"pmf", "model_class", "scheme", "eta", "horizon", "trials", "seed", "format"}
    cfg = RunConfig(args.command, **{k: base[k] for k in known if k in base})
    cfg.extra = dict(base.get("extra") or {})
    cfg.extra.update({k: v for k, v in base.items() if k not in known | {"command", "extra"}})
    for key, val in (("pmf", _load_json_arg(getattr(args, "pmf", None))),
                     ("model_class", _class_spec(args)),
                     ("scheme", _scheme_spec(args)),
                     ("eta", getattr(args, "eta", None)),
                     ("horizon", getattr(args, "horizon", None)),
                     ("trials", getattr(args, "trials", None)),
                     ("seed", getattr(args, "seed", None))):
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "format", None):
        cfg.format = args.format
    cfg.out = args.out
    return cfg


def _emit(cfg: RunConfig, payload: dict, rows: list | None = None) -> None:
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows or []:
            w.writerow(r)
        text = buf.getvalue()
    else:
        text = json.dumps({"config": cfg.to_dict(), **payload}, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _opt(args, cfg: RunConfig, name: str, default):
    """Flag value, else the saved config's value, else the default; recorded in the echo."""
    val = getattr(args, name, None)
    if val is None:
        val = cfg.extra.get(name, default)
    cfg.extra[name] = val
    return val


def _require(cfg: RunConfig, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join(missing)}")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    members_n = int(_opt(args, cfg, "members", 1))
    _require(cfg, "scheme", "horizon", "trials")
    if (cfg.pmf is None) == (cfg.model_class is None):
        raise UsageError("give exactly one of --pmf or --class")
    scheme = scheme_from_dict(cfg.scheme)
    cfg.scheme = scheme.to_dict()
    if cfg.eta is None:
        cfg.eta = cfg.scheme.get("eta")
    if cfg.pmf is not None:
        members = [Pmf.from_dict(cfg.pmf)]
    else:
        mc = class_from_dict(cfg.model_class)
        members = [mc.sample([cfg.seed, i]) for i in range(members_n)]
    reports = [estimate_bankruptcy(p, scheme, int(cfg.horizon), int(cfg.trials), cfg.seed + i)
               for i, p in enumerate(members)]
    pooled = pool_reports(reports, cfg.seed)
    payload = {"pooled": pooled.to_dict(),
               "members": [{"pmf": p.to_dict(), "report": r.to_dict()}
                           for p, r in zip(members, reports)]}
    _emit(cfg, payload, [pooled.csv_row()])
    if args.assert_eta:
        if cfg.eta is None:
            raise UsageError("--assert-eta needs eta")
        if pooled.wilson_95_low > float(cfg.eta):
            return EXIT_VIOLATION
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _resolve(args)
    _require(cfg, "scheme")
    scheme = scheme_from_dict(cfg.scheme)
    cfg.scheme = scheme.to_dict()
    target = _opt(args, cfg, "target", cfg.eta)
    if target is None:
        raise UsageError("attack needs --target or --eta")
    if _opt(args, cfg, "mode", "allzero") == "deceptive":
        return _attack_deceptive(cfg, scheme, args, float(target))
    mc = None
    if cfg.model_class is not None:
        mc = class_from_dict(cfg.model_class)
    elif isinstance(scheme, EntropyScheme):
        # the entropy scheme only claims the monotone class of bounded entropy
        mc = entropy_class(scheme.h)
        cfg.model_class = mc.to_dict()
    grid = int(_opt(args, cfg, "grid", 1000))
    scan = int(_opt(args, cfg, "scan_budget", 10 ** 6))
    max_loss = int(_opt(args, cfg, "max_loss", adversary.MAX_LOSS))
    exact_h = _opt(args, cfg, "exact_horizon", None)
    mc_trials = int(_opt(args, cfg, "mc_trials", 10_000))
    try:
        cert = adversary.attack_allzero(scheme, float(target), grid=grid, scan_budget=scan,
                                        max_loss=max_loss, model_class=mc)
    except adversary.AttackShortfall as e:
        _emit(cfg, {"status": "shortfall", "reason": str(e), "achieved": e.info})
        return EXIT_SHORTFALL
    payload = {"status": "certificate", "certificate": cert.to_dict()}
    if exact_h is not None:
        payload["exact_bankruptcy"] = adversary.exact_allzero_bankruptcy(scheme, cert, int(exact_h))
    rows = []
    if mc_trials:
        rep = estimate_bankruptcy(cert.adversarial_p, scheme, cert.M, mc_trials, cfg.seed)
        payload["report"] = rep.to_dict()
        rows.append(rep.csv_row())
    _emit(cfg, payload, rows)
    return EXIT_OK


def _attack_deceptive(cfg, scheme, args, target) -> int:
    if cfg.pmf is None:
        raise UsageError("deceptive attack needs --pmf (a monotone decoy)")
    p = Pmf.from_dict(cfg.pmf)
    cfg.trials = trials = int(cfg.trials or 2000)
    alpha = float(_opt(args, cfg, "alpha", 0.1))
    eps = _opt(args, cfg, "epsilon", None)
    budget = int(_opt(args, cfg, "budget", 10_000))
    try:
        res = adversary.attack_deceptive(scheme, p, functools.partial(monotone_bad_q, p),
                                         alpha=alpha, eta=target, budget=budget, trials=trials,
                                         seed=cfg.seed, epsilon=eps, horizon=cfg.horizon)
    except adversary.AttackShortfall as e:
        _emit(cfg, {"status": "shortfall", "reason": str(e), "achieved": e.info,
                    "note": DECEPTIVE_NOTE})
        return EXIT_SHORTFALL
    payload = {"status": "measured", "note": DECEPTIVE_NOTE, **res.to_dict()}
    _emit(cfg, payload, [res.report.csv_row()])
    return EXIT_OK


LEMMAS = ("dist", "dpq", "yeung", "jn", "base")


def cmd_verify_lemmas(args) -> int:
    cfg = _resolve(args)
    lemma = _opt(args, cfg, "lemma", "all")
    if lemma not in LEMMAS + ("all",):
        raise UsageError(f"unknown lemma {lemma!r}")
    names = LEMMAS if lemma == "all" else (lemma,)
    cfg.trials = trials = int(cfg.trials or 100_000)
    _opt(args, cfg, "grid", "default")
    instances = int(_opt(args, cfg, "instances", 60))
    reports = []
    for name in names:
        if name == "dist":
            reports.append(harness.check_lemma_dist(trials, cfg.seed))
        elif name == "dpq":
            reports.append(harness.check_lemma_dpq(trials, cfg.seed))
        elif name == "yeung":
            reports.append(harness.check_yeung_grid(trials=min(trials, 20_000), seed=cfg.seed))
        elif name == "base":
            reports.append(harness.check_base_grid(trials=min(trials, 20_000), seed=cfg.seed))
        else:
            reports.append(harness.check_jn_suite(instances, cfg.seed))
    ok = all(r.passed for r in reports)
    _emit(cfg, {"passed": ok, "suites": [r.to_dict() for r in reports]})
    return EXIT_OK if ok else EXIT_DISAGREE


def _read_path(args) -> list[int]:
    if args.path is not None:
        text = args.path
    elif args.path_file is not None:
        try:
            with open(args.path_file) as fh:
                text = fh.read()
        except OSError as e:
            raise UsageError(str(e)) from None
    else:
        raise UsageError("convert needs --path or --path-file")
    text = text.strip()
    try:
        vals = json.loads(text) if text.startswith("[") else \
            [int(t) for t in text.replace(",", " ").split()]
    except ValueError as e:
        raise UsageError(f"bad loss path: {e}") from None
    return [int(v) for v in vals]


def cmd_convert(args) -> int:
    """Bankruptcy steps of a scheme and of its converted counterpart on one path.

    With a domination scheme the comparison is Phi against the scheme rebuilt
    from its insurance view; with an insurance scheme it is the insurer's
    first negative capital against the derived domination scheme.
    """
    cfg = _resolve(args)
    path = _read_path(args)
    cfg.extra["path"] = path
    if args.insurance is not None:
        spec = _load_json_arg(args.insurance)
        cfg.extra["insurance"] = spec
        ins = insurance_from_dict(spec)
        a = insurance_bankruptcy_step(ins, path)
        b = bankruptcy_step(domination_from_insurance(ins), path)
        payload = {"insurance_step": a, "domination_step": b}
    else:
        _require(cfg, "scheme")
        phi = scheme_from_dict(cfg.scheme)
        cfg.scheme = phi.to_dict()
        ins = insurance_from_domination(phi)
        a = bankruptcy_step(phi, path)
        b = bankruptcy_step(domination_from_insurance(ins), path)
        payload = {"domination_step": a, "round_trip_step": b,
                   "insurance_step": insurance_bankruptcy_step(ins, path)}
    payload["agree"] = a == b
    _emit(cfg, payload)
    return EXIT_OK if a == b else EXIT_DISAGREE


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, scheme=True):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--seed", type=int)
    if scheme:
        p.add_argument("--scheme", help="doubling|entropy|generic|table or a JSON scheme spec")
        p.add_argument("--eta", type=float)
        p.add_argument("--h", type=float, help="entropy bound for the entropy scheme")
        p.add_argument("--quantization", help="JSON quantization for the generic scheme")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="insurelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte-Carlo bankruptcy estimate")
    _common(s)
    s.add_argument("--pmf", help="JSON pmf")
    s.add_argument("--class", dest="model_class", help="uniform|monotone_entropy or JSON class")
    s.add_argument("--max-M", dest="max_M", type=int)
    s.add_argument("--class-h", dest="class_h", type=float)
    s.add_argument("--members", type=int, help="class members to draw (default 1)")
    s.add_argument("--horizon", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--assert-eta", action="store_true",
                   help="exit 2 if the lower 95%% Wilson bound exceeds eta")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("attack", help="bankruptcy attack on a scheme")
    _common(a)
    a.add_argument("--mode", choices=("allzero", "deceptive"))
    a.add_argument("--target", type=float, help="target bankruptcy probability (default eta)")
    a.add_argument("--class", dest="model_class", help="restrict the adversarial law to a class")
    a.add_argument("--max-M", dest="max_M", type=int)
    a.add_argument("--class-h", dest="class_h", type=float)
    a.add_argument("--grid", type=int, help="epsilon grid resolution (default 1000)")
    a.add_argument("--scan-budget", type=int, help="longest zero run probed (default 1e6)")
    a.add_argument("--max-loss", type=int, help="largest admissible loss L (default 2^62)")
    a.add_argument("--exact-horizon", type=int)
    a.add_argument("--mc-trials", type=int, help="MC trials at horizon M (default 10000)")
    a.add_argument("--pmf", help="decoy p for --mode deceptive")
    a.add_argument("--alpha", type=float, help="entry slack alpha (default 0.1)")
    a.add_argument("--epsilon", type=float, help="divergence budget (default 1/(16 ln2 N^8))")
    a.add_argument("--budget", type=int, help="head-string enumeration budget (default 10000)")
    a.add_argument("--trials", type=int)
    a.add_argument("--horizon", type=int)
    a.set_defaults(func=cmd_attack)

    v = sub.add_parser("verify-lemmas", help="run lemma property suites")
    _common(v, scheme=False)
    v.add_argument("--lemma", choices=LEMMAS + ("all",))
    v.add_argument("--trials", type=int)
    v.add_argument("--grid", choices=("default",))
    v.add_argument("--instances", type=int, help="jn instances (default 60)")
    v.set_defaults(func=cmd_verify_lemmas)

    c = sub.add_parser("convert", help="insurance/domination conversion on a loss path")
    _common(c)
    c.add_argument("--insurance", help="JSON insurance scheme {entry_at, premiums, initial_capital}")
    c.add_argument("--path", help="losses, e.g. 0,0,0,0,1")
    c.add_argument("--path-file")
    c.set_defaults(func=cmd_convert)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except (UsageError, ValidationError, DomainError, KeyError, TypeError) as e:
        sys.stderr.write(f"insurelab: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
