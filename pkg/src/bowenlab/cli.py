"""Command-line entry point: ``bowenlab <command> [--config FILE] [flags]``.

Configuration is a JSON object with the blocks ``family``, ``construction``,
``perturbation``, ``numeric`` and ``output`` (plus ``command`` and
``threads``). Unknown keys are rejected; command-line flags override the file.
Reports are JSON with ``"schema": 1``; pressure curves can also be written as
CSV.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import BowenLabError, InfeasibleConfig, NumericalFailure
from .families import (
    CATALOG, FamilyDescriptor, FamilyId, PerturbationSequence, PerturbationStep,
    mayer_dimension, poles_by_count, pole_table, theoretical_dimension,
)

SCHEMA = 1
COMMANDS = ("dim", "pressure", "poles", "escape-bound", "escape-check", "schedule",
            "selftest", "formula")
CONSTRUCTIONS = ("mayer", "ku-escape", "ku-affine")

DEFAULTS = {
    "family": {"id": None, "m": 1, "mu": 1.0, "num": None, "den": None, "q": 1,
               "rho": None, "beta": 0.0, "M": 1, "alpha": 0.0},
    "construction": {"kind": None, "s0": 0.9, "s1": 0.03, "M1": None, "N_t": None, "S": None,
                     "S_star": None, "epsilon": None, "R2": None, "t_target": None, "xi": None,
                     "pole_budget": None, "blocks": 1, "epsilon_t": None, "delta_t": None,
                     "b_index": None},
    "perturbation": {"mode": "Zero", "epsilon": 0.0, "delta": 0.0, "rng_seed": 0,
                     "shift": [0.0, 0.0], "scale": [1.0, 0.0], "steps": []},
    "numeric": {"t": None, "t_grid": "0.1:0.5:0.1", "t_bracket": "0:1", "depth": 6,
                "word_cap": 200_000, "tol": 1e-3, "samples": 128, "max_modulus": None,
                "count": 1000, "addresses": 32, "alphabet_size": 10_000, "levels": 3,
                "seed": 0, "pole_budget": 100_000},
    "output": {"path": None, "format": "json"},
}
TOP_KEYS = {"command", "threads", *DEFAULTS}

# flag -> (block, key, type)
FLAGS = {
    "family": ("family", "id", str), "m": ("family", "m", int), "mu": ("family", "mu", float),
    "q": ("family", "q", int), "rho": ("family", "rho", float),
    "beta": ("family", "beta", float), "M": ("family", "M", int),
    "alpha": ("family", "alpha", float),
    "construction": ("construction", "kind", str), "branches": ("construction", "N_t", int),
    "s0": ("construction", "s0", float), "s1": ("construction", "s1", float),
    "M1": ("construction", "M1", int), "S": ("construction", "S", float),
    "S-star": ("construction", "S_star", float),
    "construction-epsilon": ("construction", "epsilon", float),
    "R2": ("construction", "R2", float), "t-target": ("construction", "t_target", float),
    "blocks": ("construction", "blocks", int),
    "perturb": ("perturbation", "mode", str), "epsilon": ("perturbation", "epsilon", float),
    "delta": ("perturbation", "delta", float), "seed": ("perturbation", "rng_seed", int),
    "t": ("numeric", "t", float), "t-grid": ("numeric", "t_grid", str),
    "t-bracket": ("numeric", "t_bracket", str), "depth": ("numeric", "depth", int),
    "word-cap": ("numeric", "word_cap", int), "tol": ("numeric", "tol", float),
    "samples": ("numeric", "samples", int), "max-modulus": ("numeric", "max_modulus", float),
    "count": ("numeric", "count", int), "addresses": ("numeric", "addresses", int),
    "alphabet-size": ("numeric", "alphabet_size", int), "levels": ("numeric", "levels", int),
    "pole-budget": ("numeric", "pole_budget", int),
    "out": ("output", "path", str), "format": ("output", "format", str),
}


class ConfigError(BowenLabError):
    pass


class AuditFailed(NumericalFailure):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


@dataclass
class RunConfig:
    command: str
    family: dict = field(default_factory=dict)
    construction: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    threads: int = 0

    def to_dict(self) -> dict:
        return {"command": self.command, "family": self.family,
                "construction": self.construction, "perturbation": self.perturbation,
                "numeric": self.numeric, "output": self.output, "threads": self.threads}


def merge_config(file_cfg: dict | None, overrides: dict) -> RunConfig:
    """Defaults <- file <- flags; unknown keys raise ConfigError."""
    cfg = copy.deepcopy(DEFAULTS)
    top = {"command": None, "threads": None}
    for source in (file_cfg or {}, overrides):
        for k, v in source.items():
            if k not in TOP_KEYS:
                raise ConfigError(f"unknown config key {k!r}")
            if k in top:
                if v is not None:
                    top[k] = v
                continue
            if not isinstance(v, dict):
                raise ConfigError(f"block {k!r} must be an object")
            for kk, vv in v.items():
                if kk not in cfg[k]:
                    raise ConfigError(f"unknown key {kk!r} in block {k!r}")
                if vv is not None:
                    cfg[k][kk] = vv
    if top["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    if cfg["output"]["format"] not in ("json", "csv"):
        raise ConfigError("output format must be json or csv")
    return RunConfig(top["command"], threads=resolve_threads(top["threads"]), **cfg)


def resolve_threads(flag) -> int:
    if flag is None:
        flag = os.environ.get("BOWENLAB_THREADS", 0)
    try:
        n = int(flag)
    except ValueError as e:
        raise ConfigError("threads must be an integer") from e
    if n < 0:
        raise ConfigError("threads must be non-negative")
    return n or (os.cpu_count() or 1)


# -- builders from config -----------------------------------------------------------

def _cx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def make_family(block: dict) -> FamilyDescriptor:
    fid = block["id"]
    if fid is None:
        raise ConfigError("family id is required")
    key = str(fid).lower().replace("_", "").replace("-", "")
    aliases = {v.value.lower(): k for k, v in
               {"tan": FamilyId.TAN_POWER, "zsinz": FamilyId.ZSINZ,
                "zcossqrtz": FamilyId.ZCOS_SQRT_Z, "rationalexp": FamilyId.RATIONAL_EXP,
                "formula": FamilyId.FORMULA_ONLY}.items()}
    key = aliases.get(key, key)
    if key not in CATALOG:
        raise ConfigError(f"unknown family {fid!r}")
    if key == "tan":
        return CATALOG[key](int(block["m"]), _cx(block["mu"]))
    if key == "rationalexp":
        if block["num"] is None or block["den"] is None:
            raise ConfigError("rationalexp needs num and den coefficient lists")
        return CATALOG[key]([_cx(c) for c in block["num"]], [_cx(c) for c in block["den"]])
    if key == "formula":
        if block["rho"] is None:
            raise ConfigError("formula family needs rho")
        return CATALOG[key](float(block["rho"]), float(block["beta"]), int(block["M"]),
                            int(block["q"]), float(block["alpha"]))
    if key == "elliptic":
        return CATALOG[key](int(block["q"]))
    return CATALOG[key]()


def make_perturbation(block: dict, additive_only: bool = False) -> PerturbationSequence:
    steps = [PerturbationStep(complex(s[0], s[1]), complex(s[2], s[3])) for s in block["steps"]]
    return PerturbationSequence(block["mode"], float(block["epsilon"]), float(block["delta"]),
                                int(block["rng_seed"]), _cx(block["shift"]),
                                _cx(block["scale"]), steps, additive_only)


def _default_kind(fam: FamilyDescriptor) -> str:
    return "mayer" if fam.family_id is FamilyId.TAN_POWER else "ku-affine"


def build_system(cfg: RunConfig, kind: str | None = None):
    from .constructions import (
        KuAffineConfig, KuEscapeConfig, MayerConfig, build_ku_affine, build_ku_escape,
        build_mayer,
    )
    fam = make_family(cfg.family)
    c = cfg.construction
    kind = kind or c["kind"] or _default_kind(fam)
    if kind not in CONSTRUCTIONS:
        raise ConfigError(f"construction must be one of {', '.join(CONSTRUCTIONS)}")
    opt = {k: v for k, v in c.items() if v is not None}
    if kind == "mayer":
        pole_b = None
        if "b_index" in opt:
            pole_b = pole_table(fam, 64.0).record(int(opt["b_index"]))
        mc = MayerConfig(fam, pole_b=pole_b, s0=opt["s0"], s1=opt["s1"], M1=opt.get("M1"),
                         N_t=int(opt.get("N_t", 8)), t_target=opt.get("t_target", 0.4),
                         perturb=make_perturbation(cfg.perturbation))
        return build_mayer(mc), kind
    if kind == "ku-escape":
        kc = KuEscapeConfig(fam, S=opt.get("S"), S_star=opt.get("S_star"),
                            epsilon=opt.get("epsilon"), R2=opt.get("R2"),
                            t_target=opt.get("t_target", 0.1), xi=opt.get("xi"),
                            perturb=make_perturbation(cfg.perturbation, additive_only=True),
                            pole_budget=int(opt.get("pole_budget", 10_000)),
                            blocks=int(opt["blocks"]))
        return build_ku_escape(kc), kind
    ka = KuAffineConfig(fam, S=opt.get("S"), S_star=opt.get("S_star"),
                        t_target=opt.get("t_target", 0.1), N_t=opt.get("N_t"),
                        epsilon_t=opt.get("epsilon_t"), delta_t=opt.get("delta_t"),
                        perturb=make_perturbation(cfg.perturbation),
                        pole_budget=int(opt.get("pole_budget", 250_000)))
    return build_ku_affine(ka), kind


def target_for(fam: FamilyDescriptor, kind: str) -> float:
    if kind == "mayer":
        return mayer_dimension(fam.order_rho, fam.mayer_alpha, fam.mayer_q)
    return theoretical_dimension(fam.order_rho, fam.beta, fam.mult_star)


def _range(text: str, n: int) -> list:
    try:
        parts = [float(x) for x in str(text).split(":")]
    except ValueError as e:
        raise ConfigError(f"bad range {text!r}") from e
    if len(parts) != n:
        raise ConfigError(f"range {text!r} needs {n} fields")
    return parts


def t_grid(text: str) -> list:
    lo, hi, step = _range(text, 3)
    if step <= 0 or hi < lo:
        raise ConfigError("t grid needs lo <= hi and step > 0")
    k = int(np.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(k + 1)]


# -- commands -----------------------------------------------------------------------

def _audits(system, levels: int = 3) -> dict:
    from .ncifs import audit_containment, audit_contraction, audit_open_set_condition
    n = levels if system.max_levels is None else min(levels, system.max_levels)
    out = {"open_set_condition": all(audit_open_set_condition(system.level(k))
                                     for k in range(1, n + 1)),
           "containment": all(audit_containment(system.level(k)) for k in range(1, n + 1)),
           "levels_audited": n}
    try:
        out["contraction_sup"] = audit_contraction(system, depth=min(3, n))
    except BowenLabError as e:
        out["contraction_sup"] = None
        out["contraction_note"] = str(e)
    return out


def _constants(system) -> dict:
    return system.constants.to_dict() if hasattr(system, "constants") else {}


def cmd_dim(cfg: RunConfig):
    from .ncifs import bowen_dimension
    system, kind = build_system(cfg)
    nm = cfg.numeric
    lo, hi = _range(nm["t_bracket"], 2)
    target = target_for(system.config.fam, kind)
    rep = bowen_dimension(system, lo, hi, tol=float(nm["tol"]), max_depth=int(nm["depth"]),
                          word_cap=int(nm["word_cap"]), theoretical_target=target)
    return {"construction": kind, "constants": _constants(system), "audits": _audits(system),
            "dimension": rep.to_dict(), "theoretical_target": target}


def cmd_pressure(cfg: RunConfig):
    from .ncifs import lower_pressure
    system, kind = build_system(cfg)
    nm = cfg.numeric
    ts = [float(nm["t"])] if nm["t"] is not None else t_grid(nm["t_grid"])
    curves = [lower_pressure(system, t, int(nm["depth"]), int(nm["word_cap"])) for t in ts]
    return {"construction": kind, "constants": _constants(system),
            "pressures": [p.to_dict() for p in curves],
            "theoretical_target": target_for(system.config.fam, kind)}


def pressure_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "depth", "log_Zn_over_n", "method"])
    for p in report["pressures"]:
        for d, v, m in zip(p["depths"], p["log_Zn_over_n"], p["methods"]):
            w.writerow([repr(float(p["t"])), d, repr(float(v)), m])
    return buf.getvalue()


def cmd_poles(cfg: RunConfig):
    from .poles import borel_partial_sum, detect_mult_star, estimate_order
    fam = make_family(cfg.family)
    nm = cfg.numeric
    tab = pole_table(fam, float(nm["max_modulus"])) if nm["max_modulus"] is not None \
        else poles_by_count(fam, int(nm["count"]))
    recs = tab.records()
    out = {"family": fam.family_id.value, "pole_count": len(recs),
           "poles": [{"location": [r.location.real, r.location.imag],
                      "multiplicity": int(r.multiplicity)} for r in recs[:min(len(recs), 50)]]}
    try:
        est = estimate_order(recs)
        out["order_estimate"] = {"rho_hat": est.rho_hat, "ci_halfwidth": est.ci_halfwidth,
                                 "method": est.method.value, "sample_range": list(est.sample_range),
                                 "provenance": "audited"}
        out["mult_star"] = {"value": detect_mult_star(recs, est.rho_hat), "provenance": "audited"}
    except BowenLabError as e:
        out["order_estimate"] = None
        out["order_note"] = str(e)
    if nm["t"] is not None:
        b = borel_partial_sum(recs, float(nm["t"]))
        out["borel_sum"] = {"t": b.exponent_t, "partial_sum": b.partial_sum,
                            "term_count": b.term_count, "max_modulus": b.max_modulus}
    return out


def cmd_escape_bound(cfg: RunConfig):
    from .constructions import cover_alphabet, escape_cover_sum, select_R3_details
    fam = make_family(cfg.family)
    nm = cfg.numeric
    if nm["t"] is None:
        raise ConfigError("escape-bound needs --t")
    t = float(nm["t"])
    sel = select_R3_details(fam, t, int(nm["pole_budget"]), S=cfg.construction["S"])
    tab = cover_alphabet(fam, sel.R3, int(nm["alphabet_size"]))
    rep = escape_cover_sum(fam, t, cfg.construction["S"], tab, int(nm["levels"]),
                           make_perturbation(cfg.perturbation, additive_only=True),
                           direct=len(tab) <= 40)
    d = sel.to_dict()
    return {"R3": {"value": sel.R3, "provenance": "audited",
                   "note": "extrapolated beyond the pole budget" if sel.extrapolated else ""},
            "R3_details": d, "cover_sum": rep.to_dict(), "constants": rep.constants,
            "theoretical_target": theoretical_dimension(fam.order_rho, fam.beta,
                                                        fam.mult_bound_M)}


def cmd_escape_check(cfg: RunConfig):
    from .verify import escape_witness, sample_addresses
    system, kind = build_system(cfg, kind="ku-escape")
    nm = cfg.numeric
    addrs = sample_addresses(system, int(nm["depth"]), int(nm["addresses"]), seed=int(nm["seed"]))
    R2, S = system.constants.value("R2"), system.constants.value("S")
    ws = [escape_witness(system, a, system.config.fam, system.config.perturb, R2, S)
          for a in addrs]
    ok = all(w.escaped and w.near_poles for w in ws)
    rep = {"construction": kind, "constants": _constants(system), "all_escape": ok,
           "witnesses": [w.to_dict() for w in ws]}
    if not ok:
        raise AuditFailed("some limit points do not realise the escape schedule", rep)
    return rep


def cmd_schedule(cfg: RunConfig):
    system, kind = build_system(cfg)
    out = {"construction": kind, "constants": _constants(system)}
    if kind == "ku-escape":
        s = system.schedule
        out["alpha"] = s.alpha[1:]
        out["T"] = [system.schedule.T(n) for n in range(1, min(s.n_levels, 16) + 1)]
    return out


def cmd_selftest(cfg: RunConfig):
    from .ncifs import bowen_dimension, similarity_system
    from .verify import moran_oracle
    rng = np.random.default_rng(cfg.numeric["seed"])
    cases = [[0.25] * 3, [0.5, 0.25]]
    cases += [list(rng.uniform(0.1, 0.45, rng.integers(2, 7))) for _ in range(20)]
    rows, ok = [], True
    for r in cases:
        rep = bowen_dimension(similarity_system(r), 0.0, 2.0, tol=1e-8, max_depth=4)
        exact = moran_oracle(r)
        err = abs(rep.estimate - exact)
        ok &= err < 1e-6
        rows.append({"ratios": r, "moran": exact, "bowen": rep.estimate, "error": err})
    out = {"cases": rows, "passed": bool(ok)}
    if not ok:
        raise AuditFailed("engine disagrees with the Moran oracle", out)
    return out


def cmd_formula(cfg: RunConfig):
    f = cfg.family
    if f["rho"] is None:
        raise ConfigError("formula needs --rho")
    out = {"theoretical_dimension": theoretical_dimension(float(f["rho"]), float(f["beta"]),
                                                          int(f["M"]))}
    out["mayer_dimension"] = mayer_dimension(float(f["rho"]), float(f["alpha"]), int(f["q"]))
    return out


HANDLERS = {"dim": cmd_dim, "pressure": cmd_pressure, "poles": cmd_poles,
            "escape-bound": cmd_escape_bound, "escape-check": cmd_escape_check,
            "schedule": cmd_schedule, "selftest": cmd_selftest, "formula": cmd_formula}


def exit_code(err: BaseException) -> int:
    if isinstance(err, NumericalFailure):
        return 3
    if isinstance(err, (InfeasibleConfig, ConfigError, BowenLabError, ValueError)):
        return 2
    return 3


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value") and isinstance(getattr(o, "value"), str):
        return o.value
    raise TypeError(f"not serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute ``cfg``; returns ``(exit status, report)``."""
    base = {"schema": SCHEMA, "command": cfg.command, "config": cfg.to_dict()}
    try:
        body = HANDLERS[cfg.command](cfg)
    except (BowenLabError, ValueError) as e:
        diag = {"type": type(e).__name__, "message": str(e), "exit_code": exit_code(e)}
        for k in ("achieved", "required"):
            if getattr(e, k, None) is not None:
                diag[k] = getattr(e, k)
        rep = dict(base, error=diag)
        if isinstance(e, AuditFailed):
            rep["result"] = e.report
        return exit_code(e), rep
    return 0, dict(base, result=body)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bowenlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count, 0 = auto (default: $BOWENLAB_THREADS or 0)")
    for flag, (_, _, typ) in FLAGS.items():
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=typ, default=None)
    return p


def parse_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    file_cfg = None
    if ns.config:
        try:
            with open(ns.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from e
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    over: dict = {"command": ns.command, "threads": ns.threads}
    for flag, (block, key, _) in FLAGS.items():
        v = getattr(ns, flag.replace("-", "_"))
        if v is not None:
            over.setdefault(block, {})[key] = v
    return merge_config(file_cfg, over)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except BowenLabError as e:
        sys.stderr.write(dumps({"schema": SCHEMA, "error": {
            "type": type(e).__name__, "message": str(e), "exit_code": 2}}))
        return 2
    code, rep = run(cfg)
    path, fmt = cfg.output["path"], cfg.output["format"]
    if code == 0 and cfg.command == "formula" and path is None:
        sys.stdout.write(f"{rep['result']['theoretical_dimension']!r}\n")
        return 0
    if code == 0 and fmt == "csv" and cfg.command == "pressure":
        text = pressure_csv(rep["result"])
    else:
        text = dumps(rep)
    if code != 0:
        sys.stderr.write(dumps({"schema": SCHEMA, "error": rep["error"]}))
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    elif code == 0:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
