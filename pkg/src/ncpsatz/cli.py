"""Command-line front end.

Exit codes: 0 positive answer (certificate, bounded, ...), 1 negative answer
(witness, unbounded, ...), 2 indeterminate, 64 usage or input error.
Reports are JSON on stdout with floats rounded to 12 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import certify, moment, pencil, sdp
from .domination import DominationIndeterminate, check_domination, domination_residual
from .freealg import MalformedInput, DimensionError, ParseError, format_poly, nvars_in_text, parse_poly

DEFAULT_SEED = 20240101
EXIT_OK, EXIT_NEG, EXIT_INDET, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


REPORT_SCHEMA = {
    "type": "object",
    "required": ["command", "status", "exit_code", "residuals", "result", "config"],
    "properties": {
        "command": {"type": "string"},
        "status": {"type": "string"},
        "exit_code": {"type": "integer", "enum": [0, 1, 2]},
        "residuals": {"type": "object", "additionalProperties": {"type": ["number", "string", "null"]}},
        "result": {"type": "object"},
        "config": {
            "type": "object",
            "required": ["seed"],
            "properties": {"seed": {"type": "integer"}},
        },
    },
}


def report_schema_validate(report) -> bool:
    """True if ``report`` matches :data:`REPORT_SCHEMA`; raises with offending paths otherwise."""
    errors = sorted(jsonschema.Draft7Validator(REPORT_SCHEMA).iter_errors(report), key=lambda e: list(e.path))
    if errors:
        lines = ["/".join(str(p) for p in e.absolute_path) + ": " + e.message for e in errors]
        raise jsonschema.ValidationError("; ".join(lines))
    return True


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    degree: int | None = None
    feas_tol: float = 1e-8
    witness_tol: float = certify.WITNESS_TOL
    verify_tol: float = certify.VERIFY_TOL
    rank_tol: float = 1e-9
    seed: int = DEFAULT_SEED
    fmt: str = "json"

    def __post_init__(self):
        for name in ("feas_tol", "witness_tol", "verify_tol", "rank_tol"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")

    def to_json(self):
        return {"degree": self.degree, "feas_tol": self.feas_tol, "witness_tol": self.witness_tol,
                "verify_tol": self.verify_tol, "rank_tol": self.rank_tol, "seed": self.seed}


# ---------------------------------------------------------------- output

def _round(x):
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, np.ndarray):
        return _round(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    return x


def dumps(report) -> str:
    return json.dumps(_round(report), indent=2, sort_keys=True)


def _report(cfg, status, code, residuals, result):
    return {"command": cfg.command, "status": status, "exit_code": code,
            "residuals": residuals, "result": result, "config": cfg.to_json()}


# ---------------------------------------------------------------- inputs

def _read(text):
    if text is not None and os.path.isfile(text):
        with open(text) as fh:
            return fh.read()
    return text


def _guess_nvars(*texts):
    return max([nvars_in_text(t) for t in texts if t] + [1])


def load_pencil(text, g=None) -> pencil.MonicPencil:
    """Pencil from JSON ``{"A": [...]}`` or from a degree-1 polynomial string."""
    text = _read(text)
    s = text.strip()
    if s.startswith("{"):
        try:
            L = pencil.MonicPencil.from_json(json.loads(s))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedInput(f"bad pencil JSON: {exc}") from None
        if g is not None and L.nvars != g:
            raise DimensionError(f"pencil has {L.nvars} variables, expected {g}")
        return L
    return pencil.MonicPencil.from_poly(parse_poly(s, g or nvars_in_text(s)))


def _pencil_nvars(text):
    text = _read(text)
    s = text.strip()
    if s.startswith("{"):
        try:
            return len(json.loads(s)["A"])
        except (json.JSONDecodeError, KeyError, TypeError):
            return 1
    return nvars_in_text(s)


def _load_pq(args):
    p_text = _read(args.p)
    q_text = _read(args.q) if args.q else None
    if args.L:
        g = args.nvars or max(_guess_nvars(p_text), _pencil_nvars(args.L))
        L = load_pencil(args.L, g)
        q = L.as_poly()
    elif q_text:
        g = args.nvars or _guess_nvars(p_text, q_text)
        q = parse_poly(q_text, g)
    else:
        raise UsageError("one of -q or -L is required")
    return parse_poly(p_text, g), q


def _load_X(text):
    data = json.loads(_read(text))
    if isinstance(data, dict):
        data = data["X"]
    return [np.atleast_2d(np.asarray(x, dtype=float)) for x in data]


# ---------------------------------------------------------------- commands

def cmd_certify(args, cfg):
    p, q = _load_pq(args)
    res = certify.certify_nonneg(p, q, mode=args.mode, d=cfg.degree, witness_tol=cfg.witness_tol,
                                 verify_tol=cfg.verify_tol, seed=cfg.seed)
    result = {"mode": res.mode, "d": res.d, "sdp_status": res.details.get("sdp_status")}
    residuals = {"sdp_" + k: v for k, v in (res.details.get("sdp_residuals") or {}).items()}
    if res.status == "certificate":
        residuals["certificate"] = res.residual
        result["certificate"] = res.certificate.to_json()
        result["degrees"] = res.certificate.degrees()
        return _report(cfg, "certificate", EXIT_OK, residuals, result)
    if res.status == "witness":
        W = res.witness
        residuals.update({"gns_" + k: v for k, v in W.residuals.items()})
        residuals["q_min_eig"] = res.details.get("q_min_eig")
        residuals["value"] = W.value
        result["witness"] = W.to_json()
        return _report(cfg, "witness", EXIT_NEG, residuals, result)
    result["reason"] = res.details.get("reason")
    return _report(cfg, "indeterminate", EXIT_INDET, residuals, result)


def cmd_refute(args, cfg):
    p, q = _load_pq(args)
    if q.degree > 1:
        L, _ = pencil.linearize(q)
    else:
        L = pencil.MonicPencil.from_poly(q)
    d = certify.default_degree(p) if cfg.degree is None else cfg.degree
    ref = moment.refute(p, L, d, witness_tol=cfg.witness_tol, seed=cfg.seed)
    residuals = {"sdp_" + k: v for k, v in (ref.details.get("sdp_residuals") or {}).items()}
    residuals["optimum"] = ref.optimum
    result = {"d": d, "sdp_status": ref.details.get("sdp_status"), "tau": ref.details.get("tau")}
    if ref.status == "witness":
        W = ref.witness
        residuals.update({"gns_" + k: v for k, v in W.residuals.items()})
        residuals["q_min_eig"] = float(np.linalg.eigvalsh(q(W.X))[0])
        residuals["value"] = W.value
        result["witness"] = W.to_json()
        return _report(cfg, "witness", EXIT_NEG, residuals, result)
    if ref.status == "no-refutation":
        return _report(cfg, "no-refutation", EXIT_OK, residuals, result)
    result["attempts"] = ref.details.get("attempts")
    return _report(cfg, "indeterminate", EXIT_INDET, residuals, result)


def cmd_dominate(args, cfg):
    if not (args.L and args.Lp):
        raise UsageError("dominate needs -L and --Lp")
    g = args.nvars or max(_pencil_nvars(args.L), _pencil_nvars(args.Lp))
    L, Lp = load_pencil(args.L, g), load_pencil(args.Lp, g)
    try:
        out = check_domination(L, Lp, seed=cfg.seed)
    except DominationIndeterminate as exc:
        return _report(cfg, "indeterminate", EXIT_INDET, {}, {"reason": str(exc)})
    if isinstance(out, moment.Witness):
        residuals = {"L_min_eig": L.min_eig(out.X), "Lp_min_eig": Lp.min_eig(out.X), "value": out.value}
        residuals.update({"gns_" + k: v for k, v in out.residuals.items()})
        return _report(cfg, "witness", EXIT_NEG, residuals, {"witness": out.to_json()})
    resid = domination_residual(L, Lp, out)
    return _report(cfg, "certificate", EXIT_OK, {"identity": resid}, {"certificate": out.to_json()})


def cmd_normalize(args, cfg):
    q_text = _read(args.q)
    if not q_text:
        raise UsageError("normalize needs -q")
    g = args.nvars or _guess_nvars(q_text)
    q = parse_poly(q_text, g)
    try:
        L, dec = pencil.linearize(q)
    except pencil.NotConcave as exc:
        return _report(cfg, "not-concave", EXIT_NEG, {}, {"reason": str(exc)})
    resid = (dec.reconstruct() - q).max_abs_coeff()
    return _report(cfg, "pencil", EXIT_OK, {"decomposition": resid},
                   {"pencil": L.to_json(), "Lambda": format_poly(dec.Lambda),
                    "s": dec.s.to_dict() if dec.rank else None, "rank": dec.rank})


def cmd_bounded(args, cfg):
    if not args.L:
        raise UsageError("bounded needs -L")
    L = load_pencil(args.L, args.nvars)
    try:
        ok = pencil.is_bounded(L)
    except pencil.Indeterminate as exc:
        return _report(cfg, "indeterminate", EXIT_INDET, {}, {"reason": str(exc)})
    if ok:
        # a bounded domain admits a unit certificate; its identity residual is the verifiable part
        try:
            resid = pencil.unit_certificate(L).residual(L)
        except (pencil.NoUnitCertificate, pencil.Indeterminate) as exc:
            return _report(cfg, "indeterminate", EXIT_INDET, {}, {"reason": str(exc)})
        return _report(cfg, "bounded", EXIT_OK, {"unit_identity": resid}, {})
    return _report(cfg, "unbounded", EXIT_NEG, {}, {})


def cmd_unitcert(args, cfg):
    if not args.L:
        raise UsageError("unitcert needs -L")
    L = load_pencil(args.L, args.nvars)
    try:
        uc = pencil.unit_certificate(L)
    except pencil.NoUnitCertificate as exc:
        lo = float(np.linalg.eigvalsh(exc.combination)[0])
        return _report(cfg, "no-certificate", EXIT_NEG, {"combination_min_eig": lo},
                       {"coefficients": exc.coeffs, "combination": exc.combination})
    except pencil.Indeterminate as exc:
        return _report(cfg, "indeterminate", EXIT_INDET, {}, {"reason": str(exc)})
    return _report(cfg, "certificate", EXIT_OK, {"identity": uc.residual(L)},
                   {"W": [w for w in uc.W], "H": uc.H})


def cmd_gns(args, cfg):
    if not args.moments:
        raise UsageError("gns needs --moments FILE")
    data = json.loads(_read(args.moments))
    from .freealg import parse_scalar
    g, nu = int(data["nvars"]), int(data["nu"])
    values = {}
    for ws, v in data["values"].items():
        P = parse_scalar(ws, g)
        (w,) = P.terms
        values[w] = np.atleast_2d(np.asarray(v, dtype=float))
    lam = moment.MomentFunctional(g, nu, int(data["degree"]), values)
    k = cfg.degree if cfg.degree is not None else (lam.degree - 2) // 2
    flat = moment.flatness_check(lam, k, cfg.rank_tol)
    try:
        W = moment.gns_extract(lam, k)
    except moment.SingularMomentMatrix as exc:
        return _report(cfg, "singular", EXIT_INDET, {}, {"reason": str(exc), "flatness": flat})
    W.residuals = moment.verify_witness(lam, W, k)
    return _report(cfg, "witness", EXIT_OK, dict(W.residuals), {"witness": W.to_json(), "flatness": flat})


def cmd_eval(args, cfg):
    p_text = _read(args.p)
    if not p_text:
        raise UsageError("eval needs -p")
    if args.point:
        X = _load_X(args.point)
        g = args.nvars or max(_guess_nvars(p_text), len(X))
        p = parse_poly(p_text, g)
        val = p(X)
        eig = np.linalg.eigvalsh((val + val.T) / 2)
        code = EXIT_OK if eig[0] >= -cfg.witness_tol else EXIT_NEG
        return _report(cfg, "psd" if code == EXIT_OK else "not-psd", code, {"min_eig": eig[0]},
                       {"value": val, "eigenvalues": eig})
    p, q = _load_pq(args)
    rep = certify.random_eval_check(p, q, trials=args.trials, seed=cfg.seed)
    result = {"samples": rep.samples, "levels": list(rep.levels)}
    if rep.falsified:
        result["witness"] = {"X": rep.witness}
        return _report(cfg, "falsified", EXIT_NEG, {"min_eig": rep.min_eig}, result)
    return _report(cfg, "not-falsified", EXIT_OK, {"min_eig": rep.min_eig}, result)


def cmd_export_sdpa(args, cfg):
    if not args.sdpa_out:
        raise UsageError("export-sdpa needs --sdpa-out PATH")
    p, q = _load_pq(args)
    d = certify.default_degree(p) if cfg.degree is None else cfg.degree
    if args.dual:
        L = pencil.MonicPencil.from_poly(q)
        prob = moment.assemble_refutation_sdp(p, L, d).problem
    else:
        prob = certify.assemble_membership_sdp(p, certify.QuadModuleSpec([q], d, d, p.nrows, p.nvars))
    text = sdp.export_sdpa(prob)
    with open(args.sdpa_out, "w") as fh:
        fh.write(text)
    return _report(cfg, "written", EXIT_OK, {}, {"path": args.sdpa_out, "m": prob.m, "blocks": prob.blocks})


COMMANDS = {
    "certify": cmd_certify,
    "refute": cmd_refute,
    "dominate": cmd_dominate,
    "normalize": cmd_normalize,
    "bounded": cmd_bounded,
    "unitcert": cmd_unitcert,
    "gns": cmd_gns,
    "eval": cmd_eval,
    "export-sdpa": cmd_export_sdpa,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    ap = _Parser(prog="ncpsatz", description="Certificates and witnesses for nc polynomial positivity on LMI domains.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("-p", help="polynomial (inline or file)")
    ap.add_argument("-q", help="monic constraint polynomial (inline or file)")
    ap.add_argument("-L", help="monic pencil: JSON file/string or degree-1 polynomial")
    ap.add_argument("--Lp", help="second pencil for dominate")
    ap.add_argument("--nvars", type=int, help="number of variables (default: inferred)")
    ap.add_argument("--degree", type=int, help="degree parameter d (default: smallest with deg p <= 2d+1)")
    ap.add_argument("--mode", choices=["auto", "linear", "concave"], default="auto")
    ap.add_argument("--tol", type=float, default=1e-8, help="solver feasibility tolerance")
    ap.add_argument("--witness-tol", type=float, default=certify.WITNESS_TOL)
    ap.add_argument("--verify-tol", type=float, default=certify.VERIFY_TOL)
    ap.add_argument("--rank-tol", type=float, default=1e-9)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--format", choices=["json"], default="json")
    ap.add_argument("--sdpa-out", help="output path for export-sdpa")
    ap.add_argument("--dual", action="store_true", help="export-sdpa: write the moment SDP instead")
    ap.add_argument("--point", help="eval: JSON list of matrices")
    ap.add_argument("--trials", type=int, default=100, help="eval: random samples when no --point")
    ap.add_argument("--moments", help="gns: moment functional JSON")
    return ap


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.degree is not None and args.degree < 0:
            raise UsageError("--degree must be nonnegative")
        cfg = RunConfig(args.command, {"p": args.p, "q": args.q, "L": args.L}, args.degree, args.tol,
                        args.witness_tol, args.verify_tol, args.rank_tol, args.seed, args.format)
        report = COMMANDS[args.command](args, cfg)
    except (UsageError, ParseError, MalformedInput, DimensionError, certify.DegreeError,
            pencil.NotMonic, ValueError, KeyError, OSError) as exc:
        print(f"ncpsatz: error: {exc}", file=err)
        return EXIT_USAGE
    out.write(dumps(report) + "\n")
    return report["exit_code"]


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
