"""Scenario configs, subcommand dispatch, and artifact emission.

One JSON document describes a scenario (spacetime, operator,
discretization, problem, verification, output); subcommands run it and
write machine-readable reports plus CSV artifacts.  Outputs are
byte-deterministic for a fixed config and version: floats are emitted
via repr, JSON keys are sorted, and the random sections used by the
verification subcommands are seeded band-limited series with the seed
recorded in the report.

Exit codes: 0 pass, 2 a verification failed, 1 config or runtime error.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys
from dataclasses import replace

import jsonschema
import numpy as np

from . import __version__
from .cauchy import CauchyData, convergence_study, solve_cauchy
from .energy_verify import (
    energy_trace,
    fit_groenwall_constant,
    verify_energy_estimate,
    verify_slab_estimate,
)
from .errors import ConfigError, LorwaveError
from .expressions import parse_expression
from .geometry import lightlike_graph, make_spacetime
from .goursat import (
    CharacteristicTrace,
    GoursatParams,
    goursat_uniqueness_probe,
    solve_goursat,
    traveling_wave_counterexample,
)
from .greens import green_residual
from .operators import SpacetimeFunction, WaveOperatorSpec
from .sobolev import GridFunction

_EXPR = {"type": "string", "minLength": 1}
_EXPR_LIST = {"type": "array", "items": _EXPR, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["spacetime", "operator", "discretization"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "spacetime": {
            "type": "object",
            "required": ["topology", "t_range"],
            "additionalProperties": False,
            "properties": {
                "topology": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["circle", "line"]},
                        "L": {"type": "number"},
                        "X": {"type": "number"},
                        "G": {"type": "number"},
                    },
                },
                "t_range": {"type": "array", "items": {"type": "number"},
                            "minItems": 2, "maxItems": 2},
                "beta": _EXPR,
                "a": _EXPR,
                "preset": {"enum": ["minkowski", "breathing"]},
                "eps": {"type": "number"},
                "relax_guard": {"type": "boolean"},
            },
        },
        "operator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["dalembert", "klein_gordon"]},
                "mass": {"type": "number"},
                "m": {"type": "integer", "minimum": 1},
                "Z0": {"type": "array"},
                "Z1": {"type": "array"},
                "C": {"type": "array"},
            },
        },
        "discretization": {
            "type": "object",
            "required": ["N"],
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 4},
                "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "problem": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["cauchy", "goursat", "counterexample"]},
                "tau": {"type": "number"},
                "u0": _EXPR_LIST,
                "u1": _EXPR_LIST,
                "source": _EXPR_LIST,
                "surface": {
                    "type": "object",
                    "required": ["shape", "apex"],
                    "properties": {
                        "shape": {"enum": ["future_cone", "past_cone", "line"]},
                        "apex": {"type": "array", "minItems": 2, "maxItems": 2},
                        "slope_sign": {"enum": [-1, 1]},
                    },
                },
                "trace": _EXPR_LIST,
                "t_top": {"type": "number"},
                "params": {"type": "object"},
                "probe": {"type": "boolean"},
                "N": {"type": "integer"},
                "nt": {"type": "integer"},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "energy": {
                    "type": "object",
                    "required": ["k"],
                    "properties": {
                        "k": {"type": "array", "items": {"type": "number"},
                              "minItems": 1},
                        "c_max": {"type": "number"},
                        "stability": {"type": "number"},
                    },
                },
                "slab": {
                    "type": "object",
                    "required": ["k", "t0", "t1"],
                    "properties": {
                        "k": {"type": "array", "items": {"type": "integer"}},
                        "t0": {"type": "number"},
                        "t1": {"type": "number"},
                        "stability": {"type": "number"},
                    },
                },
                "green": {
                    "type": "object",
                    "required": ["surface"],
                    "properties": {
                        "surface": {"type": "object"},
                        "nt": {"type": "integer"},
                        "fields": {"type": "object"},
                        "tolerance": {"type": "number"},
                    },
                },
                "convergence": {
                    "type": "object",
                    "properties": {
                        "spatial_N": {"type": "array"},
                        "dt": {"type": "number"},
                        "temporal_dts": {"type": "array"},
                        "temporal_N": {"type": "integer"},
                        "min_ratio": {"type": "number"},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snapshot_times": {"type": "array", "items": {"type": "number"}},
                "field": {"type": "boolean"},
                "field_rows": {"type": "integer", "minimum": 2},
            },
        },
    },
}


def load_config(path):
    try:
        raw = json.loads(pathlib.Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ConfigError(f"config field {e.json_path}: {e.message}")
    return raw


# --- builders ------------------------------------------------------------------

def build_spacetime(cfg, n_override=None):
    spec = dict(cfg["spacetime"])
    spec["N"] = n_override or cfg["discretization"]["N"]
    return make_spacetime(spec)


def build_operator(cfg):
    op_cfg = cfg.get("operator", {})
    preset = op_cfg.get("preset")
    if preset == "dalembert":
        return WaveOperatorSpec.dalembert()
    if preset == "klein_gordon":
        return WaveOperatorSpec.klein_gordon(op_cfg.get("mass", 1.0))
    if preset is None and "m" in op_cfg:
        return WaveOperatorSpec.custom(
            op_cfg["m"], Z0=op_cfg.get("Z0"), Z1=op_cfg.get("Z1"),
            C=op_cfg.get("C"))
    raise ConfigError("config field $.operator: needs a preset or a rank m")


def _eval_components(exprs, t, x):
    cols = []
    for src in exprs:
        e = parse_expression(src)
        cols.append(np.broadcast_to(np.asarray(e(t, x), dtype=float),
                                    np.shape(x)).astype(complex))
    return np.stack(cols, axis=-1)


def build_cauchy_data(cfg, st):
    prob = cfg["problem"]
    tau = float(prob.get("tau", st.t_range[0]))
    u0 = GridFunction(_eval_components(prob["u0"], tau, st.x), st.L_ref)
    u1 = GridFunction(_eval_components(prob["u1"], tau, st.x), st.L_ref)
    source = None
    if "source" in prob:
        exprs = [parse_expression(s) for s in prob["source"]]

        def source(s, _exprs=exprs, _st=st):
            return np.stack(
                [np.broadcast_to(np.asarray(e(s, _st.x), dtype=float),
                                 (_st.N,)).astype(complex) for e in _exprs],
                axis=-1)
    return CauchyData(tau, u0, u1), source


def solve_kwargs(cfg):
    disc = cfg["discretization"]
    if "dt" in disc:
        return {"dt": disc["dt"]}
    return {"cfl": disc.get("cfl", 0.5)}


def build_surface(st, surf_cfg):
    return lightlike_graph(st, tuple(surf_cfg["apex"]), surf_cfg["shape"],
                           slope_sign=surf_cfg.get("slope_sign", 1))


# --- emission --------------------------------------------------------------------

def write_json(path, payload):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, GoursatParams):
        return obj.__dict__ if hasattr(obj, "__dict__") else str(obj)
    return str(obj)


def _fmt(v):
    return repr(float(v))


def write_snapshot(path, st, u_row, v_row):
    m = u_row.shape[1]
    header = ["x"]
    for i in range(m):
        header += [f"u{i}_re", f"u{i}_im"]
    for i in range(m):
        header += [f"v{i}_re", f"v{i}_im"]
    lines = [",".join(header)]
    for j in range(st.N):
        cells = [_fmt(st.x[j])]
        for i in range(m):
            cells += [_fmt(u_row[j, i].real), _fmt(u_row[j, i].imag)]
        for i in range(m):
            cells += [_fmt(v_row[j, i].real), _fmt(v_row[j, i].imag)]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_field(path, fn, max_rows=201):
    stride = max(1, (fn.nt + max_rows - 1) // max_rows)
    st = fn.spacetime
    ts = fn.times()
    lines = ["t,x,u0_re,u0_im"]
    for i in range(0, fn.nt, stride):
        for j in range(st.N):
            v = fn.values[i, j, 0]
            lines.append(",".join([_fmt(ts[i]), _fmt(st.x[j]),
                                   _fmt(v.real), _fmt(v.imag)]))
    path.write_text("\n".join(lines) + "\n")


def write_surface(path, surf):
    st = surf.spacetime
    lines = ["x,sigma"]
    for j in range(st.N):
        lines.append(f"{_fmt(st.x[j])},{_fmt(surf.sigma[j])}")
    path.write_text("\n".join(lines) + "\n")


def write_energy_trace(path, trace):
    lines = ["s,E_k,src_norm_sq"]
    for s, e, q in zip(trace.s, trace.E, trace.src_sq):
        lines.append(f"{_fmt(s)},{_fmt(e)},{_fmt(q)}")
    path.write_text("\n".join(lines) + "\n")


def _emit_solution(sol, cfg, out):
    output = cfg.get("output", {})
    for t_snap in output.get("snapshot_times", []):
        tag = repr(float(t_snap)).replace("-", "m").replace(".", "p")
        write_snapshot(out / f"snapshot_t{tag}.csv", sol.spacetime,
                       sol.u.eval_slice(t_snap), sol.v.eval_slice(t_snap))
    if output.get("field", False):
        write_field(out / "field.csv", sol.u,
                    max_rows=output.get("field_rows", 201))


# --- subcommands -------------------------------------------------------------------

def cmd_solve_cauchy(cfg, out, seed, quiet):
    st = build_spacetime(cfg)
    op = build_operator(cfg)
    data, source = build_cauchy_data(cfg, st)
    sol = solve_cauchy(op, st, data, source, **solve_kwargs(cfg))
    _emit_solution(sol, cfg, out)
    report = {
        "subcommand": "solve-cauchy", "version": __version__, "seed": seed,
        "status": "ok", "dt": sol.meta["dt"], "n_steps": sol.meta["n_steps"],
        "N": st.N, "t_window": list(sol.meta["t_window"]),
    }
    write_json(out / "report.json", report)
    return 0


def cmd_verify_energy(cfg, out, seed, quiet):
    vcfg = cfg.get("verify", {}).get("energy")
    if vcfg is None:
        raise ConfigError("config field $.verify.energy: required for "
                          "verify-energy")
    ks = vcfg["k"]
    c_max = vcfg.get("c_max", 1e3)
    stability = vcfg.get("stability", 0.1)
    op = build_operator(cfg)
    entries = []
    failed = False
    fits = {}
    for n_mult, label in ((1, "base"), (2, "refined")):
        st = build_spacetime(cfg, n_override=n_mult * cfg["discretization"]["N"])
        data, source = build_cauchy_data(cfg, st)
        sol = solve_cauchy(op, st, data, source, **solve_kwargs(cfg))
        for k in ks:
            tr = energy_trace(sol, k)
            c_fit = fit_groenwall_constant(tr, c_max=c_max)
            rep = verify_energy_estimate(tr, c_fit)
            fits[(k, label)] = c_fit
            if label == "base":
                tag = repr(float(k)).replace("-", "m").replace(".", "p")
                write_energy_trace(out / f"energy_trace_k{tag}.csv", tr)
            entries.append({
                "k": k, "grid": label, "N": st.N, "fitted_C": c_fit,
                "holds": rep["holds"], "worst_pair": list(rep["worst_pair"]),
                "margin": rep["margin"],
                "relative_margin": rep["relative_margin"],
            })
            failed = failed or not rep["holds"]
    ratios = {}
    for k in ks:
        base, refined = fits[(k, "base")], fits[(k, "refined")]
        ratio = abs(refined - base) / max(abs(base), 1e-12)
        ratios[repr(float(k))] = ratio
        failed = failed or ratio > stability
    report = {
        "subcommand": "verify-energy", "version": __version__, "seed": seed,
        "entries": entries, "refinement_ratio": ratios,
        "stability_threshold": stability,
        "status": "fail" if failed else "ok",
    }
    write_json(out / "report.json", report)
    if not quiet:
        for e in entries:
            print(f"k={e['k']} [{e['grid']}] fitted_C={e['fitted_C']:.6g} "
                  f"holds={e['holds']}")
    return 2 if failed else 0


def cmd_verify_slab(cfg, out, seed, quiet):
    vcfg = cfg.get("verify", {}).get("slab")
    if vcfg is None:
        raise ConfigError("config field $.verify.slab: required for "
                          "verify-slab")
    op = build_operator(cfg)
    stability = vcfg.get("stability", 0.1)
    entries = []
    ratios = {}
    failed = False
    for n_mult, label in ((1, "base"), (2, "refined")):
        st = build_spacetime(cfg, n_override=n_mult * cfg["discretization"]["N"])
        data, source = build_cauchy_data(cfg, st)
        sol = solve_cauchy(op, st, data, source, **solve_kwargs(cfg))
        for k in vcfg["k"]:
            rep = verify_slab_estimate(sol, k, vcfg["t0"], vcfg["t1"])
            entries.append({"k": k, "grid": label, "N": st.N,
                            "lhs": rep["lhs"], "rhs": rep["rhs"],
                            "ratio": rep["ratio"]})
            ratios.setdefault(k, {})[label] = rep["ratio"]
    rel_changes = {}
    for k, pair in ratios.items():
        if pair["base"] is None:
            continue
        change = abs(pair["refined"] - pair["base"]) / abs(pair["base"])
        rel_changes[str(k)] = change
        failed = failed or change > stability
    report = {
        "subcommand": "verify-slab", "version": __version__, "seed": seed,
        "entries": entries, "refinement_change": rel_changes,
        "stability_threshold": stability,
        "status": "fail" if failed else "ok",
    }
    write_json(out / "report.json", report)
    return 2 if failed else 0


def _seeded_field(st, nt, seed, m, fcfg):
    from .profiles import plateau_window
    rng = np.random.default_rng(seed)
    k_modes = fcfg.get("k_modes", 3)
    om_max = fcfg.get("om_max", 2.0)
    t_center = fcfg.get("t_center", 0.0)
    t_half = fcfg.get("t_half", 1.26)
    x_flat = fcfg.get("x_flat", 1.2)
    x_supp = fcfg.get("x_supp", 3.2)
    ks = np.arange(-k_modes, k_modes + 1)
    c = rng.normal(size=(m, ks.size)) + 1j * rng.normal(size=(m, ks.size))
    c /= 1 + ks**2
    oms = rng.uniform(-om_max, om_max, size=(m, ks.size))

    def fn(t, x):
        wt = plateau_window((t - t_center) / t_half, 0.4, 1.0)
        wx = plateau_window(x, x_flat, x_supp)
        comps = []
        for i in range(m):
            acc = sum(cc * np.exp(1j * (kk * 2 * np.pi / st.L_ref) * x
                                  + 1j * om * t)
                      for kk, cc, om in zip(ks, c[i], oms[i]))
            comps.append(wt * wx * acc)
        return np.stack(comps, axis=-1)

    return SpacetimeFunction.from_callable(st, fn, nt, m=m)


def cmd_verify_green(cfg, out, seed, quiet):
    vcfg = cfg.get("verify", {}).get("green")
    if vcfg is None:
        raise ConfigError("config field $.verify.green: required for "
                          "verify-green")
    op = build_operator(cfg)
    tol = vcfg.get("tolerance", 1e-3)
    fcfg = vcfg.get("fields", {})
    nt_base = vcfg.get("nt", 769)
    results = []
    for n_mult in (1, 2):
        st = build_spacetime(cfg, n_override=n_mult * cfg["discretization"]["N"])
        surf = build_surface(st, vcfg["surface"])
        nt = (nt_base - 1) * n_mult + 1
        u = _seeded_field(st, nt, seed, op.m, fcfg)
        psi = _seeded_field(st, nt, seed + 1, op.m, fcfg)
        rep = green_residual(op, st, surf, u, psi)
        results.append({"N": st.N, "lhs": rep["lhs"], "rhs": rep["rhs"],
                        "residual": rep["residual"],
                        "relative_residual": rep["relative_residual"]})
    order = float(np.log2(results[0]["relative_residual"]
                          / max(results[1]["relative_residual"], 1e-300)))
    failed = results[0]["relative_residual"] > tol or order < 2.0
    report = {
        "subcommand": "verify-green", "version": __version__, "seed": seed,
        "results": results, "refinement_orders": [order],
        "tolerance": tol, "status": "fail" if failed else "ok",
    }
    write_json(out / "green_report.json", report)
    if not quiet:
        print(f"relative residual {results[0]['relative_residual']:.3e} "
              f"(order {order:.2f})")
    return 2 if failed else 0


def cmd_solve_goursat(cfg, out, seed, quiet):
    prob = cfg["problem"]
    if prob.get("kind") != "goursat":
        raise ConfigError("config field $.problem.kind: must be 'goursat'")
    st = build_spacetime(cfg)
    op = build_operator(cfg)
    surf = build_surface(st, prob["surface"])
    exprs = prob["trace"]
    vals = _eval_components(exprs, surf.sigma, st.x)
    trace = CharacteristicTrace(surf, GridFunction(vals, st.L_ref))
    params = GoursatParams(**prob.get("params", {}))
    t_top = prob.get("t_top")
    rep = solve_goursat(op, st, trace, None, params, t_top=t_top)
    payload = {
        "subcommand": "solve-goursat", "version": __version__, "seed": seed,
        "replay_error": rep.replay_error, "collar_defect": rep.collar_defect,
        "past_compact": rep.past_compact,
        "parameters": {
            "delta0": params.delta0, "lift_fraction": params.lift_fraction,
            "eps_cells": params.eps_cells, "gate": params.gate,
            "collar_patch": params.collar_patch, "cfl": params.cfl,
        },
        "status": "ok",
    }
    if prob.get("probe", False):
        probe = goursat_uniqueness_probe(op, st, trace, None,
                                         params_a=params, t_top=t_top)
        payload["discrepancy"] = probe["relative_discrepancy"]
    _emit_solution(rep.solution, cfg, out)
    write_surface(out / "surface.csv", surf)
    write_json(out / "goursat_report.json", payload)
    return 0


def cmd_convergence(cfg, out, seed, quiet):
    vcfg = cfg.get("verify", {}).get("convergence", {})
    spatial_N = vcfg.get("spatial_N", [16, 32, 64])
    dt = vcfg.get("dt", 1e-3)
    temporal_dts = vcfg.get("temporal_dts", [0.08, 0.04, 0.02])
    temporal_N = vcfg.get("temporal_N", 64)
    min_ratio = vcfg.get("min_ratio", 8.0)

    # manufactured full-spectrum case on the flat cylinder
    c = 1.2
    L = 2 * np.pi

    def g(x):
        return 1.0 / (c + np.cos(x))

    def gpp(x):
        return (np.cos(x) / (c + np.cos(x)) ** 2
                + 2 * np.sin(x) ** 2 / (c + np.cos(x)) ** 3)

    def build(N):
        from .geometry import CircleTopology, Spacetime1D
        st = Spacetime1D(CircleTopology(L), (0.0, 1.0), "1", "1", N)
        data = CauchyData(0.0, GridFunction(g(st.x), L),
                          GridFunction.zeros(N, 1, L))

        def source(s, _st=st):
            return (-np.cos(s) * (g(_st.x) + gpp(_st.x)))[:, None].astype(complex)

        return WaveOperatorSpec.dalembert(), st, data, source

    rep = convergence_study(build, spatial_N, dt,
                            reference=lambda t, x: np.cos(t) * g(x),
                            temporal_dts=temporal_dts, temporal_N=temporal_N)
    failed = any(r < min_ratio for r in rep["spatial"]["ratios"])
    order = rep["temporal"]["observed_order"]
    failed = failed or not (3.7 <= order <= 4.3)
    report = {
        "subcommand": "convergence", "version": __version__, "seed": seed,
        "spatial": rep["spatial"], "temporal": rep["temporal"],
        "min_ratio": min_ratio, "status": "fail" if failed else "ok",
    }
    write_json(out / "report.json", report)
    if not quiet:
        print("spatial ratios:", [f"{r:.1f}" for r in rep["spatial"]["ratios"]])
        print(f"temporal order: {order:.2f}")
    return 2 if failed else 0


def cmd_counterexample(cfg, out, seed, quiet):
    prob = cfg.get("problem", {})
    kwargs = {"N": cfg["discretization"]["N"]}
    topo = cfg["spacetime"]["topology"]
    if topo["kind"] == "line":
        kwargs["X"] = topo["X"]
        kwargs["t_half"] = cfg["spacetime"]["t_range"][1]
    if "nt" in prob:
        kwargs["nt"] = prob["nt"]
    rep = traveling_wave_counterexample(**kwargs)
    failed = (rep["trace_sup"] > 1e-12
              or abs(rep["future_sup"] - rep["max_v"]) > 1e-12 * rep["max_v"]
              or rep["past_compact"]["null_line"]
              or rep["past_compact"]["past_cone"]
              or not rep["past_compact"]["future_cone"])
    payload = {k: rep[k] for k in
               ("residual_sup", "residual_interior", "trace_sup",
                "future_sup", "max_v", "uniqueness_gap", "cone_trace_sup",
                "past_compact")}
    payload.update({
        "subcommand": "counterexample", "version": __version__, "seed": seed,
        "status": "fail" if failed else "ok",
    })
    write_field(out / "field.csv", rep["field"],
                max_rows=cfg.get("output", {}).get("field_rows", 201))
    write_surface(out / "surface.csv", rep["surface"])
    write_json(out / "report.json", payload)
    if not quiet:
        print(f"trace sup {rep['trace_sup']:.2e}, uniqueness gap "
              f"{rep['uniqueness_gap']:.3f}, past_compact={rep['past_compact']}")
    return 2 if failed else 0


COMMANDS = {
    "solve-cauchy": cmd_solve_cauchy,
    "solve-goursat": cmd_solve_goursat,
    "verify-energy": cmd_verify_energy,
    "verify-green": cmd_verify_green,
    "verify-slab": cmd_verify_slab,
    "convergence": cmd_convergence,
    "counterexample": cmd_counterexample,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lorwave",
        description="Wave equations on globally hyperbolic 1+1 spacetimes")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out-dir", default="lorwave_out")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--resolution", type=int, default=None,
                        help="override discretization.N")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.resolution is not None:
            cfg["discretization"]["N"] = args.resolution
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out = pathlib.Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.subcommand](cfg, out, seed, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LorwaveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"wrote artifacts to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
