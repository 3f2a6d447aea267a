"""Render figures from lorwave CSV/JSON artifacts.

Three figure kinds:

- energy:      E_k(s) trace with the fitted Groenwall envelope
               E_k(t0) exp(C (s - t0)) from the verify-energy report
- heatmap:     |u|(t, x) from a dense field.csv, with characteristic
               surfaces and coordinate light cones overlaid
- convergence: spatial and temporal error curves from the convergence
               report

Rendering is read-only over its inputs and deterministic: fixed style,
fixed PNG metadata, no timestamps.  Same inputs give byte-identical
output files.
"""

from __future__ import annotations

import argparse
import csv
import json
import pathlib
import sys
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_PNG_METADATA = {"Software": "lorwave-plots"}

KINDS = ("energy", "heatmap", "convergence")


class SchemaMismatch(Exception):
    """Figure spec or input file does not match the documented schema."""


class MissingColumn(Exception):
    """A required CSV column is absent."""


@dataclass
class FigureSpec:
    kind: str
    inputs: dict
    out: str
    overlays: list = field(default_factory=list)
    title: str = ""

    @classmethod
    def from_file(cls, path):
        try:
            raw = json.loads(pathlib.Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaMismatch(f"cannot read figure spec {path}: {exc}")
        for key in ("kind", "inputs", "out"):
            if key not in raw:
                raise SchemaMismatch(f"figure spec missing {key!r}")
        if raw["kind"] not in KINDS:
            raise SchemaMismatch(f"unknown figure kind {raw['kind']!r}")
        return cls(kind=raw["kind"], inputs=raw["inputs"], out=raw["out"],
                   overlays=raw.get("overlays", []),
                   title=raw.get("title", ""))


def read_csv_columns(path, required):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise MissingColumn(f"{path}: empty file")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise SchemaMismatch(f"cannot read {path}: {exc}")
    index = {name: i for i, name in enumerate(header)}
    for name in required:
        if name not in index:
            raise MissingColumn(f"{path}: missing column {name!r}")
    data = np.array([[float(row[index[name]]) for name in required]
                     for row in rows])
    if data.size == 0:
        raise MissingColumn(f"{path}: no data rows")
    return {name: data[:, i] for i, name in enumerate(required)}


def _load_json(path):
    try:
        return json.loads(pathlib.Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"cannot read {path}: {exc}")


def _resolve(base, rel):
    return pathlib.Path(base) / rel if base else pathlib.Path(rel)


# --- figure kinds ----------------------------------------------------------------


def _render_energy(spec, artifacts, ax):
    cols = read_csv_columns(_resolve(artifacts, spec.inputs["trace"]),
                            ["s", "E_k", "src_norm_sq"])
    s, E = cols["s"], cols["E_k"]
    ax.plot(s, E, color="#1f4e79", lw=1.4, label="E_k(s)")
    report = _load_json(_resolve(artifacts, spec.inputs["report"]))
    entries = [e for e in report.get("entries", []) if e.get("grid") == "base"]
    if entries:
        k_want = spec.inputs.get("k")
        entry = next((e for e in entries if k_want is None
                      or float(e["k"]) == float(k_want)), entries[0])
        C = float(entry["fitted_C"])
        env = E[0] * np.exp(C * (s - s[0]))
        ax.plot(s, env, "--", color="#b03030", lw=1.2,
                label=f"E(t0) exp(C (s - t0)), C = {C:.4g}")
    ax.set_xlabel("s")
    ax.set_ylabel("energy")
    ax.legend(loc="best")


def _render_heatmap(spec, artifacts, ax):
    cols = read_csv_columns(_resolve(artifacts, spec.inputs["field"]),
                            ["t", "x", "u0_re", "u0_im"])
    ts = np.unique(cols["t"])
    xs = np.unique(cols["x"])
    mag = np.abs(cols["u0_re"] + 1j * cols["u0_im"])
    if mag.size != ts.size * xs.size:
        raise SchemaMismatch("field.csv is not a dense (t, x) grid")
    grid = mag.reshape(ts.size, xs.size)
    mesh = ax.pcolormesh(xs, ts, grid, cmap="magma", shading="nearest")
    plt.colorbar(mesh, ax=ax, label="|u|")
    for overlay in spec.overlays:
        kind = overlay.get("kind")
        if kind == "surface":
            sc = read_csv_columns(_resolve(artifacts, overlay["path"]),
                                  ["x", "sigma"])
            inside = (sc["sigma"] >= ts.min()) & (sc["sigma"] <= ts.max())
            ax.plot(sc["x"][inside], sc["sigma"][inside], color="#40c4a0",
                    lw=1.3, label=overlay.get("label", "surface"))
        elif kind == "cone":
            t0, x0 = overlay["apex"]
            speed = overlay.get("speed", 1.0)
            sgn = -1.0 if overlay.get("direction", "future") == "past" else 1.0
            t_line = t0 + sgn * np.abs(xs - x0) / speed
            inside = (t_line >= ts.min()) & (t_line <= ts.max())
            ax.plot(xs[inside], t_line[inside], "--", color="#8ecae6",
                    lw=1.0, label=overlay.get("label", "cone"))
        else:
            raise SchemaMismatch(f"unknown overlay kind {kind!r}")
    if spec.overlays:
        ax.legend(loc="upper left")
    ax.set_xlabel("x")
    ax.set_ylabel("t")


def _render_convergence(spec, artifacts, ax):
    report = _load_json(_resolve(artifacts, spec.inputs["report"]))
    if "spatial" not in report and "temporal" not in report:
        raise SchemaMismatch("convergence report has no spatial/temporal data")
    if "spatial" in report:
        sp = report["spatial"]
        ax.loglog(sp["N"], sp["errors"], "o-", color="#1f4e79",
                  label="spatial (fixed dt)")
        ax.set_xlabel("N")
    if "temporal" in report:
        tp = report["temporal"]
        ax2 = ax.twiny()
        ax2.loglog(tp["dts"], tp["errors"], "s-", color="#b03030",
                   label="temporal (fixed N)")
        dts = np.asarray(tp["dts"], dtype=float)
        guide = tp["errors"][0] * (dts / dts[0]) ** 4
        ax2.loglog(dts, guide, ":", color="#b03030", alpha=0.6,
                   label="dt^4 guide")
        ax2.set_xlabel("dt")
        ax2.legend(loc="lower right")
        ax2.grid(False)
    ax.set_ylabel("max error")
    ax.legend(loc="upper left")


_RENDERERS = {
    "energy": _render_energy,
    "heatmap": _render_heatmap,
    "convergence": _render_convergence,
}

_REQUIRED_INPUTS = {
    "energy": ("trace", "report"),
    "heatmap": ("field",),
    "convergence": ("report",),
}


def render(spec, artifacts=None, out_dir=None):
    """Render one figure spec; returns the output path."""
    if not isinstance(spec, FigureSpec):
        spec = FigureSpec.from_file(spec)
    for key in _REQUIRED_INPUTS[spec.kind]:
        if key not in spec.inputs:
            raise SchemaMismatch(
                f"{spec.kind} figure needs inputs.{key}")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            _RENDERERS[spec.kind](spec, artifacts, ax)
            if spec.title:
                ax.set_title(spec.title)
            out_path = _resolve(out_dir, spec.out)
            out_path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out_path, metadata=dict(_PNG_METADATA))
        finally:
            plt.close(fig)
    return out_path


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lorwave-render",
        description="Render figures from lorwave artifacts")
    parser.add_argument("--spec", required=True, action="append",
                        help="figure spec JSON (repeatable)")
    parser.add_argument("--artifacts", default=None,
                        help="directory input paths are relative to")
    parser.add_argument("--out-dir", default=None,
                        help="directory output paths are relative to")
    args = parser.parse_args(argv)
    try:
        for spec_path in args.spec:
            out = render(spec_path, artifacts=args.artifacts,
                         out_dir=args.out_dir)
            print(f"rendered {out}")
    except (SchemaMismatch, MissingColumn) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
