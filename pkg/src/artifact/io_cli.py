"""Dataset and result file formats plus the command-line entry points.

File formats (all plain text, floats written at %.17g so every value
round-trips bit-exactly):

  dataset CSV        header `s1,s2,y[,x1..xp]`; intercept is implicit
  grid summary CSV   columns x, y, field, median, lower, upper, flag
  wombling CSV       one row per segment with average-measure summaries
  curve document     JSON, see the curves module
  run config         JSON key/value document mirroring RunConfig

The CLI wires these onto the fitting, differential and wombling engines:

  simulate | fit | differentials | womble | serve

Errors exit with status 2 and a single-line JSON object on stderr.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .curves import curve_from_json, realize
from .differential_gp import FIELDS, GridSummary, sample_differentials
from .errors import ArtifactError, ConfigError, ParseError
from .mcmc import (
    PriorConfig,
    SpatialDataset,
    default_priors,
    fit,
    load_chains,
    save_chains,
)
from .simulate import generate, get_pattern
from .wombling import WomblingResult, sample_wombling

_G = "%.17g"


def _fmt(x):
    return _G % float(x)


# ---------------------------------------------------------------------------
# dataset CSV

def parse_dataset(fh, label="<dataset>") -> SpatialDataset:
    """Parse a `s1,s2,y[,x1..xp]` CSV stream; the design gets an intercept
    column."""
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{label}: empty file") from None
    header = [h.strip() for h in header]
    if header[:3] != ["s1", "s2", "y"] or len(header) < 3:
        raise ParseError(
            f"{label}: line 1: header must start with s1,s2,y"
        )
    p_extra = len(header) - 3
    loc, y, xs = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"{label}: line {lineno}: expected {len(header)} fields,"
                f" got {len(row)}"
            )
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ParseError(
                f"{label}: line {lineno}: non-numeric value"
            ) from None
        loc.append(vals[:2])
        y.append(vals[2])
        xs.append(vals[3:])
    if not loc:
        raise ParseError(f"{label}: no data rows")
    L = len(loc)
    X = np.concatenate(
        [np.ones((L, 1)), np.asarray(xs, dtype=float).reshape(L, p_extra)],
        axis=1,
    )
    return SpatialDataset(
        locations=np.asarray(loc, dtype=float),
        X=X,
        y=np.asarray(y, dtype=float),
    )


def load_dataset(path) -> SpatialDataset:
    """parse_dataset over a file path."""
    with open(path, newline="") as fh:
        return parse_dataset(fh, label=str(path))


def write_dataset(data: SpatialDataset, path):
    """Inverse of load_dataset (covariates get canonical names x1..xp)."""
    p_extra = data.p - 1
    header = ["s1", "s2", "y"] + [f"x{i + 1}" for i in range(p_extra)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.L):
            row = [
                _fmt(data.locations[i, 0]),
                _fmt(data.locations[i, 1]),
                _fmt(data.y[i]),
            ]
            row += [_fmt(v) for v in data.X[i, 1:]]
            w.writerow(row)


# ---------------------------------------------------------------------------
# grid summary CSV

def grid_summary_text(summary: GridSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "field", "median", "lower", "upper", "flag"])
    for name in FIELDS:
        med = summary.median[name]
        lo = summary.lower[name]
        hi = summary.upper[name]
        fl = summary.flag[name]
        for g in range(summary.grid.shape[0]):
            w.writerow(
                [
                    _fmt(summary.grid[g, 0]),
                    _fmt(summary.grid[g, 1]),
                    name,
                    _fmt(med[g]),
                    _fmt(lo[g]),
                    _fmt(hi[g]),
                    str(fl[g]),
                ]
            )
    return buf.getvalue()


def write_grid_summary(summary: GridSummary, path):
    with open(path, "w", newline="") as fh:
        fh.write(grid_summary_text(summary))


def read_grid_summary(path) -> GridSummary:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "y", "field", "median", "lower", "upper", "flag"]:
            raise ParseError(f"{path}: not a grid summary file")
        rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: no rows")
    by_field = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != 7:
            raise ParseError(f"{path}: line {lineno}: expected 7 fields")
        try:
            x, y = float(row[0]), float(row[1])
            med, lo, hi = float(row[3]), float(row[4]), float(row[5])
        except ValueError:
            raise ParseError(
                f"{path}: line {lineno}: non-numeric value"
            ) from None
        by_field.setdefault(row[2], []).append((x, y, med, lo, hi, row[6]))
    first = next(iter(by_field.values()))
    grid = np.array([[r[0], r[1]] for r in first])
    median, lower, upper, flag = {}, {}, {}, {}
    for name, recs in by_field.items():
        if len(recs) != len(first):
            raise ParseError(f"{path}: field {name}: inconsistent grid")
        median[name] = np.array([r[2] for r in recs])
        lower[name] = np.array([r[3] for r in recs])
        upper[name] = np.array([r[4] for r in recs])
        flag[name] = np.array([r[5] for r in recs], dtype=object)
    return GridSummary(
        grid=grid, alpha=float("nan"), median=median, lower=lower,
        upper=upper, flag=flag,
    )


# ---------------------------------------------------------------------------
# wombling tables

def womb_segment_rows(res: WomblingResult):
    """Per-segment export rows (average measures, comparable across segment lengths)."""
    rows = []
    avg = res.segment_average
    for i in range(res.lengths.size):
        rows.append(
            {
                "segment": i,
                "start_x": float(res.starts[i, 0]),
                "start_y": float(res.starts[i, 1]),
                "length": float(res.lengths[i]),
                "avg_gradient_median": float(avg.median[i, 0]),
                "avg_gradient_lower": float(avg.lower[i, 0]),
                "avg_gradient_upper": float(avg.upper[i, 0]),
                "avg_gradient_flag": str(avg.flag[i, 0]),
                "avg_curvature_median": float(avg.median[i, 1]),
                "avg_curvature_lower": float(avg.lower[i, 1]),
                "avg_curvature_upper": float(avg.upper[i, 1]),
                "avg_curvature_flag": str(avg.flag[i, 1]),
            }
        )
    return rows


def womb_curve_record(res: WomblingResult):
    def block(summ):
        return {
            "gradient": {
                "median": float(summ.median[0]),
                "lower": float(summ.lower[0]),
                "upper": float(summ.upper[0]),
                "flag": str(summ.flag[0]),
            },
            "curvature": {
                "median": float(summ.median[1]),
                "lower": float(summ.lower[1]),
                "upper": float(summ.upper[1]),
                "flag": str(summ.flag[1]),
            },
        }

    return {
        "length": res.curve_length,
        "n_segments": int(res.lengths.size),
        "alpha": res.alpha,
        "mode": res.mode,
        "total": block(res.curve_total),
        "average": block(res.curve_average),
    }


_WOMB_COLUMNS = [
    "segment", "start_x", "start_y", "length",
    "avg_gradient_median", "avg_gradient_lower", "avg_gradient_upper",
    "avg_gradient_flag",
    "avg_curvature_median", "avg_curvature_lower", "avg_curvature_upper",
    "avg_curvature_flag",
]


def womb_table_text(res: WomblingResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_WOMB_COLUMNS)
    for row in womb_segment_rows(res):
        w.writerow(
            [
                row[c] if isinstance(row[c], str) else
                (str(row[c]) if c == "segment" else _fmt(row[c]))
                for c in _WOMB_COLUMNS
            ]
        )
    return buf.getvalue()


def write_womb_result(res: WomblingResult, table_path, curve_path):
    with open(table_path, "w", newline="") as fh:
        fh.write(womb_table_text(res))
    with open(curve_path, "w") as fh:
        json.dump(womb_curve_record(res), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    """Settings document shared by the CLI and the service."""

    family: str = "matern52"
    applications: bool = False
    priors: dict | None = None  # PriorConfig field overrides
    iters: int = 10000
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    target_accept: float = 0.44
    grid_resolution: int = 19
    grid_bounds: list | None = None  # [x0, x1, y0, y1]; None -> data hull
    n_quad_1d: int = 10
    n_quad_2d: int = 100
    max_norm: float = 0.05
    mode: str = "joint"
    alpha: float = 0.05
    curve_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8337

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: bad config: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: config must be an object")
        known = {f for f in cls.__dataclass_fields__}
        bad = set(doc) - known
        if bad:
            raise ParseError(f"{path}: unknown config keys {sorted(bad)}")
        return cls(**doc)

    def to_file(self, path):
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    def prior_config(self, data) -> PriorConfig:
        base = default_priors(data, applications=self.applications)
        if not self.priors:
            return base
        fields = {
            k: getattr(base, k) for k in base.__dataclass_fields__
        }
        bad = set(self.priors) - set(fields)
        if bad:
            raise ConfigError(f"unknown prior fields {sorted(bad)}")
        fields.update(self.priors)
        fields["mu_beta"] = np.asarray(fields["mu_beta"], dtype=float)
        fields["Sigma_beta"] = np.asarray(fields["Sigma_beta"], dtype=float)
        return PriorConfig(**fields)


def build_grid(resolution, bounds=None, hull_locations=None):
    """Lattice of inference sites: a bounds box, or the data's bounding box
    masked to the convex hull of the locations."""
    if resolution < 2:
        raise ConfigError("grid resolution must be >= 2")
    if bounds is not None:
        x0, x1, y0, y1 = (float(v) for v in bounds)
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("grid bounds must be increasing")
    elif hull_locations is not None:
        x0, y0 = hull_locations.min(axis=0)
        x1, y1 = hull_locations.max(axis=0)
    else:
        raise ConfigError("need grid bounds or data locations")
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if bounds is None:
        from scipy.spatial import Delaunay

        tri = Delaunay(hull_locations)
        pts = pts[tri.find_simplex(pts) >= 0]
        if pts.shape[0] == 0:
            raise ConfigError("no grid points inside the data hull")
    return pts


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args):
    pattern = get_pattern(args.pattern, tau2=args.tau2)
    data = generate(pattern, args.L, args.seed)
    write_dataset(data, args.out)
    print(f"wrote {args.out} (L={data.L}, p={data.p})")
    return 0


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in (
        "family", "iters", "burn_in", "thin", "seed", "alpha",
        "grid_resolution", "n_quad_1d", "n_quad_2d", "max_norm", "mode",
    ):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "applications", False):
        cfg.applications = True
    if getattr(args, "bounds", None) is not None:
        cfg.grid_bounds = [float(v) for v in args.bounds.split(",")]
        if len(cfg.grid_bounds) != 4:
            raise ConfigError("bounds must be x0,x1,y0,y1")
    return cfg


def _cmd_fit(args):
    cfg = _load_config(args)
    data = load_dataset(args.data)
    chains = fit(
        data,
        cfg.family,
        priors=cfg.prior_config(data),
        iters=cfg.iters,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        target_accept=cfg.target_accept,
    )
    save_chains(chains, args.out)
    print(
        f"wrote {args.out} ({chains.n_draws} draws,"
        f" accept={float(np.mean(chains.accept_rate)):.3f})"
    )
    return 0


def _cmd_differentials(args):
    cfg = _load_config(args)
    data = load_dataset(args.data)
    chains = load_chains(args.chains, data)
    grid = build_grid(
        cfg.grid_resolution,
        bounds=cfg.grid_bounds,
        hull_locations=None if cfg.grid_bounds else data.locations,
    )
    summary = sample_differentials(
        chains, grid, alpha=cfg.alpha, thin=cfg.thin, seed=cfg.seed
    )
    write_grid_summary(summary, args.out)
    print(f"wrote {args.out} ({grid.shape[0]} sites x {len(FIELDS)} fields)")
    return 0


def _cmd_womble(args):
    cfg = _load_config(args)
    data = load_dataset(args.data)
    chains = load_chains(args.chains, data)
    with open(args.curve) as fh:
        curve = curve_from_json(fh.read())
    partition = realize(curve, max_norm=cfg.max_norm)
    res = sample_wombling(
        chains,
        partition,
        n_quad_1d=cfg.n_quad_1d,
        n_quad_2d=cfg.n_quad_2d,
        alpha=cfg.alpha,
        mode=cfg.mode,
        seed=cfg.seed,
        thin=cfg.thin,
    )
    table = args.out + ".segments.csv"
    record = args.out + ".curve.json"
    write_womb_result(res, table, record)
    print(f"wrote {table} and {record} ({res.lengths.size} segments)")
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    host = args.host if args.host is not None else cfg.host
    port = args.port if args.port is not None else cfg.port
    app = create_app(args.root)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _parser():
    ap = argparse.ArgumentParser(
        prog="artifact",
        description="Bayesian spatial-gradient analysis on curves",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    p.add_argument("--pattern", type=int, required=True, choices=(1, 2))
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau2", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler, write the chain file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--family")
    p.add_argument("--iters", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--applications", action="store_true")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser(
        "differentials", help="grid summary of the posterior differentials"
    )
    p.add_argument("--data", required=True)
    p.add_argument("--chains", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--grid-resolution", dest="grid_resolution", type=int)
    p.add_argument("--bounds", help="x0,x1,y0,y1 (default: data hull)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_differentials)

    p = sub.add_parser("womble", help="wombling measures along a curve")
    p.add_argument("--data", required=True)
    p.add_argument("--chains", required=True)
    p.add_argument("--curve", required=True, help="curve document (JSON)")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--config")
    p.add_argument("--max-norm", dest="max_norm", type=float)
    p.add_argument("--n-quad-1d", dest="n_quad_1d", type=int)
    p.add_argument("--n-quad-2d", dest="n_quad_2d", type=int)
    p.add_argument("--mode", choices=("joint", "independent"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_womble)

    p = sub.add_parser("serve", help="start the local HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--root", default=".artifact")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_serve)

    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ArtifactError as exc:
        line = json.dumps(
            {"error": type(exc).__name__, "detail": str(exc)}
        )
        print(line, file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        line = json.dumps({"error": "FileNotFound", "detail": str(exc)})
        print(line, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
