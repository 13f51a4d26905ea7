"""Command-line experiment runner.

``resorg run SPEC [--out DIR] [--workers N] [--seed S]`` runs every trial of
an experiment spec and writes ``trials.csv``, ``summary.json`` and
``curves/*.csv``. ``resorg validate SPEC`` checks a spec against the bundled
schema without running it. ``resorg measure ...`` applies one measure to CSV
inputs and prints JSON.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import jsonschema
import numpy as np

from . import __version__
from .experiments import EXPERIMENTS
from .reports import to_jsonable

RNG_NAME = "numpy.random.PCG64 via default_rng"
SEED_DERIVATION = "blake2b-64 of '<base_seed>:<trial>'"


class SpecError(ValueError):
    """Invalid experiment spec; ``errors`` lists one message per problem."""

    def __init__(self, errors: Sequence[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


def trial_seed(base_seed: int, trial: int) -> int:
    """Stable 64-bit seed for one trial."""
    digest = hashlib.blake2b(f"{base_seed}:{trial}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class ExperimentSpec:
    kind: str
    trials: int
    seed: int
    config: dict[str, Any] = field(default_factory=dict)
    sweep: dict[str, list] = field(default_factory=dict)
    output: Optional[str] = None
    description: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        errors = validate_document(doc)
        if errors:
            raise SpecError(errors)
        return cls(
            doc["kind"], doc["trials"], doc["seed"], dict(doc.get("config", {})),
            {k: list(v) for k, v in doc.get("sweep", {}).items()},
            doc.get("output"), doc.get("description"),
        )

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "trials": self.trials, "seed": self.seed}
        if self.description is not None:
            d["description"] = self.description
        if self.config:
            d["config"] = self.config
        if self.sweep:
            d["sweep"] = self.sweep
        if self.output is not None:
            d["output"] = self.output
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def points(self) -> list[dict]:
        """Cartesian product of the sweep values (one empty point without a sweep)."""
        names = sorted(self.sweep)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.sweep[n] for n in names))]


def load_schema() -> dict:
    text = resources.files("resorg").joinpath("schema/experiment.schema.json").read_text()
    return json.loads(text)


def _location(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate_document(doc: Any) -> list[str]:
    """Schema errors as ``"<path>: <message>"`` strings, sorted by path."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [f"{_location(e)}: {e.message}" for e in errors]


def parse_spec_text(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise SpecError(
            [f"line {exc.lineno}, column {exc.colno}: {exc.msg}", f"  {context}",
             "  " + " " * (exc.colno - 1) + "^"]
        ) from None


def validate_spec(path: str | Path) -> list[str]:
    """Parse and schema-check a spec file; an empty list means valid."""
    try:
        doc = parse_spec_text(Path(path).read_text())
    except SpecError as exc:
        return exc.errors
    return validate_document(doc)


def load_spec(path: str | Path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(parse_spec_text(Path(path).read_text()))


def _run_one(job: tuple[str, dict, int, int, int]) -> tuple[int, int, dict, dict]:
    kind, config, point, trial, seed = job
    row, curves = EXPERIMENTS[kind](config, seed)
    return point, trial, row, curves


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _stats(values: list) -> Optional[dict]:
    try:
        a = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        return None
    if a.size == 0:
        return None
    return {
        "mean": float(a.mean()),
        "std": float(a.std(ddof=1)) if len(a) > 1 else 0.0,
        "min": float(a.min()),
        "max": float(a.max()),
    }


@dataclass
class RunResult:
    out_dir: Path
    rows: list[dict]
    summary: dict


def run_experiment(
    spec: ExperimentSpec, out_dir: Optional[str | Path] = None, workers: int = 1
) -> RunResult:
    """Run all (sweep point, trial) pairs and write the result bundle."""
    h = spec.hash()
    out = Path(out_dir or spec.output or f"results/{spec.kind}-{h}")
    points = spec.points()
    seeds = [trial_seed(spec.seed, t) for t in range(spec.trials)]
    jobs = [
        (spec.kind, {**spec.config, **pt}, i, t, seeds[t])
        for i, pt in enumerate(points)
        for t in range(spec.trials)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))

    sweep_names = sorted(spec.sweep)
    metric_names: list[str] = []
    for _, _, row, _ in results:
        metric_names += [k for k in row if k not in metric_names]
    header = ["point", "trial", "seed", *sweep_names, *metric_names, "spec_hash", "version"]
    rows = []
    for point, trial, row, _ in results:
        rows.append({
            "point": point, "trial": trial, "seed": seeds[trial],
            **{n: points[point][n] for n in sweep_names},
            **{m: row.get(m, "") for m in metric_names},
            "spec_hash": h, "version": __version__,
        })

    out.mkdir(parents=True, exist_ok=True)
    (out / "trials.csv").write_text(_csv_text(header, [[r[c] for c in header] for r in rows]))
    (out / "spec.json").write_text(spec.to_json())

    curve_dir = out / "curves"
    for point, trial, _, curves in results:
        for name, (xn, yn, xs, ys) in curves.items():
            curve_dir.mkdir(exist_ok=True)
            body = [(x, y, h, __version__) for x, y in zip(xs, ys)]
            (curve_dir / f"{name}_p{point}_t{trial}.csv").write_text(
                _csv_text([xn, yn, "spec_hash", "version"], body)
            )

    groups = []
    for i, pt in enumerate(points):
        mine = [r for r in rows if r["point"] == i]
        stats = {}
        for m in metric_names:
            s = _stats([r[m] for r in mine if r[m] != ""])
            if s is not None:
                stats[m] = s
        groups.append({"point": i, "params": pt, "n": len(mine), "stats": stats})
    summary = to_jsonable({
        "kind": spec.kind,
        "spec_hash": h,
        "version": __version__,
        "rng": RNG_NAME,
        "seed_derivation": SEED_DERIVATION,
        "base_seed": spec.seed,
        "trials": spec.trials,
        "std_ddof": 1,
        "groups": groups,
    })
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(out, rows, summary)


def bundled_specs() -> list[str]:
    d = resources.files("resorg").joinpath("specs")
    return sorted(p.name for p in d.iterdir() if p.name.endswith(".json"))


def bundled_spec_path(name: str) -> Path:
    return Path(str(resources.files("resorg").joinpath("specs", name)))


# ---------------------------------------------------------------------------
# one-off measures


def _read_series(path: str, column: Optional[str] = None) -> np.ndarray:
    from .timeseries import TimeSeries

    ts = TimeSeries.from_csv(path)
    if column is not None:
        return ts.channel(column)
    if ts.dim != 1:
        raise SystemExit(f"{path} has {ts.dim} columns; pick one with --column")
    return ts.values[:, 0]


def _measure(args: argparse.Namespace) -> dict:
    from . import info, measures, reservoir
    from .task_complexity import task_complexity

    spec = info.DiscretizationSpec("equal_width", args.bins)

    def sym(v):
        return info.symbolize(v, None if np.issubdtype(v.dtype, np.integer) else spec)

    if args.measure == "mc":
        r = reservoir.build_reservoir(reservoir.ReservoirParams(
            args.n_units, spectral_radius=args.spectral_radius,
            nonlinearity=args.nonlinearity, seed=args.seed))
        return reservoir.memory_capacity(r, _read_series(args.input, args.column), args.k_max).to_dict()
    if args.measure == "ipc":
        r = reservoir.build_reservoir(reservoir.ReservoirParams(
            args.n_units, spectral_radius=args.spectral_radius,
            nonlinearity=args.nonlinearity, seed=args.seed))
        basis = measures.legendre_basis(args.max_degree, range(1, args.max_delay + 1))
        return measures.ipc(r, _read_series(args.input, args.column), basis).to_dict()
    if args.measure == "ais":
        return info.active_information_storage(
            sym(_read_series(args.input, args.column)), args.k, normalize=True).to_dict()
    if args.measure == "te":
        x, y = _read_series(args.source), _read_series(args.target)
        return info.transfer_entropy(sym(x), sym(y), info.EmbeddingSpec(args.k, args.l)).to_dict()
    if args.measure == "mi":
        x, y = _read_series(args.x), _read_series(args.y)
        return info.mutual_information(sym(x), sym(y)).to_dict()
    # complexity
    y = _read_series(args.output)
    x = _read_series(args.input) if args.input else None
    return task_complexity(y, x, args.k_max, args.l_max, args.epsilon, args.bins).to_dict()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resorg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"resorg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment spec")
    run.add_argument("spec", help="spec file, or the name of a bundled spec")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, help="override the base seed")

    val = sub.add_parser("validate", help="check a spec without running it")
    val.add_argument("spec")

    sub.add_parser("list", help="list bundled specs")

    m = sub.add_parser("measure", help="apply one measure to CSV input")
    ms = m.add_subparsers(dest="measure", required=True)
    for name in ("mc", "ipc"):
        q = ms.add_parser(name)
        q.add_argument("--input", required=True)
        q.add_argument("--column")
        q.add_argument("--n-units", type=int, default=20)
        q.add_argument("--spectral-radius", type=float, default=0.95)
        q.add_argument("--nonlinearity", choices=("tanh", "linear"), default="tanh")
        q.add_argument("--seed", type=int, default=0)
        if name == "mc":
            q.add_argument("--k-max", type=int, default=40)
        else:
            q.add_argument("--max-degree", type=int, default=2)
            q.add_argument("--max-delay", type=int, default=30)
    q = ms.add_parser("ais")
    q.add_argument("--input", required=True)
    q.add_argument("--column")
    q.add_argument("--k", type=int, default=1)
    q = ms.add_parser("te")
    q.add_argument("--source", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--l", type=int, default=1)
    q = ms.add_parser("mi")
    q.add_argument("--x", required=True)
    q.add_argument("--y", required=True)
    q = ms.add_parser("complexity")
    q.add_argument("--output", required=True, help="desired output series")
    q.add_argument("--input", help="input series")
    q.add_argument("--k-max", type=int, default=10)
    q.add_argument("--l-max", type=int, default=10)
    q.add_argument("--epsilon", type=float, default=0.01)
    for q in ms.choices.values():
        q.add_argument("--bins", type=int, default=8)
    return p


def _resolve(spec: str) -> Path:
    path = Path(spec)
    if not path.exists() and spec in bundled_specs():
        return bundled_spec_path(spec)
    if not path.exists() and f"{spec}.json" in bundled_specs():
        return bundled_spec_path(f"{spec}.json")
    return path


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(bundled_specs()))
        return 0
    if args.command == "measure":
        print(json.dumps(to_jsonable(_measure(args)), indent=2))
        return 0
    path = _resolve(args.spec)
    if not path.exists():
        print(f"error: no such spec: {args.spec}", file=sys.stderr)
        return 2
    if args.command == "validate":
        errors = validate_spec(path)
        for e in errors:
            print(e, file=sys.stderr)
        if not errors:
            print(f"{path}: ok")
        return 1 if errors else 0
    try:
        spec = load_spec(path)
    except SpecError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return 1
    if args.seed is not None:
        spec.seed = args.seed
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    result = run_experiment(spec, args.out, args.workers)
    print(f"wrote {len(result.rows)} rows to {result.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
