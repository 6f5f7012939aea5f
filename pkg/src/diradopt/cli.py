"""Scenario runner: JSON scenario in, CSV tables and a run manifest out.

Usage::

    python -m diradopt solve --scenario canonical.json --out results/
    python -m diradopt sweep --scenario canonical.json --out results/
    python -m diradopt cone  --scenario canonical.json --out results/ --seed 7 --samples 100000
    python -m diradopt multi --scenario two_tools.json --out results/

Exit codes: 0 success, 2 invalid scenario or arguments, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import jsonschema
import numpy as np
import scipy

from . import __version__
from .adoption import LAMBDA_TOL, Technology, optimal_intensity, threshold_pair
from .autarky import solve_autarky
from .cone import ConeSpec, adoption_measure, curvature_sweep, half_angle, in_cone
from .model_core import ConvergenceError, ValidationError, WorkerJob
from .multitech import FW_TOL, entry_next, solve_multi

log = logging.getLogger("diradopt")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
NORM_WARN_TOL = 1e-6
DEFAULT_SAMPLES = 100_000
DEFAULT_STEPS = 200

VERB_OUTPUTS = {
    "solve": ["autarky.csv", "adoption.csv"],
    "sweep": ["sweep.csv", "intensity.csv"],
    "cone": ["half_angle.csv", "measure.csv", "curvature.csv"],
    "multi": ["multi.csv", "entry.csv"],
}
KNOWN_OUTPUTS = sorted({name for names in VERB_OUTPUTS.values() for name in names})

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_grid = {
    "type": "object",
    "properties": {
        "min": _number,
        "max": _number,
        "steps": {"type": "integer", "minimum": 2},
        "technology": {"type": "integer", "minimum": 0},
    },
    "required": ["min", "max", "steps"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "worker": {
            "type": "object",
            "properties": {
                "theta": _vector,
                "s": _vector,
                "sigma": _number,
                "gamma": _number,
                "budget": _number,
            },
            "required": ["theta", "s", "sigma", "gamma"],
            "additionalProperties": False,
        },
        "technologies": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"t": _vector, "chi": _number},
                "required": ["t", "chi"],
                "additionalProperties": False,
            },
        },
        "sweeps": {
            "type": "object",
            "properties": {
                "chi": _grid,
                "curvature": {
                    "type": "object",
                    "properties": {
                        "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
                        "min": {"type": "number", "exclusiveMinimum": 0},
                        "max": _number,
                        "steps": {"type": "integer", "minimum": 2},
                        "spacing": {"enum": ["linear", "geometric"]},
                        "technology": {"type": "integer", "minimum": 0},
                        "chi": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "oneOf": [{"required": ["values"]}, {"required": ["min", "max", "steps"]}],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "monte_carlo": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
            "additionalProperties": False,
        },
        "outputs": {"type": "array", "items": {"enum": KNOWN_OUTPUTS}, "uniqueItems": True},
    },
    "required": ["worker"],
    "additionalProperties": False,
}


class ScenarioError(Exception):
    """Invalid scenario; ``field`` is a dotted path and ``line`` a 1-based line or None."""

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field, self.message, self.line = field, message, line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{field}: {message}")


class Scenario:
    """A validated scenario with model objects built."""

    def __init__(self, data: dict, source_bytes: bytes = b""):
        self.data = data
        self.source_bytes = source_bytes
        w = data["worker"]
        self.worker = WorkerJob(w["theta"], w["s"], w["sigma"], w["gamma"], w.get("budget", 1.0))
        self.technologies: List[Technology] = []
        for k, spec in enumerate(data.get("technologies", [])):
            t = np.asarray(spec["t"], dtype=float)
            if t.size != self.worker.n:
                raise ValidationError(f"technologies.{k}.t", f"has {t.size} components, worker has {self.worker.n} tasks")
            if np.any(t < 0) or not np.any(t > 0):
                raise ValidationError(f"technologies.{k}.t", "must be nonnegative and nonzero")
            norm = float(np.linalg.norm(t))
            if abs(norm - 1.0) > NORM_WARN_TOL:
                log.warning("technologies.%d.t has norm %.12g; normalised to unit length", k, norm)
            try:
                self.technologies.append(Technology(t / norm, spec["chi"]))
            except ValidationError as exc:
                raise ValidationError(f"technologies.{k}.{exc.field}", str(exc).split(": ", 1)[1]) from None
        sweeps = data.get("sweeps", {})
        self.chi_grid = sweeps.get("chi")
        self.curvature = sweeps.get("curvature")
        for name, grid in (("chi", self.chi_grid), ("curvature", self.curvature)):
            if grid is None:
                continue
            if "min" in grid and not grid["min"] < grid["max"]:
                raise ValidationError(f"sweeps.{name}.max", "must exceed min")
            k = grid.get("technology", 0)
            if not 0 <= k < len(self.technologies):
                raise ValidationError(f"sweeps.{name}.technology", f"refers to technology {k}, scenario has {len(self.technologies)}")
        if self.chi_grid is not None and self.chi_grid["min"] <= 0:
            raise ValidationError("sweeps.chi.min", "must be > 0")
        mc = data.get("monte_carlo", {})
        self.samples = int(mc.get("samples", DEFAULT_SAMPLES))
        self.seed = int(mc.get("seed", 0))
        self.outputs = data.get("outputs")

    def technology(self, index: int = 0) -> Technology:
        if not self.technologies:
            raise ValidationError("technologies", "at least one technology is required for this run")
        return self.technologies[index]

    def chi_values(self) -> np.ndarray:
        """The chi grid, or ``[0.5 chi0, 2 chi100]`` around the first technology."""
        if self.chi_grid is not None:
            return np.linspace(self.chi_grid["min"], self.chi_grid["max"], self.chi_grid["steps"])
        tp = threshold_pair(self.technology().t, self.worker)
        hi = tp.chi100 if math.isfinite(tp.chi100) else 2.0 * tp.chi0
        return np.linspace(0.5 * tp.chi0, 2.0 * hi, DEFAULT_STEPS)

    def curvature_values(self) -> Optional[np.ndarray]:
        c = self.curvature
        if c is None:
            return None
        if "values" in c:
            return np.asarray(c["values"], dtype=float)
        if c.get("spacing", "linear") == "geometric":
            return np.geomspace(c["min"], c["max"], c["steps"])
        return np.linspace(c["min"], c["max"], c["steps"])


def _locate(text: str, path: Sequence) -> Optional[int]:
    """Best-effort line number of the value at ``path`` in the JSON source."""
    if not path:
        return None
    pos = 0
    for part in path:
        found = text.find(json.dumps(part), pos) if isinstance(part, str) else -1
        if found >= 0:
            pos = found
    return text.count("\n", 0, pos) + 1


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ScenarioError("scenario", f"cannot read {path}: {exc.strerror}") from None
    text = raw.decode("utf-8", errors="replace")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario", f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    return parse_scenario(data, raw, text)


def parse_scenario(data: dict, raw: bytes = b"", text: str = "") -> Scenario:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        field = ".".join(str(p) for p in path) or "scenario"
        raise ScenarioError(field, err.message, _locate(text, path) if text else None)
    try:
        return Scenario(data, raw)
    except ValidationError as exc:
        field = exc.field if "." in exc.field else f"worker.{exc.field}"
        path = field.split(".")
        raise ScenarioError(field, str(exc).split(": ", 1)[1], _locate(text, path) if text else None) from None


# table building ------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


class Table:
    def __init__(self, header: List[str], rows: List[list]):
        self.header, self.rows = header, rows

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue().encode("utf-8")


def autarky_table(sc: Scenario) -> Table:
    w = sc.worker
    aut = solve_autarky(w)
    n = w.n
    header = [f"x_A_{i + 1}" for i in range(n)] + [f"p_A_{i + 1}" for i in range(n)] + ["phi", "Y_A", "rho"]
    return Table(header, [list(aut.x_A) + list(aut.p_A) + [aut.phi, aut.output, aut.rho_A]])


def adoption_table(sc: Scenario, tol: float) -> Table:
    w = sc.worker
    aut = solve_autarky(w)
    rows = []
    for k, tech in enumerate(sc.technologies):
        tp = threshold_pair(tech.t, w, aut)
        sol = optimal_intensity(tech, w, tol=tol, autarky=aut)
        rows.append([k, tech.chi, tp.chi0, tp.c, tp.chi100, sol.regime, sol.lambda_star, sol.output])
    return Table(["technology", "chi", "chi0", "c", "chi100", "regime", "lambda_star", "output"], rows)


def _map_ordered(fn, items):
    """Concurrent map; results come back in grid order whatever the completion order."""
    items = list(items)
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, items))


def sweep_table(sc: Scenario, tol: float) -> Table:
    w = sc.worker
    aut = solve_autarky(w)
    k = (sc.chi_grid or {}).get("technology", 0)
    base = sc.technology(k)

    def point(chi):
        tech = Technology(base.t, chi)
        sol = optimal_intensity(tech, w, tol=tol, autarky=aut)
        cone = ConeSpec(aut.p_A, aut.rho_A, chi)
        return [chi, sol.lambda_star, sol.output, sol.regime, half_angle(cone), in_cone(base.t, cone)]

    rows = _map_ordered(point, sc.chi_values())
    return Table(["chi", "lambda_star", "output", "regime", "phi0", "in_cone"], rows)


def intensity_table(sc: Scenario, tol: float, sweep: Optional[Table] = None) -> Table:
    sweep = sweep or sweep_table(sc, tol)
    return Table(["chi", "lambda_star", "regime"], [[r[0], r[1], r[3]] for r in sweep.rows])


def _cone_grid(sc: Scenario) -> np.ndarray:
    """Capabilities from ``rho`` (zero half-angle) up to the sweep maximum."""
    aut = solve_autarky(sc.worker)
    rho = aut.rho_A
    steps = sc.chi_grid["steps"] if sc.chi_grid else DEFAULT_STEPS
    hi = sc.chi_grid["max"] if sc.chi_grid and sc.chi_grid["max"] > rho else 2.0 * rho
    grid = np.linspace(rho, hi, steps)
    grid[0] = rho
    return grid


def half_angle_table(sc: Scenario) -> Table:
    aut = solve_autarky(sc.worker)
    rows = [[chi, half_angle(ConeSpec(aut.p_A, aut.rho_A, chi))] for chi in _cone_grid(sc)]
    return Table(["chi", "phi0"], rows)


def measure_table(sc: Scenario, samples: int, seed: int) -> Table:
    aut = solve_autarky(sc.worker)

    def point(chi):
        est = adoption_measure(ConeSpec(aut.p_A, aut.rho_A, chi), samples, seed)
        return [chi, est.value, est.stderr, est.samples]

    return Table(["chi", "measure", "stderr", "samples"], _map_ordered(point, _cone_grid(sc)))


def curvature_table(sc: Scenario) -> Optional[Table]:
    totals = sc.curvature_values()
    if totals is None:
        return None
    k = sc.curvature.get("technology", 0)
    tech = sc.technology(k)
    chi = sc.curvature.get("chi", tech.chi)
    rows = [list(r) for r in curvature_sweep(sc.worker, totals, chi, tech.t)]
    return Table(["gamma", "sigma", "phi0", "chi_ratio", "uniform_cosine"], rows)


def multi_tables(sc: Scenario) -> Dict[str, Table]:
    w = sc.worker
    if not sc.technologies:
        raise ValidationError("technologies", "at least one technology is required for this run")
    sol = solve_multi(w, sc.technologies)
    rows = [[k, tech.chi, float(sol.lambdas[k])] for k, tech in enumerate(sc.technologies)]
    rows.append(["human", "", 1.0 - float(sol.lambdas.sum())])
    rows.append(["output", "", sol.output])
    multi = Table(["technology", "chi", "share"], rows)
    summary_rows = []
    for k in range(len(sc.technologies)):
        adopted = sc.technologies[:k]
        dec = entry_next(w, adopted, sc.technologies[k])
        summary_rows.append([k, sc.technologies[k].chi, dec.threshold, dec.prior_threshold, dec.adopt, dec.rising_bar])
    entry = Table(["technology", "chi", "threshold", "prior_threshold", "adopt", "rising_bar"], summary_rows)
    return {"multi.csv": multi, "entry.csv": entry}


def figure_data(scenario: Scenario, tol: float = LAMBDA_TOL) -> Dict[str, Table]:
    """Tables behind the half-angle, intensity, measure and curvature figures."""
    tables = {
        "half_angle.csv": half_angle_table(scenario),
        "intensity.csv": intensity_table(scenario, tol),
        "measure.csv": measure_table(scenario, scenario.samples, scenario.seed),
    }
    curv = curvature_table(scenario)
    if curv is not None:
        tables["curvature.csv"] = curv
    return tables


def build_tables(verb: str, sc: Scenario, tol: float) -> Dict[str, Table]:
    wanted = [name for name in VERB_OUTPUTS[verb] if sc.outputs is None or name in sc.outputs]
    tables: Dict[str, Table] = {}
    if verb == "solve":
        if "autarky.csv" in wanted:
            tables["autarky.csv"] = autarky_table(sc)
        if "adoption.csv" in wanted and sc.technologies:
            tables["adoption.csv"] = adoption_table(sc, tol)
    elif verb == "sweep":
        sweep = sweep_table(sc, tol)
        if "sweep.csv" in wanted:
            tables["sweep.csv"] = sweep
        if "intensity.csv" in wanted:
            tables["intensity.csv"] = intensity_table(sc, tol, sweep)
    elif verb == "cone":
        if "half_angle.csv" in wanted:
            tables["half_angle.csv"] = half_angle_table(sc)
        if "measure.csv" in wanted:
            tables["measure.csv"] = measure_table(sc, sc.samples, sc.seed)
        curv = curvature_table(sc) if "curvature.csv" in wanted else None
        if curv is not None:
            tables["curvature.csv"] = curv
    else:
        tables.update({k: v for k, v in multi_tables(sc).items() if k in wanted})
    return tables


def manifest_name(verb: str) -> str:
    """One manifest per verb, so several verbs can share an output directory."""
    return f"manifest-{verb}.json"


def write_outputs(out_dir: str, verb: str, sc: Scenario, tables: Dict[str, Table], tol: float) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    files = {}
    for name in sorted(tables):
        payload = tables[name].to_csv()
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(payload)
        files[name] = hashlib.sha256(payload).hexdigest()
    manifest = {
        "verb": verb,
        "inputs_sha256": hashlib.sha256(sc.source_bytes).hexdigest(),
        "seed": sc.seed,
        "samples": sc.samples,
        "tolerances": {"lambda": tol, "frank_wolfe_gap": FW_TOL},
        "versions": {"diradopt": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "files": files,
    }
    with open(os.path.join(out_dir, manifest_name(verb)), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diradopt", description="Directional technology adoption scenarios")
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "solve": "autarky allocation and single-technology adoption",
        "sweep": "optimal intensity over a capability grid",
        "cone": "half-angle, Monte Carlo adoption measure and curvature sweep",
        "multi": "joint allocation with all listed technologies",
    }
    for verb, text in helps.items():
        p = sub.add_parser(verb, help=text)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (overrides the scenario)")
        p.add_argument("--samples", type=int, help="Monte Carlo sample count (overrides the scenario)")
        p.add_argument("--tolerance", type=float, default=LAMBDA_TOL, help="lambda search tolerance")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ScenarioError("--seed", "must be an unsigned 64-bit integer")
        if args.samples is not None and args.samples < 1:
            raise ScenarioError("--samples", "must be >= 1")
        if not (math.isfinite(args.tolerance) and args.tolerance > 0):
            raise ScenarioError("--tolerance", "must be a positive number")
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc.seed = args.seed
        if args.samples is not None:
            sc.samples = args.samples
        tables = build_tables(args.verb, sc, args.tolerance)
        write_outputs(args.out, args.verb, sc, tables, args.tolerance)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"solver failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main() -> None:
    sys.exit(run())
