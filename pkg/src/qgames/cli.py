"""Command-line harness: welfare sweeps, solution verification and single-point bounds."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import solver
from .classical_opt import (communication_equilibrium_lp, correlated_equilibrium_lp,
                            enumerate_pure_nash, nonsignalling_equilibrium_lp)
from .correlation import check_canonical_nash, check_nonsignalling
from .equilibrium import check_quantum_equilibrium
from .errors import (InvalidPayoffError, LevelTooLowError, NormalizationError, SchemaError,
                     UnsupportedFamilyError, DimensionError)
from .game_model import GameFamily, GameSpec, build_game
from .npa import build_npa_problem, export_sdpa, npa_upper_bound
from .quantum_sim import (QuantumSolution, born_distribution, check_dev_equilibrium,
                          deviated_solution, pseudo_telepathic_solution, pwin_table,
                          quantum_welfare)
from .seesaw import SeesawConfig, seesaw_optimize

log = logging.getLogger("qgames")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

CURVES = ("classical", "npa", "seesaw_qcorr", "seesaw_q", "bi_lp", "pt")
COLUMNS = ("ratio", "classical_lp", "pure_nash_best", "npa_bound", "seesaw_qcorr", "seesaw_q",
           "bi_lp", "pt_sw", "gap", "errors")
DEFAULT_GRID = tuple(round(0.02 * k, 2) for k in range(1, 50))


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    game: str = "NC_C3"
    grid: tuple[float, ...] = DEFAULT_GRID
    curves: tuple[str, ...] = CURVES
    level: str = "intermediate"
    restarts: int = 5
    seed: int = 0
    workers: int = 1
    out: str | None = None
    deterministic: bool = False
    seesaw: dict = field(default_factory=dict)  # extra SeesawConfig fields

    def __post_init__(self):
        grid = tuple(float(r) for r in self.grid)
        if not grid:
            raise ConfigError("grid is empty")
        if any(not 0.0 < r < 1.0 for r in grid):
            raise ConfigError("grid ratios must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        self.grid = grid
        bad = set(self.curves) - set(CURVES)
        if bad:
            raise ConfigError(f"unknown curves {sorted(bad)}; choose from {CURVES}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")


# ---------------------------------------------------------------------------
# game and grid parsing
# ---------------------------------------------------------------------------

def load_family(name: str):
    """Built-in family name, or a path to a game JSON file (payoffs then come from flags)."""
    try:
        return GameFamily(name)
    except ValueError:
        pass
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"unknown game {name!r}: not a built-in family or an existing file")
    return GameSpec.from_json(_read_json(path), name=path.stem)


def make_game(family, ratio: float | None = None, v0: float | None = None,
              v1: float | None = None) -> GameSpec:
    if ratio is not None and (v0 is not None or v1 is not None):
        raise ConfigError("give either --ratio or --v0/--v1, not both")
    if ratio is not None:
        if not 0.0 < ratio < 1.0:
            raise ConfigError("ratio must lie strictly inside (0, 1)")
        v0, v1 = 2.0 * ratio, 2.0 * (1.0 - ratio)
    if isinstance(family, GameSpec):
        if v0 is None and v1 is None:
            return family
        return family.with_payoffs(float(v0 if v0 is not None else family.v0),
                                   float(v1 if v1 is not None else family.v1))
    return build_game(family, 1.0 if v0 is None else v0, 1.0 if v1 is None else v1)


def parse_grid(text: str) -> tuple[float, ...]:
    """Comma-separated ratios, or ``start:stop:step`` (stop included)."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid range {text!r}; expected start:stop:step") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(count))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.10f}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else (str(v) if math.isinf(v) else v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def pt_welfare_if_equilibrium(game: GameSpec) -> float | None:
    try:
        sol = pseudo_telepathic_solution(game)
    except UnsupportedFamilyError:
        return None
    nash = check_canonical_nash(game, born_distribution(sol, game))
    quantum = check_quantum_equilibrium(game, sol)
    return quantum_welfare(game, sol) if nash.is_equilibrium and quantum.is_equilibrium else None


def sweep_point(family, ratio: float, cfg: SweepConfig) -> tuple[dict, dict]:
    """One CSV row and its JSON detail record."""
    game = make_game(family, ratio=ratio)
    row = {c: None for c in COLUMNS}
    row["ratio"] = ratio
    detail: dict = {"ratio": ratio, "v0": game.v0, "v1": game.v1}
    errors = []

    def attempt(name, fn):
        try:
            return fn()
        except (solver.SolverError, LevelTooLowError, np.linalg.LinAlgError) as exc:
            errors.append(f"{name}: {exc}")
            return None

    if "classical" in cfg.curves:
        pure = attempt("pure_nash", lambda: enumerate_pure_nash(game))
        if pure is not None:
            row["pure_nash_best"] = pure[1]
            detail["pure_nash"] = [[str(p), sw] for p, sw in pure[0]]
        ce = attempt("classical_lp", lambda: correlated_equilibrium_lp(game))
        if ce is not None:
            row["classical_lp"] = ce.value
            detail["classical_lp"] = {"value": ce.value, "status": ce.status, "label": ce.label}
    if "npa" in cfg.curves:
        npa = attempt("npa", lambda: npa_upper_bound(game, cfg.level, with_nash=True))
        if npa is not None:
            row["npa_bound"] = npa.value
            detail["npa"] = {"value": npa.value, "status": npa.status, "level": cfg.level,
                             "iterations": npa.result.iterations}
    if "bi_lp" in cfg.curves:
        bi = attempt("bi_lp", lambda: nonsignalling_equilibrium_lp(game))
        if bi is not None:
            row["bi_lp"] = bi.value
            detail["bi_lp"] = {"value": bi.value, "status": bi.status}
    q_value = None
    if "seesaw_q" in cfg.curves:
        sc = SeesawConfig(**{"restarts": cfg.restarts, "seed": cfg.seed, **cfg.seesaw,
                             "mode": "q_refine"})
        res = attempt("seesaw_q", lambda: seesaw_optimize(game, sc))
        if res is not None:
            detail["seesaw_q"] = res.to_json()
            if res.certified:
                q_value = res.sw
                row["seesaw_q"] = res.sw
            else:
                errors.append("seesaw_q: no run reached a quantum equilibrium")
    if "seesaw_qcorr" in cfg.curves:
        sc = SeesawConfig(**{"restarts": cfg.restarts, "seed": cfg.seed, **cfg.seesaw,
                             "mode": "qcorr_refine"})
        res = attempt("seesaw_qcorr", lambda: seesaw_optimize(game, sc))
        if res is not None:
            detail["seesaw_qcorr"] = res.to_json()
            best = res.sw if res.certified else None
            if best is None:
                errors.append("seesaw_qcorr: no run passed the canonical deviation check")
            # quantum equilibria induce quantum-correlated equilibria, so they also count
            if q_value is not None and (best is None or q_value > best):
                best = q_value
                detail["seesaw_qcorr_from_q"] = True
            row["seesaw_qcorr"] = best
    if "pt" in cfg.curves:
        row["pt_sw"] = attempt("pt", lambda: pt_welfare_if_equilibrium(game))
    if row["seesaw_qcorr"] is not None and row["seesaw_q"] is not None:
        row["gap"] = row["seesaw_qcorr"] - row["seesaw_q"]
    row["errors"] = "; ".join(errors)
    detail["errors"] = errors
    return row, detail


def _sweep_job(args):
    family, ratio, cfg = args
    return sweep_point(family, ratio, cfg)


def cmd_sweep(cfg: SweepConfig) -> tuple[str, list[dict]]:
    family = load_family(cfg.game)
    jobs = [(family, r, cfg) for r in cfg.grid]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    results.sort(key=lambda rd: rd[0]["ratio"])
    buf = io.StringIO()
    if not cfg.deterministic:
        buf.write(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row, _ in results:
        writer.writerow([_fmt(row[c]) if c not in ("errors",) else row[c] for c in COLUMNS])
    text = buf.getvalue()
    details = [d for _, d in results]
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        payload = {"game": cfg.game, "level": cfg.level, "seed": cfg.seed,
                   "restarts": cfg.restarts, "points": details}
        out.with_suffix(".json").write_text(json.dumps(_jsonable(payload), indent=1,
                                                       sort_keys=True) + "\n")
    return text, [r for r, _ in results]


# ---------------------------------------------------------------------------
# single-point commands
# ---------------------------------------------------------------------------

def load_solution(args) -> QuantumSolution:
    if args.named == "pt":
        return pseudo_telepathic_solution(args.game)
    if args.named == "deviated":
        return deviated_solution(args.theta)
    if not args.solution:
        raise ConfigError("verify needs a solution file or --named")
    return QuantumSolution.from_json(_read_json(args.solution))


def cmd_verify(game: GameSpec, sol: QuantumSolution, tol: float = 1e-7) -> tuple[dict, bool]:
    try:
        sol.validate()
    except NormalizationError as exc:
        raise SchemaError(f"invalid solution: {exc}") from None
    dist = born_distribution(sol, game)
    nash = check_canonical_nash(game, dist, tol * game.vmax)
    quantum = check_quantum_equilibrium(game, sol, tol)
    _, ns = check_nonsignalling(dist)
    report = {"social_welfare": quantum_welfare(game, sol), "nonsignalling_residual": ns,
              "canonical_nash": nash.to_json(), "quantum_equilibrium": quantum.to_json()}
    return report, nash.is_equilibrium and quantum.is_equilibrium


def cmd_deviated_scan(game: GameSpec, thetas) -> str:
    if game.n != 3:
        raise ConfigError("the deviated family is defined for three-player games")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cells = [(a, t) for a in (0, 1) for t in (0, 1)]
    writer.writerow(["theta", "sw", "correq", "canonical_nash", "quantum_eq"]
                    + [f"pwin_a{a}_t{t}" for a, t in cells])
    for th in thetas:
        sol = deviated_solution(th)
        dev = check_dev_equilibrium(game, th)
        nash = check_canonical_nash(game, born_distribution(sol, game))
        quantum = check_quantum_equilibrium(game, sol)
        p = pwin_table(game, sol)
        writer.writerow([_fmt(th), _fmt(quantum_welfare(game, sol)), int(dev.is_equilibrium),
                         int(nash.is_equilibrium), int(quantum.is_equilibrium)]
                        + [_fmt(p[0, a, t]) for a, t in cells])
    return buf.getvalue()


def cmd_classical(game: GameSpec) -> dict:
    profiles, best = enumerate_pure_nash(game)
    ce = correlated_equilibrium_lp(game)
    bi = nonsignalling_equilibrium_lp(game)
    comm = communication_equilibrium_lp(game)
    return {"pure_nash": [[str(p), sw] for p, sw in profiles], "pure_nash_best": best,
            "classical_lp": ce.value, "classical_lp_label": ce.label,
            "nonsignalling_lp": bi.value, "communication_lp": comm.value}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--game", help="built-in family (NC_C3, NC00_C5, NC01_C5) or game JSON")
    common.add_argument("--v0", type=float)
    common.add_argument("--v1", type=float)
    common.add_argument("--ratio", type=float, help="v0/(v0+v1) with v0+v1 = 2")
    common.add_argument("--level", choices=["1", "intermediate"])
    common.add_argument("--restarts", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--deterministic", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qgames", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", parents=[common], help="bounds over a grid of payoff ratios")
    s.add_argument("--grid", help="comma list or start:stop:step (default 0.02:0.98:0.02)")
    s.add_argument("--curves", help=f"comma list from {','.join(CURVES)}")
    v = sub.add_parser("verify", parents=[common], help="check a quantum solution")
    v.add_argument("solution", nargs="?", help="solution JSON file")
    v.add_argument("--named", choices=["pt", "deviated"], help="use a built-in solution")
    v.add_argument("--theta", type=float, default=1.7)
    v.add_argument("--save", help="write the checked solution as JSON")
    d = sub.add_parser("deviated-scan", parents=[common], help="scan the deviated family")
    d.add_argument("--thetas", default="0:6.2:0.1", help="comma list or start:stop:step")
    n = sub.add_parser("npa-bound", parents=[common], help="moment-relaxation upper bound")
    n.add_argument("--no-nash", action="store_true", help="drop the equilibrium constraints")
    sub.add_parser("classical", parents=[common], help="classical and advice LP baselines")
    e = sub.add_parser("export-sdp", parents=[common], help="write the moment relaxation in SDPA")
    e.add_argument("--no-nash", action="store_true")
    return p


_DEFAULTS = {"game": "NC_C3", "level": "intermediate", "restarts": 5, "seed": 0, "workers": 1,
             "deterministic": False}


def resolve(args) -> dict:
    """Merge defaults, the JSON config file and explicit flags (flags win)."""
    opts = dict(_DEFAULTS)
    if args.config:
        conf = _read_json(args.config)
        if not isinstance(conf, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update(conf)
    for key, val in vars(args).items():
        if key in ("config", "command") or val is None:
            continue
        opts[key] = val
    return opts


def _game_from(opts) -> GameSpec:
    return make_game(load_family(str(opts["game"])), opts.get("ratio"), opts.get("v0"),
                     opts.get("v1"))


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        if args.command == "sweep":
            grid = opts.get("grid", DEFAULT_GRID)
            if isinstance(grid, str):
                grid = parse_grid(grid)
            curves = opts.get("curves", CURVES)
            if isinstance(curves, str):
                curves = tuple(c.strip() for c in curves.split(",") if c.strip())
            cfg = SweepConfig(game=str(opts["game"]), grid=tuple(grid), curves=tuple(curves),
                              level=str(opts["level"]), restarts=int(opts["restarts"]),
                              seed=int(opts["seed"]), workers=int(opts["workers"]),
                              out=opts.get("out"), deterministic=bool(opts["deterministic"]),
                              seesaw=dict(opts.get("seesaw", {})))
            text, rows = cmd_sweep(cfg)
            if not cfg.out:
                stdout.write(text)
            return EXIT_OK
        game = _game_from(opts)
        if args.command == "verify":
            args.game = game
            sol = load_solution(args)
            if args.save:
                Path(args.save).write_text(json.dumps(sol.to_json()) + "\n")
            report, ok = cmd_verify(game, sol)
            _emit(report, opts, stdout)
            return EXIT_OK if ok else EXIT_VERIFY
        if args.command == "deviated-scan":
            text = cmd_deviated_scan(game, parse_grid(opts["thetas"]))
            _emit_text(text, opts, stdout)
            return EXIT_OK
        if args.command == "npa-bound":
            res = npa_upper_bound(game, opts["level"], with_nash=not opts.get("no_nash", False))
            _emit({"value": res.value, "status": res.status, "level": opts["level"],
                   "with_nash": not opts.get("no_nash", False),
                   "iterations": res.result.iterations}, opts, stdout)
            return EXIT_OK
        if args.command == "classical":
            _emit(cmd_classical(game), opts, stdout)
            return EXIT_OK
        if args.command == "export-sdp":
            if not opts.get("out"):
                raise ConfigError("export-sdp needs --out")
            problem = build_npa_problem(game, opts["level"], not opts.get("no_nash", False))
            export_sdpa(problem, opts["out"])
            return EXIT_OK
    except (ConfigError, SchemaError, InvalidPayoffError, UnsupportedFamilyError,
            DimensionError, LevelTooLowError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except solver.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_CONFIG


def _emit(obj: dict, opts, stdout) -> None:
    _emit_text(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n", opts, stdout)


def _emit_text(text: str, opts, stdout) -> None:
    if opts.get("out"):
        Path(opts["out"]).write_text(text)
    else:
        stdout.write(text)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
