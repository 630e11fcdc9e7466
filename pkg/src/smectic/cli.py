"""Command-line entry points: ``certify``, ``run`` and ``audit``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import (
    advection_neutrality_residual,
    cancellation_residual,
    energy_identity_residual,
    is_solenoidal,
    norm_ledger,
    q_cross_residual,
    stress_power_residual,
)
from .energy import EnergyTerms, LayerField, State, refine, resolved_size
from .params import certify
from .solver import BlowUpError, Trajectory, run
from .spectral import DumpFormatError, inner_product, read_field, write_field

log = logging.getLogger("smectic")

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_BLOWUP = 0, 1, 2, 3

# audit tolerances (relative)
TOLERANCES = {
    "band_limit": 1e-12,
    "solenoidal": 1e-10,
    "energy_consistency": 1e-9,
    "stress_power": 1e-10,
    "advection_neutrality": 1e-9,
    "q_cross": 1e-10,
    "cancellation": 1e-6,
    "energy_law": 1e-2,
}

ENERGY_COLUMNS = ("splay", "bend", "layer_bend", "coupling_B0", "coupling_B1", "penalty_d", "penalty_grad_phi")


def _fmt(x) -> str:
    return repr(float(x))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])


# -- outputs ------------------------------------------------------------------


def _energy_rows(traj: Trajectory):
    for r in traj.records:
        e = r.energy
        yield [r.t, *(getattr(e, c) for c in ENERGY_COLUMNS), e.total, r.kinetic, r.total]


def _dissipation_rows(traj: Trajectory):
    p = traj.params
    cum = traj.cumulative(lambda r: r.dissipation_rate(p))
    work = traj.cumulative(lambda r: r.forcing_power)
    indef = traj.cumulative(lambda r: r.ledger.indefinite)
    for i, r in enumerate(traj.records):
        ledger = r.ledger.as_dict()
        yield [r.t, p.gamma * r.q_sq, p.lambda_p * r.j_sq, *ledger.values(), r.forcing_power,
               cum[i], work[i], indef[i]]


def _dissipation_header(traj: Trajectory):
    keys = list(traj.records[0].ledger.as_dict())
    return ["t", "gamma_q2", "lambda_p_j2", *keys, "forcing_power", "int_dissipation", "int_forcing", "int_indefinite"]


def _snapshot_residuals(state: State, p) -> list:
    terms = EnergyTerms(state, p)
    return [
        cancellation_residual(refine(state, resolved_size(state.grid)), p),
        advection_neutrality_residual(state, p, terms),
        q_cross_residual(state, p, terms),
        stress_power_residual(state, p, terms),
    ]


def _dump_names(index: int) -> dict:
    return {name: f"fields/snap{index:05d}_{name}.bin" for name in ("d", "psi", "v")}


def write_outputs(out: Path, cfg: RunConfig, traj: Trajectory, status: str, wall: float) -> list[str]:
    files = []
    (out / "fields").mkdir(exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())
    files.append("config.ini")

    _write_csv(out / "energy.csv", ["t", *ENERGY_COLUMNS, "free_energy", "kinetic", "total"], _energy_rows(traj))
    _write_csv(out / "dissipation.csv", _dissipation_header(traj), _dissipation_rows(traj))
    files += ["energy.csv", "dissipation.csv"]

    residuals = [r.row() for r in energy_identity_residual(traj)]
    snapshots = []
    for i, s in enumerate(traj.snapshots):
        residuals += [r.row() for r in _snapshot_residuals(s, traj.params)]
        names = _dump_names(i)
        for key, f in (("d", s.d), ("psi", s.psi), ("v", s.v)):
            write_field(out / names[key], f, s.grid, s.t)
            files.append(names[key])
        snapshots.append({"index": i, "t": s.t, **names})
    residuals.sort(key=lambda row: (row["t"], row["name"]))
    _write_csv(out / "residuals.csv", ["t", "name", "value", "scale", "relative"],
               ([r["t"], r["name"], r["value"], r["scale"], r["relative"]] for r in residuals))
    files.append("residuals.csv")

    ledger = norm_ledger(traj)
    rows = list(ledger.rows())
    _write_csv(out / "ledger.csv", list(rows[0]), ([row[k] for k in rows[0]] for row in rows))
    files.append("ledger.csv")

    manifest = {
        "config_sha256": cfg.digest(),
        "version": __version__,
        "seed": cfg.initial.seed,
        "grid": {"n": cfg.grid_n, "lengths": list(cfg.lengths)},
        "params": cfg.params.as_dict(),
        "pitch": list(cfg.initial.pitch),
        "status": status,
        "wall_clock_seconds": wall,
        "snapshots": snapshots,
        "files": {name: _sha256(out / name) for name in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files


# -- commands -----------------------------------------------------------------


def cmd_certify(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cert = certify(cfg.params)
    print(cert.report())
    if args.json:
        print(json.dumps(cert.key_values(), sort_keys=True))
    return EXIT_OK if cert.present else EXIT_FAIL


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config).with_overrides(args.dt, args.t_end, args.preset, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT

    grid = cfg.grid
    initial = cfg.initial.build(grid, cfg.solver.galerkin(grid))
    start = time.perf_counter()
    status, code = "completed", EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if not certify(cfg.params).present:
            print("warning: coefficients are not certified dissipative", file=sys.stderr)
        try:
            traj = run(initial, cfg.solver, cfg.params)
        except BlowUpError as exc:
            print(f"error: {exc}", file=sys.stderr)
            traj, status, code = exc.trajectory, "blow-up", EXIT_BLOWUP
    write_outputs(out, cfg, traj, status, time.perf_counter() - start)
    print(f"{status}: {len(traj.records)} levels, t = {traj.records[-1].t:.6g}, output in {out}")
    return code


def _read_csv(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


class AuditFailure(Exception):
    pass


def audit_directory(out: Path) -> list[tuple[str, float, bool]]:
    """Recompute every identity from a run directory; returns (check, worst relative, ok)."""
    manifest = json.loads((out / "manifest.json").read_text())
    results = []

    bad = [name for name, digest in manifest["files"].items()
           if not (out / name).exists() or _sha256(out / name) != digest]
    results.append(("dump_integrity", float(len(bad)), not bad))
    if bad:
        log.error("checksum mismatch: %s", ", ".join(bad))
        return results

    cfg = parse_config((out / "config.ini").read_text())
    p = cfg.params
    n = cfg.solver.galerkin(cfg.grid)
    pitch = np.asarray(manifest.get("pitch", cfg.initial.pitch), dtype=float)
    worst = {name: 0.0 for name in TOLERANCES}

    energy = {float(row["t"]): row for row in _read_csv(out / "energy.csv")}
    for snap in manifest["snapshots"]:
        fields = {}
        for key in ("d", "psi", "v"):
            coef, grid, t = read_field(out / snap[key])
            outside = np.where(grid.modes(n), 0, coef)
            worst["band_limit"] = max(worst["band_limit"],
                                      float(np.abs(outside).max()) / max(float(np.abs(coef).max()), 1e-300))
            fields[key] = coef
        state = State(grid, fields["d"], LayerField(pitch, fields["psi"]), fields["v"], t)
        if not is_solenoidal(state.v, grid, TOLERANCES["solenoidal"]):
            worst["solenoidal"] = float("inf")
        row = energy.get(t)
        if row is None:
            raise AuditFailure(f"no energy row for snapshot at t = {t}")
        terms = EnergyTerms(state, p)
        total = terms.breakdown.total + 0.5 * inner_product(state.v, state.v, grid)
        expected = float(row["total"])
        worst["energy_consistency"] = max(worst["energy_consistency"],
                                          abs(total - expected) / max(abs(expected), 1e-300))
        fine = refine(state, resolved_size(grid))
        for rep in (cancellation_residual(fine, p), advection_neutrality_residual(state, p, terms),
                    q_cross_residual(state, p, terms), stress_power_residual(state, p, terms)):
            worst[rep.name] = max(worst[rep.name], rep.relative)

    diss = _read_csv(out / "dissipation.csv")
    rows = list(energy.values())
    E = np.array([float(r["total"]) for r in rows])
    R = (E - E[0]) + np.array([float(r["int_dissipation"]) - float(r["int_forcing"]) + float(r["int_indefinite"])
                               for r in diss])
    scale = max(float(np.abs(E).max()), float(max(abs(float(r["int_dissipation"])) for r in diss)), 1e-300)
    worst["energy_law"] = float(np.abs(R).max()) / scale

    for name, tol in TOLERANCES.items():
        results.append((name, worst[name], worst[name] <= tol))
    return results


def cmd_audit(args) -> int:
    out = Path(args.out_dir)
    if not out.is_dir() or not (out / "manifest.json").exists():
        print(f"error: {out} is not a run directory (no manifest.json)", file=sys.stderr)
        return EXIT_INPUT
    try:
        results = audit_directory(out)
    except (DumpFormatError, ConfigError, AuditFailure, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"FAIL dump_integrity: {exc}")
        return EXIT_FAIL
    ok = True
    for name, value, passed in results:
        print(f"{'ok  ' if passed else 'FAIL'} {name}: {value:.3e}")
        ok &= passed
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smectic", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="check the dissipativity conditions of a coefficient set")
    c.add_argument("--config", required=True)
    c.add_argument("--json", action="store_true", help="also print machine-readable key/values")
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("run", help="integrate a configuration and write CSVs, dumps and a manifest")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--dt", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--preset", choices=("ground", "perturbed-ground", "random"))
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="recompute residual identities from a run directory")
    a.add_argument("out_dir")
    a.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
