"""Command-line front end: ``nanocavity {design,simulate,analyze,plan}``.

Exit codes: 0 success (including "no transits found"), 2 invalid
configuration, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import pydantic
import yaml

from . import __version__, analysis, io, physics, planner, transit
from .config import ParticleConfig, RunConfig, load_config
from .traces import FrequencyScan

log = logging.getLogger("nanocavity")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 4


def _run_id(command, config, extra=None):
    blob = json.dumps({"command": command, "config": config, "extra": extra}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def record(command: str, cfg: RunConfig, outputs: dict, elapsed: float, extra=None) -> dict:
    resolved = cfg.resolved()
    return {
        "run_id": _run_id(command, resolved, extra),
        "tool": "nanocavity",
        "version": __version__,
        "command": command,
        "config": resolved,
        "outputs": outputs,
        "timing_s": round(elapsed, 6),
    }


def _with_particle(cfg: RunConfig) -> RunConfig:
    if cfg.particle is not None:
        return cfg
    return cfg.model_copy(update={"particle": ParticleConfig()})


# ---------------------------------------------------------------------------
# subcommands; each returns the "outputs" part of a results record
# ---------------------------------------------------------------------------

def run_design(cfg: RunConfig) -> dict:
    mode = cfg.mode()
    drive = cfg.drive.drive(mode)
    kappa = mode.decay_rate
    out = {
        "cavity": {
            "fsr_hz": mode.fsr,
            "waist_m": mode.waist,
            "mode_volume_m3": mode.mode_volume,
            "mode_volume_pl": mode.mode_volume * 1e15,
            "mode_volume_lambda3": mode.mode_volume / mode.wavelength**3,
            "decay_rate_rad_s": kappa,
            "kappa_over_2pi_hz": kappa / (2 * math.pi),
            "linewidth_fwhm_hz": kappa / math.pi,
            "rayleigh_range_m": mode.rayleigh_range,
        },
        "drive": {
            "detuning_rad_s": drive.detuning,
            "detuning_over_kappa": drive.detuning / kappa,
            "intracavity_power_w": drive.intracavity_power,
            "baseline_transmission": float(physics.lorentzian_transmission(drive.detuning, kappa)),
        },
    }
    if cfg.particle is not None:
        p = cfg.particle.particle()
        c = physics.coupling(p, mode, drive)
        kg, amu = physics.mass_of(p)
        out["particle"] = {
            "radius_m": p.radius,
            "permittivity": p.permittivity,
            "density_kg_m3": p.density,
            "polarizability_factor": p.chi,
            "mass_kg": kg,
            "mass_amu": amu,
            "dispersive_shift_rad_s": c.dispersive_shift,
            "U0_over_kappa": c.dispersive_shift / kappa,
            "trap_frequency_rad_s": c.trap_frequency,
            "omega_z_over_kappa": c.trap_frequency / kappa,
            "scattering_loss_rad_s": c.scattering_loss,
            "kappa_s_over_kappa": c.scattering_loss / kappa,
        }
    return out


def simulate_traces(cfg: RunConfig, threads: int = 1):
    """All (trace, trajectory) pairs for the configured run, nothing written."""
    mode = cfg.mode()
    drive = cfg.drive.drive(mode)
    particle = cfg.particle.particle()
    sampling = cfg.sampling.sampling()
    sim = cfg.simulate
    if sim.count == 1:
        t0 = sampling.duration / 2 if sim.t0 is None else sim.t0
        traj = transit.Trajectory(sim.velocity, sim.offset, t0)
        return [(transit.simulate_transit(traj, particle, mode, drive, sampling), traj)]
    return transit.generate_event_batch(sim.distribution.distribution(), sim.count, particle,
                                        mode, drive, sampling, threads=threads)


def run_simulate(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    events = simulate_traces(cfg, threads)
    width = max(4, len(str(len(events) - 1)))
    files, truth = [], []
    for i, (trace, traj) in enumerate(events):
        name = f"trace_{i:0{width}d}.csv"
        files.append((out_dir / name, io.format_trace(trace)))
        truth.append({"file": name, "index": i, **asdict(traj)})
    for path, text in files:
        io.atomic_write(path, text)
    io.write_results(out_dir / "truth.yaml", {"events": truth})
    return {"traces": [f["file"] for f in truth], "truth": "truth.yaml", "events": truth}


def _estimate_dict(est: analysis.TransitEstimate) -> dict:
    d = asdict(est)
    d["window"] = list(est.window)
    return d


def _analyze_one(data, cfg: RunConfig, eta: float):
    mode = cfg.mode()
    if isinstance(data, FrequencyScan):
        try:
            fit = analysis.calibrate_and_fit_scan(data, mode.fsr)
        except (analysis.CalibrationError, analysis.FitError) as exc:
            return {"kind": "scan", "error": str(exc)}
        return {"kind": "scan", "fit": asdict(fit)}
    drive = cfg.drive.drive(mode)
    a = cfg.analysis
    if len(data) <= 10:
        estimates = []
    else:
        estimates = analysis.analyze_trace(data, mode, drive, eta, a.threshold_sigma,
                                           merge_gap=a.merge_gap, pad=a.pad)
    return {"kind": "transit", "n_events": len(estimates),
            "events": [_estimate_dict(e) for e in estimates]}


def run_analyze(cfg: RunConfig, paths, truth_path=None, threads: int = 1) -> dict:
    """Analyze trace/scan files. Raises :class:`io.TraceFormatError` on unreadable input."""
    datas = [io.read_data_file(p) for p in paths]
    truth = {}
    if truth_path is not None:
        try:
            truth = {e["file"]: e for e in io.read_results(truth_path)["events"]}
        except (OSError, KeyError, TypeError, yaml.YAMLError) as exc:
            raise io.TraceFormatError(f"{truth_path}: cannot read truth file: {exc}") from exc
    if cfg.analysis.scattering_ratio is not None:
        eta = cfg.analysis.scattering_ratio
    elif cfg.particle is not None:
        eta = physics.scattering_ratio(cfg.particle.particle(), cfg.mode().wavenumber)
    else:
        eta = 0.0

    def work(item):
        path, data = item
        res = {"file": str(path), **_analyze_one(data, cfg, eta)}
        t = truth.get(Path(path).name)
        if t is not None:
            res["truth"] = t
            for ev in res.get("events", []):
                vx, vz = abs(t["velocity"][0]), abs(t["velocity"][2])
                ev["v_x_error"] = None if ev["v_x"] is None else ev["v_x"] - vx
                ev["v_z_error"] = None if ev["v_z"] is None else ev["v_z"] - vz
        return res

    items = list(zip(paths, datas))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(i) for i in items]
    return {"scattering_ratio": eta, "files": results}


def run_plan(cfg: RunConfig, threads: int = 1) -> tuple[dict, list]:
    p = cfg.plan
    eps, rho = p.material_constants()
    lam = cfg.cavity.wavelength
    rows = planner.sweep_parameter_space(p.ratios, p.grid("powers"), p.grid("masses"),
                                         p.grid("lengths"), lam, eps, rho, p.margin, threads)
    summary = []
    for q in p.ratios:
        for P in p.grid("powers"):
            entry = {"q": q, "P_cav_W": P}
            try:
                opt = planner.min_coolable_mass(eps, rho, q, P, lam, p.constraints(), p.margin)
            except planner.InfeasibleError as exc:
                entry.update(feasible=False, violated_condition=exc.condition.value,
                             reason=str(exc))
            else:
                f = opt.feasibility
                entry.update(
                    feasible=True, mass_amu=opt.mass_amu, radius_m=opt.radius,
                    L_m=opt.design.length, R_m=opt.design.mirror_radius,
                    required_finesse=f.required_finesse,
                    binding_condition=f.binding_condition.value,
                    U0_over_kappa=f.U0_over_kappa, omega_z_over_kappa=f.omega_z_over_kappa)
            summary.append(entry)
    outputs = {"table": "plan_table.csv", "n_rows": len(rows),
               "columns": list(planner.SWEEP_COLUMNS), "material": p.material,
               "min_coolable_mass": summary}
    return outputs, rows


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override sampling.seed")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help="output directory (default: nanocavity_out)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for batch work (default 1)")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="nanocavity", parents=[common],
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="cavity and coupling report")
    sub.add_parser("simulate", parents=[common], help="synthesize transit traces")
    an = sub.add_parser("analyze", parents=[common], help="extract transits from trace files")
    an.add_argument("paths", nargs="*", help="trace or scan files")
    an.add_argument("--truth", metavar="PATH", help="ground-truth sidecar from simulate")
    sub.add_parser("plan", parents=[common], help="cooling feasibility sweep")
    return parser


def _config_diagnostics(exc: pydantic.ValidationError) -> str:
    lines = ["invalid configuration:"]
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = vars(args)
    logging.basicConfig(level=logging.DEBUG if opts.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = Path(opts.get("out", "nanocavity_out"))
    threads = max(1, opts.get("threads", 1))
    overrides = {"sampling": {"seed": opts["seed"]}} if "seed" in opts else {}

    try:
        cfg = load_config(opts.get("config"), **overrides)
    except pydantic.ValidationError as exc:
        print(_config_diagnostics(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    command = args.command
    start = time.perf_counter()
    try:
        if command == "design":
            outputs = run_design(cfg)
            rec = record(command, cfg, outputs, time.perf_counter() - start)
            print(io.dump_results(outputs), end="")
            if "out" in opts:
                io.write_results(out_dir / "design.yaml", rec)
        elif command == "simulate":
            cfg = _with_particle(cfg)
            try:
                outputs = run_simulate(cfg, out_dir, threads)
            except ValueError as exc:
                print(f"invalid configuration: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            rec = record(command, cfg, outputs, time.perf_counter() - start)
            io.write_results(out_dir / "simulate.yaml", rec)
            print(f"wrote {len(outputs['traces'])} trace(s) to {out_dir}")
        elif command == "analyze":
            outputs = run_analyze(cfg, args.paths, args.truth, threads)
            inputs = [Path(p).name for p in args.paths]
            rec = record(command, cfg, outputs, time.perf_counter() - start, inputs)
            io.write_results(out_dir / "analyze.yaml", rec)
            n = sum(f.get("n_events", 0) for f in outputs["files"])
            print(f"analyzed {len(args.paths)} file(s), {n} transit(s) found")
        elif command == "plan":
            outputs, rows = run_plan(cfg, threads)
            rec = record(command, cfg, outputs, time.perf_counter() - start)
            io.write_table(out_dir / "plan_table.csv", planner.SWEEP_COLUMNS, rows)
            io.write_results(out_dir / "plan.yaml", rec)
            print(io.dump_results({"min_coolable_mass": outputs["min_coolable_mass"]}), end="")
    except io.TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
