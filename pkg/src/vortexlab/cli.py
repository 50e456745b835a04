"""Batch command-line front end.

One subcommand per analysis: derived scales, Rabi spectrum and dispersive
shift sweeps, the spectrum/coherence fitters, landscape and interaction
maps, the tunneling solver, telegraph synthesis and analysis, and batch
fitting over a directory of spectra. Every run writes its outputs plus a
manifest.json recording the config hash, the seed and a content hash per
file. Outputs are byte-deterministic for a fixed config and seed; the
manifest timestamp is the only varying field.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure (an
error report is written to the output directory).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .constants import CONSTANTS
from .core import derive_scales
from .errors import ConfigError, VortexlabError
from . import energetics, fitting, jumps, rabi, tunneling

_H = CONSTANTS.h


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=",", lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects output files and writes the manifest at the end."""

    def __init__(self, command: str, out_dir: Path, cfg: RunConfig | None,
                 seed: int | None):
        self.command = command
        self.out_dir = out_dir
        self.cfg = cfg
        self.seed = seed
        self.outputs: list[Path] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out_dir / name
        _write_csv(path, header, rows)
        self.outputs.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / name
        _write_json(path, payload)
        self.outputs.append(path)
        return path

    def table(self, stem: str, fmt: str, payload: dict) -> Path:
        """One result as result.json or a flattened single-row CSV."""
        if fmt == "json":
            return self.json(f"{stem}.json", payload)
        flat: dict[str, object] = {}
        for key, value in payload.items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    flat[f"{key}.{sub}"] = v
            elif isinstance(value, (list, tuple)):
                flat[key] = ";".join(str(v) for v in value)
            else:
                flat[key] = value
        keys = sorted(flat)
        return self.csv(f"{stem}.csv", keys, [[flat[k] for k in keys]])

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "version": __version__,
            "config_sha256": self.cfg.sha256 if self.cfg else None,
            "seed": self.seed,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": {p.name: _sha256_file(p) for p in self.outputs},
        }
        _write_json(self.out_dir / "manifest.json", manifest)


def _fit_payload(result: fitting.FitResult, scale: dict[str, tuple[str, float]]
                 ) -> dict:
    """FitResult as a JSON-ready dict with display units."""
    params = {}
    errors = {}
    for key, value in result.params.items():
        name, factor = scale.get(key, (key, 1.0))
        params[name] = value / factor
        se = result.std_errors.get(key, math.nan)
        errors[name] = (se / factor) if math.isfinite(se) else None
    return {"params": params, "std_errors": errors,
            "residual_norm": result.residual_norm,
            "iterations": result.iterations,
            "converged": result.converged,
            "message": result.message}


def _read_csv_columns(path: Path, minimum: int) -> np.ndarray:
    rows = []
    ncols = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:  # header = first non-comment, non-blank line
            if row and row[0].lstrip().startswith("#"):
                continue
            if row and any(c.strip() for c in row):
                header = row
                break
        if header is None:
            raise VortexlabError(f"{path}: empty file")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if row[0].lstrip().startswith("#"):
                continue
            if ncols is None:
                ncols = len(row)
                if ncols < minimum:
                    raise VortexlabError(
                        f"{path}: need at least {minimum} columns, got {ncols}")
            if len(row) != ncols:
                raise VortexlabError(f"{path}: ragged row {row!r}")
            try:
                rows.append([float(c) if c.strip() else math.nan for c in row])
            except ValueError as exc:
                raise VortexlabError(f"{path}: non-numeric cell: {exc}") from exc
    if not rows:
        raise VortexlabError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def _load_trace(path: Path) -> fitting.TimeTrace:
    """CSV with columns t_us, value[, sigma]."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        t, v, s = [], [], []
        for row in reader:
            if not row:
                continue
            t.append(float(row[0]) * 1e-6)
            v.append(float(row[1]))
            if len(row) > 2 and row[2].strip():
                s.append(float(row[2]))
    sigma = np.asarray(s) if len(s) == len(t) and s else None
    return fitting.TimeTrace(times=np.asarray(t), values=np.asarray(v),
                             sigma=sigma)


def _parallel_map(fn, items, workers: int):
    """Order-preserving map over a bounded thread pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_scales(args, cfg: RunConfig, run: Run) -> int:
    device = cfg.device()
    scales = derive_scales(device)
    run.csv("scales.csv",
            ["Lambda_mm", "eps0_J", "eps0_over_h_THz", "phi_S", "B_S_uT"],
            [[scales.Lambda * 1e3, scales.eps0, scales.eps0 / _H / 1e12,
              scales.phi_S, scales.B_S * 1e6]])
    return 0


def _spectrum_rows(params, trunc, fields, workers):
    def solve(B):
        try:
            return rabi.solve_qrm(params, float(B), trunc)
        except VortexlabError:
            return None

    specs = _parallel_map(solve, list(fields), workers)
    rows = []
    for B, spec in zip(fields, specs):
        if spec is None:
            rows.append([B * 1e6, None, None, None, None])
        else:
            rows.append([B * 1e6, spec.f_q_dressed / 1e9, spec.f_r_g / 1e9,
                         spec.f_r_e / 1e9, spec.chi / 1e6])
    return rows


def _cmd_spectrum(args, cfg: RunConfig, run: Run) -> int:
    params, trunc = cfg.qrm()
    fields = cfg.sweep_fields()
    rows = _spectrum_rows(params, trunc, fields, args.workers)
    name = "chi.csv" if args.command == "chi" else "spectrum.csv"
    run.csv(name, ["B_uT", "f_q_GHz", "f_r_g_GHz", "f_r_e_GHz", "chi_MHz"], rows)
    return 0


_QRM_UNITS = {"f_r": ("f_r_GHz", 1e9), "g": ("g_MHz", 1e6),
              "gamma": ("gamma_GHz_per_mT", 1e12), "B0": ("B0_uT", 1e-6),
              "f_q0": ("f_q0_GHz", 1e9)}


def _cmd_fit_spectrum(args, cfg: RunConfig, run: Run) -> int:
    qubit = _read_csv_columns(Path(args.qubit), 3)
    resonator = _read_csv_columns(Path(args.resonator), 3)
    dataset = fitting.SpectrumDataset(
        qubit_points=np.column_stack([qubit[:, 0] * 1e-6, qubit[:, 1] * 1e9,
                                      qubit[:, 2] * 1e9]),
        resonator_points=np.column_stack([resonator[:, 0] * 1e-6,
                                          resonator[:, 1] * 1e9,
                                          resonator[:, 2] * 1e9]))
    init = {}
    trunc = rabi.HilbertTruncation(24)
    if cfg is not None and cfg.has("qrm"):
        params, trunc = cfg.qrm()
        init = {"f_r": params.f_r, "g": params.g, "gamma": params.gamma,
                "B0": params.B0, "f_q0": params.f_q0}
    result = fitting.fit_joint_aqrm(dataset, init, trunc)
    run.table("fit_spectrum", args.format, _fit_payload(result, _QRM_UNITS))
    return 0 if result.converged else 2


def _cmd_fit_decay(args, cfg: RunConfig, run: Run) -> int:
    trace = _load_trace(Path(args.data))
    result = fitting.fit_exponential(trace)
    stem = "fit_echo" if args.command == "fit-echo" else "fit_decay"
    run.table(stem, args.format, _fit_payload(
        result, {"T": ("T_us", 1e-6), "A": ("A", 1.0), "c": ("c", 1.0)}))
    return 0 if result.converged else 2


def _cmd_fit_ramsey(args, cfg: RunConfig, run: Run) -> int:
    trace = _load_trace(Path(args.data))
    result = fitting.fit_ramsey_beat(trace)
    units = {"T2s": ("T2s_us", 1e-6), "f1": ("f1_MHz", 1e6),
             "f2": ("f2_MHz", 1e6), "f_beat": ("f_beat_MHz", 1e6),
             "a1": ("a1", 1.0), "a2": ("a2", 1.0), "phi1": ("phi1_rad", 1.0),
             "phi2": ("phi2_rad", 1.0), "c": ("c", 1.0)}
    run.table("fit_ramsey", args.format, _fit_payload(result, units))
    return 0 if result.converged else 2


def _cmd_fit_rabi(args, cfg: RunConfig, run: Run) -> int:
    data = _read_csv_columns(Path(args.data), 3)  # amplitude_uV, t_us, value
    scans = []
    for amp in np.unique(data[:, 0]):
        sel = data[data[:, 0] == amp]
        order = np.argsort(sel[:, 1])
        trace = fitting.TimeTrace(times=sel[order, 1] * 1e-6,
                                  values=sel[order, 2])
        scans.append((float(amp) * 1e-6, trace))
    fit, omegas, warnings = fitting.fit_rabi_linear(scans)
    payload = _fit_payload(fit, {"slope": ("slope_MHz_per_uV", 1e12)})
    payload["Omega_MHz_per_amplitude"] = {_fmt(a * 1e6): om / 1e6
                                          for a, om in sorted(omegas.items())}
    payload["warnings"] = warnings
    run.json("fit_rabi.json", payload)
    if args.format == "csv":
        run.csv("fit_rabi.csv", ["amplitude_uV", "Omega_MHz"],
                [[a * 1e6, om / 1e6] for a, om in sorted(omegas.items())])
    return 0 if fit.converged else 2


def _cmd_landscape(args, cfg: RunConfig, run: Run) -> int:
    device = cfg.device()
    scales = derive_scales(device)
    sites = cfg.sites() if cfg.has("pinning") else []
    B = args.field_ut * 1e-6
    x = np.linspace(0.0, device.w, args.points)
    V = energetics.total_potential(x, 0.0, B, args.vortex_density, sites,
                                   scales, device)
    rows = [[xi * 1e9, 0.0, vi / scales.eps0, vi / _H / 1e9]
            for xi, vi in zip(x, V)]
    run.csv("landscape.csv", ["x_nm", "y_nm", "V_over_eps0", "V_GHz"], rows)
    return 0


def _cmd_gamma_map(args, cfg: RunConfig, run: Run) -> int:
    device = cfg.device()
    scales = derive_scales(device)
    deltas = np.linspace(args.delta_min_nm, args.delta_max_nm, args.n_delta) * 1e-9
    rows = []
    for delta in deltas:
        x_bars = np.linspace(delta, device.w - delta, args.n_xbar)
        for x_bar in x_bars:
            gamma = energetics.gamma_from_geometry(delta, x_bar, scales, device)
            rows.append([x_bar * 1e6, delta * 1e9, gamma / 1e12])
    run.csv("gamma_map.csv", ["x_bar_um", "delta_LR_nm", "gamma_GHz_per_mT"],
            rows)
    return 0


def _cmd_pair(args, cfg: RunConfig, run: Run) -> int:
    device = cfg.device()
    scales = derive_scales(device)
    r1 = (args.x1_um * 1e-6, args.y1_um * 1e-6)
    r2 = (args.x2_um * 1e-6, args.y2_um * 1e-6)
    g2 = energetics.gibbs_pair(r1, r2, scales, device)
    pair = energetics.VortexPair(R1=r1, R2=r2, delta_LR=args.delta_nm * 1e-9)
    coupling = energetics.pair_coupling(pair, scales, device)
    run.json("pair.json", {
        "G2_J": g2,
        "G2_over_eps0": g2 / scales.eps0,
        "hessian_J_per_m2": [[coupling.hessian[i, j] for j in (0, 1)]
                             for i in (0, 1)],
        "coupling_scale_J": coupling.energy_scale,
        "coupling_scale_over_h_MHz": coupling.energy_scale / _H / 1e6,
    })
    return 0


def _cmd_tunnel(args, cfg: RunConfig, run: Run) -> int:
    device = cfg.device()
    scales = derive_scales(device)
    sites = cfg.sites()
    t = cfg.section("tunneling")
    model = cfg.tunnel_model()
    fields = cfg.sweep_fields()
    sweep = tunneling.spectrum_vs_field(
        sites, (t["x_min_nm"], t["x_max_nm"]), fields, model, scales, device,
        grid_points=int(t.get("grid_points", 1024)),
        k=max(2, int(t.get("k_levels", 3))))
    rows = []
    for B, omega, res in zip(sweep.fields, sweep.omega_q, sweep.results):
        rows.append([B * 1e6, omega / (2 * math.pi) / 1e9,
                     res.energies[0] / _H / 1e9, res.energies[1] / _H / 1e9])
    run.csv("tunnel.csv", ["B_uT", "f_q_GHz", "E0_GHz", "E1_GHz"], rows)
    run.json("tunnel_summary.json", {
        "sweet_spot_B_uT": sweep.sweet_spot_B * 1e6,
        "min_f_q_GHz": float(sweep.omega_q.min() / (2 * math.pi) / 1e9),
    })
    return 0


def _cmd_synth_jumps(args, cfg: RunConfig, run: Run) -> int:
    tg = cfg.telegraph()
    ro = cfg.readout()
    duration = cfg.section("jumps")["duration_s"]
    traj = jumps.simulate_trajectory(tg, ro, duration, run.seed)
    rows = [[t * 1e6, z.real, z.imag, int(s)]
            for t, z, s in zip(traj.times, traj.iq_points, traj.true_states)]
    run.csv("trajectory.csv", ["t_us", "I", "Q", "true_state"], rows)
    return 0


def _cmd_analyze_jumps(args, cfg: RunConfig, run: Run) -> int:
    data = _read_csv_columns(Path(args.data), 3)
    times = data[:, 0] * 1e-6
    points = data[:, 1] + 1j * data[:, 2]
    spacing = float(np.median(np.diff(times)))

    clusters = jumps.iq_cluster(points)
    ro = jumps.ReadoutModel(center_g=clusters.center_g,
                            center_e=clusters.center_e,
                            sigma_cloud=clusters.sigma_cloud,
                            tau_m=spacing, spacing=spacing)
    traj = jumps.Trajectory(times=times, iq_points=points)
    assigned = jumps.latching_filter(traj, ro, n_sigma=args.n_sigma)
    stats = jumps.dwell_statistics(assigned, spacing)
    p_e = float(assigned.mean())

    payload = {
        "T_up_us": stats.T_up_hat * 1e6,
        "T_down_us": stats.T_down_hat * 1e6,
        "T1_us": stats.T1_hat * 1e6,
        "P_e": p_e,
        "n_dwells_up": stats.n_up,
        "n_dwells_down": stats.n_down,
    }
    f_q = None
    if args.f_q_ghz is not None:
        f_q = args.f_q_ghz * 1e9
    elif cfg is not None and cfg.has("qrm"):
        f_q = cfg.sections["qrm"].get("f_q0_GHz")
    if f_q is not None and 0.0 < p_e < 0.5:
        payload["T_eff_mK"] = jumps.effective_temperature(p_e, f_q) * 1e3
    else:
        payload["T_eff_mK"] = None
    run.table("jumps_analysis", args.format, payload)
    return 0


def _cmd_batch_fit(args, cfg: RunConfig, run: Run) -> int:
    directory = Path(args.data_dir)
    files = sorted(p for p in directory.glob("*.csv"))
    if not files:
        print(f"error: no CSV datasets in {directory}", file=sys.stderr)
        return 1
    rows = []
    for path in files:
        phi_ratio = _phi_from_header(path)
        try:
            data = _read_csv_columns(path, 2)
            points = np.column_stack([
                data[:, 0] * 1e-6, data[:, 1] * 1e9,
                data[:, 2] * 1e9 if data.shape[1] > 2 else np.full(len(data), 1e6)])
            result = fitting.fit_hyperbola(points)
            rows.append([path.name, phi_ratio,
                         result.params["f_q0"] / 1e9,
                         result.params["B0"] * 1e6,
                         result.params["gamma"] / 1e12,
                         None, result.converged, ""])
        except Exception as exc:
            rows.append([path.name, phi_ratio, None, None, None, None, False,
                         str(exc)])
    run.csv("batch_fit.csv",
            ["dataset", "phi_over_phi_S", "f_q0_GHz", "B0_uT",
             "gamma_GHz_per_mT", "g_MHz", "converged", "error"],
            rows)
    return 0


def _phi_from_header(path: Path) -> float | None:
    """Optional '# phi_over_phi_S = x' comment in a dataset header."""
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                if "phi_over_phi_S" in line and "=" in line:
                    return float(line.split("=", 1)[1])
    except (OSError, ValueError):
        pass
    return None


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

_NEEDS_CONFIG = {"scales", "spectrum", "chi", "landscape", "gamma-map", "pair",
                 "tunnel", "synth-jumps"}

_HANDLERS = {
    "scales": _cmd_scales,
    "spectrum": _cmd_spectrum,
    "chi": _cmd_spectrum,
    "fit-spectrum": _cmd_fit_spectrum,
    "fit-decay": _cmd_fit_decay,
    "fit-echo": _cmd_fit_decay,
    "fit-ramsey": _cmd_fit_ramsey,
    "fit-rabi": _cmd_fit_rabi,
    "landscape": _cmd_landscape,
    "gamma-map": _cmd_gamma_map,
    "pair": _cmd_pair,
    "tunnel": _cmd_tunnel,
    "synth-jumps": _cmd_synth_jumps,
    "analyze-jumps": _cmd_analyze_jumps,
    "batch-fit": _cmd_batch_fit,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Vortex-qubit modeling and batch analysis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_data=False, analysis=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="config file path")
        p.add_argument("-o", "--out", default="out",
                       help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker pool size for sweeps")
        if needs_data:
            p.add_argument("--data", required=True, help="input data CSV")
        if analysis:
            p.add_argument("--format", choices=("json", "csv"),
                           default="json", help="result format")
        return p

    add("scales", "derived device scales and thresholds")
    add("spectrum", "dressed transition spectrum versus field")
    add("chi", "dispersive shift versus field")

    p = add("fit-spectrum", "joint qubit+resonator spectrum fit", analysis=True)
    p.add_argument("--qubit", required=True, help="qubit points CSV "
                   "(B_uT, f_GHz, sigma_GHz)")
    p.add_argument("--resonator", required=True, help="resonator points CSV")

    add("fit-decay", "exponential decay fit (t_us, value[, sigma])",
        needs_data=True, analysis=True)
    add("fit-echo", "echo decay fit (same model as fit-decay)",
        needs_data=True, analysis=True)
    add("fit-ramsey", "two-tone damped-cosine fit with beat extraction",
        needs_data=True, analysis=True)
    add("fit-rabi", "oscillation frequency versus drive amplitude "
        "(amplitude_uV, t_us, value)", needs_data=True, analysis=True)

    p = add("landscape", "vortex energy along the strip width")
    p.add_argument("--field-ut", type=float, default=0.0,
                   help="applied field in microtesla")
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--vortex-density", type=float, default=0.0,
                   help="areal density of other vortices (1/m^2)")

    p = add("gamma-map", "field dispersion over double-well geometries")
    p.add_argument("--delta-min-nm", type=float, default=5.0)
    p.add_argument("--delta-max-nm", type=float, default=50.0)
    p.add_argument("--n-delta", type=int, default=200)
    p.add_argument("--n-xbar", type=int, default=200)

    p = add("pair", "two-vortex interaction at given positions")
    p.add_argument("--x1-um", type=float, required=True)
    p.add_argument("--y1-um", type=float, required=True)
    p.add_argument("--x2-um", type=float, required=True)
    p.add_argument("--y2-um", type=float, required=True)
    p.add_argument("--delta-nm", type=float, default=10.0,
                   help="tunneling length for the coupling scale")

    add("tunnel", "double-well eigenfrequencies versus field")
    add("synth-jumps", "synthesize a telegraph readout record")

    p = add("analyze-jumps", "cluster, filter and time a readout record",
            needs_data=True, analysis=True)
    p.add_argument("--n-sigma", type=float, default=1.5,
                   help="latching band half-width in cloud sigmas")
    p.add_argument("--f-q-ghz", type=float, default=None,
                   help="qubit frequency for the effective temperature")

    p = add("batch-fit", "hyperbola fits over a directory of spectra")
    p.add_argument("--data-dir", required=True)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; the contract is 1
        return 0 if exc.code in (0, None) else 1

    cfg = None
    seed = None
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command in _NEEDS_CONFIG:
            print(f"error: {args.command} requires --config", file=sys.stderr)
            return 1
        if cfg is not None:
            seed = cfg.seed(os.environ.get("VORTEXLAB_SEED"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    run = Run(args.command, Path(args.out), cfg, seed)
    try:
        code = _HANDLERS[args.command](args, cfg, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (VortexlabError, ValueError, OSError) as exc:
        _write_json(run.out_dir / "error.json",
                    {"error": type(exc).__name__, "message": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run.finish()
    return code


if __name__ == "__main__":
    raise SystemExit(main())
