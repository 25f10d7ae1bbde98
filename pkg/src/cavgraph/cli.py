"""Command-line entry point: ``cavgraph <subcommand> [options]``.

Exit codes: 0 ok, 1 input error, 2 unroutable graph, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, graphc, measure, spin1, witnesses
from .config import RunConfig, load_config
from .errors import InputError, NumericalError, UnroutableGraphError
from .phasespace import GaussianState, mode_quadrature_variance

DEFAULT_SEED = 0
DEFAULT_STRENGTH = 0.5 * math.log(2.0)  # per-mode minimum variance 0.5
DEFAULT_TRIALS = 1000
DEFAULT_ATOMS_PER_SITE = 1500.0
DEFAULT_IMAGING = dict(r=395.0, g=20.0, a0=0.0, a2=5e-5)

BUDGET_KEYS = {
    "inverse_zeta2_max": "1/ζ²_max",
    "photon_shot_noise": "Photon shot noise",
    "coupling_variation": "Coupling variation",
    "interaction_strength_noise": "Interaction strength noise",
    "cavity_photon_loss": "Cavity photon loss",
    "free_space_scattering": "Free space scattering",
    "contrast": "Measured contrast C_Rabi",
}
RECORD_COLUMNS = ["setting", "phi_deg", "trial", "site", "N_plus", "N_zero", "N_minus", "c_plus", "c_zero", "c_minus"]


# -- output helpers --------------------------------------------------------


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Output:
    """Writes named artifacts into --out, or the one matching --format to stdout."""

    def __init__(self, out_dir, fmt: str):
        self.dir = Path(out_dir) if out_dir else None
        self.fmt = fmt
        self.artifacts: list[tuple[str, str, str]] = []

    def add(self, filename: str, text: str, primary_for: str | None = None):
        self.artifacts.append((filename, text, primary_for or Path(filename).suffix.lstrip(".")))

    def flush(self, stdout=None):
        stdout = stdout or sys.stdout
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            for name, text, _ in self.artifacts:
                (self.dir / name).write_text(text, encoding="utf-8")
                print(f"wrote {self.dir / name}", file=sys.stderr)
            return
        chosen = [t for _, t, kind in self.artifacts if kind == self.fmt] or [self.artifacts[0][1]]
        stdout.write(chosen[0])


# -- config helpers --------------------------------------------------------


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _seed(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.get("sampling", "seed", DEFAULT_SEED)
    if not 0 <= int(seed) < 2**64:
        raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def _graph(args, cfg: RunConfig, fallback: dict | None = None) -> graphc.GraphSpec:
    path = getattr(args, "graph", None)
    if path:
        return graphc.GraphSpec.from_file(path)
    if cfg.get("graph", "path"):
        return graphc.GraphSpec.from_file(cfg.resolve_path(cfg.get("graph", "path")))
    preset = cfg.get("graph", "preset")
    if preset:
        presets = {"epr": graphc.epr_graph, "square": graphc.square_graph}
        if preset.lower() not in presets:
            raise InputError(f"unknown graph preset {preset!r} (allowed: {', '.join(presets)})")
        return presets[preset.lower()]()
    if fallback is not None:
        return graphc.GraphSpec(np.array(fallback["adjacency"], dtype=float))
    raise InputError("no graph given: pass --graph or set [graph] path/preset in the config")


def _cavity(cfg: RunConfig) -> dynamics.CavityConfig:
    sec = dict(cfg.section("cavity"))
    if not sec:
        raise InputError("[cavity] section required")
    try:
        return dynamics.CavityConfig(**sec)
    except TypeError as exc:
        raise InputError(f"[cavity] {exc}") from None


def _q(cfg: RunConfig) -> float:
    return cfg.get("dynamics", "q", cfg.get("cavity", "q", graphc.DEFAULT_Q))


def _chi(cfg: RunConfig, q: float) -> float:
    if cfg.get("dynamics", "derive_chi", False):
        return _cavity(cfg).interaction()
    return cfg.get("dynamics", "chi", -q)


def _strength(cfg: RunConfig, chi: float, q: float, override=None):
    """Per-mode squeeze strength r: scalar, or one value per eigenmode (descending eigenvalue order)."""
    if override is not None:
        return float(override)
    r = cfg.get("dynamics", "squeeze_strength")
    if r is not None:
        r = r[0] if len(r) == 1 else np.array(r, dtype=float)
    tau = cfg.get("dynamics", "tau")
    if r is not None and tau is not None:
        raise InputError("[dynamics] set either squeeze_strength or tau, not both")
    if tau is not None:
        dynamics.squeezing_rate(chi, q).require_unstable()
        return -0.5 * math.log(dynamics.finite_time_squeezing(chi, q, tau)[0])
    return DEFAULT_STRENGTH if r is None else r


def _compile(args, cfg: RunConfig, graph: graphc.GraphSpec) -> graphc.CompilationResult:
    q = _q(cfg)
    chi = _chi(cfg, q)
    r = _strength(cfg, chi, q, getattr(args, "strength", None))
    return graphc.compile_graph(graph, squeeze_strength=r, chi=chi, q=q)


def _noise_model(cfg: RunConfig):
    if not cfg.get("noise", "dissipation", False):
        return None
    params = dynamics.dissipation_params(_cavity(cfg))
    cv = cfg.get("noise", "coupling_variation")
    if cv is None and cfg.get("noise", "beta") is not None:
        cv = dynamics.coupling_inhomogeneity_noise(cfg.get("noise", "beta"))
    return graphc.NoiseModel.from_dissipation(params, coupling_variation=cv or 0.0)


def _contrast(cfg: RunConfig) -> float:
    C = cfg.get("noise", "contrast", 1.0)
    if not 0 < C <= 1:
        raise InputError(f"[noise] contrast must lie in (0, 1], got {C}")
    return C


def _reference_angle(cfg: RunConfig) -> float:
    return math.radians(cfg.get("graph", "reference_angle_deg", 45.0))


def _imaging(cfg: RunConfig) -> measure.ImagingCalibration:
    sec = cfg.section("imaging")
    return measure.ImagingCalibration(**{k: sec.get(k, v) for k, v in DEFAULT_IMAGING.items()})


# -- subcommands -----------------------------------------------------------


def cmd_compile(args, out: Output) -> None:
    cfg = _config(args)
    res = _compile(args, cfg, _graph(args, cfg))
    payload = res.to_dict()
    payload["listing"] = res.sequence.listing()
    out.add("compile.json", dumps_json(payload))
    rows = [(i, type(st).__name__, dumps_json(st.__dict__).strip().replace("\n", " ")) for i, st in enumerate(res.sequence.steps)]
    out.add("sequence.csv", csv_text(["step", "kind", "params"], rows))
    out.add("sequence.txt", res.sequence.listing() + "\n", primary_for="txt")


def _records(state: GaussianState, graph, cfg: RunConfig, seed: int, contrast: float):
    """MeasurementRecord rows for the standard witness settings."""
    M = graph.size
    n = int(cfg.get("sampling", "n_trials", DEFAULT_TRIALS))
    if n < 3:
        raise InputError("[sampling] n_trials must be >= 3")
    atoms = cfg.get("cavity", "atom_count")
    n_site = atoms / M if atoms else DEFAULT_ATOMS_PER_SITE
    records = measure.witness_records(state, graph, n, seed, n_site, contrast, _imaging(cfg), _reference_angle(cfg))
    rows = []
    for name, (phi, pops, counts) in records.items():
        phi_deg = float(np.degrees(phi))
        for t in range(n):
            for i in range(M):
                rows.append((name, phi_deg, t, i, *pops[t, i], *counts[t, i]))
    return rows


def cmd_simulate(args, out: Output) -> None:
    cfg = _config(args)
    seed = _seed(args, cfg)
    graph = _graph(args, cfg)
    res = _compile(args, cfg, graph)
    state = graphc.simulate(res.sequence, noise=_noise_model(cfg))
    C = _contrast(cfg)
    step = cfg.get("sampling", "phi_step_deg", 5.0)
    if not 0 < step <= 180:
        raise InputError("[sampling] phi_step_deg must lie in (0, 180]")
    phis = np.arange(0.0, 180.0 - 1e-9, step)
    header = ["phi_deg"] + [f"zeta2_mode_{m}" for m in range(graph.size)]
    rows = [[p] + [C * mode_quadrature_variance(state, res.modes[:, m], math.radians(p)) for m in range(graph.size)] for p in phis]
    payload = {
        "state": state.to_dict(),
        "contrast": C,
        "symplectic_eigenvalues": state.symplectic_eigenvalues(),
        "compilation": res.to_dict(),
        "seed": seed,
    }
    out.add("state.json", dumps_json(payload))
    out.add("curves.csv", csv_text(header, rows))
    if cfg.get("sampling", "n_trials") is not None:
        out.add("records.csv", csv_text(RECORD_COLUMNS, _records(state, graph, cfg, seed, C)), primary_for="records")


def budget_table(cfg: RunConfig) -> dict:
    sec = dict(cfg.section("noise"))
    dyn = cfg.section("dynamics")
    if "coupling_variation" not in sec and "beta" in sec:
        sec["coupling_variation"] = dynamics.coupling_inhomogeneity_noise(sec["beta"])
    if "cavity_photon_loss" not in sec and all(k in dyn for k in ("chi", "q", "kappa", "delta_minus")):
        sec["cavity_photon_loss"] = dynamics.collective_decay_noise(dyn["chi"], dyn["q"], dyn["kappa"], dyn["delta_minus"])
    if "interaction_strength_noise" not in sec and "chi_fluctuation" in sec and "inverse_zeta2_max" in sec and "chi" in dyn:
        sec["interaction_strength_noise"] = dynamics.interaction_fluctuation_noise(
            1.0 / sec["inverse_zeta2_max"], dyn.get("q", graphc.DEFAULT_Q), dyn["chi"], sec["chi_fluctuation"])
    missing = [k for k in BUDGET_KEYS if k not in sec]
    if missing:
        raise InputError(f"[noise] missing budget entries: {', '.join(missing)}")
    budget = dynamics.NoiseBudget(
        unitary_min_variance=sec["inverse_zeta2_max"],
        beam_splitter_terms=[(BUDGET_KEYS[k], sec[k]) for k in ("coupling_variation", "cavity_photon_loss", "free_space_scattering")],
        additive_terms=[(BUDGET_KEYS[k], sec[k]) for k in ("photon_shot_noise", "interaction_strength_noise")],
        contrast=sec["contrast"],
    )
    params = []
    two_pi = 2.0 * math.pi
    if "delta_minus" in dyn:
        params.append(("δ₋ (Hz)", dyn["delta_minus"] / two_pi))
    if "atom_count" in cfg.section("cavity"):
        params.append(("N", cfg.get("cavity", "atom_count")))
    if "chi" in dyn:
        params.append(("χ (Hz)", dyn["chi"] / two_pi))
        lam = dynamics.squeezing_rate(dyn["chi"], dyn.get("q", graphc.DEFAULT_Q))
        params.append(("λ (Hz)", lam.value / two_pi))
    if "tau" in dyn:
        params.append(("τ (s)", dyn["tau"]))
    rows = [{"label": label, "value": v} for label, v in params]
    rows += [{"label": BUDGET_KEYS[k], "value": sec[k]} for k in BUDGET_KEYS]
    expected = dynamics.combine_budget(budget)
    rows.append({"label": "Expected ζ²", "value": expected})
    return {"rows": rows, "expected_zeta2": expected}


def cmd_budget(args, out: Output) -> None:
    table = budget_table(_config(args))
    out.add("budget.json", dumps_json(table))
    out.add("budget.csv", csv_text(["label", "value"], [(r["label"], r["value"]) for r in table["rows"]]))


def _read_records(path) -> dict:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read records {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        need = ["setting", "trial", "site", "N_plus", "N_zero", "N_minus"]
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"records CSV lacks column(s): {', '.join(missing)}", line=1)
        data: dict = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                key = row["setting"]
                phi = float(row.get("phi_deg") or "nan")
                t, i = int(row["trial"]), int(row["site"])
                pops = (float(row["N_plus"]), float(row["N_zero"]), float(row["N_minus"]))
            except (TypeError, ValueError):
                raise InputError("malformed record row", line=lineno) from None
            if min(pops) < 0:
                raise InputError("populations must be >= 0", line=lineno)
            data.setdefault(key, [phi, {}])[1][(t, i)] = pops
    settings = {}
    for key, (phi, cells) in data.items():
        trials = sorted({t for t, _ in cells})
        sites = sorted({i for _, i in cells})
        if len(cells) != len(trials) * len(sites) or sites != list(range(len(sites))):
            raise InputError(f"setting {key!r}: records do not form a complete trial x site grid")
        arr = np.array([[cells[(t, i)] for i in sites] for t in trials], dtype=float)
        settings[key] = (math.radians(phi) if math.isfinite(phi) else float("nan"), arr)
    return settings


def cmd_witness(args, out: Output) -> None:
    cfg = _config(args)
    dn = cfg.get("noise", "detection_noise", 0.0)
    if bool(args.records) == bool(args.state):
        raise InputError("give exactly one of --records or --state")
    if args.state:
        try:
            data = json.loads(Path(args.state).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read state {args.state}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"state JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
        try:
            state = GaussianState.from_dict(data.get("state", data))
        except (KeyError, TypeError, AttributeError):
            raise InputError("state JSON must contain mean and cov") from None
        fallback = data.get("compilation", {}).get("graph") if isinstance(data, dict) else None
        graph = _graph(args, cfg, fallback)
        C = data.get("contrast", _contrast(cfg)) if isinstance(data, dict) else _contrast(cfg)
        report = witnesses.witness_report(state, graph, _reference_angle(cfg), contrast=C, detection_noise=dn)
    else:
        graph = _graph(args, cfg)
        settings = _read_records(args.records)
        report = witnesses.witness_report_from_records(settings, graph, _reference_angle(cfg), detection_noise=dn)
    d = report.to_dict()
    out.add("witness.json", dumps_json(d))
    flat = [(k, v) for k, v in d.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    out.add("witness.csv", csv_text(["quantity", "value"], flat))


def cmd_oracle(args, out: Output) -> None:
    cfg = _config(args)
    sec = cfg.section("oracle")
    atoms = sec.get("atoms", [20, 40, 60])
    grid = np.asarray(sec.get("lambda_t", list(np.round(np.arange(0.0, 0.5001, 0.05), 10))), dtype=float)
    q = sec.get("q", graphc.DEFAULT_Q)
    chi = sec.get("chi_over_q", -1.0) * q
    lam = dynamics.squeezing_rate(chi, q).require_unstable()
    for N in atoms:
        if not 1 <= N <= spin1.MAX_ATOMS:
            raise InputError(f"[oracle] atom number {N} outside 1..{spin1.MAX_ATOMS}")
    rows, per_n = [], {}
    for N in atoms:
        cmp = spin1.gaussian_comparison(int(N), chi, q, grid / lam)
        per_n[str(N)] = cmp["relative_deviation"].tolist()
        for k in range(grid.size):
            rows.append((int(N), float(grid[k]), float(cmp["times"][k]), math.degrees(cmp["phi"][k]),
                         float(cmp["exact"][k]), float(cmp["gaussian"][k]), float(cmp["relative_deviation"][k])))
    header = ["N", "lambda_t", "time_s", "phi_deg", "exact", "gaussian", "relative_deviation"]
    payload = {"chi": chi, "q": q, "lambda": lam, "lambda_t": grid, "relative_deviation": per_n,
               "rows": [dict(zip(header, r)) for r in rows]}
    out.add("oracle.json", dumps_json(payload))
    out.add("oracle.csv", csv_text(header, rows))


def _read_columns(path, columns) -> dict:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in columns if c not in (reader.fieldnames or [])]
            if missing:
                raise InputError(f"{path}: missing column(s) {', '.join(missing)}", line=1)
            out = {c: [] for c in columns}
            for lineno, row in enumerate(reader, start=2):
                try:
                    for c in columns:
                        out[c].append(float(row[c]))
                except (TypeError, ValueError):
                    raise InputError(f"{path}: malformed number", line=lineno) from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return {c: np.array(v) for c, v in out.items()}


def cmd_calibrate(args, out: Output) -> None:
    cfg = _config(args)
    seed = _seed(args, cfg)
    truth = _imaging(cfg)
    n_trials = int(cfg.get("imaging", "n_trials", 500))
    payload: dict = {}
    if args.data:
        cols = _read_columns(args.data, ["mean_counts", "var_counts"])
        mean, var = cols["mean_counts"], cols["var_counts"]
        payload["source"] = str(args.data)
    else:
        atoms = cfg.get("imaging", "atom_numbers", np.geomspace(500, 20000, 6).round().tolist())
        mean, var = measure.projection_noise_data(atoms, n_trials, truth, seed=seed)
        payload["source"] = "synthetic"
        payload["truth"] = truth.to_dict()
        payload["atom_numbers"] = atoms
    fit = measure.projection_noise_fit(mean, var, g=truth.g, n_trials=n_trials)
    payload["fit"] = {**fit.calibration.to_dict(), "a1": fit.calibration.a1, "r_sd": fit.r_sd,
                      "coefficients": fit.coefficients}
    payload["data"] = {"mean_counts": mean, "var_counts": var}
    rows = [("a0", fit.coefficients[0]), ("a1", fit.coefficients[1]), ("a2", fit.coefficients[2]),
            ("r", fit.calibration.r), ("r_sd", fit.r_sd), ("g", fit.calibration.g)]
    if args.rabi:
        cols = _read_columns(args.rabi, ["time_s", "imbalance"])
        rf = measure.rabi_fit(cols["time_s"], cols["imbalance"])
        payload["rabi"] = rf.to_dict()
        rows.append(("C_Rabi", rf.contrast))
    out.add("calibration.json", dumps_json(payload))
    out.add("calibration.csv", csv_text(["quantity", "value"], rows))


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="INI run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="unsigned 64-bit RNG seed")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="write artifacts into DIR")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS,
                        help="stdout format when --out is not given")

    p = argparse.ArgumentParser(prog="cavgraph", description="Compile, simulate and certify cavity graph states.")
    p.add_argument("--config", metavar="PATH", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", parents=[common], help="compile a graph into a pulse sequence")
    c.add_argument("--graph", metavar="PATH")
    c.add_argument("--strength", type=float, help="per-mode squeeze strength r (variance exp(-2r))")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", parents=[common], help="simulate a compiled graph state")
    s.add_argument("--graph", metavar="PATH")
    s.add_argument("--strength", type=float)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("budget", parents=[common], help="combine a noise budget")
    b.set_defaults(func=cmd_budget)

    w = sub.add_parser("witness", parents=[common], help="evaluate entanglement witnesses")
    w.add_argument("--records", metavar="CSV")
    w.add_argument("--state", metavar="JSON")
    w.add_argument("--graph", metavar="PATH")
    w.set_defaults(func=cmd_witness)

    o = sub.add_parser("oracle", parents=[common], help="exact N-atom vs Gaussian comparison")
    o.set_defaults(func=cmd_oracle)

    k = sub.add_parser("calibrate", parents=[common], help="imaging and Rabi calibration fits")
    k.add_argument("--data", metavar="CSV", help="columns mean_counts,var_counts")
    k.add_argument("--rabi", metavar="CSV", help="columns time_s,imbalance")
    k.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    out = Output(args.out, args.format)
    try:
        args.func(args, out)
        out.flush()
    except UnroutableGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
