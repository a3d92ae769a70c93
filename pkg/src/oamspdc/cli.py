"""Command-line front end: ``oamspdc <command> [--config F] [--out D] [--seed N] [--window L,P]``.

Every command is a pure function of its merged config, input files and seed.
Each run writes its data files plus ``manifest.json``; passing that manifest
back through ``--config`` replays the run exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import warnings

import numpy as np
import scipy

from . import __version__, exports
from . import config as cfgmod
from .bell import BellSettings, cglmp_bootstrap_std, cglmp_s, coincidence_surface, counts_to_table
from .bell import joint_probability_table, optimize_settings, raw_coincidences
from .engineering import TargetState, apply_pump_phases, solve_pump_for_target, subspace_state
from .errors import (
    ConfigError,
    DegenerateCoupling,
    DimensionMismatch,
    FitDiverged,
    MissingTerm,
    NonConvergence,
    OamSpdcError,
    QuadratureNotConverged,
    ClosedFormMismatch,
    RankDeficient,
    RankDeficientWarning,
    SchemaError,
    UnreachableTarget,
    ZeroBlock,
    ZeroSubspaceWeight,
)
from .hologram import Blaze, SlmPanel, encode_hologram, superposition_field_on_panel, write_image, write_sidecar
from .kernels import BACKEND
from .measurement import (
    calibrate_rate,
    fit_offset_phases,
    interference_curve,
    mes_state,
    visibility,
    white_noise,
)
from .spectrum import azimuthal_marginal, spectrum_for_pump
from .tomography import (
    bootstrap_errors,
    build_mub_set,
    expected_probabilities,
    fidelity,
    linear_entropy,
    linear_reconstruct,
    mle_reconstruct,
    simulate_tomography,
)

MANIFEST_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEMA = 3
# module errors
EXIT_CODES = (
    ((QuadratureNotConverged, ClosedFormMismatch), 10),
    ((UnreachableTarget, DegenerateCoupling, MissingTerm, ZeroSubspaceWeight), 11),
    ((DimensionMismatch, FitDiverged), 12),
    ((ZeroBlock,), 13),
    ((RankDeficient, NonConvergence), 14),
)
EXIT_IO = 15
EXIT_OTHER = 16


class Run:
    """Output directory bookkeeping: every file written is hashed into the manifest."""

    def __init__(self, out: str, command: str, cfg: dict):
        self.out = out
        self.command = command
        self.cfg = cfg
        self.outputs: dict = {}
        os.makedirs(out, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def record(self, name: str) -> None:
        with open(self.path(name), "rb") as fh:
            self.outputs[name] = hashlib.sha256(fh.read()).hexdigest()

    def json(self, name: str, obj) -> None:
        exports.write_json(self.path(name), obj)
        self.record(name)

    def manifest(self) -> None:
        doc = {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "config": self.cfg,
            "config_sha256": cfgmod.config_hash(self.cfg),
            "seed": self.cfg["seed"],
            "versions": {
                "oamspdc": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": ".".join(platform.python_version_tuple()[:2]),
            },
            "kernel_backend": BACKEND,
            "outputs": dict(sorted(self.outputs.items())),
        }
        exports.write_json(self.path("manifest.json"), doc)


def build_state(cfg: dict):
    """Two-qutrit state from the ``state`` section, as a density matrix."""
    st = cfg["state"]
    t0, t2 = float(st.get("theta0_rad", 0.0)), float(st.get("theta2_rad", 0.0))
    if st["source"] == "mes":
        psi = mes_state(t0, t2)
    else:
        pump = apply_pump_phases(cfgmod.pump_from(cfg), t0, t2)
        amps = spectrum_for_pump(pump, cfgmod.crystal_from(cfg), cfgmod.window_from(cfg), cfgmod.quad_from(cfg))
        vec, _ = subspace_state(amps)
        psi = np.zeros(9, dtype=complex)
        psi[[0, 4, 8]] = vec
    return white_noise(psi, float(st["visibility"])), psi


def cmd_spectrum(cfg: dict, run: Run, args) -> None:
    crystal = cfgmod.crystal_from(cfg)
    amps = spectrum_for_pump(cfgmod.pump_from(cfg), crystal, cfgmod.window_from(cfg), cfgmod.quad_from(cfg))
    exports.write_spectrum_csv(run.path("spectrum.csv"), amps)
    run.record("spectrum.csv")
    exports.write_marginal_csv(run.path("marginal.csv"), amps)
    run.record("marginal.csv")
    run.json("spectrum.json", exports.spectrum_document(amps, crystal))
    diag = {f"{a},{b}": p for (a, b), p in azimuthal_marginal(amps).items() if a == b and abs(a) <= 1}
    print("marginals on (l, l), |l| <= 1:", ", ".join(f"({k}) {v:.4f}" for k, v in diag.items()))


def cmd_design(cfg: dict, run: Run, args) -> None:
    d = cfg["design"]
    try:
        coefs = [complex(float(c["re"]), float(c.get("im", 0.0))) for c in d["coefficients"]]
        target = TargetState(d["subspace"], coefs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid design target: {exc}") from exc
    crystal = cfgmod.crystal_from(cfg)
    res = solve_pump_for_target(
        target, crystal, cfgmod.window_from(cfg), cfgmod.quad_from(cfg), collection=d.get("collection", "azimuthal")
    )
    doc = res.to_dict()
    doc["crystal"] = crystal.to_dict()
    doc["window"] = cfg["window"]
    doc["marginals"] = [
        {"l_s": a, "l_i": b, "prob": p} for (a, b), p in azimuthal_marginal(res.spectrum).items()
    ]
    run.json("design.json", doc)
    exports.write_spectrum_csv(run.path("spectrum.csv"), res.spectrum)
    run.record("spectrum.csv")
    print("pump:", ", ".join(f"L={t['L']}: {t['abs']:.6f} exp(i {t['arg']:.6f})" for t in res.pump.to_dict()))


def cmd_interfere(cfg: dict, run: Run, args) -> None:
    sec = cfg["interfere"]
    rho, _ = build_state(cfg)
    # intrinsic phases are part of the state; scans imprint extra pump phases on top
    alphas = [float(a) for a in sec["alphas_rad"]]
    scan = sec["scan"]
    samples = int(sec["samples"])
    curves = [interference_curve(rho, a, scan=scan, samples=samples) for a in alphas]
    rate = calibrate_rate(np.concatenate([c[1] for c in curves]), sec["max_counts"], sec["integration_s"])
    rng = np.random.default_rng(cfg["seed"])
    al, t0s, t2s, ys = [], [], [], []
    summary = []
    for k, (a, (ph, pr)) in enumerate(zip(alphas, curves)):
        counts = rng.poisson(pr * rate * sec["integration_s"]).astype(float)
        exports.write_curve_csv(run.path(f"curve_{k}.csv"), ph, pr, "probability")
        run.record(f"curve_{k}.csv")
        exports.write_curve_csv(run.path(f"counts_{k}.csv"), ph, counts, "counts")
        run.record(f"counts_{k}.csv")
        summary.append({"alpha_rad": a, "visibility_model": visibility(pr), "visibility_counts": visibility(counts)})
        al.append(np.full(samples, a))
        t0s.append(ph if scan == "theta0" else np.zeros(samples))
        t2s.append(ph if scan == "theta2" else np.zeros(samples))
        ys.append(counts)
    y = np.concatenate(ys)
    fit = fit_offset_phases(
        np.concatenate(al), np.concatenate(t0s), np.concatenate(t2s), y, sigma=np.sqrt(np.maximum(y, 1.0))
    )
    run.json("interfere.json", {"scan": scan, "curves": summary, "fit": fit.to_dict(), "rate_scale": rate})
    print(f"fitted theta0 = {fit.theta0:.4f} +- {fit.ci95[0]:.4f}, theta2 = {fit.theta2:.4f} +- {fit.ci95[1]:.4f}")


def _bell_settings(cfg: dict, rho):
    b = cfg["bell"]
    preset = b["preset"]
    if preset == "experiment":
        return BellSettings.experiment()
    if preset == "standard":
        return BellSettings.standard()
    if preset == "custom":
        if b.get("tau_a") is None or b.get("tau_b") is None:
            raise ConfigError("bell.preset 'custom' needs tau_a and tau_b")
        return BellSettings(3, float(b["tau_a"]), float(b["tau_b"]))
    return optimize_settings(rho)[1]


def cmd_bell(cfg: dict, run: Run, args) -> None:
    b = cfg["bell"]
    rho, _ = build_state(cfg)
    settings = _bell_settings(cfg, rho)
    s_model = cglmp_s(joint_probability_table(rho, settings))
    C = raw_coincidences(rho, settings)
    rate = b["max_counts"] / (C.max() * b["integration_s"])
    counts = np.random.default_rng(cfg["seed"]).poisson(C * rate * b["integration_s"]).astype(float)
    s_counts = cglmp_s(counts_to_table(counts))
    std = cglmp_bootstrap_std(counts, int(b["bootstrap"]), cfg["seed"])
    surf = coincidence_surface(rho, settings, int(b["resolution"]))
    exports.write_surface_csv(run.path("surface.csv"), surf["theta_a"], surf["theta_b"], surf["values"])
    run.record("surface.csv")
    run.json(
        "bell.json",
        {
            "settings": {"d": settings.d, "tau_a": settings.tau_a, "tau_b": settings.tau_b, "preset": b["preset"]},
            "S_model": s_model,
            "S_counts": s_counts,
            "S_bootstrap_std": std,
            "counts": counts,
            "markers": surf["markers"],
        },
    )
    print(f"S = {s_model:.4f} (model), {s_counts:.4f} +- {std:.4f} (simulated counts)")


def _tomo_rate(rho, mub, sec) -> float:
    pmax = expected_probabilities(rho, mub).max()
    return sec["max_counts"] / (pmax * sec["integration_s"])


def cmd_tomo_sim(cfg: dict, run: Run, args) -> None:
    sec = cfg["tomo"]
    rho, _ = build_state(cfg)
    mub = build_mub_set(mode=sec["mode"])
    counts = simulate_tomography(rho, mub, _tomo_rate(rho, mub, sec), sec["integration_s"], cfg["seed"])
    exports.write_counts_csv(run.path("counts.csv"), counts)
    run.record("counts.csv")
    run.json("truth.json", exports.density_document(rho, {"linear_entropy": linear_entropy(rho)}))
    print(f"wrote {len(counts.labels)} projector counts ({mub.mode})")


def cmd_tomo_fit(cfg: dict, run: Run, args) -> None:
    sec = cfg["tomo"]
    path = args.counts or sec.get("counts_file")
    if not path:
        raise ConfigError("tomo-fit needs --counts or tomo.counts_file")
    mub = build_mub_set(mode=sec["mode"])
    counts = exports.read_counts_csv(path, mub)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lin = linear_reconstruct(counts, mub, allow_rank_deficient=True)
    rank_deficient = any(issubclass(w.category, RankDeficientWarning) for w in caught)
    if rank_deficient:
        print(f"warning: the {mub.mode} projector set is not informationally complete; "
              "the linear estimate is the least-norm solution", file=sys.stderr)
    fit = mle_reconstruct(counts, mub, full_output=True)
    st = cfg["state"]
    target_phased = mes_state(float(st.get("theta0_rad", 0.0)), float(st.get("theta2_rad", 0.0)))
    target = mes_state()
    boot = bootstrap_errors(counts, mub, int(sec["bootstrap"]), cfg["seed"], target=target, init=fit.rho)
    metrics = {
        "fidelity_mes": fidelity(target, fit.rho),
        "fidelity_phased_target": fidelity(target_phased, fit.rho),
        "linear_entropy": linear_entropy(fit.rho),
        "fidelity_std": boot["fidelity_std"],
        "entropy_std": boot["entropy_std"],
        "element_std_real": boot["element_std_real"],
        "element_std_imag": boot["element_std_imag"],
        "bootstrap_resamples": boot["resamples"],
        "bootstrap_failures": boot["failures"],
        "mle_iterations": fit.iterations,
        "mle_grad_norm": fit.grad_norm,
        "linear_fidelity_mes": fidelity(target, _psd(lin)),
        "mode": mub.mode,
        "rank_deficient": rank_deficient,
    }
    run.json("rho.json", exports.density_document(fit.rho, metrics))
    run.json("rho_linear.json", exports.density_document(lin, {"mode": mub.mode, "rank_deficient": rank_deficient}))
    print(
        f"F = {metrics['fidelity_mes']:.4f} +- {metrics['fidelity_std']:.4f}, "
        f"S_lin = {metrics['linear_entropy']:.4f} +- {metrics['entropy_std']:.4f}"
    )


def _psd(rho):
    w, U = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    out = (U * np.clip(w, 0.0, None)) @ U.conj().T
    return out / np.trace(out).real


def cmd_holo(cfg: dict, run: Run, args) -> None:
    h = cfg["holo"]
    p = h["panel"]
    panel = SlmPanel(int(p["width"]), int(p["height"]), float(p["pitch_m"]), int(p["depth"]),
                     tuple(float(x) for x in p.get("center_offset_px", (0.0, 0.0))))
    bz = h["blaze"]
    blaze = Blaze(None if bz.get("period_px") is None else float(bz["period_px"]), float(bz.get("angle_rad", 0.0)))
    terms = list(cfgmod.pump_from(cfg).terms)
    field = superposition_field_on_panel(terms, float(h["w0_m"]), panel, float(h["wavelength_m"]), bool(h["adjust_waists"]))
    holo = encode_hologram(field, panel, blaze)
    write_image(holo, run.path("hologram.pgm"))
    run.record("hologram.pgm")
    write_sidecar(run.path("hologram.json"), panel, terms, float(h["w0_m"]), blaze, float(h["wavelength_m"]))
    run.record("hologram.json")
    print(f"hologram {panel.width}x{panel.height}, {panel.depth} levels")


COMMANDS = {
    "spectrum": (cmd_spectrum, "biphoton OAM spectrum for the configured pump"),
    "design": (cmd_design, "pump coefficients for a target subspace state"),
    "interfere": (cmd_interfere, "phase-scan interference curves and offset-phase fit"),
    "bell": (cmd_bell, "CGLMP value and coincidence surface"),
    "tomo-sim": (cmd_tomo_sim, "simulate MUB tomography counts"),
    "tomo-fit": (cmd_tomo_fit, "reconstruct a density matrix from counts"),
    "holo": (cmd_holo, "render the pump hologram as a graymap"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (or a manifest.json to replay)")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="random seed, overrides the config")
    common.add_argument("--window", help="mode window 'lmax,pmax', overrides the config")
    parser = argparse.ArgumentParser(prog="oamspdc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text)
        if name == "tomo-fit":
            sp.add_argument("--counts", help="counts CSV (overrides tomo.counts_file)")
    return parser


def resolve_config(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.window is not None:
        cfg["window"] = cfgmod.parse_window(args.window)
    cfgmod.validate(cfg)
    return cfg


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SchemaError):
        return EXIT_SCHEMA
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_OTHER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = Run(args.out, args.command, cfg)
        COMMANDS[args.command][0](cfg, run, args)
        run.manifest()
    except (OamSpdcError, OSError, ValueError) as exc:
        print(f"oamspdc {args.command}: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
