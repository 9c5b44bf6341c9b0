"""Configuration-driven experiment pipelines with JSON/CSV reporting.

Experiments are described by a TOML file (see README for the schema) and run
in one of four modes:

* ``quantum_renorm``    — counterterm construction and contraction ledger,
* ``classical_kam``     — frequency renormalization and conjugacy residuals,
* ``spectrum_compare``  — conjugation residuals and spectral-window gaps of
                          the renormalized operator against the transport one,
* ``measure_diag``      — observable invariance, Wigner pairings and density
                          flatness across a ladder of semiclassical scales.

Outputs are deterministic: identical configs produce byte-identical reports.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import classical, diophantine, renormalize, wigner
from .quantize import operator_norm, spectrum_to_csv_rows, weyl_matrix, window_spectrum
from .symbols import ModeSymbol, NormParams, SemiclassicalScale

MODES = ("quantum_renorm", "classical_kam", "spectrum_compare", "measure_diag")


class ConfigError(ValueError):
    """The experiment file fails schema validation."""


class BlockedError(RuntimeError):
    """A strict run was blocked by a violated admissibility condition."""

    def __init__(self, conditions):
        self.conditions = conditions
        failed = [c["id"] for c in conditions if not c["ok"]]
        super().__init__(f"blocked by conditions: {', '.join(failed)}")


# ----------------------------------------------------------------------
# config loading
# ----------------------------------------------------------------------


def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc


def _require(cfg, key, types, where="config"):
    if key not in cfg:
        raise ConfigError(f"missing required key '{key}' in {where}")
    value = cfg[key]
    if not isinstance(value, types):
        raise ConfigError(f"key '{key}' in {where} has wrong type {type(value).__name__}")
    return value


def _as_floats(values, where):
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a list of numbers") from exc


def frequency_from_config(cfg):
    section = _require(cfg, "frequency", dict)
    omega = _as_floats(_require(section, "omega", list, "frequency"), "frequency.omega")
    gamma = float(_require(section, "gamma", (int, float), "frequency"))
    k_max = int(_require(section, "k_max", int, "frequency"))
    varsigma = section.get("varsigma")
    try:
        if varsigma is None:
            cert = diophantine.certify_best(omega, gamma, k_max)
        else:
            cert = diophantine.check(omega, gamma, float(varsigma), k_max)
    except diophantine.ResonantFrequencyError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cert


def norms_from_config(cfg):
    section = cfg.get("norms", {"s": 1.0, "rho": 1.0})
    try:
        return NormParams(s=float(section.get("s", 1.0)), rho=float(section.get("rho", 1.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scales_from_config(cfg):
    section = _require(cfg, "scale", dict)
    hbars = section.get("hbar", 0.1)
    if not isinstance(hbars, list):
        hbars = [hbars]
    hbars = _as_floats(hbars, "scale.hbar")
    rule = section.get("eps", "hbar")
    out = []
    for h in hbars:
        try:
            if rule == "hbar":
                out.append(SemiclassicalScale.equal(h))
            elif rule in ("hbar^2", "hbar_squared"):
                out.append(SemiclassicalScale.subcritical(h, 2.0))
            elif isinstance(rule, (int, float)):
                regime = "equal" if float(rule) == h else "subcritical"
                out.append(SemiclassicalScale(hbar=h, eps=float(rule), regime=regime))
            else:
                raise ConfigError(f"unknown eps rule {rule!r}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return out


def symbol_from_config(cfg, params=None, cert=None):
    section = _require(cfg, "symbol", dict)
    dxi = float(section.get("dxi", 1.0))
    entries = _require(section, "modes", list, "symbol")
    symmetrize = bool(section.get("symmetrize", True))
    modes = {}

    def _add(k, m, amp):
        key = (k, m)
        modes[key] = modes.get(key, 0j) + amp

    d = None
    for entry in entries:
        k = tuple(int(c) for c in _require(entry, "k", list, "symbol.modes[]"))
        eta = _as_floats(_require(entry, "eta", list, "symbol.modes[]"), "symbol.modes[].eta")
        d = len(k) if d is None else d
        if len(k) != d or len(eta) != d:
            raise ConfigError("symbol mode entries must share one dimension")
        m = []
        for c in eta:
            idx = round(c / dxi)
            if abs(idx * dxi - c) > 1e-12 * max(1.0, abs(c)):
                raise ConfigError(f"eta component {c} is off the lattice with spacing {dxi}")
            m.append(idx)
        amp = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
        _add(k, tuple(m), amp)
        if symmetrize and (any(k) or any(m)):
            _add(tuple(-c for c in k), tuple(-c for c in m), amp.conjugate())
    if d is None:
        raise ConfigError("symbol.modes must not be empty")
    symbol = ModeSymbol(d, dxi, modes)
    fraction = section.get("norm_fraction_of_threshold")
    if fraction is not None:
        if params is None or cert is None:
            raise ConfigError("norm_fraction_of_threshold needs frequency and norms sections")
        target = float(fraction) * renormalize.smallness_threshold(cert, params.rho)
        current = symbol.norm(params.s, params.rho)
        if current == 0:
            raise ConfigError("cannot rescale the zero symbol")
        symbol = (target / current) * symbol
    return symbol


def field_from_config(cfg, d):
    section = _require(cfg, "field", dict)
    entries = _require(section, "modes", list, "field")
    symmetrize = bool(section.get("symmetrize", True))
    pairs = []
    for entry in entries:
        k = tuple(int(c) for c in _require(entry, "k", list, "field.modes[]"))
        re = _as_floats(entry.get("re", [0.0] * d), "field.modes[].re")
        im = _as_floats(entry.get("im", [0.0] * d), "field.modes[].im")
        if len(k) != d or len(re) != d or len(im) != d:
            raise ConfigError("field mode entries must match the frequency dimension")
        pairs.append((k, np.array(re) + 1j * np.array(im)))
    return classical.TorusVectorField.from_modes(d, pairs, symmetrize=symmetrize)


def _truncation(cfg, default_n=32):
    section = cfg.get("truncation", {})
    n = int(section.get("n", default_n))
    margin = int(section.get("margin", max(1, n // 2)))
    return n, margin


# ----------------------------------------------------------------------
# admissibility conditions
# ----------------------------------------------------------------------


def validate_experiment(cfg):
    """Check every admissibility condition relevant to the configured mode.

    Returns a list of condition records; blocking decisions are made by the
    caller depending on the strict flag.
    """
    mode = _require(cfg, "mode", str)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    conditions = []
    try:
        cert = frequency_from_config(cfg)
        conditions.append(
            {
                "id": "frequency-nonresonant",
                "ok": True,
                "value": cert.min_witness,
                "threshold": 0.0,
                "detail": "no exact resonance within the scan range",
            }
        )
        conditions.append(
            {
                "id": "frequency-certified",
                "ok": bool(cert.certified),
                "value": cert.min_witness,
                "threshold": cert.varsigma,
                "detail": f"witness at k = {list(cert.witness_k)}",
            }
        )
    except diophantine.ResonantFrequencyError as exc:
        conditions.append(
            {
                "id": "frequency-nonresonant",
                "ok": False,
                "value": 0.0,
                "threshold": 0.0,
                "detail": f"exact resonance witnessed at k = {list(exc.k)}",
            }
        )
        return conditions
    params = norms_from_config(cfg)

    if mode in ("quantum_renorm", "spectrum_compare", "measure_diag"):
        scales = scales_from_config(cfg)
        symbol = symbol_from_config(cfg, params, cert)
        if symbol.d != cert.d:
            raise ConfigError(
                f"symbol dimension {symbol.d} does not match the frequency dimension {cert.d}"
            )
        if not symbol.is_real():
            raise ConfigError("the perturbation symbol must be real valued")
        conditions.append(
            {
                "id": "modes-within-certificate",
                "ok": symbol.angle_band() <= cert.k_max,
                "value": float(symbol.angle_band()),
                "threshold": float(cert.k_max),
                "detail": "largest angle frequency vs certified range",
            }
        )
        threshold = renormalize.smallness_threshold(cert, params.rho)
        for scale in scales:
            value = symbol.norm(params.s, params.rho)
            if scale.regime == "subcritical":
                value *= scale.ratio
            conditions.append(
                {
                    "id": "smallness-quantum",
                    "ok": value <= threshold,
                    "value": value,
                    "threshold": threshold,
                    "detail": f"effective perturbation size at hbar = {scale.hbar}",
                }
            )
    if mode == "classical_kam":
        field = field_from_config(cfg, cert.d)
        if field.reality_defect() > 1e-12:
            raise ConfigError("the vector field must be real valued")
        eps = field.norm(params.s)
        report = classical.classical_smallness(eps, params.s, params.rho, cert.gamma, cert.varsigma)
        conditions.append(
            {
                "id": "smallness-classical",
                "ok": bool(report["ok"]),
                "value": eps,
                "threshold": report["rho_over_16"],
                "detail": f"admissibility chain with lam = {report['lam']:.6g}, r = {report['r']:.6g}",
            }
        )
    return conditions


# ----------------------------------------------------------------------
# pipelines
# ----------------------------------------------------------------------


def run_experiment(cfg, out_dir, strict=False, seed=None):
    """Execute the configured pipeline and write report.json plus CSV tables."""
    mode = _require(cfg, "mode", str)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    conditions = validate_experiment(cfg)
    failed = [c for c in conditions if not c["ok"]]
    if failed and strict:
        _write_json(out / "report.json", {"mode": mode, "blocked": True, "conditions": conditions})
        raise BlockedError(conditions)

    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    report = {
        "mode": mode,
        "seed": seed,
        "blocked": False,
        "strict": bool(strict),
        "conditions": conditions,
    }
    if mode == "quantum_renorm":
        report.update(_run_quantum(cfg, out))
    elif mode == "classical_kam":
        report.update(_run_classical(cfg, out))
    elif mode == "spectrum_compare":
        report.update(_run_spectrum_compare(cfg, out))
    elif mode == "measure_diag":
        report.update(_run_measure_diag(cfg, out))
    _write_json(out / "report.json", report)
    return report


def _run_quantum(cfg, out):
    cert = frequency_from_config(cfg)
    params = norms_from_config(cfg)
    scale = scales_from_config(cfg)[0]
    symbol = symbol_from_config(cfg, params, cert)
    kam_cfg = cfg.get("kam", {})
    r_total, state = renormalize.run(
        symbol, cert, params, scale,
        n_max=int(kam_cfg.get("n_max", 12)), tol=float(kam_cfg.get("tol", 1e-12)),
    )
    records = [r.to_dict() for r in state.records]
    _write_csv(
        out / "steps.csv",
        ["n", "v_norm", "f_norm", "r_norm", "ratio"],
        [[r["n"], r["v_norm"], r["f_norm"], r["r_norm"], r["ratio"]] for r in records],
    )
    return {
        "cert": cert.to_dict(),
        "scale": {"hbar": scale.hbar, "eps": scale.eps, "regime": scale.regime},
        "norms": {"s": params.s, "rho": params.rho},
        "initial_norm": symbol.norm(params.s, params.rho),
        "smallness_threshold": renormalize.smallness_threshold(cert, params.rho),
        "steps": records,
        "counterterm": r_total.to_dict(),
        "counterterm_norm": r_total.norm(params.s, 0.0),
        "counterterm_bound": 2.0 * symbol.norm(params.s, params.rho),
        "final_remainder_norm": state.v.norm00(),
        "constants": {
            "alpha": state.constants.alpha,
            "beta": state.constants.beta,
            "lam": state.constants.lam,
        },
        "schedule": {
            "sigma1": state.schedule.sigma1,
            "shrink": state.schedule.shrink,
            "sigma_total": state.schedule.sigma_total(),
        },
    }


def _run_classical(cfg, out):
    cert = frequency_from_config(cfg)
    params = norms_from_config(cfg)
    field = field_from_config(cfg, cert.d)
    section = cfg.get("classical", {})
    freq_map, diffeo, residual, records = classical.kam_conjugate(
        field, cert.omega,
        cert=cert if cert.certified else None,  # uncertified runs stay exploratory
        n_max=int(section.get("n_max", 10)),
        tol=float(section.get("tol", 1e-12)),
        grid_size=section.get("grid"),
    )
    lam, r = classical.proof_constants(params.s, cert.gamma)
    _write_csv(
        out / "sweeps.csv",
        ["sweep", "residual", "sup_u", "freq_shift"],
        [[rec["sweep"], rec["residual"], rec["sup_u"], rec["freq_shift"]] for rec in records],
    )
    return {
        "cert": cert.to_dict(),
        "field_norm": field.norm(params.s),
        "phi": [float(x) for x in freq_map.phi],
        "freq_shift": freq_map.shift,
        "residual": residual,
        "sup_displacement": diffeo.sup_displacement(),
        "min_jacobian_det": diffeo.min_jacobian_det(),
        "sweeps": records,
        "proof_constants": {"lam": lam, "r": r},
    }


def _run_spectrum_compare(cfg, out):
    cert = frequency_from_config(cfg)
    params = norms_from_config(cfg)
    scale = scales_from_config(cfg)[0]
    symbol = symbol_from_config(cfg, params, cert)
    kam_cfg = cfg.get("kam", {})
    n_trunc, margin = _truncation(cfg)
    r_total, state = renormalize.run(
        symbol, cert, params, scale,
        n_max=int(kam_cfg.get("n_max", 8)), tol=float(kam_cfg.get("tol", 1e-12)),
    )
    residuals = renormalize.conjugation_residuals(
        symbol, r_total, state.f_list, cert, scale, n_trunc, margin
    )
    window = cfg.get("window", {"center": 1.0, "width": 0.2})
    q_op = renormalize.renormalized_operator(symbol, r_total, cert, scale, n_trunc)
    pairs = window_spectrum(q_op, float(window["center"]), float(window["width"]), cert.omega)
    _write_csv(
        out / "residuals.csv",
        ["stage", "residual"],
        [[i + 1, res] for i, res in enumerate(residuals)],
    )
    _write_csv_rows(out / "gaps.csv", spectrum_to_csv_rows(pairs))
    return {
        "cert": cert.to_dict(),
        "n_trunc": n_trunc,
        "margin": margin,
        "conjugation_residuals": residuals,
        "window": {"center": float(window["center"]), "width": float(window["width"])},
        "window_count": len(pairs),
        "max_gap": max((p.gap for p in pairs), default=0.0),
        "counterterm_norm": r_total.norm(params.s, 0.0),
        "steps": [r.to_dict() for r in state.records],
    }


def _auto_truncation(center, width, hbar, omega, margin_xi):
    """Truncation sized to a fixed action window.

    Keeping hbar * n_trunc (and the interior margin, in action units)
    constant across a ladder makes operator norms comparable between rungs:
    every rung samples the same bounded region of the action variable.
    """
    rates = [abs(w) for w in omega if w != 0]
    span = (center + width) / min(rates) + 2.0 * margin_xi
    n = int(math.ceil(span / hbar))
    margin = int(math.ceil(margin_xi / hbar))
    return n, margin


def _run_measure_diag(cfg, out):
    cert = frequency_from_config(cfg)
    params = norms_from_config(cfg)
    scales = scales_from_config(cfg)
    symbol = symbol_from_config(cfg, params, cert)
    kam_cfg = cfg.get("kam", {})
    window = cfg.get("window", {"center": 1.0, "width": 0.2})
    center, width = float(window["center"]), float(window["width"])
    n_cfg, margin_cfg = _truncation(cfg, default_n=0)
    diag = cfg.get("diagnostics", {})
    margin_xi = float(diag.get("margin_xi", 0.6))
    test_entries = diag.get("test_symbols", [])
    test_symbols = []
    for entry in test_entries:
        sub = {"symbol": entry, "frequency": cfg["frequency"], "norms": cfg.get("norms", {})}
        test_symbols.append((str(entry.get("id", f"s{len(test_symbols)}")), symbol_from_config(sub)))
    if not test_symbols:
        test_symbols = [("perturbation", symbol)]

    invariance_rows = []
    eig_sequence = []
    flatness_rows = []
    for scale in scales:
        if n_cfg > 0:
            n_trunc, margin = n_cfg, margin_cfg
        else:
            n_trunc, margin = _auto_truncation(center, width, scale.hbar, cert.omega, margin_xi)
        r_total, state = renormalize.run(
            symbol, cert, params, scale,
            n_max=int(kam_cfg.get("n_max", 8)), tol=float(kam_cfg.get("tol", 1e-12)),
        )
        u_op = renormalize.assemble_unitary(state.f_list, scale, n_trunc, d=symbol.d, margin=margin)
        idx = u_op.interior_indices(margin)
        for sid, a in test_symbols:
            a_mat = weyl_matrix(a, scale.hbar, n_trunc).mat
            moved = u_op.mat @ a_mat @ u_op.mat.conj().T
            diff = (moved - a_mat)[np.ix_(idx, idx)]
            invariance_rows.append([scale.hbar, scale.eps, sid, operator_norm(diff)])
        q_op = renormalize.renormalized_operator(symbol, r_total, cert, scale, n_trunc)
        for pair in window_spectrum(q_op, center, width, cert.omega):
            psi = wigner.StateVector.from_vector(pair.vector, n_trunc, symbol.d, scale.hbar)
            eig_sequence.append((scale.hbar, psi, pair.eigenvalue))
            flatness_rows.append([scale.hbar, " ".join(str(c) for c in pair.k_label),
                                  wigner.density_flatness(psi)])
    diag_report = wigner.measure_diagnostics(eig_sequence, test_symbols)
    _write_csv(
        out / "wigner.csv",
        ["hbar", "k_label", "symbol_id", "value_re", "value_im",
         "prediction_re", "prediction_im", "deviation", "eigenvalue"],
        [
            [r["hbar"], " ".join(str(c) for c in r["k_label"]), r["symbol_id"],
             r["value_re"], r["value_im"], r["prediction_re"], r["prediction_im"],
             r["deviation"], r["eigenvalue"]]
            for r in diag_report["rows"]
        ],
    )
    _write_csv(out / "invariance.csv", ["hbar", "eps", "symbol_id", "norm"], invariance_rows)
    _write_csv(out / "flatness.csv", ["hbar", "k_label", "sup_deviation"], flatness_rows)

    inv_slopes = {}
    for sid, _ in test_symbols:
        pts = [(row[1], row[3]) for row in invariance_rows if row[2] == sid]
        inv_slopes[sid] = wigner.fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    flat_by_h = {}
    for h, _, dev in flatness_rows:
        flat_by_h.setdefault(h, []).append(dev)
    hs = sorted(flat_by_h)
    flat_slope = wigner.fit_loglog_slope(hs, [max(flat_by_h[h]) for h in hs])
    return {
        "cert": cert.to_dict(),
        "window": {"center": center, "width": width},
        "hbars": [s.hbar for s in scales],
        "invariance_slopes": inv_slopes,
        "wigner_slopes": diag_report["slopes"],
        "flatness_slope": flat_slope,
        "window_states": len(eig_sequence),
    }


# ----------------------------------------------------------------------
# deterministic writers
# ----------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float):
        return None if math.isnan(x) else x  # strict JSON carries no NaN
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def _write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_csv_rows(path, rows):
    lines = [",".join(_format_cell(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
