"""
Command-line front end.

    nonlocal-meter --mode table1
    nonlocal-meter --mode weak-sweep --preset phi2 --phi-grid 9 --csv sweep.csv
    nonlocal-meter --mode tomography --preset phi4 --shots 1e5 --seed 7 --out report.json

A JSON config file (``--config run.json``) may hold the same keys as the
long flags, with dashes or underscores; flags given on the command line
override it.  Exit codes: 0 ok, 2 config error, 3 invariant violation,
4 impossible post-selection.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__, gates, optics, protocol, tomography
from .errors import ConfigError, ImpossibleOutcome, InvariantViolation
from .protocol import PRESETS, ObservableSpec, SystemInput
from .qstate import PureState, state_overlap, to_density

MODES = ("protocol", "weak-sweep", "optics", "tomography", "table1")
STOCHASTIC_MODES = ("tomography",)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_POSTSELECT = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    mode: str
    amplitudes: tuple = ()
    preset: Optional[str] = None
    phi_grid: tuple = ()
    shots: float = 1e5
    seed: Optional[int] = None
    noise_p: float = 0.0
    visibility: float = 1.0
    observable: str = "ZZ"
    resamples: int = 200
    output_path: Optional[str] = None
    csv_path: Optional[str] = None
    timing: bool = False

    def system_input(self) -> SystemInput:
        return SystemInput.normalized(self.amplitudes)


# -- parsing helpers ----------------------------------------------------------


def parse_angle(token: str) -> float:
    """Radians from ``0.3``, ``pi``, ``pi/4``, ``3pi/8``, ``3*pi/8``."""
    t = token.strip().lower().replace(" ", "").replace("*", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("pi")
    coef = Fraction(1)
    if num:
        coef = Fraction(num) if num not in ("+", "-") else Fraction(f"{num}1")
    if den:
        if not den.startswith("/"):
            raise ValueError(f"bad angle {token!r}")
        coef /= Fraction(den[1:])
    return float(coef) * math.pi


def parse_phi_grid(spec: Any) -> tuple:
    """An integer N gives N points spanning [0, pi]; otherwise a list of angles."""
    if isinstance(spec, (list, tuple)):
        vals = [parse_angle(str(v)) for v in spec]
    else:
        text = str(spec).strip()
        if text.isdigit():
            n = int(text)
            if n < 2:
                raise ConfigError("phi grid needs at least 2 points")
            return tuple(float(x) for x in np.linspace(0.0, math.pi, n))
        vals = [parse_angle(v) for v in text.split(",") if v.strip()]
    for v in vals:
        try:
            gates.coupling_angle(v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return tuple(vals)


def parse_amplitudes(value: Any) -> tuple:
    """Four amplitudes from ``"1,1j,1,1j"`` or a JSON list of numbers / strings / [re, im] pairs."""
    if isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    else:
        items = list(value)
    out = []
    for item in items:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            out.append(complex(float(item[0]), float(item[1])))
        elif isinstance(item, (int, float)):
            out.append(complex(item))
        else:
            try:
                out.append(complex(str(item).strip().replace(" ", "").replace("i", "j")))
            except ValueError:
                raise ConfigError(f"malformed amplitude {item!r}") from None
    if len(out) != 4:
        raise ConfigError(f"need 4 amplitudes, got {len(out)}")
    norm = math.sqrt(sum(abs(a) ** 2 for a in out))
    if not math.isfinite(norm) or norm == 0:
        raise ConfigError("amplitudes must be finite and not all zero")
    return tuple(a / norm for a in out)


_KEYS = {
    "mode", "preset", "amps", "amplitudes", "phi_grid", "phi", "shots", "seed", "noise_p",
    "visibility", "observable", "resamples", "out", "output_path", "csv", "csv_path", "timing",
}


def _build(raw: dict) -> RunConfig:
    raw = {k.replace("-", "_"): v for k, v in raw.items() if v is not None}
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")

    preset = raw.get("preset")
    amps_raw = raw.get("amps", raw.get("amplitudes"))
    if amps_raw is not None:
        amplitudes = parse_amplitudes(amps_raw)
        preset = None
    elif preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
        amplitudes = tuple(PRESETS[preset].amplitudes)
    elif mode == "table1":
        amplitudes = ()
    else:
        preset = "phi4"
        amplitudes = tuple(PRESETS[preset].amplitudes)

    seed = raw.get("seed")
    if seed is not None:
        try:
            seed = int(seed)
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {seed!r}") from None
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
    if mode in STOCHASTIC_MODES and seed is None:
        raise ConfigError(f"mode {mode!r} is stochastic and needs --seed")

    try:
        shots = float(raw.get("shots", 1e5))
        noise_p = float(raw.get("noise_p", 0.0))
        visibility = float(raw.get("visibility", 1.0))
        resamples = int(raw.get("resamples", 200))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not shots > 0:
        raise ConfigError("shots must be positive")
    if not 0 <= noise_p <= 1:
        raise ConfigError("noise_p must lie in [0, 1]")
    if not 0 <= visibility <= 1:
        raise ConfigError("visibility must lie in [0, 1]")
    if resamples < 100:
        raise ConfigError("resamples must be at least 100")

    grid = raw.get("phi_grid", raw.get("phi", 9))
    try:
        phi_grid = parse_phi_grid(grid)
        observable = str(ObservableSpec.parse(str(raw.get("observable", "ZZ"))))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    return RunConfig(
        mode=mode,
        amplitudes=amplitudes,
        preset=preset,
        phi_grid=phi_grid,
        shots=shots,
        seed=seed,
        noise_p=noise_p,
        visibility=visibility,
        observable=observable,
        resamples=resamples,
        output_path=raw.get("out", raw.get("output_path")),
        csv_path=raw.get("csv", raw.get("csv_path")),
        timing=bool(raw.get("timing", False)),
    )


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse a JSON config document; ``overrides`` (e.g. from flags) win."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = {k.replace("-", "_"): v for k, v in raw.items()}
    flags = {k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None}
    # an input given on the command line replaces whichever input the file named
    if "amps" in flags or "amplitudes" in flags:
        raw.pop("preset", None)
    if "preset" in flags:
        raw.pop("amps", None)
        raw.pop("amplitudes", None)
    raw.update(flags)
    return _build(raw)


# -- report helpers -----------------------------------------------------------


def _c(z: complex) -> list:
    z = complex(z)
    return [round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0]


def _f(x: float) -> float:
    return round(float(x), 12) + 0.0


def _matrix(m: np.ndarray) -> dict:
    return {"re": [[_f(v) for v in row] for row in m.real], "im": [[_f(v) for v in row] for row in m.imag]}


_KET_NAMES = ("HH", "HV", "VH", "VV")


def ket_string(amps: Sequence[complex], tol: float = 1e-9) -> str:
    """Readable ket with the first nonzero amplitude made real and positive."""
    amps = np.asarray(amps, dtype=complex)
    nz = np.flatnonzero(np.abs(amps) > tol)
    if nz.size == 0:
        return "0"
    amps = amps * np.exp(-1j * np.angle(amps[nz[0]]))
    terms = []
    for i in nz:
        a = amps[i]
        re, im = round(a.real, 4) + 0.0, round(a.imag, 4) + 0.0
        if abs(im) < 1e-4:
            coef = f"{re:g}"
        elif abs(re) < 1e-4:
            coef = f"{im:g}i"
        else:
            coef = f"({re:g}{im:+g}i)"
        coef = {"1": "", "-1": "-"}.get(coef, coef)
        terms.append(f"{coef}|{_KET_NAMES[i]}>")
    return " + ".join(terms).replace("+ -", "- ")


def max_workers() -> int:
    env = os.environ.get("NONLOCAL_METER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def _pmap(fn, items):
    items = list(items)
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(fn, items))  # results stay in input order


# -- modes --------------------------------------------------------------------


def _run_protocol(cfg: RunConfig) -> dict:
    inp = cfg.system_input()
    spec = ObservableSpec.parse(cfg.observable)
    expected = protocol.analytic_expected(inp, spec)
    results = protocol.run_observable(inp, spec, "keep-both")
    rows = []
    for r in results:
        ideal = expected.state(r.outcome)
        fid = None
        if ideal is not None and r.conditional_state is not None:
            fid = _f(state_overlap(r.conditional_state, ideal))
        rows.append({
            "erasure_outcome": r.erasure_outcome,
            "erasure_prob": _f(r.erasure_prob),
            "outcome": r.outcome,
            "p_circuit": _f(r.probability),
            "p_analytic": _f(expected.probability(r.outcome)),
            "fidelity_to_analytic": fid,
            "state": [_c(a) for a in r.conditional_state.amplitudes] if r.conditional_state else None,
        })
    return {
        "observable": str(spec),
        "step2_success_prob": _f(results[0].step2_success_prob),
        "analytic": {
            "p_plus": _f(expected.p_plus),
            "p_minus": _f(expected.p_minus),
            "psi_plus": ket_string(expected.psi_plus.amplitudes) if expected.psi_plus else None,
            "psi_minus": ket_string(expected.psi_minus.amplitudes) if expected.psi_minus else None,
        },
        "circuit": rows,
        "probabilities": {"+1": _f(expected.p_plus), "-1": _f(expected.p_minus)},
    }


def _run_weak_sweep(cfg: RunConfig) -> dict:
    inp = cfg.system_input()
    results = _pmap(lambda phi: protocol.run_weak(inp, phi), cfg.phi_grid)
    rows = [
        {
            "phi": _f(w.phi),
            "p_meter_1": _f(w.p_meter_1),
            "predicted": _f(w.predicted_p_meter_1),
            "abs_error": _f(abs(w.p_meter_1 - w.predicted_p_meter_1)),
        }
        for w in results
    ]
    if cfg.csv_path:
        with open(cfg.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("phi,p_meter_1,predicted\n")
            for r in rows:
                fh.write(f"{r['phi']!r},{r['p_meter_1']!r},{r['predicted']!r}\n")
    return {"p_minus": _f(inp.p_minus), "sweep": rows}


def _run_optics(cfg: RunConfig) -> dict:
    inp = cfg.system_input()
    expected = protocol.analytic_expected(inp)
    res = optics.run_setup(
        inp, cfg.seed, visibility=cfg.visibility, shots=cfg.shots if cfg.seed is not None else None
    )
    outcomes = {}
    for label in (+1, -1):
        o = res.outcomes[label]
        ideal = expected.state(label)
        fid = None
        if o.state is not None and ideal is not None:
            fid = _f(tomography_fidelity(o.state.matrix, ideal))
        outcomes[f"{label:+d}"] = {
            "probability": _f(o.probability),
            "p_analytic": _f(expected.probability(label)),
            "fidelity_to_analytic": fid,
        }
    out = {
        "visibility": _f(cfg.visibility),
        "alice_herald_prob": _f(res.alice_herald_prob),
        "erasure_prob": _f(res.erasure_prob),
        "readout_efficiency": _f(res.readout_efficiency),
        "outcomes": outcomes,
        "probabilities": {k: v["probability"] for k, v in outcomes.items()},
    }
    if res.counts is not None:
        out["coincidence_counts"] = {f"{k:+d}": v for k, v in res.counts.items()}
    return out


def tomography_fidelity(m: np.ndarray, ideal: PureState) -> float:
    v = ideal.amplitudes
    return float(np.real(np.vdot(v, m @ v)))


def _run_tomography(cfg: RunConfig) -> dict:
    inp = cfg.system_input()
    expected = protocol.analytic_expected(inp)
    branches = {}
    counts = {}
    ideals = {}
    for k, label in enumerate((+1, -1)):
        psi = expected.state(label)
        p = expected.probability(label)
        if psi is None:
            psi = PureState(("A", "B"), np.eye(4)[0 if label == 1 else 1])
        ideal = to_density(psi)
        ideals[label] = ideal
        actual = tomography.apply_depolarizing(ideal, cfg.noise_p)
        counts[label] = tomography.simulate_counts(
            actual.matrix, mean_shots=cfg.shots * p, seed=np.random.SeedSequence([cfg.seed, k]).generate_state(1)[0]
        ) if p > 0 else tomography.CountsTable({s: 0 for s in tomography.ALL_SETTINGS})
    est = tomography.estimate_fidelity_and_probability(
        counts[+1], counts[-1], ideals[+1], ideals[-1], resamples=cfg.resamples, seed=cfg.seed
    )
    if cfg.csv_path:
        stem, ext = os.path.splitext(cfg.csv_path)
        for label, tag in ((+1, "plus"), (-1, "minus")):
            with open(f"{stem}_{tag}{ext or '.csv'}", "w", encoding="utf-8", newline="") as fh:
                fh.write(counts[label].to_csv())
    for label, rho, F in ((+1, est.rho_plus, est.F_plus), (-1, est.rho_minus, est.F_minus)):
        branches[f"{label:+d}"] = {
            "fidelity": {"value": _f(F.value), "sigma": _f(F.sigma)},
            "rho": _matrix(rho.matrix) if rho is not None else None,
            "total_counts": int(sum(counts[label].counts.values())),
        }
    branches["+1"]["probability"] = {"value": _f(est.P_plus.value), "sigma": _f(est.P_plus.sigma)}
    branches["-1"]["probability"] = {"value": _f(est.P_minus.value), "sigma": _f(est.P_minus.sigma)}
    return {
        "noise_p": _f(cfg.noise_p),
        "mean_shots": _f(cfg.shots),
        "resamples": cfg.resamples,
        "branches": branches,
        "probabilities": {"+1": _f(est.P_plus.value), "-1": _f(est.P_minus.value)},
    }


_S2 = 1 / math.sqrt(2)
# reference kets for each results-table row (H=0, V=1)
TABLE1_KETS = {
    "phi1": ((1, 0, 0, 0), (0, 1, 0, 0)),  # listed as |HV>; the projection gives |VH>
    "phi2": ((_S2, 0, 0, _S2), (0, _S2, _S2, 0)),
    "phi3": ((_S2, 0, 0, 1j * _S2), (0, 1j * _S2, _S2, 0)),
    "phi4": ((2 / math.sqrt(5), 0, 0, 1 / math.sqrt(5)), (0, _S2, _S2, 0)),
}
# experimental fidelity / probability pairs for (+1, -1), quoted for side-by-side display
MEASURED_REFERENCE = {
    "phi1": ((0.878, 0.532), (0.891, 0.467)),
    "phi2": ((0.826, 0.517), (0.837, 0.483)),
    "phi3": ((0.829, 0.508), (0.877, 0.492)),
    "phi4": ((0.801, 0.609), (0.740, 0.391)),
}
ROW1_NOTE = (
    "phi1 = |+>|H> = (|HH> + |VH>)/sqrt(2); its -1 projection is |VH>, "
    "not the |HV> listed in the reference table"
)


def _table1_row(name: str) -> dict:
    inp = PRESETS[name]
    expected = protocol.analytic_expected(inp)
    circuit = {r.outcome: r for r in protocol.run_strong(inp, "keep-plus")}
    row = {"preset": name}
    for label, tag, listed, measured in zip(
        (+1, -1), ("plus", "minus"), TABLE1_KETS[name], MEASURED_REFERENCE[name]
    ):
        state = circuit[label].conditional_state
        listed_state = PureState(("A", "B"), np.array(listed, dtype=complex))
        row[tag] = {
            "probability": _f(circuit[label].probability),
            "p_analytic": _f(expected.probability(label)),
            "state": ket_string(state.amplitudes),
            "listed_state": ket_string(listed_state.amplitudes),
            "fidelity_to_listed": _f(state_overlap(state, listed_state)),
            "fidelity_to_analytic": _f(state_overlap(state, expected.state(label))),
            "measured_fidelity": measured[0],
            "measured_probability": measured[1],
        }
    if name == "phi1":
        row["note"] = ROW1_NOTE
    return row


def _run_table1(cfg: RunConfig) -> dict:
    rows = _pmap(_table1_row, PRESETS)
    return {"rows": rows}


_RUNNERS = {
    "protocol": _run_protocol,
    "weak-sweep": _run_weak_sweep,
    "optics": _run_optics,
    "tomography": _run_tomography,
    "table1": _run_table1,
}


def run(cfg: RunConfig) -> dict:
    """Execute one mode and return the report; writes ``output_path`` if set."""
    t0 = time.perf_counter()
    body = _RUNNERS[cfg.mode](cfg)
    config_echo = asdict(cfg)
    config_echo["amplitudes"] = [_c(a) for a in cfg.amplitudes]
    config_echo["phi_grid"] = [_f(p) for p in cfg.phi_grid]
    for key in ("output_path", "csv_path", "timing"):
        config_echo.pop(key)
    report = {"version": __version__, "config": config_echo, "result": body}
    if cfg.timing:
        report["timing_s"] = round(time.perf_counter() - t0, 6)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(dumps(report))
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-meter", description="Nonlocal sigma_z x sigma_z measurement simulator")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--preset", help="phi1 | phi2 | phi3 | phi4")
    p.add_argument("--amps", help="four comma-separated amplitudes, e.g. 1,1j,1,1j")
    p.add_argument("--phi-grid", help="point count over [0, pi] or a list like 0,pi/4,pi/2")
    p.add_argument("--shots", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-p", type=float)
    p.add_argument("--visibility", type=float)
    p.add_argument("--observable", help="two Pauli letters, e.g. XZ (protocol mode)")
    p.add_argument("--resamples", type=int)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="CSV side output (sweep table or tomography counts)")
    p.add_argument("--timing", action="store_true", default=None, help="include wall time in the report")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k != "config"}
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, flags)
        report = run(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ImpossibleOutcome as exc:
        print(f"impossible post-selection: {exc}", file=sys.stderr)
        return EXIT_POSTSELECT
    except InvariantViolation as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"config error ({args.mode or 'config'}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.output_path:
        sys.stdout.write(dumps(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
