"""Command-line pipeline: validate, build, tau, ld, predict, wavelet, report.

Usage::

    mforge <command> [config.json] [--key=value ...]

Values of ``--key=value`` are parsed as JSON when possible; dotted keys reach
into nested objects (``--q_grid.step=0.05``). Exit status is 0 on success, 1
when the mathematics is invalid or a construction bound fails, 2 for
unreadable input or missing prior outputs.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .construct import ScheduleError, Schedule, build_measure, build_schedule, get_preset, offdiag_mass
from .legendre import (
    LqFunction,
    SpectrumFunction,
    check_ordered,
    conjugate_f,
    conjugate_tau,
    predict_dims,
    validate_spectrum,
    validate_tau,
)
from .spectra import ld_broadening, ld_counts, tau_profile
from .wavelet import WaveletSeries, bridge_tau, evaluate, leader_tau, leaders, tail_bound

__all__ = ["main", "load_config", "DEFAULTS", "UsageError"]

COMMANDS = ("validate", "build", "tau", "ld", "predict", "wavelet", "report")

DEFAULTS: dict[str, Any] = {
    "f": None,
    "g": None,
    "tau": None,
    "tau_upper": None,
    "D": None,
    "m_max": 3,
    "preset": "desk-small",
    "seed": 0,
    "out": "mforge-out",
    "q_grid": {"lo": -3.0, "hi": 3.0, "step": 0.1},
    "alpha_points": 33,
    "eps": None,
    "wavelet": [[0.0, 1.0]],
    "n_max": 12,
    "x_points": 1025,
    "predict": {"points": 9},
}


class UsageError(Exception):
    """Unreadable configuration or missing inputs (exit status 2)."""


class MathError(Exception):
    """Invalid mathematical input or a violated construction bound (exit status 1)."""


# ----------------------------------------------------------------------------
# configuration


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(cfg: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def load_config(path: str | None, overrides: Sequence[str] = ()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
        for k, v in user.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise UsageError(f"override {item!r} is not of the form --key=value")
        k, v = item[2:].split("=", 1)
        _apply_override(cfg, k, _parse_value(v))
    return cfg


def _spectrum(obj: Any, name: str) -> SpectrumFunction:
    if isinstance(obj, dict) and "tent" in obj:
        args = obj["tent"]
        try:
            return SpectrumFunction.tent(*[float(a) for a in args], d=int(obj.get("d", 1)))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{name}: bad tent {args!r}: {exc}") from None
    try:
        return SpectrumFunction.from_json(obj)
    except (ValueError, AttributeError) as exc:
        raise UsageError(f"{name}: {exc}") from None


def _lq(obj: Any, name: str) -> LqFunction:
    try:
        return LqFunction.from_json(obj)
    except (ValueError, AttributeError) as exc:
        raise UsageError(f"{name}: {exc}") from None


def _q_grid(cfg: dict) -> np.ndarray:
    g = cfg["q_grid"]
    try:
        lo, hi, step = float(g["lo"]), float(g["hi"]), float(g["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"q_grid: {exc}") from None
    if step <= 0 or hi < lo:
        raise UsageError("q_grid needs lo <= hi and step > 0")
    k = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(k + 1), 12)


def resolve_targets(cfg: dict) -> tuple[SpectrumFunction, SpectrumFunction | None, dict]:
    """Target spectra ``(f, g)`` from the config plus a validation report.

    Exactly one of ``f``, ``f``+``g``, ``tau``, ``tau``+``tau_upper`` must be
    given. Scaling functions are turned into spectra by conjugation: the
    upper one yields ``f`` and the lower one ``g``.
    """
    has = {k: cfg.get(k) is not None for k in ("f", "g", "tau", "tau_upper")}
    report: dict[str, Any] = {}
    if has["f"] and not (has["tau"] or has["tau_upper"]):
        f = _spectrum(cfg["f"], "f")
        g = _spectrum(cfg["g"], "g") if has["g"] else None
    elif has["tau"] and not (has["f"] or has["g"]):
        tau = _lq(cfg["tau"], "tau")
        try:
            rep = validate_tau(tau)
        except ValueError as exc:
            raise MathError(f"tau: {exc}") from None
        report["tau"] = rep.to_json()
        if not rep.valid:
            raise MathError("tau invalid: " + "; ".join(rep.violations), report)
        if has["tau_upper"]:
            up = _lq(cfg["tau_upper"], "tau_upper")
            try:
                rep_u = validate_tau(up)
            except ValueError as exc:
                raise MathError(f"tau_upper: {exc}") from None
            report["tau_upper"] = rep_u.to_json()
            if not rep_u.valid:
                raise MathError("tau_upper invalid: " + "; ".join(rep_u.violations), report)
            if not np.array_equal(up.q, tau.q):
                raise UsageError("tau and tau_upper need the same q-grid")
            fin = np.isfinite(tau.tau) & np.isfinite(up.tau)
            if np.any(tau.tau[fin] > up.tau[fin] + 1e-12) or np.any(np.isfinite(tau.tau) & ~np.isfinite(up.tau)):
                raise MathError("tau exceeds tau_upper", report)
            f = conjugate_tau(up)
            g = conjugate_tau(tau)
        else:
            f = conjugate_tau(tau)
            g = None
    else:
        raise UsageError("give exactly one of: f, f+g, tau, tau+tau_upper")
    rep_f = validate_spectrum(f)
    report["f"] = rep_f.to_json()
    ok = rep_f.valid
    if g is not None:
        rep_g = validate_spectrum(g)
        report["g"] = rep_g.to_json()
        ok = ok and rep_g.valid
        if ok:
            try:
                check_ordered(f, g)
            except ValueError as exc:
                report["order"] = str(exc)
                ok = False
    if not ok:
        raise MathError("target spectra invalid", report)
    return f, g, report


# ----------------------------------------------------------------------------
# output helpers


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n",
                    encoding="utf-8", newline="")


def _finite(obj: Any) -> Any:
    """Replace non-finite floats anywhere in a JSON tree by their string names."""
    if isinstance(obj, float):
        return _jnum(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json_default(o: Any) -> Any:
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return _jnum(float(o))
    if isinstance(o, np.ndarray):
        return [_jnum(float(v)) for v in o]
    raise TypeError(f"not serializable: {type(o)}")


def _jnum(x: float) -> Any:
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def _svg_plot(path: Path, title: str, xlabel: str, ylabel: str, series: Sequence[tuple[str, np.ndarray, np.ndarray]]) -> None:
    """Minimal line chart; finite points only, coordinates rounded for stable output."""
    W, H, L, R, T, B = 640, 420, 60, 150, 30, 45
    xs = np.concatenate([np.asarray(s[1], float)[np.isfinite(s[2])] for s in series] or [np.zeros(1)])
    ys = np.concatenate([np.asarray(s[2], float)[np.isfinite(s[2])] for s in series] or [np.zeros(1)])
    if xs.size == 0:
        xs, ys = np.zeros(1), np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 <= x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 <= y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(x: float) -> float:
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def py(y: float) -> float:
        return H - B - (y - y0) / (y1 - y0) * (H - T - B)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
           f'<text x="{(L + W - R) / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
           f'<text x="14" y="{(T + H - B) / 2:.1f}" font-size="12" transform="rotate(-90 14 {(T + H - B) / 2:.1f})" '
           f'text-anchor="middle">{_esc(ylabel)}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{px(v):.1f}" y="{H - B + 14}" text-anchor="{anchor}" font-size="10">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{L - 4}" y="{py(v) + 4:.1f}" text-anchor="end" font-size="10">{v:.4g}</text>')
    for i, (label, x, y) in enumerate(series):
        c = colors[i % len(colors)]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - R + 8}" y="{T + 14 * (i + 1)}" font-size="11" fill="{c}">{_esc(label)}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _threads() -> int:
    raw = os.environ.get("MFORGE_THREADS", "")
    try:
        return max(1, int(raw)) if raw else max(1, min(4, os.cpu_count() or 1))
    except ValueError:
        raise UsageError(f"MFORGE_THREADS={raw!r} is not an integer") from None


# ----------------------------------------------------------------------------
# commands


def _outdir(cfg: dict) -> Path:
    p = Path(str(cfg["out"]))
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_validate(cfg: dict) -> dict:
    out = _outdir(cfg)
    try:
        _, _, report = resolve_targets(cfg)
        report["valid"] = True
    except MathError as exc:
        report = dict(exc.args[1]) if len(exc.args) > 1 else {}
        report["valid"] = False
        report["error"] = exc.args[0]
        _write_json(out / "validate.json", report)
        raise
    _write_json(out / "validate.json", report)
    return report


def cmd_build(cfg: dict):
    f, g, _ = resolve_targets(cfg)
    out = _outdir(cfg)
    try:
        sched = build_schedule(f, g, D=cfg["D"], m_max=int(cfg["m_max"]), preset=cfg["preset"],
                               eps_override=cfg["eps"])
        measure = build_measure(sched)
    except ScheduleError as exc:
        raise MathError(f"build failed: {exc}") from None
    _write_json(out / "schedule.json", sched.to_json())
    meta = measure.meta()
    meta["offdiag_mass"] = [offdiag_mass(measure, m) for m in range(1, sched.m_max + 1)]
    meta["log2_total_mass"] = measure.log2_total_mass(measure.num_stages)
    _write_json(out / "measure.meta.json", meta)
    return sched, measure


def _load_measure(cfg: dict):
    path = Path(str(cfg["out"])) / "schedule.json"
    if not path.exists():
        raise UsageError(f"{path} missing; run 'build' first")
    try:
        sched = Schedule.from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        return sched, build_measure(sched)
    except ScheduleError as exc:
        raise MathError(f"rebuild failed: {exc}") from None


def cmd_tau(cfg: dict) -> None:
    sched, measure = _load_measure(cfg)
    out = _outdir(cfg)
    q = _q_grid(cfg)
    prof = tau_profile(measure, q)
    rows = []
    for s in range(1, measure.num_stages + 1):
        for qi, t in zip(q, prof.row(s)):
            rows.append((s, int(measure.n[s]), float(qi), float(t)))
    _write_csv(out / "tau.csv", ("s", "n_s", "q", "tau_s"), rows)
    series = [(f"s={s}", q, prof.row(s)) for s in sorted(set(measure.s_m) | set(measure.s_prime_m))]
    series.append(("conj f", q, conjugate_f(sched.f, q).tau))
    if sched.g is not None:
        series.append(("conj g", q, conjugate_f(sched.g, q).tau))
    _svg_plot(out / "tau.svg", "scaling functions at level ends", "q", "tau_s(q)", series)


def cmd_ld(cfg: dict) -> None:
    sched, measure = _load_measure(cfg)
    out = _outdir(cfg)
    npts = int(cfg["alpha_points"])
    if npts < 2:
        raise UsageError("alpha_points must be >= 2")
    rows = []
    series = []
    targets = [("f", sched.f, measure.s_m)]
    if sched.mode == "pair":
        targets.append(("g", sched.g, measure.s_prime_m))
    for h, spec, stages in targets:
        lo, hi = spec.dom_min, spec.dom_max
        if math.isinf(hi):
            hi = float(spec.knots()[0].max())
        grid = np.linspace(lo, hi, npts)
        for s in stages:
            eps = measure.table(s).block.eps
            cs = ld_counts(measure, s, grid, eps)
            br = ld_broadening(measure, s, grid, spec)
            for a, c, dl, rc in zip(grid, cs.c, br.delta, br.reachable):
                rows.append((h, s, cs.n_s, float(a), eps, float(c), float(dl), int(rc)))
            series.append((f"{h} s={s}", grid, cs.c))
        series.append((f"{h} target", grid, np.asarray(spec(grid), float)))
    _write_csv(out / "ld.csv", ("h", "s", "n_s", "alpha", "eps", "c_s", "delta", "reachable"), rows)
    _svg_plot(out / "ld.svg", "coarse counting exponents", "alpha", "c_s(alpha)", series)


def cmd_predict(cfg: dict) -> None:
    f, g, _ = resolve_targets(cfg)
    out = _outdir(cfg)
    g = f if g is None else g
    spec = cfg["predict"]
    if "alpha" in spec:
        alphas = [float(a) for a in spec["alpha"]]
        betas = [float(b) for b in spec.get("beta", spec["alpha"])]
    else:
        k = int(spec.get("points", 9))
        lo = min(f.dom_min, g.dom_min)
        hi = max(float(f.knots()[0].max()), float(g.knots()[0].max()))
        alphas = betas = [float(v) for v in np.linspace(lo, hi, k)]
    rows = []
    for a in alphas:
        for b in betas:
            if a > b:
                continue
            p = predict_dims(f, g, a, b)
            rows.append((a, b) + p.as_tuple())
    _write_csv(out / "predict.csv",
               ("alpha", "beta", "dimH_E", "dimP_E", "dimH_lower", "dimH_upper", "dimP_lower", "dimP_upper"), rows)


def cmd_wavelet(cfg: dict) -> dict:
    sched, measure = _load_measure(cfg)
    if sched.d != 1:
        raise MathError("wavelet series need d = 1")
    out = _outdir(cfg)
    n_max = int(cfg["n_max"])
    pairs = cfg["wavelet"]
    if not isinstance(pairs, list) or not pairs:
        raise UsageError("wavelet must be a non-empty list of [gamma1, gamma2]")
    q = _q_grid(cfg)
    xs = np.linspace(0.0, 1.0, int(cfg["x_points"]))
    summary = []
    fn_series = []
    nthreads = _threads()
    for j, pair in enumerate(pairs):
        try:
            g1, g2 = float(pair[0]), float(pair[1])
        except (TypeError, ValueError, IndexError):
            raise UsageError(f"wavelet entry {pair!r} is not [gamma1, gamma2]") from None
        try:
            ws = WaveletSeries.from_measure(measure, g1, g2, n_max)
        except ValueError as exc:
            raise MathError(f"wavelet ({g1}, {g2}): {exc}") from None
        lt = leaders(ws)
        name = "wavelet.csv" if j == 0 else f"wavelet-{j}.csv"
        _write_csv(out / name, ("n", "I", "log2_lambda", "log2_leader"), lt.rows())
        lt_tau = leader_tau(lt, q)
        br = bridge_tau(ws, lt, q)
        excess = float(np.max(np.abs(lt_tau.rows - br.predicted) - br.bound()))
        chunks = np.array_split(xs, nthreads)
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            vals = np.concatenate(list(pool.map(lambda c: evaluate(ws, c), chunks)))
        fn_series.append((f"g1={g1:g} g2={g2:g}", xs, vals))
        summary.append({"gamma1": g1, "gamma2": g2, "file": name, "bridge_excess": excess,
                        "holder_floor": ws.holder_floor(), "tail_bound": tail_bound(ws)})
    _write_csv(out / "function.csv", ("x",) + tuple(f"F{j}" for j in range(len(pairs))),
               [(float(x),) + tuple(float(s[2][i]) for s in fn_series) for i, x in enumerate(xs)])
    _svg_plot(out / "wavelet.svg", "wavelet series partial sums", "x", "F(x)", fn_series)
    _write_json(out / "wavelet.json", summary)
    return {"pairs": summary}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_report(cfg: dict) -> None:
    cmd_validate(cfg)
    sched, measure = cmd_build(cfg)
    cmd_tau(cfg)
    cmd_ld(cfg)
    cmd_predict(cfg)
    wave = cmd_wavelet(cfg) if sched.d == 1 else {"skipped": "d > 1"}
    out = _outdir(cfg)
    pre = get_preset(sched.preset)
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "config": cfg,
        "preset": asdict(pre),
        "knobs": {
            "tolerances": [b.eps for b in sched.blocks if b.h == "f"],
            "growth": f"N_(m+1) = max(coverage minimum, ceil(gain * history / R^f_(m+1)), N_m + 1), gain {pre.gain}",
            "repetitions": "R^f_1 = 1, R^g_m = (m+1) R^f_m, R^f_(m+1) = R^g_m",
            "exponent_cap": sched.alpha_cap,
            "coverage": pre.coverage,
            "menu_filter_scale": pre.filter_scale,
            "shrink_cap": pre.theta_cap,
            "drop_unrealizable": pre.drop_unrealizable,
            "generation_cap": 4096,
            "ld_bucket_resolution": 2.0**-20,
            "wavelet_mother": "hat-difference",
        },
        "build": {
            "stages": measure.num_stages,
            "n_final": int(measure.n[-1]),
            "s_m": list(measure.s_m),
            "s_prime_m": list(measure.s_prime_m),
            "dropped": {f"{b.m}{b.h}": list(b.dropped) for b in sched.blocks if b.dropped},
        },
        "wavelet": wave,
        "files": {name: _sha256(out / name) for name in files},
    }
    _write_json(out / "manifest.json", manifest)


_DISPATCH = {
    "validate": cmd_validate,
    "build": cmd_build,
    "tau": cmd_tau,
    "ld": cmd_ld,
    "predict": cmd_predict,
    "wavelet": cmd_wavelet,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = argparse.ArgumentParser(prog="mforge", description="Build measures with prescribed multifractal spectra.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", nargs="?", help="JSON configuration file")
    pos = [a for a in argv if not (a.startswith("--") and "=" in a)]
    overrides = [a for a in argv if a.startswith("--") and "=" in a]
    try:
        ns = ap.parse_args(pos)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(ns.config, overrides)
        _DISPATCH[ns.command](cfg)
    except UsageError as exc:
        print(f"mforge: {exc}", file=sys.stderr)
        return 2
    except MathError as exc:
        print(f"mforge: {exc.args[0]}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
