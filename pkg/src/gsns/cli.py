"""Command-line entry point: ``gsns <command> ...``.

Every report is a pure function of the config bytes and the command line,
written atomically, with floats at 17 significant digits. Failures exit
nonzero and print a JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import FORMAT_VERSION, ConfigError, ExperimentConfig, load_config
from .dynamics import BlowUpError
from .hypoellipticity import check_hypoelliptic
from .lattice import build_lattice, build_triads
from .measure import moments, pesin_entropy, sample_stationary, stationary_sq_norm
from .symbolic import PatternFamily, find_free_set
from .tangent import FrameCollapseError, LyapunovReport, lyapunov_spectrum

THREADS_ENV = "GSNS_NUM_THREADS"


# -- serialization -----------------------------------------------------------

def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def to_json(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with every float at 17 significant digits and stable key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(columns: list[str], rows: np.ndarray, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(",".join(columns) + "\n")
    for row in np.atleast_2d(rows):
        buf.write(",".join(fmt_float(v) for v in row) + "\n")
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _args_header(command: str, params: dict) -> dict:
    canon = json.dumps({"command": command, **params}, sort_keys=True, separators=(",", ":"))
    return {"format_version": FORMAT_VERSION,
            "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
            "config": params}


def _csv_comment(cfg: ExperimentConfig) -> str:
    return f"format_version={FORMAT_VERSION} config_hash={cfg.config_hash}"


def n_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(THREADS_ENV, f"not an integer: {raw!r}") from None


def _map(fn, items):
    """Ordered map, threaded when the thread-count variable asks for it."""
    k = n_threads()
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


# -- parsing helpers -----------------------------------------------------------

def parse_modes(text: str) -> list[tuple[int, int]]:
    """``"k1,k2;k1,k2"`` -> list of modes."""
    modes = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError("--force", f"bad mode {chunk!r}, expected k1,k2")
        modes.append((int(parts[0]), int(parts[1])))
    return modes


def parse_int_list(text: str, what: str) -> list[int]:
    """``"0,2,4"`` or ``"0..9"`` (inclusive range) -> list of ints."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo = lo.strip().lstrip("Ss")
            hi = hi.strip().lstrip("Ss")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(what, f"cannot parse integer list {text!r}") from None


def _override(cfg: ExperimentConfig, block: str | None, **values) -> ExperimentConfig:
    data = json.loads(json.dumps(cfg.data))
    target = data if block is None else data[block]
    for key, val in values.items():
        if val is not None:
            target[key] = val
    from .config import parse_config
    return parse_config(json.dumps(data))


# -- commands -------------------------------------------------------------------

def cmd_hypo_check(args) -> None:
    K = parse_modes(args.force)
    trace = check_hypoelliptic(K, args.n)
    report = {**trace.to_dict(), **_args_header("hypo-check", {"n": args.n, "force": K})}
    write_atomic(args.out, to_json(report) + "\n")


def cmd_triads(args) -> None:
    lattice = build_lattice(args.n)
    write_atomic(args.out, build_triads(lattice).to_csv())


def cmd_simulate(args) -> None:
    cfg = _override(load_config(args.config), None, seed=args.seed, t_final=args.t_final)
    model = cfg.model()
    dt = model.config.dt
    n = int(round(cfg["t_final"] / dt))
    path = model.sample_noise(n, cfg["seed"]) if model.pattern.forced_components() else None
    every = max(1, int(args.record_every))
    states = model.trajectory(cfg.initial_state(model), path, cfg["t_final"], record_every=every)
    t = np.arange(len(states)) * every * dt
    rows = np.column_stack([t, states])
    cols = ["t"] + model.lattice.component_names()
    write_atomic(args.out, csv_text(cols, rows, _csv_comment(cfg)))


def _lyapunov_one(cfg: ExperimentConfig, seed: int) -> LyapunovReport:
    model = cfg.model()
    ly = cfg["lyapunov"]
    n = int(round(ly["t_total"] / model.config.dt))
    path = model.sample_noise(n, seed) if model.pattern.forced_components() else None
    return lyapunov_spectrum(model, cfg.initial_state(model), path, p=ly["p"],
                             reorth_every=ly["reorth_every"], t_total=ly["t_total"],
                             burn_in=ly["burn_in"], n_batches=ly["n_batches"],
                             frame=ly["frame"])


def aggregate_lyapunov(reports: list[LyapunovReport]) -> dict:
    """Mean over seeds with stderr ``sqrt(sum se_i^2) / n_seeds``."""
    ex = np.array([r.exponents for r in reports])
    se = np.array([r.stderr for r in reports])
    return {
        "p": reports[0].p,
        "d": reports[0].d,
        "exponents": ex.mean(axis=0).tolist(),
        "stderr": (np.sqrt((se**2).sum(axis=0)) / len(reports)).tolist(),
    }


def cmd_lyapunov(args) -> None:
    cfg = load_config(args.config)
    cfg = _override(cfg, "lyapunov", p=args.p, t_total=args.t_total,
                    reorth_every=args.reorth_every)
    if args.seeds is not None:
        cfg = _override(cfg, None, seeds=parse_int_list(args.seeds, "--seeds"))
    reports = _map(lambda s: _lyapunov_one(cfg, s), cfg.seeds)
    per_seed = []
    for seed, rep in zip(cfg.seeds, reports):
        entry = rep.to_dict()
        entry.pop("config")
        per_seed.append({"seed": seed, **entry})
    out = {**aggregate_lyapunov(reports), "per_seed": per_seed, **cfg.header()}
    write_atomic(args.out, to_json(out) + "\n")


def cmd_entropy(args) -> None:
    with open(args.lyapunov) as fh:
        data = json.load(fh)
    h = pesin_entropy(LyapunovReport.from_dict(data))
    text = f"{fmt_float(h.value)} {fmt_float(h.stderr)}\n"
    if args.out:
        report = {"entropy": h.value, "stderr": h.stderr,
                  **_args_header("entropy", {"lyapunov": data.get("config_hash")})}
        write_atomic(args.out, to_json(report) + "\n")
    sys.stdout.write(text)


def cmd_stationary(args) -> None:
    cfg = load_config(args.config)
    cfg = _override(cfg, "stationary", burn_in=args.burn_in, samples=args.samples,
                    thin=args.thin)
    cfg = _override(cfg, None, seed=args.seed)
    st = cfg["stationary"]
    model = cfg.model()
    burn = st["burn_in"]
    if burn is None:
        # a quarter of the recorded span
        burn = 0.25 * st["samples"] * st["thin"] * model.config.dt
    measure = sample_stationary(model, burn, st["samples"], st["thin"], cfg["seed"],
                                x0=cfg.initial_state(model))
    write_atomic(args.out, csv_text(model.lattice.component_names(), measure.samples,
                                    _csv_comment(cfg)))
    if args.report:
        rep = moments(measure, st["n_batches"]).to_dict() if len(measure) >= 100 else {}
        rep["exact_mean_sq_norm"] = stationary_sq_norm(model)
        rep["burn_in"] = burn
        write_atomic(args.report, to_json({**rep, **cfg.header()}) + "\n")


def cmd_horseshoe(args) -> None:
    from .horseshoe import horseshoe_experiment

    cfg = load_config(args.config)
    J = parse_int_list(args.j, "--j") if args.j else None
    cfg = _override(cfg, "horseshoe", radius=args.radius, tau=args.tau, J=J)
    cfg = _override(cfg, None, seed=args.seed)
    cert = horseshoe_experiment(cfg)
    write_atomic(args.out, to_json({**cert.to_dict(), **cert.meta, **cfg.header()}) + "\n")


def read_words(path: str) -> list[tuple[int, ...]]:
    words = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                words.append(tuple(int(t) for t in line.split(",")))
    return words


def cmd_free_set(args) -> None:
    words = read_words(args.words)
    R = PatternFamily.from_words(words, r=args.r, n=args.n)
    J = find_free_set(R)
    report = {"max_trace_set": list(J), "size": len(J), "ratio": len(J) / R.n,
              **_args_header("free-set", {"r": args.r, "n": args.n,
                                          "words": [list(w) for w in sorted(R.words)]})}
    write_atomic(args.out, to_json(report) + "\n")


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsns", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hypo-check", help="bracket-generation check of a forcing set")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--force", required=True, help='modes as "k1,k2;k1,k2;..."')
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_hypo_check)

    p = sub.add_parser("triads", help="dump the triad table as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_triads)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--t-final", type=float)
    p.add_argument("--record-every", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lyapunov", help="Lyapunov spectrum over several seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--t-total", type=float)
    p.add_argument("--reorth-every", type=int)
    p.add_argument("--seeds", help='"0,1,2" or "0..9"')
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("entropy", help="Pesin entropy from a Lyapunov report")
    p.add_argument("--lyapunov", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("stationary", help="sample the stationary measure")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report", help="optional JSON file for moment diagnostics")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("horseshoe", help="full-horseshoe certificate on a frozen path")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float)
    p.add_argument("--j", help='hitting times, e.g. "0,4,8,12"')
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_horseshoe)

    p = sub.add_parser("free-set", help="maximum trace set of a word family")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--words", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_free_set)
    return parser


def _error_record(command: str, exc: BaseException) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, BlowUpError):
        rec["time"] = exc.time
        rec["step"] = exc.step
    if isinstance(exc, ConfigError):
        rec["field"] = exc.path
    if isinstance(exc, FrameCollapseError):
        rec["step"] = exc.step
    return rec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, BlowUpError, FrameCollapseError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps(_error_record(args.command, exc)) + "\n")
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


def run_experiment(config_path: str, command: str, out: str, *extra: str) -> int:
    """Runs a config-driven command (simulate, lyapunov, stationary, horseshoe).

    Returns the exit code of ``main``.
    """
    if command not in ("simulate", "lyapunov", "stationary", "horseshoe"):
        raise ValueError(f"{command!r} is not a config-driven command")
    return main([command, "--config", str(config_path), "--out", str(out), *extra])


if __name__ == "__main__":
    sys.exit(main())
