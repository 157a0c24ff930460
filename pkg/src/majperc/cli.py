"""Command line batch runner.

Every subcommand writes one CSV file (stdout by default) whose leading
``#`` lines echo the full experiment spec, so a file can be reproduced from
its own header. Floats are written with 17 significant digits and output
never depends on the number of worker threads.

Exit codes: 0 success, 2 invalid spec, 3 budget exhausted, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .clocks import ClockStream, SeedSpec
from .couplings import COUPLING_COLUMNS, coupling_row, continuity_pair, monotone_p_pair
from .dynamics import InitialField, evolve_trajectory, run_to_quiescence
from .enhancement import chain_stability_check, sample_enhancement_field
from .estimation import (BudgetExhausted, EventSpec, covariance_estimate, mc_event_prob,
                         percolation_certificate, renorm_trace, resolve_threads, threshold_search)
from .grid import BoundaryPolicy, Rect, Site
from .oracle import STANDARD_FKG_PAIRS, exact_law, fkg_suite

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4

COMMANDS = ("evolve", "sweep", "pc-curve", "cov", "fixation", "couple", "enhance", "oracle",
            "certify", "renorm")


class SpecError(ValueError):
    """Invalid experiment spec; ``line`` is set for spec-file parse errors."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


# --- parameter table ---------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _grid(text: str) -> tuple[int, int]:
    w, h = str(text).lower().split("x")
    return int(w), int(h)


def _policy(text) -> str:
    return BoundaryPolicy.parse(text).name.lower()


def _prob(v: float) -> bool:
    return 0.0 <= v <= 1.0


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any
    help: str
    check: Callable[[Any], bool] | None = None


PARAMS: dict[str, Param] = {
    "p": Param(float, 0.6, "initial density", _prob),
    "p2": Param(float, 0.7, "upper density of a monotone pair", _prob),
    "t": Param(float, 1.0, "time horizon", lambda v: v >= 0),
    "n": Param(int, 32, "box size / scale", lambda v: v >= 1),
    "lambda": Param(float, 2.0, "aspect ratio of H(lambda n, n)", lambda v: v > 0),
    "replicas": Param(int, 1000, "number of replicas or instances", lambda v: v >= 1),
    "seed": Param(int, 0, "master seed", lambda v: v >= 0),
    "policy": Param(_policy, None, "boundary policy (free_finite, frozen_zero, frozen_one, periodic)"),
    "threads": Param(int, None, "worker threads (default: MAJPERC_THREADS or 1)", lambda v: v >= 1),
    "out": Param(str, "-", "output path ('-' for stdout)"),
    "svg": Param(str, "", "optional SVG plot path"),
    "event": Param(str, "h_crossing", "event kind: h_crossing or circuit",
                   lambda v: v in ("h_crossing", "circuit")),
    "m": Param(int, 2, "inner radius of Cir(m, n)", lambda v: v >= 0),
    "delta": Param(float, 0.1, "continuity coupling delta", lambda v: v > 0),
    "kind": Param(str, "continuity", "coupling kind: monotone or continuity",
                  lambda v: v in ("monotone", "continuity")),
    "strict": Param(_bool, False, "check the order after every ring"),
    "tol": Param(float, 0.004, "bisection tolerance", lambda v: v > 0),
    "target": Param(float, 0.5, "target crossing probability", lambda v: 0 < v < 1),
    "max_per_point": Param(int, 4096, "replica cap per bisection probe", lambda v: v >= 1),
    "budget": Param(int, 500_000, "total replica budget", lambda v: v >= 1),
    "dist": Param(_ints, (1, 46), "comma-separated distances along the x axis", lambda v: all(d >= 0 for d in v) and v),
    "t_max": Param(float, 1000.0, "time cap for quiescence", lambda v: v > 0),
    "replica": Param(int, 0, "replica id of a single run", lambda v: v >= 0),
    "grid": Param(_grid, (3, 3), "oracle grid WxH", lambda v: v[0] >= 1 and v[1] >= 1 and v[0] * v[1] <= 12),
    "check": Param(str, "fkg", "oracle output: fkg, law or marginals", lambda v: v in ("fkg", "law", "marginals")),
    "K": Param(int, None, "oracle truncation (default: tail < 1e-6)", lambda v: v >= 0),
    "L0": Param(int, 16, "initial renormalisation scale", lambda v: v >= 1),
    "factor": Param(int, 3, "renormalisation factor (3 or 4)", lambda v: v in (3, 4)),
    "k_max": Param(int, 2, "number of renormalisation steps", lambda v: v >= 0),
    "n0": Param(int, None, "certificate scale threshold (default ceil(3 e^2 T))", lambda v: v >= 1),
    "T": Param(float, None, "certificate time bound (default t)", lambda v: v >= 0),
}

# per-command overrides: list-valued keys and a certify default large enough
# for the Wilson bound to drop below epsilon with zero failures
COMMAND_PARAMS: dict[tuple[str, str], Param] = {
    ("sweep", "p"): Param(_floats, (0.55, 0.6, 0.65), "comma-separated densities",
                          lambda v: bool(v) and all(map(_prob, v))),
    ("pc-curve", "t"): Param(_floats, (0.0, 1.0), "comma-separated times",
                             lambda v: bool(v) and all(x >= 0 for x in v)),
    ("certify", "replicas"): Param(int, 4000, "number of replicas", lambda v: v >= 1),
}


def param_for(command: str, key: str) -> Param:
    return COMMAND_PARAMS.get((command, key), PARAMS[key])


COMMAND_KEYS: dict[str, tuple[str, ...]] = {
    "evolve": ("p", "t", "n", "seed", "replica", "policy", "out"),
    "sweep": ("p", "t", "n", "lambda", "event", "m", "replicas", "seed", "policy", "threads", "out", "svg"),
    "pc-curve": ("t", "n", "lambda", "target", "tol", "max_per_point", "budget", "seed", "policy",
                 "threads", "out", "svg"),
    "cov": ("p", "t", "dist", "replicas", "seed", "policy", "out"),
    "fixation": ("p", "n", "replicas", "seed", "policy", "t_max", "threads", "out"),
    "couple": ("kind", "p", "p2", "delta", "t", "n", "replicas", "seed", "policy", "strict", "threads", "out"),
    "enhance": ("p", "t", "n", "replicas", "seed", "policy", "threads", "out"),
    "oracle": ("grid", "t", "p", "K", "policy", "check", "out"),
    "certify": ("p", "t", "n", "replicas", "seed", "n0", "T", "policy", "threads", "out"),
    "renorm": ("p", "t", "L0", "factor", "k_max", "replicas", "seed", "policy", "threads", "out"),
}

DEFAULT_POLICY = {"evolve": "free_finite", "fixation": "free_finite", "couple": "free_finite",
                  "oracle": "free_finite"}

COLUMNS = {
    "evolve": "time,site_x,site_y,old,new",
    "sweep": "p,t,n,lambda,event,replicas,successes,p_hat,ci_lo,ci_hi,master_seed",
    "pc-curve": "t,n,lambda,p_star,ci_lo,ci_hi,replicas_used,master_seed",
    "cov": "p,t,x1,y1,x2,y2,distance,replicas,cov,se,ci_lo,ci_hi,mean_x,mean_y",
    "fixation": "replica,quiescent,time,total_flips,final_density",
    "couple": "replica,kind,p_lower,p_upper,t,delta,delta_prime,violations,lower_density,upper_density,upper_mid_density",
    "enhance": "instance_seed,chains_checked,connectors_checked,violations",
    "oracle": "fkg: event_a,event_b,p_a,p_b,p_ab,margin,margin_lower,tail,verdict | law: config_bits,mass"
              " | marginals: site_x,site_y,p_lower,p_upper",
    "certify": "structured [certificate] block",
    "renorm": "k,L,replicas,failures,q_hat,q_lo,q_hi,bound,correction,holds",
}


@dataclass
class ExperimentSpec:
    command: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def echo(self) -> list[str]:
        """Header lines reproducing this spec (``threads`` and ``out`` excluded)."""
        lines = [f"command={self.command}"]
        for k in COMMAND_KEYS[self.command]:
            if k in ("threads", "out", "svg"):
                continue
            lines.append(f"{k}={_format_value(self.params[k], k)}")
        return lines


def _format_value(v, key: str = "") -> str:
    if key == "grid":
        return f"{v[0]}x{v[1]}"
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def build_spec(command: str, raw: dict, lines: dict | None = None) -> ExperimentSpec:
    """Validate ``raw`` string values for ``command`` and fill in defaults."""
    if not command:
        raise SpecError("command is required")
    if command not in COMMANDS:
        raise SpecError(f"unknown command {command!r}", (lines or {}).get("command"))
    allowed = COMMAND_KEYS[command]
    params = {}
    for key, text in raw.items():
        line = (lines or {}).get(key)
        if key not in allowed:
            raise SpecError(f"unknown key {key!r} for command {command}", line)
        spec = param_for(command, key)
        if text is None or text == "":
            continue
        try:
            value = spec.parse(text) if isinstance(text, str) else text
        except (TypeError, ValueError) as exc:
            raise SpecError(f"invalid value for {key}: {text!r} ({exc})", line) from None
        if spec.check is not None and value is not None and not spec.check(value):
            raise SpecError(f"value out of range for {key}: {text!r}", line)
        params[key] = value
    for key in allowed:
        if key not in params:
            default = param_for(command, key).default
            if key == "policy":
                default = DEFAULT_POLICY.get(command, "frozen_zero")
            params[key] = default
    if command == "couple" and params["kind"] == "monotone" and params["p2"] < params["p"]:
        raise SpecError("p2 must be at least p for a monotone pair")
    if command == "couple" and params["kind"] == "continuity" and params["p"] + params["delta"] > 1:
        raise SpecError("p + delta must not exceed 1")
    if command == "sweep" and params["event"] == "circuit" and params["m"] >= params["n"]:
        raise SpecError("m must be smaller than n for circuit events")
    return ExperimentSpec(command, params)


def parse_spec(source) -> ExperimentSpec:
    """Parse a ``key=value`` spec (file path or file object); ``#`` starts a comment."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise SpecError(f"expected key=value, got {body!r}", no)
        key, value = (s.strip() for s in body.split("=", 1))
        key = key.replace("-", "_")
        if key in raw:
            raise SpecError(f"duplicate key {key!r}", no)
        raw[key], lines[key] = value, no
    command = raw.pop("command", "")
    return build_spec(command, raw, lines)


# --- output ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def _csv_text(spec: ExperimentSpec, columns: list[str], rows: list[list], extra: list[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(f"# majperc {__version__}\n")
    for line in spec.echo():
        buf.write(f"# {line}\n")
    for line in extra:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    if columns:
        w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    if path in ("-", ""):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".majperc-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def svg_plot(xs, ys, xlabel: str, ylabel: str, lo=None, hi=None) -> str:
    """Minimal SVG line plot with optional error bars."""
    W, H, M = 480, 320, 50
    xs, ys = list(map(float, xs)), list(map(float, ys))
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    allv = ys + [v for v in (lo or []) + (hi or []) if v is not None]
    y0, y1 = min(allv), max(allv)
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda v: M + (v - x0) / (x1 - x0) * (W - 2 * M)  # noqa: E731
    sy = lambda v: H - M - (v - y0) / (y1 - y0) * (H - 2 * M)  # noqa: E731
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{M}" y1="{H - M}" x2="{W - M}" y2="{H - M}" stroke="black"/>',
             f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H - M}" stroke="black"/>',
             f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>']
    if lo is not None and hi is not None:
        for x, a, b in zip(xs, lo, hi):
            parts.append(f'<line x1="{sx(x):.2f}" y1="{sy(a):.2f}" x2="{sx(x):.2f}" y2="{sy(b):.2f}" '
                         f'stroke="gray"/>')
    parts += [f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
              f'<text x="12" y="{H / 2}" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{ylabel}</text>',
              f'<text x="{M}" y="{H - M + 15}" font-size="10">{x0:.4g}</text>',
              f'<text x="{W - M}" y="{H - M + 15}" font-size="10" text-anchor="end">{x1:.4g}</text>',
              f'<text x="{M - 5}" y="{H - M}" font-size="10" text-anchor="end">{y0:.4g}</text>',
              f'<text x="{M - 5}" y="{M}" font-size="10" text-anchor="end">{y1:.4g}</text>',
              "</svg>"]
    return "\n".join(parts) + "\n"


# --- commands ----------------------------------------------------------------


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _cmd_evolve(s: ExperimentSpec) -> str:
    region = Rect.square(s["n"])
    seed = SeedSpec(s["seed"], s["replica"])
    init = InitialField(seed.with_purpose("init"), s["p"]).config(region)
    traj = evolve_trajectory(init, ClockStream(seed), s["t"], s["policy"])
    rows = [[e.time, e.site.x, e.site.y, e.old, e.new] for e in traj.events]
    extra = [f"init_density={_fmt(init.bits.mean())}", f"final_density={_fmt(traj.final.bits.mean())}",
             f"flips={len(traj)}"]
    return _csv_text(s, ["time", "site_x", "site_y", "old", "new"], rows, extra)


def _event_spec(s: ExperimentSpec, p: float) -> EventSpec:
    if s["event"] == "circuit":
        return EventSpec.circuit(s["m"], s["n"], s["t"], p, s["policy"])
    return EventSpec.h_crossing(s["n"], s["lambda"], s["t"], p, s["policy"])


def _cmd_sweep(s: ExperimentSpec) -> str:
    rows = []
    for p in s["p"]:
        est = mc_event_prob(_event_spec(s, p), s["replicas"], s["seed"], threads=s["threads"])
        rows.append([p, s["t"], s["n"], s["lambda"], s["event"], est.replicas, est.successes,
                     est.p_hat, est.ci[0], est.ci[1], s["seed"]])
    if s["svg"]:
        write_atomic(s["svg"], svg_plot([r[0] for r in rows], [r[7] for r in rows], "p", "P[event]",
                                         [r[8] for r in rows], [r[9] for r in rows]))
    return _csv_text(s, COLUMNS["sweep"].split(","), rows)


def _cmd_pc_curve(s: ExperimentSpec) -> str:
    rows = []
    for t in s["t"]:
        est = threshold_search(t, s["n"], s["lambda"], s["target"], s["tol"], s["seed"], s["policy"],
                               max_per_point=s["max_per_point"], budget=s["budget"], threads=s["threads"])
        rows.append([t, s["n"], s["lambda"], est.p_star, est.ci[0], est.ci[1], est.replicas_used, s["seed"]])
    if s["svg"]:
        write_atomic(s["svg"], svg_plot([r[0] for r in rows], [r[3] for r in rows], "t", "p_star",
                                         [r[4] for r in rows], [r[5] for r in rows]))
    return _csv_text(s, COLUMNS["pc-curve"].split(","), rows)


def _cmd_cov(s: ExperimentSpec) -> str:
    rows = []
    for d in s["dist"]:
        x, y = Site(0, 0), Site(d, 0)
        est = covariance_estimate(s["p"], s["t"], x, y, s["replicas"], s["seed"], s["policy"])
        rows.append([s["p"], s["t"], x.x, x.y, y.x, y.y, d, est.replicas, est.cov, est.se,
                     est.ci[0], est.ci[1], est.mean_x, est.mean_y])
    return _csv_text(s, COLUMNS["cov"].split(","), rows)


def _cmd_fixation(s: ExperimentSpec) -> str:
    region = Rect.square(s["n"])

    def one(r):
        seed = SeedSpec(s["seed"], r)
        init = InitialField(seed.with_purpose("init"), s["p"]).config(region)
        res = run_to_quiescence(init, ClockStream(seed), s["policy"], s["t_max"])
        return [r, res.quiescent, res.time if res.quiescent else math.nan,
                int(res.flip_counts.sum()), res.final.bits.mean()]

    rows = _map_ordered(one, list(range(s["replicas"])), resolve_threads(s["threads"]))
    return _csv_text(s, COLUMNS["fixation"].split(","), rows)


def _cmd_couple(s: ExperimentSpec) -> str:
    region = Rect.square(s["n"])

    def one(r):
        seed = SeedSpec(s["seed"], r)
        if s["kind"] == "monotone":
            pair = monotone_p_pair(s["p"], s["p2"], s["t"], region, seed, s["policy"], s["strict"],
                                   raise_on_violation=False)
        else:
            pair = continuity_pair(s["p"], s["delta"], s["t"], region, seed, s["policy"], s["strict"],
                                   raise_on_violation=False)
        return coupling_row(r, pair)

    rows = _map_ordered(one, list(range(s["replicas"])), resolve_threads(s["threads"]))
    return _csv_text(s, COUPLING_COLUMNS, rows)


def _cmd_enhance(s: ExperimentSpec) -> str:
    region = Rect.square(s["n"])

    def one(r):
        seed = SeedSpec(s["seed"], r)
        init = InitialField(seed.with_purpose("init"), s["p"]).config(region)
        clocks = ClockStream(seed, split_first_ring=True)
        rep = chain_stability_check(init, clocks, sample_enhancement_field(region, seed), s["t"], s["policy"])
        return [r, rep.chains_checked, rep.connectors_checked, rep.violations]

    rows = _map_ordered(one, list(range(s["replicas"])), resolve_threads(s["threads"]))
    return _csv_text(s, COLUMNS["enhance"].split(","), rows,
                     ["instance_seed is the replica id under the master seed"])


def _cmd_oracle(s: ExperimentSpec) -> str:
    w, h = s["grid"]
    law = exact_law(Rect(1, w, 1, h), s["t"], s["p"], s["K"], s["policy"])
    extra = [f"K={law.K}", f"tail={law.tail:.17g}", f"total_mass={law.total_mass:.17g}"]
    if s["check"] == "law":
        body = law.to_csv().split("\n", 2)[2]
        return _csv_text(s, [], [], extra) + body
    if s["check"] == "marginals":
        marg = law.site_marginals()
        rows = [[site.x, site.y, m, min(1.0, m + law.tail)] for site, m in zip(law.region.sites(), marg)]
        return _csv_text(s, ["site_x", "site_y", "p_lower", "p_upper"], rows, extra)
    res = fkg_suite(law)
    rows = [[a, b, r.p_a[0], r.p_b[0], r.p_ab[0], r.margin, r.margin_lower, r.tail, r.verdict]
            for a, b, r in res]
    overall = "PASS" if all(r.passed for *_, r in res) else "FAIL"
    extra.append(f"overall={overall} pairs={len(STANDARD_FKG_PAIRS)}")
    return _csv_text(s, ["event_a", "event_b", "p_a", "p_b", "p_ab", "margin", "margin_lower", "tail",
                         "verdict"], rows, extra)


def _cmd_certify(s: ExperimentSpec) -> str:
    rep = percolation_certificate(s["p"], s["t"], s["n"], s["seed"], s["replicas"], s["n0"], s["T"],
                                  s["policy"], threads=s["threads"])
    return _csv_text(s, [], []) + rep.to_text()


def _cmd_renorm(s: ExperimentSpec) -> str:
    tr = renorm_trace(s["p"], s["t"], s["L0"], s["factor"], s["k_max"], s["seed"], s["replicas"],
                      s["policy"], threads=s["threads"])
    rows = [[r.k, r.L, r.replicas, r.failures, r.q_hat, r.q_lo, r.q_hi, r.bound, r.correction,
             "" if r.holds is None else r.holds] for r in tr.rows]
    return _csv_text(s, COLUMNS["renorm"].split(","), rows, [f"prefactor={tr.prefactor}"])


HANDLERS = {"evolve": _cmd_evolve, "sweep": _cmd_sweep, "pc-curve": _cmd_pc_curve, "cov": _cmd_cov,
            "fixation": _cmd_fixation, "couple": _cmd_couple, "enhance": _cmd_enhance,
            "oracle": _cmd_oracle, "certify": _cmd_certify, "renorm": _cmd_renorm}


def render(spec: ExperimentSpec) -> str:
    """Run an experiment and return its output text."""
    return HANDLERS[spec.command](spec)


def run(spec: ExperimentSpec) -> int:
    """Run an experiment, write its output, and return the exit status."""
    try:
        text = render(spec)
    except BudgetExhausted as exc:
        print(f"majperc: budget exhausted: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial", None)
        if partial is not None and getattr(partial, "trace", None):
            for q in partial.trace:
                print(f"  probe p={q.p!r} replicas={q.replicas} p_hat={q.p_hat!r} {q.decision}", file=sys.stderr)
        return EXIT_BUDGET
    except (SpecError, ValueError) as exc:
        print(f"majperc: invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        write_atomic(spec["out"], text)
    except OSError as exc:
        print(f"majperc: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="majperc", description="Majority dynamics percolation experiments.")
    parser.add_argument("--version", action="version", version=f"majperc {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    runp = sub.add_parser("run", help="run an experiment from a key=value spec file")
    runp.add_argument("specfile")
    for command in COMMANDS:
        cp = sub.add_parser(command, help=f"{command} experiment",
                            description=f"CSV columns: {COLUMNS[command]}")
        for key in COMMAND_KEYS[command]:
            param = param_for(command, key)
            names = [_flag(key)]
            if key == "lambda":
                names = ["--lambda", "--lam"]
            elif key == "k_max":
                names = ["--k-max"]
            default = param.default if key != "policy" else DEFAULT_POLICY.get(command, "frozen_zero")
            cp.add_argument(*names, dest=key, default=None, metavar=key.upper(),
                            help=f"{param.help} (default: {_format_value(default, key) or 'auto'})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_INVALID
    try:
        if args.command == "run":
            spec = parse_spec(args.specfile)
        else:
            raw = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
            spec = build_spec(args.command, raw)
    except SpecError as exc:
        print(f"majperc: invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"majperc: cannot read spec: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
