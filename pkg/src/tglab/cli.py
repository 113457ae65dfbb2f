"""Command-line front end: `tglab <command> --config <path> [--seed N] [--out DIR]`.

Commands
--------
calibrate     tabulate every configured profile density to CSV
efsq-surface  E(F^2) over a (sin^2 theta_a, sin^2 theta_b) grid
fidelity-hist the first-attempt fidelity distribution (histogram CSV)
compare       post-selection vs adaptive strategy report (3f2/exact modes)
grow          run the growth pipeline, emit per-round statistics
verify        run the oracle cross-check suite, report the max discrepancy

Configuration is a sectioned key=value plain-text file; one experiment per
file.  `[profile NAME]` sections declare leakage profiles
(kind = critically_damped with g = ..., or kind = csv with path = ...);
`[run]` holds the mandatory seed plus optional tolerance and efficiency;
each command reads its own section.  All randomness derives from the single
seed, so identical config and seed give byte-identical outputs.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, TglabError, VerificationError
from .growth import StrategyConfig, run_pipeline
from .leakage import (
    CriticallyDamped,
    LeakageProfile,
    load_profile_csv,
)
from .metrics import compare_strategies, expected_f_sq, fidelity_histogram

QUARTER_PI = math.pi / 4


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    profiles: dict              # name -> LeakageProfile
    sections: dict              # section -> {key: (value, line)}
    seed: int
    tolerance: float
    efficiency: float
    base_dir: Path


def _parse_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError("empty section name", ln)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", ln)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", ln)
        if current is None:
            raise ConfigError("key outside of any section", ln)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", ln)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", ln)
        sections[current][key] = (value, ln)
    return sections


def _take(section: dict, key: str, kind, default=None, required=False, section_name=""):
    if key not in section:
        if required:
            lines = [ln for _, ln in section.values()]
            raise ConfigError(f"[{section_name}] is missing required key {key!r}",
                              min(lines) if lines else None)
        return default
    value, ln = section[key]
    try:
        if kind is bool:
            if value.lower() in ("on", "true", "yes", "1"):
                return True
            if value.lower() in ("off", "false", "no", "0"):
                return False
            raise ValueError(value)
        return kind(value)
    except (ValueError, TypeError):
        raise ConfigError(f"cannot parse {key} = {value!r} as {kind.__name__}", ln) from None


def _build_profile(name: str, section: dict, base_dir: Path) -> LeakageProfile:
    kind = _take(section, "kind", str, required=True, section_name=f"profile {name}")
    if kind == "critically_damped":
        g_value, ln = section.get("g", (None, None))
        if g_value is None:
            raise ConfigError(f"[profile {name}] needs g for a critically damped profile")
        try:
            g = float(g_value)
        except ValueError:
            raise ConfigError(f"cannot parse g = {g_value!r} as float", ln) from None
        if not (g > 0 and math.isfinite(g)):
            raise ConfigError(f"coupling strength must be positive, got g = {g}", ln)
        return CriticallyDamped(g)
    if kind == "csv":
        path_value, ln = section.get("path", (None, None))
        if path_value is None:
            raise ConfigError(f"[profile {name}] needs path for a csv profile")
        path = base_dir / path_value
        if not path.exists():
            raise ConfigError(f"profile file {path} does not exist", ln)
        return load_profile_csv(path)
    _, ln = section["kind"]
    raise ConfigError(f"unknown profile kind {kind!r} (critically_damped or csv)", ln)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; errors carry line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    sections = _parse_sections(text)
    profiles = {}
    for name, content in sections.items():
        if name.startswith("profile "):
            pid = name.split(None, 1)[1]
            profiles[pid] = _build_profile(pid, content, path.parent)
    run = sections.get("run", {})
    if "seed" not in run:
        raise ConfigError("a [run] section with an explicit seed is mandatory "
                          "(determinism contract)")
    seed = _take(run, "seed", int, required=True, section_name="run")
    tolerance = _take(run, "tolerance", float, default=1e-8)
    if not (0.0 < tolerance <= 1e-3):
        raise ConfigError(f"tolerance must lie in (0, 1e-3], got {tolerance}",
                          run["tolerance"][1])
    efficiency = _take(run, "efficiency", float, default=1.0)
    if not (0.0 < efficiency <= 1.0):
        raise ConfigError(f"efficiency must lie in (0, 1], got {efficiency}",
                          run["efficiency"][1])
    return ExperimentConfig(profiles, sections, seed, tolerance, efficiency, path.parent)


def _profile_ref(cfg: ExperimentConfig, section: dict, key: str, section_name: str):
    name = _take(section, key, str, required=True, section_name=section_name)
    if name not in cfg.profiles:
        _, ln = section[key]
        raise ConfigError(f"unknown profile {name!r} (declare [profile {name}])", ln)
    return cfg.profiles[name]


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _render(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def emit_csv(rows, path) -> Path:
    """Write rows (header first) as UTF-8 CSV, LF endings, 17-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(_render(v) for v in row) + "\n")
    return path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_calibrate(cfg: ExperimentConfig, out_dir: Path) -> list:
    section = cfg.sections.get("calibrate", {})
    points = _take(section, "points", int, default=2049)
    if points < 2:
        raise ConfigError("calibrate needs at least 2 points", section["points"][1])
    if not cfg.profiles:
        raise ConfigError("no [profile ...] sections to calibrate")
    artifacts = []
    for name in sorted(cfg.profiles):
        prof = cfg.profiles[name]
        t = np.linspace(0.0, prof.t_max, points)
        rows = [("time", "density")] + [(ti, di) for ti, di in zip(t, prof.density(t))]
        artifacts.append(emit_csv(rows, out_dir / f"calibrate_{name}.csv"))
    return artifacts


def _cmd_efsq_surface(cfg: ExperimentConfig, out_dir: Path) -> list:
    section = cfg.sections.get("efsq-surface", {})
    pa = _profile_ref(cfg, section, "profile_a", "efsq-surface")
    pb = _profile_ref(cfg, section, "profile_b", "efsq-surface")
    grid = _take(section, "grid", int, default=21)
    if grid < 2:
        raise ConfigError("efsq-surface needs grid >= 2", section["grid"][1])
    svals = np.linspace(0.02, 0.98, grid)
    rows = [("sin2_theta_a", "sin2_theta_b", "efsq")]
    for sa in svals:
        ta = math.asin(math.sqrt(sa))
        for sb in svals:
            tb = math.asin(math.sqrt(sb))
            rows.append((sa, sb, expected_f_sq(ta, tb, pa, pb).value))
    return [emit_csv(rows, out_dir / "efsq_surface.csv")]


def _cmd_fidelity_hist(cfg: ExperimentConfig, out_dir: Path) -> list:
    section = cfg.sections.get("fidelity-hist", {})
    pa = _profile_ref(cfg, section, "profile_a", "fidelity-hist")
    pb = _profile_ref(cfg, section, "profile_b", "fidelity-hist")
    bins = _take(section, "bins", int, default=200)
    nodes = _take(section, "nodes", int, default=1500)
    theta_a = _take(section, "theta_a", float, default=QUARTER_PI)
    theta_b = _take(section, "theta_b", float, default=QUARTER_PI)
    hist = fidelity_histogram(theta_a, theta_b, pa, pb, bins=bins, nodes=nodes)
    rows = [("F_bin_lo", "F_bin_hi", "mass")]
    rows += [(lo, hi, m) for lo, hi, m in zip(hist.edges[:-1], hist.edges[1:], hist.masses)]
    return [emit_csv(rows, out_dir / "fidelity_hist.csv")]


def _cmd_compare(cfg: ExperimentConfig, out_dir: Path) -> list:
    section = cfg.sections.get("compare", {})
    pa = _profile_ref(cfg, section, "profile_a", "compare")
    pb = _profile_ref(cfg, section, "profile_b", "compare")
    epsilon = _take(section, "epsilon", float, default=1e-4)
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive", section["epsilon"][1])
    nodes = _take(section, "nodes", int, default=2000)
    modes = _take(section, "modes", str, default="3f2,exact")
    rows = [("mode", "epsilon", "p_postselect", "p_outside_window", "p_total",
             "p_outside_only")]
    for mode in (m.strip() for m in modes.split(",")):
        rep = compare_strategies(pa, pb, epsilon, mode, nodes=nodes)
        rows.append((mode, rep.epsilon, rep.p_postselect, rep.p_outside_window,
                     rep.p_total, rep.p_outside_only))
        print(f"{mode:>6s}: P(post-select) = {rep.p_postselect:.4f}   "
              f"P(out-window) = {rep.p_outside_window:.4f}   "
              f"P(total) = {rep.p_total:.4f}")
    return [emit_csv(rows, out_dir / "compare.csv")]


def _cmd_grow(cfg: ExperimentConfig, out_dir: Path, seed: int) -> list:
    section = cfg.sections.get("grow", {})
    pool_spec = _take(section, "pool", str, required=True, section_name="grow")
    profiles = {}
    for item in pool_spec.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            name, count = item.split(":")
            count = int(count)
        except ValueError:
            raise ConfigError(f"grow pool entries look like NAME:COUNT, got {item!r}",
                              section["pool"][1]) from None
        if name not in cfg.profiles:
            raise ConfigError(f"unknown profile {name!r} in grow pool", section["pool"][1])
        for k in range(count):
            profiles[f"{name}{k:03d}"] = cfg.profiles[name]
    strategy = StrategyConfig(
        profiles=profiles,
        seed=seed,
        target_ghz_size=_take(section, "target_ghz_size", int, default=4),
        fidelity_acceptance=_take(section, "acceptance", float, default=1.0),
        pairing=_take(section, "pairing", str, default="sorted"),
        flip_rule=_take(section, "flip_rule", bool, default=True),
        join_method=_take(section, "join_method", str, default="auto"),
        comparison_mode=_take(section, "comparison_mode", str, default="3f2"),
        detection_efficiency=cfg.efficiency,
        join_nodes=_take(section, "join_nodes", int, default=0),
        join_kind=_take(section, "join_kind", str, default="bridge"),
        recycle_annotations=_take(section, "recycle", bool, default=True),
    )
    pieces, stats, graph = run_pipeline(strategy)
    artifacts = [emit_csv(stats.round_csv_rows(), out_dir / "grow_rounds.csv")]
    summary = [("quantity", "value"),
               ("dh_attempts", stats.dh_attempts),
               ("dh_successes", stats.dh_successes),
               ("qubits_drawn", stats.qubits_drawn),
               ("qubits_consumed", stats.qubits_consumed),
               ("realignments_attempted", stats.realignments_attempted),
               ("realignments_succeeded", stats.realignments_succeeded),
               ("merges", stats.merges),
               ("bridges", stats.bridges),
               ("join_dh_attempts", stats.join_dh_attempts),
               ("final_pieces", len(stats.final_sizes)),
               ("mean_final_fidelity", stats.mean_final_fidelity)]
    artifacts.append(emit_csv(summary, out_dir / "grow_summary.csv"))
    if graph is not None:
        target = out_dir / "grow_graph.txt"
        target.write_text(graph.to_text(), encoding="utf-8")
        artifacts.append(target)
    print(f"grow: {stats.dh_attempts} DH attempts, final pieces "
          f"{stats.final_sizes}, mean fidelity {stats.mean_final_fidelity:.6f}")
    return artifacts


def _cmd_verify(cfg: ExperimentConfig, out_dir: Path, seed: int) -> list:
    from .verify import run_verification

    section = cfg.sections.get("verify", {})
    cases = _take(section, "cases", int, default=60)
    budget = _take(section, "tolerance", float, default=1e-9)
    report = run_verification(seed=seed, cases=cases)
    rows = [("check", "max_discrepancy")]
    rows += [(name, value) for name, value in report.items()]
    artifact = emit_csv(rows, out_dir / "verify.csv")
    worst = max(report.values())
    print(f"verify: max oracle discrepancy {worst:.3e} over {len(report)} checks")
    if worst >= budget:
        raise VerificationError(
            f"max discrepancy {worst:.3e} exceeds the {budget:.1e} budget")
    return [artifact]


COMMANDS = ("calibrate", "efsq-surface", "fidelity-hist", "compare", "grow", "verify")


def run_command(command: str, cfg: ExperimentConfig, out_dir, seed: int | None = None) -> list:
    """Dispatch one subcommand; returns the artifact paths."""
    out_dir = Path(out_dir)
    seed = cfg.seed if seed is None else seed
    if command == "calibrate":
        return _cmd_calibrate(cfg, out_dir)
    if command == "efsq-surface":
        return _cmd_efsq_surface(cfg, out_dir)
    if command == "fidelity-hist":
        return _cmd_fidelity_hist(cfg, out_dir)
    if command == "compare":
        return _cmd_compare(cfg, out_dir)
    if command == "grow":
        return _cmd_grow(cfg, out_dir, seed)
    if command == "verify":
        return _cmd_verify(cfg, out_dir, seed)
    raise ConfigError(f"unknown command {command!r}; pick one of {', '.join(COMMANDS)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tglab",
        description="Graph-state growth under double heralding with mismatched "
                    "photon-leakage rates")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override [run] seed")
    parser.add_argument("--out", default=".", help="output directory (default: cwd)")
    parser.add_argument("--version", action="version", version=f"tglab {__version__}")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        artifacts = run_command(args.command, cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3
    except TglabError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    for artifact in artifacts:
        print(f"wrote {artifact}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
