"""Config-driven pipeline driver.

Usage::

    riskshare COMMAND --config run.ini [--out DIR] [--jobs N] [--seed U64] [--format csv|json]

Configuration is an INI file; see ``PipelineConfig.from_ini`` for the keys.
Exit status: 0 on success, 1 on an estimation failure, 2 on a configuration
error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .biascorr import corrected_table
from .channels import (
    CHANNELS,
    ChannelSpec,
    before_after,
    build_channel_lhs,
    channel_decomposition,
    did_decomposition,
    growth_variance_did,
    parallel_trend_test,
)
from .dgp import DgpConfig, simulate_panel
from .errors import ConfigError, RiskShareError
from .inference import permutation_test, placebo_study
from .panel import PanelDataset, format_value, load_panel, write_panel
from .regress import VcovKind, VcovSpec
from .scm import ScmConfig, build_counterfactual_panel, identity_diagnostic, recombine, weights_json, weights_table

COMMANDS = ("simulate", "match", "decompose", "did", "before-after", "trend-test", "permute", "placebo",
            "bias-correct", "growth-did", "identity-check", "full")


def _list(text: str | None) -> tuple:
    if text is None:
        return ()
    return tuple(t for t in text.replace(",", " ").split() if t)


def _floats(text: str | None) -> tuple | None:
    items = _list(text)
    return tuple(float(x) for x in items) if items else None


def _ints(text: str | None) -> tuple:
    return tuple(int(x) for x in _list(text))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved run settings.

    INI sections and keys (all optional unless a command needs them)::

        [data]       actual, synthetic, format (long_csv | wide_csv)
        [sample]     first_year, last_year, exclude_years, units
        [groups]     treated, donors, exclude_donors, placebo
        [scm]        treatment_year, variables, predictors, window, v_strategy,
                     user_v, matching_mode, aggregation, standardize,
                     fixed_weights, grid_step, n_starts
        [did]        fe_mode, vcov, small_sample, channels, trend_hierarchical
        [inference]  n_perm, seed, channel, exclude
        [bias]       mode (treated_pre | placebo_pre | placebo_full)
        [identity]   rule (e.g. "C + G + I + X - M")
        [simulate]   output and any DgpConfig field
    """

    actual: str | None = None
    synthetic: str | None = None
    data_format: str = "long_csv"
    first_year: int | None = None
    last_year: int | None = None
    exclude_years: tuple = ()
    units: tuple = ()
    treated: tuple = ()
    donors: tuple = ()
    exclude_donors: tuple = ()
    placebo: tuple = ()
    scm: ScmConfig = field(default_factory=ScmConfig)
    fe_mode: str = "pooled"
    vcov: VcovSpec = field(default_factory=VcovSpec)
    channels: ChannelSpec = field(default_factory=ChannelSpec)
    trend_hierarchical: bool = True
    n_perm: int = 200
    seed: int = 0
    perm_channel: str = "unsmoothed"
    perm_exclude: tuple = ()
    bias_mode: str = "treated_pre"
    identity_rule: str | None = None
    simulate: dict = field(default_factory=dict)
    simulate_output: str | None = None
    seed_override: int | None = None
    base_dir: str = "."

    @property
    def treatment_year(self) -> int:
        return self.scm.treatment_year

    @classmethod
    def from_ini(cls, text: str, base_dir: str = ".", seed: int | None = None) -> "PipelineConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        known = {"data", "sample", "groups", "scm", "did", "inference", "bias", "identity", "simulate"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")

        def get(sec, key, default=None):
            return cp.get(sec, key, fallback=default) if cp.has_section(sec) else default

        try:
            sc = dict(cp["scm"]) if cp.has_section("scm") else {}
            window = _ints(sc.get("window"))
            scm = ScmConfig(
                treatment_year=int(sc.get("treatment_year", 1999)),
                variables=_list(sc.get("variables")) or ScmConfig.variables,
                predictors=_list(sc.get("predictors")) or ("target",),
                window=window if window else None,
                v_strategy=sc.get("v_strategy", "nested_mspe"),
                user_v=_floats(sc.get("user_v")),
                matching_mode=sc.get("matching_mode", "levels"),
                aggregation=sc.get("aggregation", "stacked"),
                standardize=_bool(sc.get("standardize", "true")),
                fixed_weights=_bool(sc.get("fixed_weights", "false")),
                grid_step=float(sc.get("grid_step", 1e-3)),
                n_starts=int(sc.get("n_starts", 20)),
                exclude_donors=_list(get("groups", "exclude_donors")),
                donors=_list(get("groups", "donors")) or None,
            )
            channels = _list(get("did", "channels"))
            sim = dict(cp["simulate"]) if cp.has_section("simulate") else {}
            sim_out = sim.pop("output", None)
            inf_seed = int(get("inference", "seed", 0))
            cfg = cls(
                actual=get("data", "actual"),
                synthetic=get("data", "synthetic"),
                data_format=get("data", "format", "long_csv"),
                first_year=int(v) if (v := get("sample", "first_year")) else None,
                last_year=int(v) if (v := get("sample", "last_year")) else None,
                exclude_years=_ints(get("sample", "exclude_years")),
                units=_list(get("sample", "units")),
                treated=_list(get("groups", "treated")),
                donors=_list(get("groups", "donors")),
                exclude_donors=_list(get("groups", "exclude_donors")),
                placebo=_list(get("groups", "placebo")),
                scm=scm,
                fe_mode=get("did", "fe_mode", "pooled"),
                vcov=VcovSpec(VcovKind(get("did", "vcov", "clustered")),
                              _bool(get("did", "small_sample", "true"))),
                channels=ChannelSpec(channels) if channels else ChannelSpec(),
                trend_hierarchical=_bool(get("did", "trend_hierarchical", "true")),
                n_perm=int(get("inference", "n_perm", 200)),
                seed=inf_seed if seed is None else int(seed),
                perm_channel=get("inference", "channel", "unsmoothed"),
                perm_exclude=_list(get("inference", "exclude")),
                bias_mode=get("bias", "mode", "treated_pre"),
                identity_rule=get("identity", "rule"),
                simulate=sim,
                simulate_output=sim_out,
                seed_override=seed,
                base_dir=base_dir,
            )
        except (ValueError, KeyError) as exc:
            if isinstance(exc, RiskShareError):
                raise
            raise ConfigError(f"invalid config value: {exc}") from None
        cfg.check_static()
        return cfg

    def check_static(self) -> None:
        if self.data_format not in ("long_csv", "wide_csv"):
            raise ConfigError(f"data.format must be long_csv or wide_csv, got {self.data_format!r}")
        if self.fe_mode not in ("pooled", "group_specific"):
            raise ConfigError(f"did.fe_mode must be pooled or group_specific, got {self.fe_mode!r}")
        if self.perm_channel not in CHANNELS:
            raise ConfigError(f"inference.channel must be one of {CHANNELS}")
        if self.bias_mode not in ("treated_pre", "placebo_pre", "placebo_full"):
            raise ConfigError(f"bias.mode {self.bias_mode!r} is not a known correction mode")
        overlap = sorted(set(self.treated) & set(self.donors))
        if overlap:
            raise ConfigError(f"units listed as both treated and donors: {overlap}")
        overlap = sorted(set(self.treated) & set(self.placebo))
        if overlap:
            raise ConfigError(f"treated units cannot be placebo units: {overlap}")
        if self.n_perm < 1:
            raise ConfigError("inference.n_perm must be at least 1")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def check_panel(self, panel: PanelDataset) -> None:
        for group, names in (("sample.units", self.units), ("groups.treated", self.treated),
                             ("groups.donors", self.donors), ("groups.placebo", self.placebo),
                             ("groups.exclude_donors", self.exclude_donors)):
            for u in names:
                if u not in panel.units:
                    raise ConfigError(f"{group}: unit {u!r} is not in the panel")
        for y in self.exclude_years:
            if y not in panel.years:
                raise ConfigError(f"sample.exclude_years: year {y} is not in the panel")
        if not panel.years[0] < self.treatment_year <= panel.years[-1]:
            raise ConfigError(f"treatment year {self.treatment_year} outside sample "
                              f"{panel.years[0]}-{panel.years[-1]}")


def config_hash(text: str, seed: int | None) -> str:
    h = hashlib.sha256(text.encode("utf-8"))
    if seed is not None:
        h.update(f"\n#seed-override={seed}".encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------


class Run:
    """Per-invocation state: config, output directory, written files."""

    def __init__(self, cfg: PipelineConfig, out: Path, fmt: str, jobs: int, digest: str, command: str):
        self.cfg, self.out, self.fmt, self.jobs, self.digest, self.command = cfg, out, fmt, jobs, digest, command
        self.outputs: list = []
        self._panel: PanelDataset | None = None

    # output helpers
    def _path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out / name

    def write_csv(self, name: str, rows: list) -> None:
        with self._path(f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config_sha256={self.digest}\n")
            csv.writer(fh, lineterminator="\n").writerows(rows)

    def write_json(self, name: str, obj) -> None:
        body = {"config_sha256": self.digest, "result": obj}
        self._path(f"{name}.json").write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")

    def write_result(self, name: str, result) -> None:
        if self.fmt == "json":
            self.write_json(name, result.to_json())
        else:
            self.write_csv(name, result.to_rows())

    def write_panel(self, name: str, panel: PanelDataset, fmt: str = "long_csv") -> Path:
        path = self._path(name)
        write_panel(panel, path, fmt, comment=f"config_sha256={self.digest}")
        return path

    # inputs
    def panel(self) -> PanelDataset:
        if self._panel is None:
            if not self.cfg.actual:
                raise ConfigError("data.actual is required for this command")
            path = self.cfg.resolve(self.cfg.actual)
            if not path.exists():
                raise ConfigError(f"data.actual: file not found: {path}")
            p = load_panel(path, self.cfg.data_format)
            self.cfg.check_panel(p)
            years = [y for y in p.years
                     if (self.cfg.first_year is None or y >= self.cfg.first_year)
                     and (self.cfg.last_year is None or y <= self.cfg.last_year)]
            p = p.subset(list(self.cfg.units) or None, years)
            self.cfg.check_panel(p)
            self._panel = p
        return self._panel

    def treated(self) -> list:
        if not self.cfg.treated:
            raise ConfigError("groups.treated is required for this command")
        return list(self.cfg.treated)

    def scm_config(self) -> ScmConfig:
        return self.cfg.scm

    def synthetic(self) -> PanelDataset:
        if self.cfg.synthetic:
            path = self.cfg.resolve(self.cfg.synthetic)
        else:
            path = self.out / "synthetic.csv"
        if not path.exists():
            raise ConfigError(f"synthetic panel not found at {path}; run `match` first or set data.synthetic")
        syn = load_panel(path, "long_csv", source="synthetic")
        panel = self.panel()
        years = [y for y in syn.years if y in panel.years]
        units = self.treated()
        missing = [u for u in units if u not in syn.units]
        if missing:
            raise ConfigError(f"synthetic panel lacks treated units {missing}")
        return syn.subset(units, years)

    def actual_treated(self, variables=None) -> PanelDataset:
        syn_years = self.panel().years
        return self.panel().subset(self.treated(), syn_years, variables)


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o)}")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(run: Run) -> None:
    fields = DgpConfig.__dataclass_fields__
    kwargs = {}
    for key, raw in run.cfg.simulate.items():
        if key not in fields:
            raise ConfigError(f"simulate: unknown key {key!r}")
        default = fields[key].default
        if key == "weights":
            kwargs[key] = None if raw.strip() in ("none", "None", "") else (
                "random" if raw.strip() == "random" else _floats(raw))
        elif isinstance(default, tuple):
            kwargs[key] = _floats(raw)
        elif isinstance(default, bool):
            kwargs[key] = _bool(raw)
        elif isinstance(default, int):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    # --seed beats [simulate] seed, which beats [inference] seed
    if run.cfg.seed_override is not None or "seed" not in kwargs:
        kwargs["seed"] = run.cfg.seed
    dcfg = DgpConfig(**kwargs)
    actual, truth = simulate_panel(dcfg)
    name = run.cfg.simulate_output or "simulated.csv"
    run.write_panel(name, actual, run.cfg.data_format)
    run.write_panel("counterfactual.csv", truth.counterfactual)
    run.write_json("truth", truth.to_json())


def cmd_match(run: Run) -> PanelDataset:
    panel = run.panel()
    syn = build_counterfactual_panel(panel, run.scm_config(), run.treated(), jobs=run.jobs)
    run.write_panel("synthetic.csv", syn)
    for v in run.scm_config().variables:
        run.write_csv(f"weights_{v}", weights_table(syn, v))
    run.write_json("weights", weights_json(syn))
    return syn


def cmd_decompose(run: Run) -> None:
    res = channel_decomposition(run.panel(), run.cfg.channels, run.cfg.vcov, run.cfg.exclude_years)
    run.write_result("decomposition", res)


def cmd_did(run: Run) -> None:
    syn = run.synthetic()
    res = did_decomposition(run.actual_treated(syn.variables), syn, run.cfg.treatment_year, run.cfg.vcov,
                            run.cfg.fe_mode, run.cfg.channels, run.cfg.exclude_years)
    run.write_result("did", res)


def cmd_full(run: Run) -> None:
    cmd_match(run)
    cmd_did(run)


def cmd_before_after(run: Run) -> None:
    res = before_after(run.actual_treated(), run.cfg.treatment_year, run.cfg.vcov, run.cfg.channels,
                       run.cfg.exclude_years)
    run.write_result("before_after", res)


def cmd_trend_test(run: Run) -> None:
    syn = run.synthetic()
    res = parallel_trend_test(run.actual_treated(syn.variables), syn, run.cfg.treatment_year, run.cfg.vcov,
                              run.cfg.channels, run.cfg.trend_hierarchical)
    run.write_result("trend_test", res)


def cmd_growth_did(run: Run) -> None:
    syn = run.synthetic()
    res = growth_variance_did(run.actual_treated(syn.variables), syn, run.cfg.treatment_year, run.cfg.vcov)
    run.write_result("growth_did", res)


def cmd_permute(run: Run) -> None:
    cfg = run.cfg
    res = permutation_test(run.panel(), None, cfg.n_perm, cfg.treatment_year, cfg.seed, cfg.perm_channel,
                           treated=run.treated(), scm_config=run.scm_config(), exclude=cfg.perm_exclude,
                           fe_mode=cfg.fe_mode, jobs=run.jobs)
    run.write_csv("permutation_r", res.to_rows())
    run.write_json("permutation", res.to_json())


def _placebo(run: Run):
    cfg = run.cfg
    if not cfg.placebo:
        raise ConfigError("groups.placebo must list the never-treated units to use as placebos")
    panel = run.panel()
    pool_units = list(cfg.donors) or [u for u in panel.units if u not in set(cfg.treated)]
    missing = [u for u in cfg.placebo if u not in pool_units]
    if missing:
        raise ConfigError(f"groups.placebo units {missing} are not in the never-treated pool")
    pool = panel.subset(pool_units)
    scm = replace(run.scm_config(), donors=None)
    return placebo_study(pool, cfg.placebo, cfg.treatment_year, cfg.vcov, scm, cfg.channels, cfg.fe_mode,
                         jobs=run.jobs)


def cmd_placebo(run: Run) -> None:
    run.write_result("placebo", _placebo(run))


def cmd_bias_correct(run: Run) -> None:
    syn = run.synthetic()
    did = did_decomposition(run.actual_treated(syn.variables), syn, run.cfg.treatment_year, run.cfg.vcov,
                            run.cfg.fe_mode, run.cfg.channels, run.cfg.exclude_years)
    aux = _placebo(run).did if run.cfg.bias_mode != "treated_pre" else None
    res = corrected_table(did, run.cfg.bias_mode, aux)
    if run.fmt == "json":
        run.write_json("bias_correct", res.to_json())
    else:
        run.write_csv("bias_correct", res.to_rows())


def cmd_identity_check(run: Run) -> None:
    panel = run.panel()
    data = build_channel_lhs(panel)
    telescoping = float(np.max(np.abs(sum(data.lhs[c] for c in CHANNELS) - data.dlog_gdp)))
    dec = channel_decomposition(panel, ChannelSpec(), run.cfg.vcov, run.cfg.exclude_years)
    report = {"lhs_telescoping_max_error": telescoping, "decomposition_sum": dec.total,
              "decomposition_sum_error": abs(dec.total - 1.0)}
    syn_path = run.cfg.resolve(run.cfg.synthetic) if run.cfg.synthetic else run.out / "synthetic.csv"
    if syn_path.exists() and run.cfg.treated:
        syn = run.synthetic()
        did = did_decomposition(run.actual_treated(syn.variables), syn, run.cfg.treatment_year, run.cfg.vcov,
                                run.cfg.fe_mode, ChannelSpec(), run.cfg.exclude_years)
        sums = did.column_sums()
        report["did_column_sums"] = {f"beta{k + 1}": float(s) for k, s in enumerate(sums)}
        if run.cfg.identity_rule:
            mean, sd = identity_diagnostic(syn["GDP"], recombine(syn, run.cfg.identity_rule))
            report["gdp_identity_percent"] = {"mean": mean, "sd": sd, "rule": run.cfg.identity_rule}
    if run.fmt == "json":
        run.write_json("identity_check", report)
    else:
        rows = [["check", "value"]]
        for k, v in report.items():
            if isinstance(v, dict):
                rows.extend([[f"{k}.{kk}", vv if isinstance(vv, str) else format_value(vv)] for kk, vv in v.items()])
            else:
                rows.append([k, format_value(v)])
        run.write_csv("identity_check", rows)


HANDLERS: dict = {
    "simulate": cmd_simulate, "match": cmd_match, "decompose": cmd_decompose, "did": cmd_did,
    "before-after": cmd_before_after, "trend-test": cmd_trend_test, "permute": cmd_permute,
    "placebo": cmd_placebo, "bias-correct": cmd_bias_correct, "growth-did": cmd_growth_did,
    "identity-check": cmd_identity_check, "full": cmd_full,
}


def write_manifest(run: Run) -> None:
    manifest = {
        "command": run.command,
        "config_sha256": run.digest,
        "seed": run.cfg.seed,
        "outputs": sorted(set(run.outputs)),
        "versions": {"riskshare": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / f"manifest_{run.command}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_pipeline(config_text: str, command: str, out: str | Path, jobs: int = 1, seed: int | None = None,
                 fmt: str = "csv", base_dir: str = ".") -> int:
    """Run ``command``; returns the process exit status."""
    try:
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {fmt!r}")
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = PipelineConfig.from_ini(config_text, base_dir, seed)
        run = Run(cfg, Path(out), fmt, jobs, config_hash(config_text, seed), command)
        HANDLERS[command](run)
        write_manifest(run)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RiskShareError as exc:
        print(f"estimation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskshare", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for SCM fits and permutations")
    ap.add_argument("--seed", type=int, default=None, help="master seed; overrides the config")
    ap.add_argument("--format", choices=("csv", "json"), default="csv", help="table output format")
    return ap


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    path = Path(args.config)
    if not path.exists():
        print(f"config error: config file not found: {path}", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("config error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return run_pipeline(path.read_text(encoding="utf-8"), args.command, args.out, args.jobs, args.seed,
                        args.format, str(path.parent))


if __name__ == "__main__":
    sys.exit(main())
