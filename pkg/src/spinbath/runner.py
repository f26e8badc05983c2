"""Experiment orchestration: config files, trajectories, CSV output.

A run is described by a flat TOML file with four sections::

    [system]                          [environment]
    topology = "ring"                 topology = "spin_glass"
    family = "Heisenberg"             family = "HeisenbergType"
    J = -1.0                          Omega = 1.0
    n_s = 4                           n = 14
    initial_state = "UD"              initial_state = "RANDOM"

    [interaction]                     [run]
    family = "HeisenbergType"         n_steps = 300
    Delta = 0.3                       seed = 1
                                      metrics = ["sigma", "delta", "b"]

Unknown keys are rejected (they are usually typos in physics parameters).
Each step writes one CSV row ``t,sigma,gamma,delta,b,S_quad,echo,E_S,
rho_0..rho_{d-1}`` plus any requested extra columns; absent metrics stay
empty. Floats are printed with 17 significant digits so equal trajectories
produce byte-identical files. Every 100 steps the full state vector is
checkpointed; an interrupted run resumes bit-exactly from the last
checkpoint.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import observables
from .errors import BudgetError, ConfigError, NumericalError, SpectralBoundsError
from .hilbert import CompiledHamiltonian, dense_hamiltonian, partial_trace_env
from .ldos import LdosSpectrum, compute_ldos
from .fitting import ExpFit, FitError, fit_exponential, fit_gaussian, fit_offdiag_exponential
from .model import (
    CouplingFamily,
    Family,
    HamiltonianSpec,
    RngStreams,
    TopologyKind,
    assemble,
    build_topology,
)
from .observables import EigenBasis, MetricSample, compute_metrics, eigendecompose_system
from .propagate import (
    ChebyshevPropagator,
    PropagatorPlan,
    SpectralBounds,
    propagate_exact,
    spectral_bounds,
    tighten_bounds,
)
from .states import StateLabel, make_state, product_state

DEFAULT_TAU = math.pi / 10.0
DEFAULT_METRICS = ("sigma", "gamma", "delta", "b", "S_quad", "E_S", "rho_diag")
CHECKPOINT_MAGIC = b"SPINBATH-CKPT-1\n"
CSV_FLOAT = "%.17g"
VALIDATE_TOL = 1e-9


@dataclass(frozen=True)
class RegisterConfig:
    topology: TopologyKind
    family: Family
    scale: float
    n: int
    initial_state: StateLabel
    epsilon: float | None = None


@dataclass(frozen=True)
class InteractionConfig:
    family: Family
    scale: float


@dataclass(frozen=True)
class RunSettings:
    n_steps: int
    seed: int
    tau: float = DEFAULT_TAU
    metrics: tuple[str, ...] = DEFAULT_METRICS
    out: str | None = None
    ldos: bool = False
    fit: bool = False
    beta_floor: float = 1e-12
    degeneracy_tol: float = 1e-9
    truncation_tol: float = 1e-14
    max_spins: int = 24
    tight_bounds: bool = True
    checkpoint_every: int = 100
    ldos_resolution: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    system: RegisterConfig
    environment: RegisterConfig
    interaction: InteractionConfig
    run: RunSettings

    def __post_init__(self):
        sy, en, rn = self.system, self.environment, self.run
        if sy.n < 1 or en.n < 1:
            raise ConfigError(f"both registers need at least one spin ({sy.n}, {en.n})")
        if sy.n + en.n > rn.max_spins:
            raise ConfigError(
                f"{sy.n}+{en.n} spins exceed the memory ceiling of {rn.max_spins}"
            )
        if rn.tau <= 0:
            raise ConfigError(f"tau must be positive, got {rn.tau}")
        if rn.n_steps < 0:
            raise ConfigError(f"n_steps must be >= 0, got {rn.n_steps}")
        if not 0 <= rn.seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {rn.seed}")
        if rn.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if rn.truncation_tol <= 0 or rn.beta_floor <= 0 or rn.degeneracy_tol <= 0:
            raise ConfigError("tolerances must be positive")
        unknown = set(rn.metrics) - set(observables.ALL_METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        if sy.n != 2 and set(rn.metrics) & set(observables.TWO_SPIN_METRICS):
            raise ConfigError("C/re_rho23/abs_rho23 metrics need a two-spin system")
        if sy.n < 2 and set(rn.metrics) & set(observables.PAIR_METRICS):
            raise ConfigError("pair correlators need at least two system spins")

    def to_dict(self) -> dict:
        def reg(r):
            d = {
                "topology": r.topology.value,
                "family": r.family.value,
                "scale": r.scale,
                "n": r.n,
                "initial_state": r.initial_state.value,
            }
            if r.epsilon is not None:
                d["epsilon"] = r.epsilon
            return d

        rn = {f.name: getattr(self.run, f.name) for f in fields(RunSettings)}
        rn["metrics"] = list(self.run.metrics)
        return {
            "system": reg(self.system),
            "environment": reg(self.environment),
            "interaction": {"family": self.interaction.family.value, "scale": self.interaction.scale},
            "run": rn,
        }

    def digest(self) -> bytes:
        """Hash of everything that affects the trajectory (not the out path)."""
        d = self.to_dict()
        d["run"].pop("out", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).digest()


_SCHEMA = {
    "system": {
        "topology": str, "family": str, "J": (int, float), "n_s": int,
        "initial_state": str, "epsilon": (int, float),
    },
    "environment": {
        "topology": str, "family": str, "Omega": (int, float), "n": int,
        "initial_state": str, "epsilon": (int, float),
    },
    "interaction": {"family": str, "Delta": (int, float)},
    "run": {
        "n_steps": int, "seed": int, "tau": (int, float), "metrics": list,
        "out": str, "ldos": bool, "fit": bool, "beta_floor": (int, float),
        "degeneracy_tol": (int, float), "truncation_tol": (int, float),
        "max_spins": int, "tight_bounds": bool, "checkpoint_every": int,
        "ldos_resolution": (int, float),
    },
}
_REQUIRED = {
    "system": ("topology", "family", "J", "n_s", "initial_state"),
    "environment": ("topology", "family", "Omega", "n", "initial_state"),
    "interaction": ("family", "Delta"),
    "run": ("n_steps", "seed"),
}


def _key_line(path: Path | None, key: str) -> str:
    if path is None:
        return ""
    try:
        for ln, line in enumerate(path.read_text().splitlines(), 1):
            if line.split("=")[0].strip() == key or line.strip() == f"[{key}]":
                return f" ({path}:{ln})"
    except OSError:
        pass
    return ""


def config_from_mapping(data: dict, origin: Path | None = None) -> RunConfig:
    """Validate a parsed config mapping; reject unknown sections and keys."""
    for section in data:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]{_key_line(origin, section)}")
    for section, keys in _SCHEMA.items():
        if section not in data:
            raise ConfigError(f"missing config section [{section}]")
        got = data[section]
        if not isinstance(got, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key, val in got.items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]{_key_line(origin, key)}")
            if not isinstance(val, keys[key]) or isinstance(val, bool) != (keys[key] is bool):
                raise ConfigError(
                    f"key {key!r} in [{section}] must be {keys[key]}, got {val!r}"
                    f"{_key_line(origin, key)}"
                )
        for key in _REQUIRED[section]:
            if key not in got:
                raise ConfigError(f"missing required key {key!r} in [{section}]")

    def enum(cls, raw, what):
        try:
            return cls(raw)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ConfigError(f"bad {what} {raw!r}; valid: {valid}{_key_line(origin, what)}") from None

    sy, en, it, rn = data["system"], data["environment"], data["interaction"], data["run"]
    system = RegisterConfig(
        topology=enum(TopologyKind, sy["topology"], "topology"),
        family=enum(Family, sy["family"], "family"),
        scale=float(sy["J"]),
        n=sy["n_s"],
        initial_state=enum(StateLabel, sy["initial_state"], "initial_state"),
        epsilon=float(sy["epsilon"]) if "epsilon" in sy else None,
    )
    environment = RegisterConfig(
        topology=enum(TopologyKind, en["topology"], "topology"),
        family=enum(Family, en["family"], "family"),
        scale=float(en["Omega"]),
        n=en["n"],
        initial_state=enum(StateLabel, en["initial_state"], "initial_state"),
        epsilon=float(en["epsilon"]) if "epsilon" in en else None,
    )
    interaction = InteractionConfig(
        family=enum(Family, it["family"], "family"), scale=float(it["Delta"])
    )
    settings = {k: v for k, v in rn.items()}
    if "metrics" in settings:
        bad = [m for m in settings["metrics"] if not isinstance(m, str)]
        if bad:
            raise ConfigError(f"metrics must be strings, got {bad}")
        settings["metrics"] = tuple(settings["metrics"])
    for key in ("tau", "beta_floor", "degeneracy_tol", "truncation_tol", "ldos_resolution"):
        if key in settings:
            settings[key] = float(settings[key])
    return RunConfig(system, environment, interaction, RunSettings(**settings))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data, origin=path)


def build_spec(config: RunConfig) -> HamiltonianSpec:
    rng = RngStreams(config.run.seed)
    sy, en = config.system, config.environment
    return assemble(
        (build_topology(sy.topology, sy.n), CouplingFamily(sy.family, sy.scale)),
        (build_topology(en.topology, en.n), CouplingFamily(en.family, en.scale)),
        CouplingFamily(config.interaction.family, config.interaction.scale),
        rng,
    )


def initial_state(config: RunConfig, spec: HamiltonianSpec) -> np.ndarray:
    rng = RngStreams(config.run.seed)
    sy, en = config.system, config.environment
    sys_state = make_state(
        sy.initial_state, sy.n, spec.system_part(), rng.generator("state-sys"), sy.epsilon
    )
    env_state = make_state(
        en.initial_state, en.n, spec.environment_part(), rng.generator("state-env"), en.epsilon
    )
    return product_state(sys_state, env_state)


@dataclass
class RunResult:
    config: RunConfig
    spec: HamiltonianSpec
    basis: EigenBasis
    samples: list[MetricSample]
    out_dir: Path | None = None
    csv_path: Path | None = None
    fit_report: dict | None = None
    ldos: LdosSpectrum | None = None

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(t, values) for one metric column, skipping missing entries."""
        ts, vals = [], []
        for s in self.samples:
            v = getattr(s, name, None)
            if v is None:
                v = s.extras.get(name)
            if v is not None:
                ts.append(s.t)
                vals.append(v)
        return np.asarray(ts), np.asarray(vals)

    def rho_diag_matrix(self) -> np.ndarray:
        return np.asarray([s.rho_diag for s in self.samples])


def _csv_header(dim: int, extras: tuple[str, ...]) -> str:
    cols = ["t", "sigma", "gamma", "delta", "b", "S_quad", "echo", "E_S"]
    cols += [f"rho_{k}" for k in range(dim)]
    cols += list(extras)
    return ",".join(cols)


def _fmt(value: float | None) -> str:
    return "" if value is None else CSV_FLOAT % value


def _csv_row(sample: MetricSample, dim: int, extras: tuple[str, ...]) -> str:
    vals = [
        _fmt(sample.t),
        _fmt(sample.sigma),
        _fmt(sample.gamma),
        _fmt(sample.delta),
        _fmt(sample.b),
        _fmt(sample.S_quad),
        _fmt(sample.echo),
        _fmt(sample.E_S),
    ]
    if sample.rho_diag is None:
        vals += [""] * dim
    else:
        vals += [_fmt(v) for v in sample.rho_diag]
    vals += [_fmt(sample.extras.get(name)) for name in extras]
    return ",".join(vals)


def _parse_rows(header: str, lines: list[str]) -> list[MetricSample]:
    cols = header.strip().split(",")
    rho_cols = [c for c in cols if c.startswith("rho_")]
    extra_cols = cols[8 + len(rho_cols):]
    out = []
    for line in lines:
        raw = line.rstrip("\n").split(",")
        vals = {c: (float(x) if x else None) for c, x in zip(cols, raw)}
        rho = [vals[c] for c in rho_cols]
        out.append(
            MetricSample(
                t=vals["t"],
                sigma=vals["sigma"],
                gamma=vals["gamma"],
                delta=vals["delta"],
                b=vals["b"],
                S_quad=vals["S_quad"],
                echo=vals["echo"],
                E_S=vals["E_S"],
                rho_diag=None if any(v is None for v in rho) else tuple(rho),
                extras={c: vals[c] for c in extra_cols if vals[c] is not None},
            )
        )
    return out


class _Checkpoint:
    def __init__(self, path: Path, digest: bytes):
        self.path = path
        self.digest = digest

    def save(self, step: int, psi: np.ndarray, psi_ref: np.ndarray | None) -> None:
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(self.digest)
            fh.write(struct.pack("<IQB", psi.size.bit_length() - 1, step, psi_ref is not None))
            fh.write(np.ascontiguousarray(psi, dtype=np.complex128).tobytes())
            if psi_ref is not None:
                fh.write(np.ascontiguousarray(psi_ref, dtype=np.complex128).tobytes())
        os.replace(tmp, self.path)

    def load(self, n_total: int, want_ref: bool):
        with open(self.path, "rb") as fh:
            if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
                raise ConfigError(f"{self.path}: not a checkpoint file")
            if fh.read(32) != self.digest:
                raise ConfigError(f"{self.path}: checkpoint belongs to a different configuration")
            n, step, has_ref = struct.unpack("<IQB", fh.read(13))
            if n != n_total:
                raise ConfigError(f"{self.path}: checkpoint is for {n} spins, expected {n_total}")
            if want_ref and not has_ref:
                raise ConfigError(f"{self.path}: checkpoint lacks the echo reference state")
            dim = 1 << n
            psi = np.frombuffer(fh.read(dim * 16), dtype=np.complex128).copy()
            psi_ref = (
                np.frombuffer(fh.read(dim * 16), dtype=np.complex128).copy() if has_ref else None
            )
        return int(step), psi, psi_ref


def default_fit_windows(result: RunResult) -> dict[str, tuple[float, float]]:
    """Sigma/delta fits start at t=0; b and E_S fits skip the coherent transient."""
    t_sig, sig = result.series("sigma")
    t_end = result.samples[-1].t
    start = 0.0
    if len(sig) and sig[0] > 0:
        below = t_sig[sig < 0.5 * sig[0]]
        if len(below):
            start = float(below[0])
    return {
        "sigma": (0.0, t_end),
        "delta": (0.0, t_end),
        "b": (start, t_end),
        "E_S": (start, t_end),
        "abs_rho23": (0.0, t_end),
    }


def _fit_report(result: RunResult) -> dict:
    windows = default_fit_windows(result)
    report: dict[str, dict] = {}

    def record(name, model, fit_fn):
        t, y = result.series(name)
        if len(t) == 0:
            return
        try:
            fit = fit_fn(t, y, windows[name])
        except FitError as exc:
            report[f"{name}:{model}"] = {"error": str(exc)}
            return
        entry = {
            "rms_residual": fit.rms_residual,
            "window": list(fit.window),
            "iterations": fit.iterations,
        }
        if isinstance(fit, ExpFit):
            entry.update(offset=fit.offset, amplitude=fit.amplitude, tau_decay=fit.tau_decay)
        else:
            entry.update(rate=fit.rate)
        report[f"{name}:{model}"] = entry

    record("sigma", "exponential", fit_exponential)
    record("sigma", "gaussian", fit_gaussian)
    record("delta", "exponential", fit_exponential)
    record("b", "exponential", fit_exponential)
    record("E_S", "exponential", fit_exponential)
    if any("abs_rho23" in s.extras for s in result.samples):
        record("abs_rho23", "half-decay", fit_offdiag_exponential)
    return report


def _fit_report_text(report: dict) -> str:
    lines = []
    for key in sorted(report):
        entry = report[key]
        parts = [f"series={key.split(':')[0]}", f"model={key.split(':')[1]}"]
        for k, v in entry.items():
            if k == "window":
                parts.append(f"window={v[0]:.6g}..{v[1]:.6g}")
            elif isinstance(v, float):
                parts.append(f"{k}={v:.10g}")
            else:
                parts.append(f"{k}={v}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def run(config: RunConfig, resume: bool = False) -> RunResult:
    """Propagate one trajectory and emit per-step diagnostics.

    With an output directory set this writes metrics.csv, hamiltonian.json,
    run_meta.json, periodic checkpoints, and optionally reference.csv
    (echo), ldos.csv and fits.txt. Identical configs and seeds produce
    byte-identical CSV files.
    """
    rn = config.run
    want = set(rn.metrics)
    extras_order = tuple(m for m in observables.EXTRA_METRICS if m in want)
    need_echo = observables.ECHO_METRIC in want

    spec = build_spec(config)
    basis = eigendecompose_system(spec, rn.degeneracy_tol)
    op = CompiledHamiltonian(spec)
    plan = PropagatorPlan.build(
        op, rn.tau, truncation_tol=rn.truncation_tol, tighten=rn.tight_bounds
    )
    prop = ChebyshevPropagator(op, plan)
    psi = initial_state(config, spec)

    op_ref = prop_ref = psi_ref = None
    if need_echo:
        op_ref = CompiledHamiltonian(spec.without_interaction())
        plan_ref = PropagatorPlan.build(
            op_ref, rn.tau, truncation_tol=rn.truncation_tol, tighten=rn.tight_bounds
        )
        prop_ref = ChebyshevPropagator(op_ref, plan_ref)
        psi_ref = psi.copy()

    out_dir = Path(rn.out) if rn.out else None
    csv_path = ref_path = None
    header = _csv_header(basis.dim, extras_order)
    start_step = 0
    samples: list[MetricSample] = []

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "metrics.csv"
        ref_path = out_dir / "reference.csv" if need_echo else None
        (out_dir / "hamiltonian.json").write_text(spec.dumps())
        meta = {"config": config.to_dict(), "digest": config.digest().hex()}
        (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
        ckpt = _Checkpoint(out_dir / "checkpoint.bin", config.digest())
        if resume:
            if not ckpt.path.exists():
                raise ConfigError(f"no checkpoint to resume from in {out_dir}")
            start_step, psi, loaded_ref = ckpt.load(spec.n_total, need_echo)
            if need_echo:
                psi_ref = loaded_ref
            lines = csv_path.read_text().splitlines()
            if not lines or lines[0] != header:
                raise ConfigError(f"{csv_path} does not match this configuration")
            kept = lines[1 : start_step + 2]
            if len(kept) != start_step + 1:
                raise ConfigError(
                    f"{csv_path} has only {len(kept)} rows, checkpoint is at step {start_step}"
                )
            samples = _parse_rows(lines[0], kept)
            csv_path.write_text("\n".join([header] + kept) + "\n")
            if ref_path is not None and ref_path.exists():
                ref_lines = ref_path.read_text().splitlines()
                ref_path.write_text("\n".join([header] + ref_lines[1 : start_step + 2]) + "\n")
    else:
        ckpt = None
        if resume:
            raise ConfigError("resume needs an output directory")

    mode = "a" if (resume and out_dir is not None) else "w"
    csv_fh = open(csv_path, mode, newline="") if csv_path else None
    ref_fh = open(ref_path, mode, newline="") if ref_path else None
    try:
        if csv_fh and mode == "w":
            csv_fh.write(header + "\n")
        if ref_fh and mode == "w":
            ref_fh.write(header + "\n")
        ref_want = want - {observables.ECHO_METRIC}
        for step in range(start_step, rn.n_steps + 1):
            if step > start_step or not resume:
                t = step * rn.tau
                rho = partial_trace_env(psi, config.system.n)
                rho_ref = partial_trace_env(psi_ref, config.system.n) if need_echo else None
                sample = compute_metrics(t, rho, basis, want, rn.beta_floor, rho_ref)
                samples.append(sample)
                if csv_fh:
                    csv_fh.write(_csv_row(sample, basis.dim, extras_order) + "\n")
                if ref_fh:
                    ref_sample = compute_metrics(t, rho_ref, basis, ref_want, rn.beta_floor)
                    ref_fh.write(_csv_row(ref_sample, basis.dim, extras_order) + "\n")
                if ckpt and step > 0 and step % rn.checkpoint_every == 0:
                    csv_fh.flush()
                    ckpt.save(step, psi, psi_ref)
            if step < rn.n_steps:
                psi = prop.step(psi)
                if need_echo:
                    psi_ref = prop_ref.step(psi_ref)
    finally:
        if csv_fh:
            csv_fh.close()
        if ref_fh:
            ref_fh.close()

    result = RunResult(
        config=config, spec=spec, basis=basis, samples=samples, out_dir=out_dir, csv_path=csv_path
    )
    if rn.ldos:
        bounds = tighten_bounds(op) if rn.tight_bounds else spectral_bounds(op)
        result.ldos = compute_ldos(op, initial_state(config, spec), bounds, rn.ldos_resolution)
        if out_dir is not None:
            result.ldos.save_csv(out_dir / "ldos.csv")
    if rn.fit:
        result.fit_report = _fit_report(result)
        if out_dir is not None:
            (out_dir / "fits.txt").write_text(_fit_report_text(result.fit_report))
    return result


def spectrum_table(config: RunConfig) -> list[tuple[int, float, int]]:
    """(index, energy, cluster id) rows for the system Hamiltonian."""
    spec = build_spec(config)
    basis = eigendecompose_system(spec, config.run.degeneracy_tol)
    ids = basis.cluster_ids
    return [(k, float(basis.energies[k]), int(ids[k])) for k in range(basis.dim)]


def _partial_trace_bruteforce(psi: np.ndarray, n_system: int) -> np.ndarray:
    """Index-summation oracle for the reduced density matrix (slow, exact)."""
    n_total = psi.size.bit_length() - 1
    ds, de = 1 << n_system, 1 << (n_total - n_system)
    rho = np.zeros((ds, ds), dtype=complex)
    for a in range(ds):
        for b in range(ds):
            acc = 0.0 + 0.0j
            for p in range(de):
                acc += psi[(p << n_system) | a] * np.conj(psi[(p << n_system) | b])
            rho[a, b] = acc
    return rho


@dataclass
class ValidationReport:
    propagator_deviation: float
    partial_trace_deviation: float
    matvec_deviation: float
    commutator_norm: float
    bound_failure: bool = False

    @property
    def max_deviation(self) -> float:
        return max(self.propagator_deviation, self.partial_trace_deviation, self.matvec_deviation)

    @property
    def passed(self) -> bool:
        return not self.bound_failure and self.max_deviation <= VALIDATE_TOL

    def lines(self) -> list[str]:
        out = [
            f"chebyshev vs exact propagator: {self.propagator_deviation:.3e}",
            f"partial trace vs index-sum oracle: {self.partial_trace_deviation:.3e}",
            f"matrix-free matvec vs dense: {self.matvec_deviation:.3e}",
            f"commutator norm |[H_S, H_SE]|: {self.commutator_norm:.3e}",
        ]
        if self.bound_failure:
            out.append("spectral-bounds failure detected")
        out.append(f"result: {'PASS' if self.passed else 'FAIL'} (tolerance {VALIDATE_TOL:g})")
        return out


def validate(config: RunConfig, bounds_override: SpectralBounds | None = None) -> ValidationReport:
    """Cross-check the fast kernels against dense oracles (<= 12 spins)."""
    spec = build_spec(config)
    if spec.n_total > 12:
        raise BudgetError(f"validate needs n_total <= 12, got {spec.n_total}")
    op = CompiledHamiltonian(spec)
    psi0 = initial_state(config, spec)

    h_dense = dense_hamiltonian(spec)
    dev_matvec = float(np.linalg.norm(op.apply(psi0) - h_dense @ psi0))

    tau = config.run.tau
    bound_failure = False
    psi_c = psi0.copy()
    try:
        plan = PropagatorPlan.build(
            op, tau, bounds=bounds_override, truncation_tol=config.run.truncation_tol,
            tighten=config.run.tight_bounds,
        )
        prop = ChebyshevPropagator(op, plan)
        for _ in range(10):
            psi_c = prop.step(psi_c)
        dev_prop = float(np.linalg.norm(psi_c - propagate_exact(op, psi0, 10 * tau)))
    except SpectralBoundsError:
        bound_failure = True
        dev_prop = float("inf")

    psi_probe = psi_c if np.all(np.isfinite(psi_c)) else psi0
    nrm = np.linalg.norm(psi_probe)
    psi_probe = psi_probe / nrm if nrm > 0 else psi0
    rho_fast = partial_trace_env(psi_probe, config.system.n)
    rho_slow = _partial_trace_bruteforce(psi_probe, config.system.n)
    dev_pt = float(np.abs(rho_fast - rho_slow).max())

    hs = dense_hamiltonian(HamiltonianSpec(spec.n_system, spec.n_env, sys_terms=spec.sys_terms))
    hse = dense_hamiltonian(HamiltonianSpec(spec.n_system, spec.n_env, int_terms=spec.int_terms))
    comm = float(np.linalg.norm(hs @ hse - hse @ hs))

    return ValidationReport(
        propagator_deviation=dev_prop,
        partial_trace_deviation=dev_pt,
        matvec_deviation=dev_matvec,
        commutator_norm=comm,
        bound_failure=bound_failure,
    )
