"""Experiment drivers: registers, targets, seeding, and CSV artifacts.

Every driver takes a resolved ScenarioConfig and returns rows ready for
``write_csv``.  Determinism rules: each (density, bath) task derives its
own generator from the master seed via a spawn key, so results never
depend on scheduling; rows are emitted in sorted task order; floats are
serialized with 12 significant digits; wall-clock time is kept out of the
files (it lives on the in-memory records only).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import __version__
from .bath import (BathRealization, ShellSpec, realization_from_positions,
                   sample_bath_realization, spin_count)
from .config import ScenarioConfig
from .evolution import (OptimizeResult, PulseSequence, TABLE_PRESETS,
                        evolve_trajectory, optimize_sequence,
                        sequence_to_table_text)
from .exact import benchmark_error, exact_evolve
from .gcce import ClusterSet, GcceConfig, gcce0, gcce1, gcce2, select_pairs
from .hamiltonian import register_hamiltonian
from .metrics import (bath_fidelity, expectation, log_negativity,
                      process_fidelity, trace_drift)
from .spinmodel import RegisterSpec, default_register, two_qubit_register

#: spawn-key namespaces for per-task generators
_KEY_POSITIONS = 0
_KEY_BATH_STATES = 1
_KEY_OPTIMIZER = 2

#: close-pair construction: resample until the pair both flip-flops fast
#: enough and couples asymmetrically enough to the register for its
#: dynamics to be visible at the benchmark times
_PAIR_MIN_DELTA_KZZ_KHZ = 0.6
_PAIR_MIN_FLIPFLOP_KHZ = 8.0


def task_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for one task, independent of execution order."""
    ss = np.random.SeedSequence(int(master_seed),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def build_register(kind: str) -> RegisterSpec:
    if kind == "two-qubit":
        return two_qubit_register()
    if kind == "full":
        return default_register()
    raise ValueError(f"unknown register kind {kind!r}")


def register_for_target(target: str) -> str:
    return "two-qubit" if target == "bell2" else "full"


def initial_state(register: RegisterSpec) -> np.ndarray:
    """Register initialized in its first basis state (all spins 'up')."""
    rho = np.zeros((register.dim, register.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def target_state(name: str, register: RegisterSpec) -> np.ndarray:
    """Pure target projector for one of the named processes."""
    d = register.dim
    if name == "bell2":
        if d != 4:
            raise ValueError("bell2 target lives on the two-qubit register")
        partner = 3
    elif name == "ghz":
        if d != 24:
            raise ValueError("ghz target lives on the full register")
        partner = 21  # NV and both carbons flipped, nitrogen spectator
    elif name == "bell13c":
        if d != 24:
            raise ValueError("bell13c target lives on the full register")
        partner = 9   # both carbons flipped, NV back in m_s = 0
    else:
        raise ValueError(f"unknown target {name!r}")
    vec = np.zeros(d, dtype=complex)
    vec[0] = vec[partner] = 1.0 / math.sqrt(2.0)
    return np.outer(vec, vec.conj())


def resolve_sequence(cfg: ScenarioConfig, register: RegisterSpec,
                     h: np.ndarray) -> tuple[PulseSequence, OptimizeResult | None]:
    """Preset lookup or optimizer run, per the [pulses] section."""
    if cfg.pulse_mode == "preset":
        return TABLE_PRESETS[cfg.target], None
    rho0 = initial_state(register)
    rho_t = target_state(cfg.target, register)
    res = optimize_sequence(h, rho0, rho_t, cfg.segments,
                            task_rng(cfg.seed, _KEY_OPTIMIZER, 0, 0),
                            budget=cfg.budget,
                            target_fidelity=cfg.fidelity_threshold,
                            duration_cap_us=cfg.duration_cap_us,
                            duration_target_us=cfg.duration_target_us)
    return res.sequence, res


def gcce_config(cfg: ScenarioConfig) -> GcceConfig:
    return GcceConfig(order=cfg.order, n_samples=cfg.n_samples,
                      pair_select_d1_nm=cfg.pair_d1_nm,
                      pair_select_d2_nm=cfg.pair_d2_nm,
                      ratio_floor=cfg.ratio_floor,
                      enumerate_exact_below=cfg.enumerate_exact_below)


def bath_for_task(cfg: ScenarioConfig, register: RegisterSpec,
                  density_ppb: float, rng: np.random.Generator) -> BathRealization:
    if cfg.bath_kind == "close-pair":
        return build_close_pair_realization(register, rng, cfg.n_spectators)
    shell = ShellSpec(cfg.r_min_nm, cfg.r_max_nm, density_ppb)
    count = cfg.spin_count_override
    if count is None:
        count = spin_count(shell, register.constants)
    return sample_bath_realization(shell, register, rng, count=count)


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def build_close_pair_realization(register: RegisterSpec,
                                 rng: np.random.Generator,
                                 n_spectators: int = 4) -> BathRealization:
    """One strongly interacting impurity pair plus distant spectators.

    The pair sits 26-33 nm from the register with 8-14 nm separation and is
    redrawn until its mutual flip-flop coupling and the difference of its
    members' zz couplings to the NV both clear minimum strengths; otherwise
    the pair dynamics would be invisible on the benchmark timescale and the
    order-2 correction would have nothing to correct.
    """
    for _ in range(200):
        a = rng.uniform(26.0, 33.0) * _random_direction(rng)
        sep = rng.uniform(8.0, 14.0)
        b = a + sep * _random_direction(rng)
        if not 24.0 <= np.linalg.norm(b) <= 45.0:
            continue
        positions = [a, b]
        for _ in range(n_spectators):
            positions.append(rng.uniform(55.0, 80.0) * _random_direction(rng))
        rlz = realization_from_positions(register, np.array(positions))
        delta_kzz = abs(rlz.nv_coupling[0, 2, 2] - rlz.nv_coupling[1, 2, 2])
        g = rlz.pair_coupling[0, 1]
        flip_flop = 0.5 * abs(g[0, 0] + g[1, 1])
        if delta_kzz >= _PAIR_MIN_DELTA_KZZ_KHZ and flip_flop >= _PAIR_MIN_FLIPFLOP_KHZ:
            return rlz
    raise RuntimeError("could not construct a close-pair bath in 200 draws")


def _expansion(order: int):
    if order == 0:
        return gcce0
    if order == 1:
        return gcce1
    if order == 2:
        return gcce2
    raise ValueError(f"unsupported expansion order {order} for experiments")


def _gcce_trajectory(order, rho0, register, rlz, seq, gcfg, times, *,
                     samples=None, rng=None):
    if order == 2:
        pairs = select_pairs(rlz, gcfg.pair_select_d1_nm, gcfg.pair_select_d2_nm)
        return gcce2(rho0, register, rlz, seq, gcfg, pairs, rng, times,
                     samples=samples)
    return _expansion(order)(rho0, register, rlz, seq, gcfg, rng, times,
                             samples=samples)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        return 1.0 if float(np.max(np.abs(a - b))) < 1e-12 else 0.0
    return float(da @ db / denom)


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_csv(path: str, meta: list[tuple[str, object]],
              header: list[str], rows: list[tuple]) -> None:
    """Comma-separated table with a '#' metadata block, 12-digit floats."""
    lines = [f"# nvbath {__version__}"]
    lines += [f"# {k} = {format_value(v)}" for k, v in meta]
    lines.append(",".join(header))
    lines += [",".join(format_value(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _meta(cfg: ScenarioConfig, extra: list[tuple[str, object]] = ()) -> list:
    return [("config_hash", cfg.config_hash()), ("seed", cfg.seed),
            *extra]


def _run_tasks(tasks, worker, jobs: int):
    """Map worker over tasks, deterministically ordered results."""
    if jobs <= 1:
        return [worker(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

TRACE_HEADER = ["time_us", "S_z_NV", "I_x_C1", "I_z_C1", "E_N", "F_f", "order"]


@dataclass
class TraceResult:
    meta: list
    rows: list
    sequence: PulseSequence
    optimizer: OptimizeResult | None


def run_trace(cfg: ScenarioConfig, jobs: int = 1) -> TraceResult:
    """Observable trajectories under unitary and expansion evolution."""
    register = build_register(cfg.register)
    h = register_hamiltonian(register)
    sequence, opt = resolve_sequence(cfg, register, h)
    rho0 = initial_state(register)
    rho_t = target_state(cfg.target, register)
    times = np.asarray(cfg.sample_times_us or
                       tuple(np.linspace(0.0, 2.0 * sequence.duration_us, 101)))
    times = np.union1d(times, [sequence.duration_us])  # t_e row always present

    uni = evolve_trajectory(h, sequence, rho0, times)
    trajectories = [("unitary", uni, uni)]
    rng = task_rng(cfg.seed, _KEY_POSITIONS, 0, 0)
    rlz = bath_for_task(cfg, register, cfg.densities_ppb[0], rng)
    if rlz.n_spins:
        gtraj = _gcce_trajectory(cfg.order, rho0, register, rlz, sequence,
                                 gcce_config(cfg), times,
                                 rng=task_rng(cfg.seed, _KEY_BATH_STATES, 0, 0))
        trajectories.append((f"gcce{cfg.order}", gtraj, uni))

    dims = register.dims
    rows = []
    for tag, traj, ref in trajectories:
        for i, t in enumerate(times):
            rho = traj[i]
            rows.append((float(t),
                         expectation(rho, register, 0, "z"),
                         expectation(rho, register, 1, "x"),
                         expectation(rho, register, 1, "z"),
                         log_negativity(rho, dims, (0,)),
                         bath_fidelity(rho, ref[i]),
                         tag))
    rho_final = evolve_trajectory(h, sequence, rho0,
                                  np.array([sequence.duration_us]))[0]
    f_p = process_fidelity(rho_final, rho_t)
    meta = _meta(cfg, [("target", cfg.target),
                       ("t_e_us", sequence.duration_us),
                       ("f_process", f_p),
                       ("n_spins", rlz.n_spins)])
    return TraceResult(meta=meta, rows=rows, sequence=sequence, optimizer=opt)


HISTOGRAM_HEADER = ["row", "density_ppb", "bath_id", "task_seed", "n_spins",
                    "f_bath", "f_process", "f_full", "trace_drift"]


@dataclass
class HistogramResult:
    meta: list
    rows: list
    records: list  # (density, bath_id, f_bath, wall_s)
    sequence: PulseSequence


def run_histogram(cfg: ScenarioConfig, jobs: int = 1) -> HistogramResult:
    """Per-bath averaged fidelities across densities for one process."""
    register = build_register(cfg.register)
    h = register_hamiltonian(register)
    sequence, _ = resolve_sequence(cfg, register, h)
    rho0 = initial_state(register)
    rho_t = target_state(cfg.target, register)
    t_e = sequence.duration_us
    times = np.array([t_e])
    uni = evolve_trajectory(h, sequence, rho0, times)
    f_p = process_fidelity(uni[0], rho_t)
    gcfg = gcce_config(cfg)

    tasks = [(di, bi) for di in range(len(cfg.densities_ppb))
             for bi in range(cfg.baths_per_density)]

    def worker(task):
        di, bi = task
        t0 = perf_counter()
        density = cfg.densities_ppb[di]
        rng_pos = task_rng(cfg.seed, _KEY_POSITIONS, di, bi)
        rlz = bath_for_task(cfg, register, density, rng_pos)
        rng_states = task_rng(cfg.seed, _KEY_BATH_STATES, di, bi)
        if rlz.n_spins and rlz.n_spins > cfg.enumerate_exact_below:
            samples = rng_states.integers(0, 2, size=(cfg.n_samples, rlz.n_spins)) - 0.5
        else:
            samples = None
        traj = _gcce_trajectory(cfg.order, rho0, register, rlz, sequence,
                                gcfg, times, samples=samples)
        f_f = bath_fidelity(traj[0], uni[0])
        drift = trace_drift(traj[0])
        seed_used = int(np.random.SeedSequence(
            cfg.seed, spawn_key=(_KEY_POSITIONS, di, bi)).generate_state(1)[0])
        return (di, bi, density, rlz.n_spins, f_f, drift, seed_used,
                perf_counter() - t0)

    results = _run_tasks(tasks, worker, jobs)
    if len(results) != len(tasks):
        raise RuntimeError("histogram lost bath tasks")
    if not all(math.isfinite(r[4]) for r in results):
        raise RuntimeError("histogram produced a non-finite fidelity")
    rows, records = [], []
    for di, bi, density, n_spins, f_f, drift, seed_used, wall in sorted(results):
        rows.append(("record", density, bi, seed_used, n_spins,
                     f_f, f_p, f_p * f_f, drift))
        records.append((density, bi, f_f, wall))
    for di, density in enumerate(cfg.densities_ppb):
        vals = np.array(sorted(r[4] for r in results if r[0] == di))
        stats = [("mean", float(vals.mean())),
                 ("p10", float(np.percentile(vals, 10))),
                 ("p50", float(np.percentile(vals, 50))),
                 ("p90", float(np.percentile(vals, 90)))]
        for name, v in stats:
            rows.append((name, density, None, None, None, v, f_p, f_p * v, None))

    meta = _meta(cfg, [("target", cfg.target), ("t_e_us", t_e),
                       ("f_process", f_p), ("bin_width", cfg.bin_width)])
    return HistogramResult(meta=meta, rows=rows, records=records,
                           sequence=sequence)


BENCHMARK_HEADER = ["row", "density_ppb", "bath_id", "task_seed", "n_spins",
                    "n_pairs", "err_gcce0", "err_gcce2", "corr_en_gcce0",
                    "corr_en_gcce2", "f_exact", "f_gcce0", "f_gcce2", "note"]


@dataclass
class BenchmarkResult:
    meta: list
    rows: list
    sequence: PulseSequence


def run_benchmark(cfg: ScenarioConfig, jobs: int = 1) -> BenchmarkResult:
    """gCCE orders against the exact oracle over many baths."""
    register = build_register(cfg.register)
    h = register_hamiltonian(register)
    sequence, _ = resolve_sequence(cfg, register, h)
    rho0 = initial_state(register)
    gcfg = gcce_config(cfg)
    times = np.asarray(cfg.sample_times_us or (cfg.benchmark_time_us,), dtype=float)
    t_idx = int(np.argmin(np.abs(times - cfg.benchmark_time_us)))
    uni = evolve_trajectory(h, sequence, rho0, times)
    dims = register.dims

    tasks = [(di, bi) for di in range(len(cfg.densities_ppb))
             for bi in range(cfg.baths_per_density)]

    def worker(task):
        di, bi = task
        density = cfg.densities_ppb[di]
        rng_pos = task_rng(cfg.seed, _KEY_POSITIONS, di, bi)
        rlz = bath_for_task(cfg, register, density, rng_pos)
        seed_used = int(np.random.SeedSequence(
            cfg.seed, spawn_key=(_KEY_POSITIONS, di, bi)).generate_state(1)[0])
        try:
            exact = exact_evolve(rho0, register, rlz, sequence, times)
        except ValueError as exc:
            return (di, bi, density, rlz.n_spins, None, None, None, None,
                    None, None, None, None, seed_used, str(exc))
        pairs = select_pairs(rlz, gcfg.pair_select_d1_nm, gcfg.pair_select_d2_nm)
        if rlz.n_spins > cfg.enumerate_exact_below:
            rng_states = task_rng(cfg.seed, _KEY_BATH_STATES, di, bi)
            samples = rng_states.integers(
                0, 2, size=(cfg.n_samples, rlz.n_spins)) - 0.5
        else:
            samples = None
        g0 = gcce0(rho0, register, rlz, sequence, gcfg, None, times,
                   samples=samples)
        g2 = gcce2(rho0, register, rlz, sequence, gcfg, pairs, None, times,
                   samples=samples)
        rep0 = benchmark_error(g0, exact, uni, t_idx)
        rep2 = benchmark_error(g2, exact, uni, t_idx)
        en_ex = np.array([log_negativity(r, dims, (0,)) for r in exact])
        en_g0 = np.array([log_negativity(r, dims, (0,)) for r in g0])
        en_g2 = np.array([log_negativity(r, dims, (0,)) for r in g2])
        return (di, bi, density, rlz.n_spins, len(pairs),
                rep0.relative_error, rep2.relative_error,
                _pearson(en_g0, en_ex), _pearson(en_g2, en_ex),
                rep0.f_exact, rep0.f_approx, rep2.f_approx, seed_used, None)

    results = _run_tasks(tasks, worker, jobs)
    rows = []
    ok = []
    for r in sorted(results, key=lambda r: (r[0], r[1])):
        (di, bi, density, n_spins, n_pairs, e0, e2, c0, c2,
         f_ex, f0, f2, seed_used, note) = r
        if note is not None:
            rows.append(("skipped", density, bi, seed_used, n_spins, None,
                         None, None, None, None, None, None, None, note))
            continue
        rows.append(("record", density, bi, seed_used, n_spins, n_pairs,
                     e0, e2, c0, c2, f_ex, f0, f2, None))
        ok.append(r)
    if ok:
        arr = np.array([[r[5], r[6], r[7], r[8]] for r in ok], dtype=float)
        rows.append(("mean", None, None, None, None, None,
                     float(arr[:, 0].mean()), float(arr[:, 1].mean()),
                     float(arr[:, 2].mean()), float(arr[:, 3].mean()),
                     None, None, None, None))
    meta = _meta(cfg, [("target", cfg.target),
                       ("benchmark_time_us", float(times[t_idx])),
                       ("t_e_us", sequence.duration_us)])
    return BenchmarkResult(meta=meta, rows=rows, sequence=sequence)


@dataclass
class OptimizeRunResult:
    meta: list
    table_text: str
    result: OptimizeResult


def run_optimize(cfg: ScenarioConfig, jobs: int = 1) -> OptimizeRunResult:
    register = build_register(cfg.register)
    h = register_hamiltonian(register)
    rho0 = initial_state(register)
    rho_t = target_state(cfg.target, register)
    res = optimize_sequence(h, rho0, rho_t, cfg.segments,
                            task_rng(cfg.seed, _KEY_OPTIMIZER, 0, 0),
                            budget=cfg.budget,
                            target_fidelity=cfg.fidelity_threshold,
                            duration_cap_us=cfg.duration_cap_us,
                            duration_target_us=cfg.duration_target_us)
    meta = _meta(cfg, [("target", cfg.target),
                       ("f_process", res.fidelity),
                       ("duration_us", res.sequence.duration_us),
                       ("segments", cfg.segments),
                       ("below_target", str(res.below_target).lower())])
    return OptimizeRunResult(meta=meta,
                             table_text=sequence_to_table_text(res.sequence),
                             result=res)


BATH_HEADER = ["row", "density_ppb", "bath_id", "task_seed", "spin_index",
               "x_nm", "y_nm", "z_nm", "nv_zz_khz"]


def run_bath_gen(cfg: ScenarioConfig, jobs: int = 1):
    """Sampled bath geometries with their secular couplings to the NV."""
    register = build_register(cfg.register)
    rows = []
    for di, density in enumerate(cfg.densities_ppb):
        for bi in range(cfg.baths_per_density):
            rng = task_rng(cfg.seed, _KEY_POSITIONS, di, bi)
            rlz = bath_for_task(cfg, register, density, rng)
            seed_used = int(np.random.SeedSequence(
                cfg.seed, spawn_key=(_KEY_POSITIONS, di, bi)).generate_state(1)[0])
            for j in range(rlz.n_spins):
                rows.append(("record", density, bi, seed_used, j,
                             float(rlz.positions[j, 0]),
                             float(rlz.positions[j, 1]),
                             float(rlz.positions[j, 2]),
                             float(rlz.nv_coupling[j, 2, 2])))
    return _meta(cfg), rows
