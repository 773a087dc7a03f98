"""Command line runner: ``idslab <subcommand> CONFIG``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .eigen import EigenConvergenceError
from .folner import check_folner_isoperimetric
from .groups import ball, phi
from .hamiltonian import assemble_dirichlet
from .pipeline import (
    AdmissibilityError,
    SolverTaskError,
    SpectraTable,
    build_admissible,
    ergodic_average,
    heat_diagonal_site_function,
    heat_kernel_lemma_gaps,
    heat_witness,
    ids_from_spectra,
    laplace_from_spectra,
    non_randomness_check,
    pastur_subin_limit,
    solve_spectra,
)
from .reports import write_csv, write_json, write_manifest
from .spectral import boundary_feeling_table, count_below, eigenvalues

log = logging.getLogger("idslab")

CACHE = "cache.npz"


class NumericalFailure(RuntimeError):
    pass


class Run:
    def __init__(self, cfg: ExperimentConfig, workers: int, out: Path):
        self.cfg = cfg
        self.workers = workers
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.timings: Dict[str, float] = {}
        self.files: List[Path] = []
        self.model = cfg.build_model()
        self.graph = self.model.graph
        self.spec = self.graph.group

    def stage(self, name):
        run = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = round(time.perf_counter() - self.t0, 6)

        return _T()

    def emit(self, path: Path) -> None:
        self.files.append(path)

    def update_report(self, section: str, content) -> None:
        path = self.out / "report.json"
        data = json.loads(path.read_text()) if path.exists() else {}
        data[section] = content
        data["config"] = self.cfg.model_dump(mode="json", by_alias=True)
        data["config_hash"] = self.cfg.digest()
        self.emit(write_json(path, data))

    def finish(self) -> None:
        write_manifest(self.out, self.cfg.digest(), __version__, self.timings, self.files)

    def admissible(self):
        f = self.cfg.folner
        seq = self.cfg.build_folner()
        adm = build_admissible(self.graph, seq, f.h, f.approxSeed, f.C, f.toggleP)
        limit = self.cfg.solver.maxDenseN
        if max(adm.sizes) > limit:
            raise ValueError(f"domain of size {max(adm.sizes)} exceeds solver.maxDenseN = {limit}")
        return adm


# -- subcommands -------------------------------------------------------------------

def cmd_folner(run: Run) -> int:
    f = run.cfg.folner
    with run.stage("folner"):
        seq = run.cfg.build_folner()
        rep = check_folner_isoperimetric(run.spec, seq, run.graph, f.dMax, f.threshold)
    gens = run.spec.nontrivial_generators
    header = ["n", "size"] + [f"defect_{'_'.join(map(str, g))}" for g in gens]
    header += [f"quotient_d{d}" for d in range(f.dMax + 1)] + ["tempered"]
    run.emit(write_csv(run.out / "folner.csv", header, rep.rows(gens, f.dMax)))
    achieved = max((float(q) for q in rep.tempered if q is not None), default=1.0)
    run.update_report("folner", {
        "verdict": rep.verdict,
        "threshold": f.threshold,
        "tempered_sup": achieved,
        "C": f.C,
        "radii": list(seq.radii),
    })
    print(f"folner: verdict {rep.verdict}, achieved temperedness sup {achieved:.6g}")
    return 0


def cmd_spectrum(run: Run) -> int:
    sc = run.cfg.spectrum
    with run.stage("spectrum"):
        adm = run.admissible()
        D = adm.domains[sc.index]
        seed = sc.seed if sc.seed is not None else run.cfg.all_seeds()[0]
        M = assemble_dirichlet(D, run.model.env(seed), run.model.u, run.graph)
        s = eigenvalues(M)
    run.emit(write_csv(run.out / "spectrum.csv", ["index", "eigenvalue"], enumerate(s.eigenvalues)))
    grid = run.cfg.lambda_values()
    run.emit(write_csv(run.out / "counting.csv", ["lambda", "N"], ((lam, count_below(s, lam)[1]) for lam in grid)))
    if sc.dumpMatrix:
        p = run.out / "matrix.txt"
        p.write_text(M.triplets())
        run.emit(p)
    run.update_report("spectrum", {
        "n": D.size,
        "seed": seed,
        "min": float(s.eigenvalues[0]),
        "max": float(s.eigenvalues[-1]),
        "gershgorin": list(M.gershgorin()),
    })
    print(f"spectrum: n={D.size}, seed={seed}, range [{s.eigenvalues[0]:.6g}, {s.eigenvalues[-1]:.6g}]")
    return 0


def _solve_groups(run: Run, adm) -> List[SpectraTable]:
    tables = []
    with run.stage("solve"):
        for g in run.cfg.seeds.groups:
            tables.append(solve_spectra(adm, run.model, g, run.workers))
    return tables


def _merge(tables: List[SpectraTable]) -> SpectraTable:
    sizes = tables[0].sizes
    seeds = [s for t in tables for s in t.seeds]
    eigs = [[e for t in tables for e in t.eigs[n]] for n in range(len(sizes))]
    return SpectraTable(sizes, seeds, eigs)


def _aux(run: Run, adm) -> Dict[str, np.ndarray]:
    """Heat-kernel-lemma gaps and the ergodic reference, per t."""
    cfg = run.cfg
    ts = cfg.tGrid
    seed = cfg.all_seeds()[0]
    hk = np.full((len(adm), len(ts)), np.nan)
    ref = np.full(len(ts), np.nan)
    ref_se = np.full(len(ts), np.nan)
    with run.stage("heat_kernel_lemma"):
        hk[:, :] = heat_kernel_lemma_gaps(adm, run.model, seed, ts, cfg.heat.pad)
    if cfg.seeds.reference:
        with run.stage("ergodic_reference"):
            for j, t in enumerate(ts):
                f = heat_diagonal_site_function(run.model, t, cfg.heat.pad)
                res = ergodic_average(f, run.model.env(seed), [], run.graph, cfg.seeds.reference)
                ref[j], ref_se[j] = res.reference, res.reference_stderr
    return {"hk_gap": hk, "reference": ref, "reference_stderr": ref_se}


def _save_cache(run: Run, tables: List[SpectraTable], aux) -> None:
    arrays = dict(aux)
    arrays["n_groups"] = np.array(len(tables))
    for gi, t in enumerate(tables):
        arrays[f"g{gi}_sizes"] = np.array(t.sizes)
        arrays[f"g{gi}_seeds"] = np.array(t.seeds, dtype=np.uint64)
        for n, row in enumerate(t.eigs):
            for k, e in enumerate(row):
                arrays[f"g{gi}_e_{n}_{k}"] = e
    np.savez_compressed(run.out / CACHE, **arrays)


def _load_cache(run: Run):
    z = np.load(run.out / CACHE)
    tables = []
    for gi in range(int(z["n_groups"])):
        sizes = [int(s) for s in z[f"g{gi}_sizes"]]
        seeds = [int(s) for s in z[f"g{gi}_seeds"]]
        eigs = [[z[f"g{gi}_e_{n}_{k}"] for k in range(len(seeds))] for n in range(len(sizes))]
        tables.append(SpectraTable(sizes, seeds, eigs))
    aux = {k: z[k] for k in ("hk_gap", "reference", "reference_stderr")}
    return tables, aux


def _emit_ids(run: Run, tables: List[SpectraTable], aux) -> int:
    cfg = run.cfg
    grid = cfg.lambda_values()
    ts = np.array(cfg.tGrid)
    table = _merge(tables)
    idse = ids_from_spectra(table, grid)
    lap = laplace_from_spectra(table, ts)
    lap.hk_gap[:] = aux["hk_gap"]
    lap.reference[:] = aux["reference"]
    lap.reference_stderr[:] = aux["reference_stderr"]

    cols = [f"N_n{n}_s{s}" for n in range(len(table.sizes)) for s in table.seeds]
    rows = []
    for j, lam in enumerate(grid):
        rows.append([lam] + [idse.values[n, k, j] for n in range(len(table.sizes)) for k in range(len(table.seeds))] + [idse.limit[j]])
    run.emit(write_csv(run.out / "ids.csv", ["lambda"] + cols + ["limit"], rows))

    cols = [f"Nt_n{n}_s{s}" for n in range(len(table.sizes)) for s in table.seeds]
    cols += [f"mean_n{n}" for n in range(len(table.sizes))]
    cols += ["reference", "reference_stderr"] + [f"hk_gap_n{n}" for n in range(len(table.sizes))]
    rows = []
    mean = lap.mean_per_n
    for j, t in enumerate(ts):
        row = [t] + [lap.values[n, k, j] for n in range(len(table.sizes)) for k in range(len(table.seeds))]
        row += [mean[n, j] for n in range(len(table.sizes))]
        row += [lap.reference[j], lap.reference_stderr[j]] + [lap.hk_gap[n, j] for n in range(len(table.sizes))]
        rows.append(row)
    run.emit(write_csv(run.out / "laplace.csv", ["t"] + cols, rows))

    C0 = cfg.C0(run.model)
    verdict = pastur_subin_limit(lap, idse, C0, heat_witness(run.graph, C0), cfg.heat.cauchyThreshold)
    section = {
        "sizes": table.sizes,
        "seed_groups": [t.seeds for t in tables],
        "C0": C0,
        "laplace_identity_max_gap": float(np.abs(lap.identity_gap).max()),
        "pastur_subin": {
            "passed": verdict.passed,
            "failures": [f.__dict__ for f in verdict.failures],
            "notes": verdict.notes,
            "cauchy_threshold": cfg.heat.cauchyThreshold,
        },
        "hk_gap_final": lap.hk_gap[-1].tolist(),
        "limit_monotone": bool(np.all(np.diff(idse.limit) >= 0)),
    }
    if len(tables) >= 2:
        groups = [ids_from_spectra(t, grid) for t in tables]
        section["non_randomness"] = {f"{i}-{j}": d for (i, j), d in non_randomness_check(groups).items()}
    run.update_report("ids", section)
    ok = verdict.passed and section["laplace_identity_max_gap"] == 0.0
    print(f"ids: sizes {table.sizes}, Pastur-Subin {'pass' if verdict.passed else 'FAIL'}")
    for f in verdict.failures:
        print(f"  hypothesis {f.hypothesis} violated at n={f.n}, t={f.t}: {f.value:.6g} ({f.detail})")
    return 0 if ok else 1


def cmd_ids(run: Run) -> int:
    with run.stage("admissible"):
        adm = run.admissible()
    tables = _solve_groups(run, adm)
    aux = _aux(run, adm)
    _save_cache(run, tables, aux)
    run.emit(run.out / CACHE)
    return _emit_ids(run, tables, aux)


def cmd_report(run: Run) -> int:
    if not (run.out / CACHE).exists():
        raise NumericalFailure(f"no cached spectra in {run.out}; run `ids` first")
    tables, aux = _load_cache(run)
    return _emit_ids(run, tables, aux)


def cmd_heat(run: Run) -> int:
    cfg = run.cfg
    with run.stage("admissible"):
        adm = run.admissible()
    R = cfg.heat.tableRadius
    with run.stage("htable"):
        D = phi(ball(run.spec, R), run.graph)
        Dbig = phi(ball(run.spec, 2 * R), run.graph)
        w = run.model.env(cfg.all_seeds()[0])
        table = boundary_feeling_table(D, Dbig, w, run.model.u, run.graph, cfg.tGrid, cfg.heat.epsilon)
    rows = [(t, h, table.gaps[i, k]) for i, t in enumerate(table.t_values) for k, h in enumerate(table.depths)]
    run.emit(write_csv(run.out / "htable.csv", ["t", "h", "worst_gap"], rows))
    tables = _solve_groups(run, adm)
    lap = laplace_from_spectra(_merge(tables), cfg.tGrid)
    aux = _aux(run, adm)
    warnings = []
    for t in cfg.tGrid:
        need = table.h_for(t)
        if need is None or cfg.heat.pad < need:
            warnings.append(f"pad {cfg.heat.pad} below empirical h(t={t}, {cfg.heat.epsilon:g}) = {need}")
    mean = lap.mean_per_n
    rows = []
    for j, t in enumerate(cfg.tGrid):
        rows.append([t] + [mean[n, j] for n in range(len(adm))] + [aux["reference"][j], aux["reference_stderr"][j]]
                    + [aux["hk_gap"][n, j] for n in range(len(adm))])
    header = ["t"] + [f"mean_n{n}" for n in range(len(adm))] + ["reference", "reference_stderr"]
    header += [f"hk_gap_n{n}" for n in range(len(adm))]
    run.emit(write_csv(run.out / "laplace.csv", header, rows))
    run.update_report("heat", {
        "h_table": {str(t): table.h_for(t) for t in table.t_values},
        "epsilon": cfg.heat.epsilon,
        "pad": cfg.heat.pad,
        "warnings": warnings,
        "hk_gap_final": aux["hk_gap"][-1].tolist(),
    })
    for msg in warnings:
        print("warning:", msg)
    print(f"heat: h(t, eps) = {[table.h_for(t) for t in table.t_values]}, final kernel-lemma gaps {aux['hk_gap'][-1]}")
    return 0


def cmd_verify(run: Run) -> int:
    from .verify import run_checks

    with run.stage("verify"):
        results = run_checks(run.model)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    run.update_report("verify", {r.name: {"passed": r.passed, "detail": r.detail} for r in results})
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "folner": cmd_folner,
    "spectrum": cmd_spectrum,
    "heat": cmd_heat,
    "ids": cmd_ids,
    "verify": cmd_verify,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="idslab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", type=Path)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="process pool size")
    parser.add_argument("--output-dir", type=Path, default=None, help="override outputDir from the config")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        # the override is not part of the experiment, so the config echo and hash ignore it
        out = args.output_dir if args.output_dir is not None else Path(cfg.outputDir)
        run = Run(cfg, max(1, args.workers), out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        status = COMMANDS[args.command](run)
    except ValueError as exc:
        if isinstance(exc, AdmissibilityError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return 1
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverTaskError, EigenConvergenceError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    run.finish()
    return status


if __name__ == "__main__":
    sys.exit(main())
