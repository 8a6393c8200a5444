"""Stage commands: calibrate, emulate, sample, full run, and Darcy forward UQ.

Each command reads a validated config, writes its artifacts under the output
directory, and updates the run manifest atomically at the stage boundary.
Stages communicate only through files, so each can be rerun independently.
"""

import logging
import os
import time

import numpy as np

from ces.calibration import (EksSettings, Ensemble, ensemble_cov, ensemble_mean,
                             run_calibration)
from ces.emulation import GpEmulator, Misfit, train_emulator
from ces.models.base import ModelError
from ces.pipeline.io import read_csv_floats, write_csv, write_json
from ces.pipeline.manifest import RunManifest, config_hash
from ces.pipeline.problems import build_problem
from ces.sampling import ProposalSpec, chain_diagnostics, run_chain, running_mean

log = logging.getLogger(__name__)

SNAPSHOT_FILE = "snapshots.csv"
CALIBRATION_SUMMARY = "calibration_summary.json"
EMULATOR_FILE = "emulator.json"
EMULATION_SUMMARY = "emulation_summary.json"
DIAGNOSTICS_FILE = "diagnostics.json"
UQ_COUNTS_FILE = "uq_counts.csv"
UQ_SUMMARY = "uq_summary.json"
TRACE_ROWS = 1000


def _manifest(config: dict, out_dir: str) -> RunManifest:
    os.makedirs(out_dir, exist_ok=True)
    return RunManifest.load_or_create(out_dir, config_hash(config), config["seed"])


def _stage(manifest: RunManifest, name: str):
    """Context manager recording stage status and timing in the manifest."""
    class _Stage:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "ok" if exc_type is None else "failed"
            manifest.record_stage(name, status, time.perf_counter() - self.t0)
            manifest.write()
            return False
    return _Stage()


def chain_file_name(index: int, n_chains: int) -> str:
    return "chain.csv" if n_chains == 1 else f"chain_{index:02d}.csv"


# -- calibrate ---------------------------------------------------------------

def cmd_calibrate(config: dict, out_dir: str | None = None, workers: int = 1) -> dict:
    out_dir = out_dir or config["output_dir"]
    manifest = _manifest(config, out_dir)
    with _stage(manifest, "calibrate"):
        bundle = build_problem(config)
        cal_cfg = config["calibration"]
        settings = EksSettings(ensemble_size=cal_cfg["ensemble_size"],
                               step0=cal_cfg["step0"],
                               n_iterations=cal_cfg["n_iterations"],
                               variant=cal_cfg["variant"],
                               snapshot_stride=cal_cfg["snapshot_stride"],
                               workers=workers)
        result = run_calibration(bundle.problem, settings, seed=config["seed"])

        p = bundle.problem.prior.dim
        d = bundle.problem.data.size
        header = (["iteration", "particle"]
                  + [f"theta_{i+1}" for i in range(p)]
                  + [f"g_{i+1}" for i in range(d)])
        rows = []
        for snap in result.snapshots:
            for j in range(snap.size):
                rows.append([snap.iteration, j, *snap.particles[j], *snap.evaluations[j]])
        snap_path = os.path.join(out_dir, SNAPSHOT_FILE)
        write_csv(snap_path, header, rows)

        mean_theta, mean_g = ensemble_mean(result.final)
        final_cov = ensemble_cov(result.final)
        summary = {
            "iterations": cal_cfg["n_iterations"],
            "ensemble_size": settings.ensemble_size,
            "snapshots": [s.iteration for s in result.snapshots],
            "final_mean": mean_theta,
            "final_cov": final_cov,
            "final_mean_evaluation": mean_g,
            "dt_sequence": result.dt_sequence,
            "data": bundle.problem.data,
            "noise_cov": bundle.problem.noise_cov,
            "truth": bundle.truth,
        }
        summary_path = os.path.join(out_dir, CALIBRATION_SUMMARY)
        write_json(summary_path, summary)
        manifest.record_file(snap_path)
        manifest.record_file(summary_path)
        print(f"calibrate: {settings.ensemble_size} particles, "
              f"{cal_cfg['n_iterations']} iterations")
        print(f"  final ensemble mean: {np.array2string(mean_theta, precision=4)}")
        print(f"  final ensemble cov diag: "
              f"{np.array2string(np.diag(final_cov), precision=4)}")
        return summary


def load_snapshots(out_dir: str, p: int, d: int) -> list[Ensemble]:
    header, table = read_csv_floats(os.path.join(out_dir, SNAPSHOT_FILE))
    if len(header) != 2 + p + d:
        raise ModelError("snapshot file does not match the configured dimensions")
    snapshots = []
    for it in np.unique(table[:, 0]):
        block = table[table[:, 0] == it]
        order = np.argsort(block[:, 1])
        block = block[order]
        snapshots.append(Ensemble(int(it), block[:, 2:2 + p], block[:, 2 + p:]))
    return snapshots


# -- emulate -----------------------------------------------------------------

def _design_from_snapshots(snapshots: list[Ensemble], rule: str):
    if rule == "final":
        final = snapshots[-1]
        return final.particles, final.evaluations
    particles = np.vstack([s.particles for s in snapshots])
    evals = np.vstack([s.evaluations for s in snapshots])
    return particles, evals


def _holdout_rmse(design, targets, noise_cov, em_cfg, seed, fraction, prior_design):
    """Train on a (1-fraction) split, report per-output RMSE on the rest."""
    n = design.shape[0]
    n_hold = int(round(fraction * n))
    if n_hold < 1 or n - n_hold < design.shape[1] + 2:
        return None
    rng = np.random.default_rng(np.random.SeedSequence((seed, 77)))
    perm = rng.permutation(n)
    hold, train = perm[:n_hold], perm[n_hold:]
    emu = train_emulator(design[train], targets[train], noise_cov,
                         kernel_family=em_cfg["kernel"], mean_family=em_cfg["mean"],
                         transform_kind=em_cfg["transform"],
                         use_lengthscale_priors=em_cfg["lengthscale_priors"],
                         prior_design=prior_design,
                         n_restarts=em_cfg["n_restarts"], seed=seed)
    preds = np.array([emu.predict(t)[0] for t in design[hold]])
    return np.sqrt(np.mean((preds - targets[hold]) ** 2, axis=0))


def cmd_emulate(config: dict, out_dir: str | None = None) -> dict:
    out_dir = out_dir or config["output_dir"]
    manifest = _manifest(config, out_dir)
    with _stage(manifest, "emulate"):
        bundle = build_problem(config)
        p, d = bundle.problem.prior.dim, bundle.problem.data.size
        snapshots = load_snapshots(out_dir, p, d)
        em_cfg = config["emulation"]
        design, targets = _design_from_snapshots(snapshots, em_cfg["design"])
        log.info("training emulator on %d design points", design.shape[0])
        # lengthscale priors come from the final (concentrated) ensemble
        prior_design = snapshots[-1].particles

        rmse = _holdout_rmse(design, targets, bundle.problem.noise_cov, em_cfg,
                             config["seed"], em_cfg["holdout_fraction"], prior_design)
        emulator = train_emulator(
            design, targets, bundle.problem.noise_cov,
            kernel_family=em_cfg["kernel"], mean_family=em_cfg["mean"],
            transform_kind=em_cfg["transform"],
            use_lengthscale_priors=em_cfg["lengthscale_priors"],
            prior_design=prior_design,
            n_restarts=em_cfg["n_restarts"], seed=config["seed"])

        emu_path = os.path.join(out_dir, EMULATOR_FILE)
        emulator.save(emu_path)
        summary = {
            "design_points": design.shape[0],
            "components": [c.to_dict() for c in emulator.components],
            "holdout_rmse": rmse,
            "holdout_fraction": em_cfg["holdout_fraction"],
        }
        summary_path = os.path.join(out_dir, EMULATION_SUMMARY)
        write_json(summary_path, summary)
        manifest.record_file(emu_path)
        manifest.record_file(summary_path)
        print(f"emulate: {len(emulator.components)} GP components on "
              f"{design.shape[0]} design points")
        for i, comp in enumerate(emulator.components):
            spec = comp.spec
            print(f"  output {i+1}: amplitude={spec.amplitude:.4g} "
                  f"lengthscales={np.array2string(spec.lengthscales, precision=3)} "
                  f"nugget={spec.noise_variance:.4g}")
        if rmse is not None:
            print(f"  held-out RMSE: {np.array2string(np.asarray(rmse), precision=4)}")
        return summary


# -- sample ------------------------------------------------------------------

def _build_misfit(config: dict, bundle, emulator: GpEmulator | None) -> Misfit:
    kind = config["sampling"]["misfit"]
    if kind == "phi_T_direct":
        return Misfit(kind, bundle.problem.data, model=bundle.problem.model,
                      noise_cov=bundle.problem.noise_cov)
    if emulator is None:
        raise ModelError("emulator-based misfit requested but no emulator found")
    return Misfit(kind, bundle.problem.data, emulator=emulator)


def cmd_sample(config: dict, out_dir: str | None = None, burn_in: int = 0) -> dict:
    out_dir = out_dir or config["output_dir"]
    manifest = _manifest(config, out_dir)
    with _stage(manifest, "sample"):
        bundle = build_problem(config)
        p, d = bundle.problem.prior.dim, bundle.problem.data.size
        snapshots = load_snapshots(out_dir, p, d)
        final = snapshots[-1]
        theta0, _ = ensemble_mean(final)
        prop_cov = ensemble_cov(final)
        prop_cov = prop_cov + 1e-12 * max(np.trace(prop_cov) / p, 1e-300) * np.eye(p)

        s_cfg = config["sampling"]
        emu_path = os.path.join(out_dir, EMULATOR_FILE)
        emulator = GpEmulator.load(emu_path) if os.path.exists(emu_path) else None
        misfit = _build_misfit(config, bundle, emulator)
        proposal = ProposalSpec(prop_cov, scale=s_cfg["proposal_scale"])

        all_diags = []
        for c in range(s_cfg["n_chains"]):
            chain_seed = config["seed"] + c
            chain = run_chain(misfit, bundle.problem.prior, theta0, proposal,
                              s_cfg["n_samples"], seed=chain_seed)
            name = chain_file_name(c, s_cfg["n_chains"])
            path = os.path.join(out_dir, name)
            header = ["step", "accept", "logpost"] + [f"theta_{i+1}" for i in range(p)]
            rows = ([i, int(chain.accept_flags[i]), chain.log_posts[i], *chain.samples[i]]
                    for i in range(chain.n_samples))
            write_csv(path, header, rows)
            manifest.record_file(path)

            diag = chain_diagnostics(chain, burn_in=burn_in)
            diag["chain_file"] = name
            diag["seed"] = chain_seed
            diag["misfit"] = s_cfg["misfit"]
            all_diags.append(diag)

            _write_chain_tables(out_dir, manifest, chain, burn_in, c,
                                s_cfg["n_chains"], p)
            print(f"sample[{name}]: {chain.n_samples} samples, "
                  f"acceptance {chain.acceptance_rate:.3f}")
            print(f"  posterior mean: {np.array2string(diag['mean'], precision=4)}")

        diag_path = os.path.join(out_dir, DIAGNOSTICS_FILE)
        write_json(diag_path, {"chains": all_diags})
        manifest.record_file(diag_path)
        return {"chains": all_diags}


def _write_chain_tables(out_dir, manifest, chain, burn_in, index, n_chains, p):
    """Trace (subsampled running means) and forest (quantile summary) tables."""
    suffix = "" if n_chains == 1 else f"_{index:02d}"
    tail = chain.tail(burn_in)
    means = running_mean(tail)
    stride = max(1, tail.shape[0] // TRACE_ROWS)
    idx = np.arange(0, tail.shape[0], stride)
    trace_path = os.path.join(out_dir, f"trace{suffix}.csv")
    header = (["step"] + [f"theta_{i+1}" for i in range(p)]
              + [f"running_mean_{i+1}" for i in range(p)])
    write_csv(trace_path, header,
              ([burn_in + i, *tail[i], *means[i]] for i in idx))
    manifest.record_file(trace_path)

    diag = chain_diagnostics(chain, burn_in=burn_in)
    forest_path = os.path.join(out_dir, f"forest{suffix}.csv")
    q = diag["quantiles"]
    write_csv(forest_path,
              ["parameter", "q2.5", "q25", "median", "q75", "q97.5"],
              ([f"theta_{i+1}", q[0, i], q[1, i], q[2, i], q[3, i], q[4, i]]
               for i in range(p)))
    manifest.record_file(forest_path)


# -- full pipeline -----------------------------------------------------------

def cmd_run(config: dict, out_dir: str | None = None, workers: int = 1,
            burn_in: int = 0) -> dict:
    out_dir = out_dir or config["output_dir"]
    results = {"calibrate": cmd_calibrate(config, out_dir, workers)}
    if config["sampling"]["misfit"] != "phi_T_direct":
        results["emulate"] = cmd_emulate(config, out_dir)
    results["sample"] = cmd_sample(config, out_dir, burn_in)
    return results


# -- Darcy forward UQ ----------------------------------------------------------

def cmd_darcy_uq(config: dict, out_dir: str | None = None, burn_in: int = 0) -> dict:
    if config["problem"]["kind"] != "darcy":
        raise ModelError("darcy-uq requires a darcy problem")
    out_dir = out_dir or config["output_dir"]
    manifest = _manifest(config, out_dir)
    with _stage(manifest, "darcy-uq"):
        bundle = build_problem(config)
        model = bundle.problem.model
        p = bundle.problem.prior.dim
        name = chain_file_name(0, config["sampling"]["n_chains"])
        _, table = read_csv_floats(os.path.join(out_dir, name))
        samples = table[burn_in:, 3:3 + p]

        # thresholds: medians across the observation locations of the truth fields
        obs = bundle.extras["observation_points"]
        pressure_threshold = float(np.median(
            model.interpolate(bundle.extras["truth_pressure"], obs)))
        permeability_threshold = float(np.median(
            model.interpolate(bundle.extras["truth_permeability"], obs)))

        n_uq = config["uq"]["n_samples"]
        rng = np.random.default_rng(np.random.SeedSequence((config["seed"], 404)))
        picks = rng.integers(0, samples.shape[0], size=n_uq)

        rows, skipped = [], 0
        for k, idx in enumerate(picks):
            theta = samples[idx]
            try:
                perm = model.permeability(theta)
                pressure = model.solve_from_field(perm)
            except ModelError as exc:
                skipped += 1
                log.warning("UQ sample %d failed, skipping: %s", k, exc)
                continue
            rows.append([k, int(idx),
                         int(np.sum(pressure > pressure_threshold)),
                         int(np.sum(perm > permeability_threshold))])

        counts_path = os.path.join(out_dir, UQ_COUNTS_FILE)
        write_csv(counts_path,
                  ["sample", "chain_index", "pressure_exceed_count",
                   "permeability_exceed_count"], rows)
        grid_points = (model.n + 1) ** 2
        counts = np.array([[r[2], r[3]] for r in rows], float) if rows else np.zeros((0, 2))
        summary = {
            "n_requested": n_uq,
            "n_completed": len(rows),
            "n_skipped": skipped,
            "grid_points": grid_points,
            "pressure_threshold": pressure_threshold,
            "permeability_threshold": permeability_threshold,
            "pressure_count_mean": counts[:, 0].mean() if len(rows) else None,
            "permeability_count_mean": counts[:, 1].mean() if len(rows) else None,
        }
        summary_path = os.path.join(out_dir, UQ_SUMMARY)
        write_json(summary_path, summary)
        manifest.record_file(counts_path)
        manifest.record_file(summary_path)
        print(f"darcy-uq: {len(rows)}/{n_uq} posterior samples solved "
              f"({skipped} skipped)")
        return summary
