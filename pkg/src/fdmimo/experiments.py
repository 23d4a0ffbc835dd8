"""Seeded Monte Carlo drivers behind the command line.

Every trial is a pure function of ``(config, trial index)``: its generator is
spawned from the experiment seed, and all SNR points of a trial share the
same scenario and unit-power noise draw. Trials may run in worker
processes; results are stacked in trial order before any reduction, so the
output does not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import __version__
from .channel import complex_gaussian, draw_scenario
from .complexity import FlopModelInput, flops_bd, flops_doa_precoder, flops_esprit, flops_music
from .config import ExperimentConfig
from .esprit import estimate_doa, match_paths
from .mse import COMPONENTS, InterferenceStats, PriorSamples, angle_mse_from_frequency_mse, mse_breakdown
from .numerics import NumericError
from .pilots import build_pilot_book, despread, uplink_rx
from .precoding import ServedMse, estimate_served_paths, sum_rate

DEG2 = (180 / math.pi) ** 2
# spawn-key offset separating the prior-sample stream from trial streams
_PRIOR_KEY = 2 ** 32


@dataclass
class ExperimentResult:
    kind: str
    columns: list[str]
    rows: list[list]
    column_docs: dict[str, str]
    config: ExperimentConfig
    raw: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def metadata(self) -> dict:
        return {
            "artifact_version": __version__,
            "kind": self.kind,
            "snr_definition": "SNR = p_t / sigma2 with serving-link large-scale gain 1 and unit total mean path power"
            if self.kind == "sumrate" else "SNR = 1 / sigma2 with serving-link large-scale gain 1 and unit-power pilots",
            "columns": self.column_docs,
            "config": self.config.to_dict(),
        }


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _map(fn, args: list, threads: int) -> list:
    if threads <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args, chunksize=1))


def _half_width(x: np.ndarray, axis: int = 0) -> np.ndarray:
    n = x.shape[axis]
    if n < 2:
        return np.zeros(np.delete(x.shape, axis))
    return 1.96 * x.std(axis=axis, ddof=1) / math.sqrt(n)


# ---------------------------------------------------------------------------
# RMSE
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _prior_samples(cfg: ExperimentConfig, m1: int, m2: int) -> PriorSamples:
    stats = InterferenceStats.from_config(cfg.scenario, cfg.mc_samples)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_PRIOR_KEY,)))
    return PriorSamples(*stats.draw(cfg.scenario_for(m1, m2).geometry, rng))


def rmse_trial(args) -> dict:
    """One trial of one geometry over the whole SNR grid.

    Errors are collected for every user of the centre cell and every path.
    """
    cfg, (m1, m2), trial = args
    sc_cfg = cfg.scenario_for(m1, m2)
    geo = sc_cfg.geometry
    rng = trial_rng(cfg.seed, trial)
    scenario = draw_scenario(sc_cfg, rng)
    pilots = build_pilot_book(sc_cfg.users_per_cell, sc_cfg.nt, cfg.pilots.pilot_length, cfg.pilots.rho1)
    z0 = uplink_rx(scenario, pilots, 0, 0, 0.0)
    noise = complex_gaussian(rng, z0.shape, 1.0)
    J, L = sc_cfg.users_per_cell, sc_cfg.num_paths
    u_all, v_all, _ = scenario.frequencies()
    u_t, v_t = u_all[:, 0, 0], v_all[:, 0, 0]
    theta_t, phi_t = scenario.elevation[:, 0, 0], np.abs(scenario.azimuth[:, 0, 0])

    samples = _prior_samples(cfg, m1, m2) if cfg.estimation.mse_expectation == "prior" else None
    comp = np.zeros((2, len(COMPONENTS), J, L))  # [axis, component] at unit noise power
    for n in range(J):
        b = mse_breakdown(scenario, (n, 0), cfg.pilots.rho1, 1.0, samples=samples,
                          noise_convention=cfg.estimation.noise_convention)
        for a, axis in enumerate(("u", "v")):
            for c, name in enumerate(COMPONENTS):
                comp[a, c, n] = b.get(axis, name)

    S = len(cfg.sweep.snr_db)
    out = {k: np.zeros((S, J, L)) for k in ("du2", "dv2", "dtheta2", "dphi2", "oom",
                                            "ana_u", "ana_v", "ana_theta", "ana_phi")}
    noise_idx = COMPONENTS.index("noise")
    for s, snr in enumerate(cfg.sweep.snr_db):
        sigma2 = cfg.sigma2(snr)
        z = z0 + math.sqrt(sigma2) * noise if sigma2 > 0 else z0
        for n in range(J):
            est = estimate_doa(despread(z, pilots, (n, 0)), geo, L, pairing=cfg.estimation.pairing)
            perm, du, dv = match_paths((u_t[n], v_t[n]), est)
            out["du2"][s, n], out["dv2"][s, n] = du ** 2, dv ** 2
            out["dtheta2"][s, n] = DEG2 * (est.theta[perm] - theta_t[n]) ** 2
            out["dphi2"][s, n] = DEG2 * (est.phi[perm] - phi_t[n]) ** 2
            out["oom"][s, n] = est.out_of_manifold[perm]
        scale = np.ones(len(COMPONENTS))
        scale[noise_idx] = sigma2
        mu = np.tensordot(scale, comp[0], axes=(0, 0))
        mv = np.tensordot(scale, comp[1], axes=(0, 0))
        out["ana_u"][s], out["ana_v"][s] = mu, mv
        # the Jacobian is singular at broadside azimuth; those paths get no prediction
        ok = (np.abs(np.sin(theta_t)) >= 1e-3) & (np.abs(np.sin(phi_t)) >= 1e-3)
        out["ana_theta"][s], out["ana_phi"][s] = np.nan, np.nan
        mt, mp = angle_mse_from_frequency_mse(mu[ok], mv[ok], theta_t[ok], phi_t[ok], geo.rx_spacing_ratio)
        out["ana_theta"][s][ok], out["ana_phi"][s][ok] = DEG2 * mt, DEG2 * mp
    out["components"] = comp
    return out


RMSE_COLUMNS = {
    "m1": "BS elements along elevation",
    "m2": "BS elements along azimuth",
    "snr_db": "pilot SNR in dB (inf = noiseless)",
    "rmse_theta_deg": "empirical elevation RMSE in degrees over trials, centre-cell users and paths",
    "rmse_phi_deg": "empirical azimuth RMSE in degrees (azimuth compared as |phi|)",
    "rmse_theta_analytic_deg": "closed-form elevation RMSE in degrees after the Jacobian conversion"
                               " (paths with |sin(phi)| < 1e-3 skipped)",
    "rmse_phi_analytic_deg": "closed-form azimuth RMSE in degrees after the Jacobian conversion (same paths)",
    "mse_u": "empirical MSE of the elevation spatial frequency u (rad^2)",
    "mse_v": "empirical MSE of the azimuth spatial frequency v (rad^2)",
    "mse_u_analytic": "closed-form MSE of u, sum of pilot, intra, inter and noise parts",
    "mse_v_analytic": "closed-form MSE of v, sum of pilot, intra, inter and noise parts",
    **{f"mse_{a}_{c}": f"closed-form {c} part of the MSE of {a}" for a in ("u", "v") for c in COMPONENTS},
    "mse_u_halfwidth": "95% half-width of mse_u",
    "mse_v_halfwidth": "95% half-width of mse_v",
    "median_ratio_u": "median over estimates of squared u error over its closed-form MSE (empty if undefined)",
    "median_ratio_v": "median over estimates of squared v error over its closed-form MSE (empty if undefined)",
    "out_of_manifold": "number of estimates whose (u, v) fell outside the visible region (kept in the RMSE)",
}


def _median_ratio(err2: np.ndarray, analytic: np.ndarray):
    """Median of ``err2 / analytic`` over entries with a positive prediction; ``None`` if there are none."""
    keep = analytic > 0
    return float(np.median(err2[keep] / analytic[keep])) if keep.any() else None


def _stack(parts: list[dict]) -> dict:
    return {k: np.stack([p[k] for p in parts]) for k in parts[0]}


def run_rmse_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    cfg.validate()
    geos = cfg.geometries()
    args = [(cfg, geo, t) for geo in geos for t in range(cfg.trials)]
    parts = _map(rmse_trial, args, threads)
    rows, raw = [], {}
    for gi, (m1, m2) in enumerate(geos):
        r = _stack(parts[gi * cfg.trials:(gi + 1) * cfg.trials])
        raw[(m1, m2)] = r
        for s, snr in enumerate(cfg.sweep.snr_db):
            du2, dv2 = r["du2"][:, s], r["dv2"][:, s]
            au, av = r["ana_u"][:, s], r["ana_v"][:, s]
            sigma2 = cfg.sigma2(snr)
            comps = {}
            for a, axis in enumerate(("u", "v")):
                for c, name in enumerate(COMPONENTS):
                    val = r["components"][:, a, c]
                    comps[f"mse_{axis}_{name}"] = float(np.mean(val * (sigma2 if name == "noise" else 1.0)))
            ratio_u, ratio_v = _median_ratio(du2, au), _median_ratio(dv2, av)
            row = {
                "m1": m1, "m2": m2, "snr_db": snr,
                "rmse_theta_deg": math.sqrt(np.mean(r["dtheta2"][:, s])),
                "rmse_phi_deg": math.sqrt(np.mean(r["dphi2"][:, s])),
                "rmse_theta_analytic_deg": math.sqrt(np.nanmean(r["ana_theta"][:, s])),
                "rmse_phi_analytic_deg": math.sqrt(np.nanmean(r["ana_phi"][:, s])),
                "mse_u": float(np.mean(du2)), "mse_v": float(np.mean(dv2)),
                "mse_u_analytic": float(np.mean(au)), "mse_v_analytic": float(np.mean(av)),
                **comps,
                "mse_u_halfwidth": float(_half_width(du2.reshape(cfg.trials, -1).mean(axis=1))),
                "mse_v_halfwidth": float(_half_width(dv2.reshape(cfg.trials, -1).mean(axis=1))),
                "median_ratio_u": ratio_u, "median_ratio_v": ratio_v,
                "out_of_manifold": int(r["oom"][:, s].sum()),
            }
            rows.append([row[c] for c in RMSE_COLUMNS])
    return ExperimentResult("rmse", list(RMSE_COLUMNS), rows, dict(RMSE_COLUMNS), cfg, raw)


# ---------------------------------------------------------------------------
# Sum rate
# ---------------------------------------------------------------------------

def sumrate_trial(args) -> np.ndarray:
    """Centre-cell sum rate of every strategy at every SNR: ``(S, strategies)``."""
    cfg, trial = args
    pc = cfg.precoding
    rng = trial_rng(cfg.seed, trial)
    scenario = draw_scenario(cfg.scenario, rng)
    G = scenario.cells
    pilots = build_pilot_book(scenario.users_per_cell, scenario.geometry.nt, cfg.pilots.pilot_length, cfg.pilots.rho1)
    z0 = [uplink_rx(scenario, pilots, g, 0, 0.0) for g in range(G)]
    noise = [complex_gaussian(rng, z.shape, 1.0) for z in z0]
    served = None
    if pc.doa_mode == "estimated":
        samples = None
        if pc.mse_expectation == "prior":
            geo = scenario.geometry
            samples = _prior_samples(cfg, geo.m1, geo.m2)
        served = ServedMse.from_scenario(scenario, cfg.pilots.rho1, samples, cfg.estimation.noise_convention)
    out = np.zeros((len(cfg.sweep.snr_db), len(pc.strategies)))
    for s, snr in enumerate(cfg.sweep.snr_db):
        sigma2 = cfg.sigma2(snr)
        knowledge = None
        if served is not None:
            obs = [z + math.sqrt(sigma2) * w for z, w in zip(z0, noise)]
            u_hat, v_hat = estimate_served_paths(obs, scenario, pilots, cfg.estimation.pairing)
            knowledge = served.knowledge(u_hat, v_hat, sigma2)
        for a, strategy in enumerate(pc.strategies):
            rates = [sum_rate(scenario, strategy, sigma2, pc.p_t, pc.doa_mode, knowledge, pc.rate_mode,
                              k=k, max_streams=pc.max_streams).sum_rate for k in pc.subcarriers]
            out[s, a] = np.mean(rates)
    return out


def run_sumrate_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    cfg.validate()
    parts = _map(sumrate_trial, [(cfg, t) for t in range(cfg.trials)], threads)
    rates = np.stack(parts)  # (T, S, strategies)
    strategies = list(cfg.precoding.strategies)
    docs = {"snr_db": "SNR in dB"}
    for st in strategies:
        docs[f"{st}_mean"] = f"mean centre-cell sum rate of {st} (bit/s/Hz)"
        docs[f"{st}_halfwidth"] = f"95% half-width of {st}_mean"
    mean, hw = rates.mean(axis=0), _half_width(rates)
    rows = []
    for s, snr in enumerate(cfg.sweep.snr_db):
        row = [snr]
        for a in range(len(strategies)):
            row += [float(mean[s, a]), float(hw[s, a])]
        rows.append(row)
    return ExperimentResult("sumrate", list(docs), rows, docs, cfg, {"rates": rates, "strategies": strategies})


# ---------------------------------------------------------------------------
# FLOP models
# ---------------------------------------------------------------------------

FLOPS_COLUMNS = {
    "side": "square array side (m1 = m2)",
    "n_r": "BS antennas",
    "esprit": "FLOPs of the ESPRIT estimator",
    "music": "FLOPs of 2-D MUSIC",
    "doa_precoder": "FLOPs of the DoA-based precoder",
    "bd": "FLOPs of block diagonalisation",
}


def run_complexity_sweep(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    cfg.validate()
    sc = cfg.scenario
    base = FlopModelInput(q=cfg.pilots.pilot_length, m1=sc.m1, m2=sc.m2, n_t=sc.nt, l=sc.num_paths,
                          j=sc.users_per_cell, n_g=cfg.complexity.music_grid, l_tilde=cfg.complexity.l_tilde)
    rows = []
    for side in cfg.sweep.antenna_sides:
        x = base.square(int(side))
        rows.append([int(side), x.n_r, flops_esprit(x), flops_music(x), flops_doa_precoder(x), flops_bd(x)])
    return ExperimentResult("flops", list(FLOPS_COLUMNS), rows, dict(FLOPS_COLUMNS), cfg)


RUNNERS = {"rmse": run_rmse_experiment, "sumrate": run_sumrate_experiment, "flops": run_complexity_sweep}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    result = RUNNERS[cfg.kind](cfg, threads)
    for row in result.rows:
        for x in row:
            # None marks an undefined statistic; +inf only appears as the noiseless SNR label
            if isinstance(x, float) and not math.isfinite(x) and x != math.inf:
                raise NumericError(f"non-finite value in {cfg.kind} output: {row}")
    return result
