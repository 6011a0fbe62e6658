import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from artifact_store import ArtifactStore
from config import ExperimentConfig, ModelDocument, Settings, get_settings
from core_model import (
    Channel, DistortionMatrix, Sequence, bsc, derive_seed, difference_distortion, dms_sequence, hamming,
    identity_channel, make_rng, model_from_document,
)
from empirical import block_empirical, dms_block_distribution, join_with_channel
from errors import ConfigError
from fsm_search import SearchGrid, operational_optimum, operational_profile
from growth_experiments import converse_process_generate, theta_sweep, wrapper_encode
from sr_region import TwoSidedChannel, brute_force_sr_region, join_two_sided
from universal_codec import CodecConfig, EncodedStream, decode_stream, encode_stream
from wz_solver import BRUTE_FORCE_BLOCKS, RdCurve, brute_force_drf, default_lambda_grid, drf_curve

logger = logging.getLogger(__name__)

# Labels for seeds derived from the master seed.
SEED_DRF = "drf"
SEED_CODEC = "codec-solver"
SEED_GEN = "gen"
SEED_CHECK_SAMPLE = "theorem1-sample"
SEED_CHECK_SOLVER = "theorem1-solver"

CURVE_COLUMNS = ["lambda", "rate", "distortion", "on_hull"]
SWEEP_COLUMNS = ["n", "M_n", "header_bits", "header_bits_per_n"]
REGION_COLUMNS = ["D1", "D2", "HU", "HVgU"]
CHECK_COLUMNS = ["crossover", "x", "block", "rate", "states", "delay", "operational", "bound", "ok"]


def curve_rows(curve: RdCurve) -> List[Dict[str, Any]]:
    ordered = sorted(curve.points, key=lambda p: (p.rate, p.distortion, p.lam if not math.isnan(p.lam) else -1.0))
    return [{"lambda": None if math.isnan(p.lam) else p.lam, "rate": p.rate, "distortion": p.distortion,
             "on_hull": curve.on_hull(p)} for p in ordered]


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


class ExperimentManager:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def _store(self, cfg: ExperimentConfig) -> ArtifactStore:
        return ArtifactStore(cfg.out_dir or self.settings.out_dir)

    def _seed(self, cfg: ExperimentConfig) -> int:
        return self.settings.seed if cfg.seed is None else cfg.seed

    def _budget(self, cfg: ExperimentConfig) -> int:
        return self.settings.budget if cfg.budget is None else cfg.budget

    def _model(self, cfg: ExperimentConfig) -> Tuple[Channel, DistortionMatrix, Optional[Sequence]]:
        return model_from_document(cfg.model)

    def _sequence(self, cfg: ExperimentConfig) -> Sequence:
        _, _, x = self._model(cfg)
        if x is None:
            raise ConfigError(f"experiment '{cfg.kind}' needs 'model.sequence'")
        return x

    def run_experiment(self, cfg: ExperimentConfig) -> Dict[str, Any]:
        """Runs the named experiment, writes its artifacts and returns a summary."""
        runners = {
            "drf": self.run_drf,
            "fsm-opt": self.run_fsm_opt,
            "codec": self.run_codec,
            "growth": self.run_growth,
            "sr": self.run_sr,
            "gen": self.run_gen,
            "theorem1-check": self.run_lower_bound_check,
        }
        store = self._store(cfg)
        logger.info("Running %s experiment", cfg.kind)
        summary = runners[cfg.kind](cfg, store)
        summary["kind"] = cfg.kind
        summary["artifacts"] = [p.name for p in store.written]
        store.write_json("summary.json", summary)
        return summary

    # --- drf ---

    def run_drf(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.drf
        ch, rho, x = self._model(cfg)
        if params.dms:
            block = dms_block_distribution(params.dms, params.block)
        elif x is not None:
            block = block_empirical(x, params.block)
        else:
            raise ConfigError("drf needs 'model.sequence' or 'drf.dms'")
        joint = join_with_channel(block, ch, self.settings.table_cap)
        usize = params.usize or block.size + 1
        lambdas = params.lambdas or default_lambda_grid(params.lambda_count)
        curve = drf_curve(joint, lambdas, usize, derive_seed(self._seed(cfg), SEED_DRF), params.restarts, rho)
        rows = curve_rows(curve)
        store.write_csv("drf.csv", CURVE_COLUMNS, rows)
        return {"points": len(rows), "hull_vertices": len(curve.hull),
                "hull": [[p.rate, p.distortion] for p in curve.hull]}

    # --- fsm-opt ---

    def _grid(self, cfg: ExperimentConfig, states: int, delay: int, lmax: int) -> SearchGrid:
        doc: ModelDocument = cfg.model
        return SearchGrid(states, delay, lmax, doc.alphabet_x, doc.alphabet_y, doc.alphabet_xhat, self._budget(cfg))

    def run_fsm_opt(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.fsm_opt
        ch, rho, _ = self._model(cfg)
        x = self._sequence(cfg)
        grid = self._grid(cfg, params.states, params.delay, params.lmax)
        result = operational_optimum(x, params.rate, grid, ch, rho)
        store.write_json("fsm_opt.json", result.to_dict())
        return {"distortion": result.distortion if result.feasible else None, "bits": result.bits,
                "feasible": result.feasible}

    # --- codec ---

    def codec_config(self, cfg: ExperimentConfig) -> CodecConfig:
        params = cfg.codec
        ch, rho, _ = self._model(cfg)
        solver_seed = params.solver_seed or derive_seed(self._seed(cfg), SEED_CODEC)
        return CodecConfig(params.block, params.rate, ch, rho, params.usize, params.lambda_count, params.restarts,
                           solver_seed, params.time_sharing, self._seed(cfg), self.settings.table_cap)

    def run_codec(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.codec
        codec_cfg = self.codec_config(cfg)
        if params.action == "encode":
            x = self._sequence(cfg)
            stream, design = encode_stream(x, codec_cfg)
            store.write_bytes("codec.bin", stream.to_bytes())
            return {"n": stream.n, "total_bits": stream.total_bits, "header_bits": stream.header_bits,
                    "rate": stream.total_bits / stream.n, "design_rate": design.primary.point.rate,
                    "design_distortion": design.primary.point.distortion, "fingerprint": design.fingerprint()}
        if params.stream is None or params.sideinfo is None:
            raise ConfigError("codec decode needs 'codec.stream' and 'codec.sideinfo'")
        y = Sequence.of(params.sideinfo, codec_cfg.channel.output_size)
        data = Path(params.stream).read_bytes()
        stream = EncodedStream.from_bytes(data, len(y), codec_cfg.block_length, codec_cfg.alpha)
        xh, design = decode_stream(stream, y, codec_cfg)
        store.write_json("decoded.json", {"sequence": xh.tolist()})
        return {"n": len(xh), "fingerprint": design.fingerprint()}

    # --- growth ---

    def run_growth(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.growth
        if params.action == "sweep":
            doc = cfg.model
            sizes = (doc.alphabet_x, doc.alphabet_y, doc.alphabet_xhat) if doc else (2, 2, 2)
            rows = theta_sweep(params.theta, sorted(params.ns), *sizes)
            store.write_csv("growth_sweep.csv", SWEEP_COLUMNS, [
                {"n": r.n, "M_n": r.states, "header_bits": r.header_bits, "header_bits_per_n": r.normalized}
                for r in rows])
            return {"theta": params.theta, "rows": len(rows)}
        ch, rho, _ = self._model(cfg)
        x = self._sequence(cfg)
        grid = self._grid(cfg, params.states, params.delay, params.lmax)
        stream = wrapper_encode(x, params.rate, params.dist, grid, ch, rho)
        store.write_bytes("wrapper.bin", stream.bits.data)
        return {"total_bits": stream.total_bits, "header_bits": stream.header_bits,
                "delay_bits": stream.delay_bits, "distortion": stream.distortion,
                "decoder": stream.decoder.to_dict()}

    # --- sr ---

    def run_sr(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.sr
        _, rho, _ = self._model(cfg)
        x = self._sequence(cfg)
        channel3 = TwoSidedChannel.of(params.channel3)
        rho2 = hamming(cfg.model.alphabet_x) if params.distortion2 == "hamming" else DistortionMatrix.of(params.distortion2)
        joint3 = join_two_sided(block_empirical(x, params.block), channel3, self.settings.table_cap)
        region = brute_force_sr_region(joint3, params.rate, params.delta_rate, rho, rho2, params.u_cap, params.v_cap)
        store.write_csv("sr_region.csv", REGION_COLUMNS, [p.to_row() for p in region.frontier])
        return {"frontier": len(region.frontier), "hull": [[p.d1, p.d2] for p in region.hull_frontier]}

    # --- gen ---

    def run_gen(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        params = cfg.gen
        seed = derive_seed(self._seed(cfg), SEED_GEN)
        if params.action == "converse":
            rho0 = params.rho0 or [0.0, 1.0]
            proc = converse_process_generate(params.m, params.blocks, params.rate, params.delta, rho0, seed)
            alpha = len(rho0)
            doc = {"alphabet_x": alpha, "alphabet_y": alpha, "alphabet_xhat": alpha,
                   "channel": np.eye(alpha).tolist(), "distortion": difference_distortion(rho0).table.tolist(),
                   "sequence": proc.x.tolist()}
            store.write_json("converse_model.json", doc)
            store.write_json("converse_codebook.json", {"codebook": proc.codebook.tolist(),
                                                        "choices": proc.choices.tolist()})
            return {"n": len(proc.x), "codebook_size": len(proc.codebook)}
        x = dms_sequence(params.p, params.n, seed)
        alpha = len(params.p)
        if cfg.model is not None:
            doc = cfg.model.model_dump()
        else:
            doc = {"alphabet_x": alpha, "alphabet_y": alpha, "alphabet_xhat": alpha,
                   "channel": np.eye(alpha).tolist(), "distortion": "hamming"}
        doc["sequence"] = x.tolist()
        store.write_json("dms_model.json", doc)
        return {"n": len(x)}

    # --- theorem1-check ---

    def _check_sequences(self, cfg: ExperimentConfig) -> List[int]:
        params = cfg.theorem1
        total = 2**params.length
        if params.sample is None or params.sample >= total:
            return list(range(total))
        rng = make_rng(derive_seed(self._seed(cfg), SEED_CHECK_SAMPLE))
        return sorted(int(v) for v in rng.choice(total, size=params.sample, replace=False))

    def _check_curve(self, x: Sequence, block: int, ch: Channel, rho: DistortionMatrix, seed: int,
                     cfg: ExperimentConfig) -> RdCurve:
        params = cfg.theorem1
        joint = join_with_channel(block_empirical(x, block), ch, self.settings.table_cap)
        usize = joint.block.size + 1
        if np.count_nonzero(joint.marginal) <= BRUTE_FORCE_BLOCKS:
            return brute_force_drf(joint, usize, rho)
        return drf_curve(joint, default_lambda_grid(params.lambda_count), usize, seed, params.restarts, rho)

    def run_lower_bound_check(self, cfg: ExperimentConfig, store: ArtifactStore) -> Dict[str, Any]:
        """Operational optimum against the informational curve minus the state and delay redundancies."""
        params = cfg.theorem1
        rho = hamming(2)
        grid = SearchGrid(params.states, params.delay, params.lmax, 2, 2, 2, self._budget(cfg))
        solver_seed = derive_seed(self._seed(cfg), SEED_CHECK_SOLVER)
        rows, violations, mismatches = [], 0, 0
        for crossover in params.crossovers:
            ch = identity_channel(2) if crossover == 0 else bsc(crossover)
            curves: Dict[Tuple[int, bytes], RdCurve] = {}
            for value in self._check_sequences(cfg):
                x = Sequence.from_string(format(value, f"0{params.length}b"))
                profile = operational_profile(x, grid, ch, rho)
                single = block_empirical(x, 1)
                key = (1, single.counts.tobytes())
                if key not in curves:
                    curves[key] = brute_force_drf(join_with_channel(single, ch), 3, rho)
                if abs(curves[key].query(0.0) - profile.optimum(0.0, 1, 0).distortion) > 1e-9:
                    mismatches += 1
                    logger.warning("Zero-rate mismatch for x=%s, crossover %g", x, crossover)
                for block in params.blocks:
                    if params.length % block:
                        continue
                    key = (block, block_empirical(x, block).counts.tobytes())
                    if key not in curves:
                        curves[key] = self._check_curve(x, block, ch, rho, solver_seed, cfg)
                    curve = curves[key]
                    for rate in params.rates:
                        for states in range(1, params.states + 1):
                            for delay in range(params.delay + 1):
                                lhs = profile.optimum(rate, states, delay).distortion
                                bound = curve.query(rate + 2 * math.log2(states) / block) - rho.rho_max * delay / block
                                ok = lhs >= bound - 1e-9
                                violations += not ok
                                rows.append({"crossover": crossover, "x": str(x), "block": block, "rate": rate,
                                             "states": states, "delay": delay, "operational": _finite(lhs),
                                             "bound": _finite(bound), "ok": ok})
            logger.info("Crossover %g: %d distinct curves", crossover, len(curves))
        store.write_csv("theorem1.csv", CHECK_COLUMNS, rows)
        return {"instances": len(rows), "violations": violations, "zero_rate_mismatches": mismatches,
                "passed": violations == 0 and mismatches == 0}
