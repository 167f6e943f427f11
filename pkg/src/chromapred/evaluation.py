"""Per-block evaluation of the network against the linear baseline.

MSE is computed on normalized samples; PSNR is reported against the
10-bit peak (equivalently, the normalized peak of 1.0) and capped at
100 dB so exact predictions do not produce infinities.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .blocks import BlockSample, assemble_inputs, required_chroma_format
from .cclm import predict_block
from .model import ModelConfig, forward
from .optim import Params

PSNR_CAP = 100.0

COMPARISON_COLUMNS = (
    "variant", "block_size", "count",
    "nn_mse", "lm_mse", "mse_rel_change",
    "nn_psnr", "lm_psnr", "psnr_delta",
)


def psnr_from_mse(mse: float) -> float:
    """PSNR in dB for a normalized-domain MSE, capped at 100."""
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * math.log10(mse))


@dataclass
class BlockRecord:
    index: int
    n: int
    origin: tuple[int, int]
    nn_mse_cb: float
    nn_mse_cr: float
    lm_mse_cb: float
    lm_mse_cr: float

    @property
    def nn_mse(self) -> float:
        return 0.5 * (self.nn_mse_cb + self.nn_mse_cr)

    @property
    def lm_mse(self) -> float:
        return 0.5 * (self.lm_mse_cb + self.lm_mse_cr)

    @property
    def nn_psnr(self) -> float:
        return 0.5 * (psnr_from_mse(self.nn_mse_cb) + psnr_from_mse(self.nn_mse_cr))

    @property
    def lm_psnr(self) -> float:
        return 0.5 * (psnr_from_mse(self.lm_mse_cb) + psnr_from_mse(self.lm_mse_cr))


@dataclass
class EvalReport:
    variant: str
    fingerprint: dict
    records: list[BlockRecord]
    aggregates: dict = field(default_factory=dict)
    mode_counts: dict = field(default_factory=dict)


def dataset_fingerprint(samples: list[BlockSample]) -> dict:
    """Identity of an evaluation set: count, size histogram, target digest."""
    digest = hashlib.sha256()
    histogram: dict[int, int] = {}
    for s in samples:
        histogram[s.n] = histogram.get(s.n, 0) + 1
        digest.update(np.ascontiguousarray(s.target_cb, dtype="<f4").tobytes())
        digest.update(np.ascontiguousarray(s.target_cr, dtype="<f4").tobytes())
    return {
        "count": len(samples),
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
        "target_sha256": digest.hexdigest(),
    }


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))


def aggregate_records(records: list[BlockRecord]) -> dict:
    """Mean per-predictor metrics plus the per-block-best (oracle) MSE."""
    nn = np.array([r.nn_mse for r in records])
    lm = np.array([r.lm_mse for r in records])
    return {
        "count": len(records),
        "nn_mse": float(nn.mean()),
        "lm_mse": float(lm.mean()),
        "nn_mse_cb": float(np.mean([r.nn_mse_cb for r in records])),
        "nn_mse_cr": float(np.mean([r.nn_mse_cr for r in records])),
        "lm_mse_cb": float(np.mean([r.lm_mse_cb for r in records])),
        "lm_mse_cr": float(np.mean([r.lm_mse_cr for r in records])),
        "nn_psnr": float(np.mean([r.nn_psnr for r in records])),
        "lm_psnr": float(np.mean([r.lm_psnr for r in records])),
        "oracle_mse": float(np.minimum(nn, lm).mean()),
    }


def evaluate(params: Params, config: ModelConfig,
             samples: list[BlockSample]) -> EvalReport:
    """Run both predictors over every block and build the report."""
    if not samples:
        raise ValueError("empty evaluation set")
    fmt = required_chroma_format(config.variant)
    bad = {s.chroma_format for s in samples} - {fmt}
    if bad:
        raise ValueError(
            f"dataset holds {sorted(bad)} samples but variant "
            f"{config.variant!r} consumes {fmt}"
        )
    records: list[BlockRecord] = []
    counts = {"nn": 0, "lm": 0}
    for i, sample in enumerate(samples):
        s, x = assemble_inputs(sample, config.variant)
        pred = forward(params, config, s, x, clamp=True)
        lm_cb, lm_cr = predict_block(sample)
        rec = BlockRecord(
            index=i,
            n=sample.n,
            origin=sample.origin,
            nn_mse_cb=_mse(pred[:, :, 0], sample.target_cb),
            nn_mse_cr=_mse(pred[:, :, 1], sample.target_cr),
            lm_mse_cb=_mse(lm_cb, sample.target_cb),
            lm_mse_cr=_mse(lm_cr, sample.target_cr),
        )
        records.append(rec)
        # Ties go to the cheaper linear model.
        if rec.nn_mse < rec.lm_mse:
            counts["nn"] += 1
        else:
            counts["lm"] += 1
    aggregates = {"overall": aggregate_records(records)}
    for n in sorted({r.n for r in records}):
        aggregates[str(n)] = aggregate_records([r for r in records if r.n == n])
    return EvalReport(
        variant=config.variant,
        fingerprint=dataset_fingerprint(samples),
        records=records,
        aggregates=aggregates,
        mode_counts=counts,
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "variant": report.variant,
        "fingerprint": report.fingerprint,
        "mode_counts": report.mode_counts,
        "aggregates": report.aggregates,
        "records": [asdict(r) for r in report.records],
    }


def report_from_dict(data: dict) -> EvalReport:
    records = [BlockRecord(**{**r, "origin": tuple(r["origin"])})
               for r in data["records"]]
    return EvalReport(
        variant=data["variant"],
        fingerprint=data["fingerprint"],
        records=records,
        aggregates=data["aggregates"],
        mode_counts=data["mode_counts"],
    )


def save_report(report: EvalReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)


def load_report(path) -> EvalReport:
    with open(path) as f:
        return report_from_dict(json.load(f))


def compare(reports: list[EvalReport]) -> list[dict]:
    """Comparison rows (one per variant and block size, plus overall).

    All reports must have been produced on the same dataset; the stored
    fingerprints are required to match.
    """
    if not reports:
        raise ValueError("no reports to compare")
    first = reports[0].fingerprint
    for r in reports[1:]:
        if r.fingerprint != first:
            raise ValueError(
                f"reports for {reports[0].variant!r} and {r.variant!r} "
                "were produced on different datasets"
            )
    rows = []
    for report in reports:
        keys = [k for k in report.aggregates if k != "overall"]
        for key in sorted(keys, key=int) + ["overall"]:
            agg = report.aggregates[key]
            rows.append({
                "variant": report.variant,
                "block_size": key,
                "count": agg["count"],
                "nn_mse": agg["nn_mse"],
                "lm_mse": agg["lm_mse"],
                "mse_rel_change": (agg["nn_mse"] - agg["lm_mse"]) / agg["lm_mse"]
                                  if agg["lm_mse"] > 0 else 0.0,
                "nn_psnr": agg["nn_psnr"],
                "lm_psnr": agg["lm_psnr"],
                "psnr_delta": agg["nn_psnr"] - agg["lm_psnr"],
            })
    return rows


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARISON_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def save_comparison(rows: list[dict], json_path, csv_path) -> None:
    with open(json_path, "w") as f:
        json.dump(rows, f, indent=2)
    with open(csv_path, "w") as f:
        f.write(comparison_csv(rows))
