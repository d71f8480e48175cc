"""Protocol-driven evaluation, reporting, and greedy stage-wise search."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chrom import ChromParams, chrom_pulse
from .errors import (
    AggregateUndefinedError,
    SearchFailedError,
    SplitOverlapError,
)
from .hr import GroundTruthHr, detect_peaks, estimate_hr_spectral, hr_from_peaks
from .io import (
    FrameSequence,
    ProtocolIndex,
    RoiTrack,
    read_ground_truth,
    read_physio_csv,
    read_roi_track,
    read_rvid,
)
from .licvpr import LiParams, background_trace, licvpr_pulse
from .roi import fit_skin_model, iter_roi_pixels, mean_rgb_trace
from .signals import BandHz, PulseSignal, Signal1D, pearson, rmse
from .ssr import SsrParams, ssr_pulse
from .synth import BUNDLE_FILES

__all__ = [
    "SequenceBundle",
    "SequenceResult",
    "EvalReport",
    "SearchStage",
    "SearchResult",
    "ALGORITHMS",
    "REFERENCE_RESULTS",
    "build_params",
    "load_bundle",
    "extract_pulse",
    "evaluate",
    "greedy_search",
    "emit_report",
    "read_report",
    "read_report_csv",
]

#: Band searched when estimating bpm for methods that do not band-pass
#: internally (the subspace-rotation extractor).
DEFAULT_ESTIMATION_BAND = BandHz(0.67, 4.0)


# ---------------------------------------------------------------------------
# reference results from the literature
# ---------------------------------------------------------------------------

#: Published results of these three baselines on the access-gated video
#: corpora. They document where each method landed historically and are kept
#: for comparison only; reproducing them requires datasets this artifact
#: cannot ship. Keys: corpus/protocol -> algorithm -> metric.
REFERENCE_RESULTS = {
    # 527 usable sequences, frames 306..2135 of each recording.
    "mahnob-527": {
        "licvpr": {"rmse_bpm": 8.12, "pearson_rho": 0.70},
        "chrom": {"rmse_bpm": 15.40, "pearson_rho": 0.33},
        "ssr": {"rmse_bpm": 18.4, "pearson_rho": 0.43},
    },
    # Subject-disjoint train/test split of the same corpus, Pearson rho.
    "mahnob-split": {
        "licvpr": {"train": 0.49, "test": 0.45},
        "chrom": {"train": 0.15, "test": 0.14},
        "ssr": {"train": 0.17, "test": 0.05},
    },
    "cohface-studio": {
        "licvpr": {"train": -0.16, "test": -0.61},
        "chrom": {"train": 0.23, "test": 0.43},
        "ssr": {"train": 0.07, "test": -0.31},
    },
    # Parameters tuned on one corpus, tested on the other.
    "cross-database": {
        "licvpr": {"mahnob_to_cohface": -0.20, "cohface_to_mahnob": 0.25},
        "chrom": {"mahnob_to_cohface": 0.51, "cohface_to_mahnob": 0.10},
        "ssr": {"mahnob_to_cohface": -0.15, "cohface_to_mahnob": 0.00},
    },
    # Studio-tuned parameters applied to the natural-light test set.
    "cohface-natural-mismatch": {
        "licvpr": {"test": -0.24},
        "chrom": {"test": -0.03},
        "ssr": {"test": 0.00},
    },
    # Pixel-selection comparison on the studio test set, Pearson rho.
    "cohface-roi": {
        "licvpr": {"bbox": -0.29, "skin": -0.16, "mask": -0.44},
        "chrom": {"bbox": 0.30, "skin": 0.27, "mask": 0.30},
        "ssr": {"bbox": 0.26, "skin": 0.09, "mask": 0.65},
    },
}


# ---------------------------------------------------------------------------
# per-sequence pipelines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceBundle:
    """One sequence's files loaded for processing."""

    sequence: FrameSequence
    roi: RoiTrack
    directory: Path


def load_bundle(dataset_root, sequence_id: str) -> SequenceBundle:
    directory = Path(dataset_root) / sequence_id
    video = directory / BUNDLE_FILES["video"]
    if not video.exists():
        raise FileNotFoundError(str(video))
    sequence = read_rvid(video, sequence_id=sequence_id)
    roi_path = directory / BUNDLE_FILES["roi"]
    if not roi_path.exists():
        raise FileNotFoundError(str(roi_path))
    roi = read_roi_track(roi_path, sequence.width, sequence.height)
    return SequenceBundle(sequence=sequence, roi=roi, directory=directory)


def load_ground_truth(bundle: SequenceBundle) -> GroundTruthHr:
    """Ground truth for a bundle: the recorded value, else beats of the BVP."""
    gt_path = bundle.directory / BUNDLE_FILES["ground_truth"]
    if gt_path.exists():
        return read_ground_truth(gt_path)
    bvp = read_physio_csv(
        bundle.directory / BUNDLE_FILES["physio"],
        bundle.directory / BUNDLE_FILES["physio_meta"],
    )
    peaks = detect_peaks(bvp.as_signal())
    return GroundTruthHr(bpm=hr_from_peaks(peaks, bvp.fs).bpm, source="peaks")


def _maybe_skin_model(bundle: SequenceBundle, strategy: str, tau: float):
    if strategy != "skin":
        return None
    first_entry = bundle.roi.entry_for(0)
    return fit_skin_model(bundle.sequence.frames[0], first_entry, tau)


def pulse_chrom(bundle: SequenceBundle, params: ChromParams) -> PulseSignal:
    model = _maybe_skin_model(bundle, params.strategy, params.skin_tau)
    trace = mean_rgb_trace(bundle.sequence, bundle.roi, params.strategy, model)
    return chrom_pulse(trace, params)


def pulse_licvpr(bundle: SequenceBundle, params: LiParams) -> PulseSignal:
    model = _maybe_skin_model(bundle, params.strategy, params.skin_tau)
    trace = mean_rgb_trace(bundle.sequence, bundle.roi, params.strategy, model)
    green = Signal1D(trace.channel(1), trace.fs)
    if params.rectify:
        background = background_trace(bundle.sequence, bundle.roi, params.background_margin)
    else:
        background = Signal1D(np.zeros(len(green)), green.fs)
    return licvpr_pulse(green, background, params)


def pulse_ssr(bundle: SequenceBundle, params: SsrParams) -> PulseSignal:
    model = _maybe_skin_model(bundle, params.strategy, params.skin_tau)
    pixels = []
    fallbacks = 0
    for frame_pixels, fallback in iter_roi_pixels(bundle.sequence, bundle.roi, params.strategy, model):
        pixels.append(frame_pixels)
        fallbacks += int(fallback)
    return ssr_pulse(
        pixels,
        params,
        fps=bundle.sequence.fps_float,
        fallback_fraction=fallbacks / len(pixels),
    )


def _estimation_band(params) -> BandHz:
    return getattr(params, "band", DEFAULT_ESTIMATION_BAND)


def run_chrom(bundle: SequenceBundle, params: ChromParams) -> float:
    return estimate_hr_spectral(pulse_chrom(bundle, params), _estimation_band(params)).bpm


def run_licvpr(bundle: SequenceBundle, params: LiParams) -> float:
    return estimate_hr_spectral(pulse_licvpr(bundle, params), _estimation_band(params)).bpm


def run_ssr(bundle: SequenceBundle, params: SsrParams) -> float:
    return estimate_hr_spectral(pulse_ssr(bundle, params), _estimation_band(params)).bpm


#: algorithm tag -> (parameter dataclass, pulse extractor, bpm runner)
ALGORITHMS = {
    "chrom": (ChromParams, pulse_chrom, run_chrom),
    "licvpr": (LiParams, pulse_licvpr, run_licvpr),
    "ssr": (SsrParams, pulse_ssr, run_ssr),
}


def extract_pulse(bundle: SequenceBundle, algorithm: str, params=None) -> PulseSignal:
    """Run one algorithm's pulse extraction on a loaded bundle."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {sorted(ALGORITHMS)}")
    cls, pulse_fn, _ = ALGORITHMS[algorithm]
    if params is None:
        params = cls()
    elif isinstance(params, dict):
        params = build_params(algorithm, params)
    return pulse_fn(bundle, params)


# ---------------------------------------------------------------------------
# parameter plumbing
# ---------------------------------------------------------------------------

def _coerce_value(raw, default, key: str):
    """Coerce an override (possibly a CLI string) to the field's type."""
    value = raw
    if isinstance(raw, str):
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ValueError(f"{key} expects true/false, got {raw!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool):
            raise ValueError(f"{key} expects an integer, got {raw!r}")
        if isinstance(value, (int, float)) and float(value).is_integer():
            return int(value)
        raise ValueError(f"{key} expects an integer, got {raw!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ValueError(f"{key} expects a number, got {raw!r}")
    if isinstance(default, str):
        if isinstance(value, (str, int, float)):
            return str(raw)
        raise ValueError(f"{key} expects a string, got {raw!r}")
    return value  # fields defaulting to None take the parsed value as-is


def build_params(algorithm: str, overrides=None):
    """Build an algorithm's parameter object from ``{field: value}`` overrides.

    ``band_lo`` / ``band_hi`` address the edges of a ``band`` field; every
    other key must name a dataclass field. Unknown keys raise ValueError.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {sorted(ALGORITHMS)}")
    cls = ALGORITHMS[algorithm][0]
    overrides = dict(overrides or {})
    fields = {f.name: f for f in dataclasses.fields(cls)}
    band_lo = overrides.pop("band_lo", None)
    band_hi = overrides.pop("band_hi", None)
    if (band_lo is not None or band_hi is not None) and "band" not in fields:
        raise ValueError(f"algorithm {algorithm!r} has no band parameter")
    kwargs = {}
    for key, raw in overrides.items():
        if key == "band" or key not in fields:
            raise ValueError(f"unknown parameter {key!r} for algorithm {algorithm!r}")
        kwargs[key] = _coerce_value(raw, fields[key].default, key)
    params = cls(**kwargs)
    if band_lo is not None or band_hi is not None:
        band = params.band
        lo = float(band_lo) if band_lo is not None else band.lo
        hi = float(band_hi) if band_hi is not None else band.hi
        params = dataclasses.replace(params, band=BandHz(lo, hi))
    return params


def params_to_dict(params) -> dict:
    """Flatten a parameter object to a JSON-friendly dict (band -> lo/hi)."""
    if params is None:
        return {}
    if isinstance(params, dict):
        return dict(params)
    out = {}
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        if isinstance(value, BandHz):
            out["band_lo"] = value.lo
            out["band_hi"] = value.hi
        else:
            out[f.name] = value
    return out


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceResult:
    sequence_id: str
    status: str  # "ok" | "failed"
    estimated_bpm: float | None
    ground_truth_bpm: float | None
    detail: str = ""


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    algorithm: str
    split: str
    params: dict
    sequences: tuple[SequenceResult, ...]
    rmse: float
    pearson_rho: float

    @property
    def ok_count(self) -> int:
        return sum(1 for s in self.sequences if s.status == "ok")

    @property
    def failed_count(self) -> int:
        return sum(1 for s in self.sequences if s.status == "failed")


def evaluate(
    protocol: ProtocolIndex,
    split: str,
    algorithm,
    dataset_root,
    params=None,
    jobs: int = 1,
) -> EvalReport:
    """Run one algorithm over one protocol split and aggregate the errors.

    ``algorithm`` is a registry tag (``chrom``, ``licvpr``, ``ssr``) or a
    callable ``(bundle, params) -> bpm`` for stubs and extensions. Sequence
    failures are recorded per sequence and excluded from the aggregates; fewer
    than two successes raise :class:`AggregateUndefinedError`. Aggregates are
    computed over sequences sorted by id, so row order never matters.
    """
    dataset_root = Path(dataset_root)
    jobs = max(1, int(jobs))
    entries = protocol.split_entries(split)
    if not entries:
        raise ValueError(f"protocol {protocol.name!r} has no entries in split {split!r}")
    overlap = protocol.subjects("train") & protocol.subjects("test")
    if overlap:
        raise SplitOverlapError(
            f"subjects {sorted(overlap)} appear in both splits of protocol {protocol.name!r}"
        )
    if callable(algorithm):
        runner = algorithm
        name = getattr(algorithm, "__name__", "custom")
        run_params = params
    else:
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {sorted(ALGORITHMS)}")
        cls, _, runner = ALGORITHMS[algorithm]
        name = algorithm
        if params is None:
            run_params = cls()
        elif isinstance(params, dict):
            run_params = build_params(algorithm, params)
        elif isinstance(params, cls):
            run_params = params
        else:
            raise ValueError(f"params must be a dict or {cls.__name__}, got {type(params).__name__}")

    ordered = sorted(entries, key=lambda e: e.sequence_id)

    # Missing files are a dataset problem, not a per-sequence one: fail fast
    # before spending any compute, naming the first absent path.
    for entry in ordered:
        for key in ("video", "roi"):
            path = dataset_root / entry.sequence_id / BUNDLE_FILES[key]
            if not path.exists():
                raise FileNotFoundError(str(path))

    def process(entry) -> SequenceResult:
        try:
            bundle = load_bundle(dataset_root, entry.sequence_id)
            truth = load_ground_truth(bundle)
            bpm = float(runner(bundle, run_params))
            return SequenceResult(entry.sequence_id, "ok", bpm, truth.bpm)
        except Exception as exc:  # per-sequence isolation is the contract
            return SequenceResult(
                entry.sequence_id, "failed", None, None, f"{type(exc).__name__}: {exc}"
            )

    if jobs == 1:
        results = [process(e) for e in ordered]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process, ordered))

    ok = [r for r in results if r.status == "ok"]
    if len(ok) < 2:
        raise AggregateUndefinedError(
            f"only {len(ok)} of {len(results)} sequences succeeded; aggregates need at least 2"
        )
    estimates = [r.estimated_bpm for r in ok]
    truths = [r.ground_truth_bpm for r in ok]
    return EvalReport(
        protocol=protocol.name,
        algorithm=name,
        split=split,
        params=params_to_dict(run_params),
        sequences=tuple(results),
        rmse=rmse(estimates, truths),
        pearson_rho=pearson(estimates, truths),
    )


# ---------------------------------------------------------------------------
# greedy stage-wise search
# ---------------------------------------------------------------------------

OBJECTIVES = ("pearson", "neg_rmse")


@dataclass(frozen=True)
class SearchStage:
    """One search stage: an ordered list of (parameter, candidate grid)."""

    name: str
    grid: tuple[tuple[str, tuple], ...]

    def __post_init__(self):
        grid = tuple((str(k), tuple(v)) for k, v in self.grid)
        if not grid:
            raise ValueError(f"stage {self.name!r} has an empty grid")
        for key, candidates in grid:
            if not candidates:
                raise ValueError(f"stage {self.name!r}: parameter {key!r} has no candidates")
        object.__setattr__(self, "grid", grid)

    @property
    def size(self) -> int:
        out = 1
        for _, candidates in self.grid:
            out *= len(candidates)
        return out

    @classmethod
    def from_dict(cls, payload: dict, default_name: str = "stage") -> "SearchStage":
        grid = tuple((k, tuple(v)) for k, v in payload.get("grid", {}).items())
        return cls(name=str(payload.get("name", default_name)), grid=grid)


@dataclass(frozen=True)
class SearchResult:
    best_params: dict
    objective: str
    trace: tuple[dict, ...]
    n_evaluations: int

    def to_jsonable(self) -> dict:
        return {
            "best_params": dict(self.best_params),
            "objective": self.objective,
            "n_evaluations": self.n_evaluations,
            "trace": [dict(stage) for stage in self.trace],
        }


def _validate_stages(stages, algorithm) -> None:
    seen: set[str] = set()
    for stage in stages:
        for key, _ in stage.grid:
            if key in seen:
                raise ValueError(f"parameter {key!r} appears in more than one stage")
            seen.add(key)
    if not callable(algorithm):
        # Surface typos before spending evaluations: every key must build.
        for stage in stages:
            for key, candidates in stage.grid:
                build_params(algorithm, {key: candidates[0]})


def greedy_search(
    stages,
    protocol: ProtocolIndex,
    algorithm,
    dataset_root,
    objective: str = "pearson",
    defaults=None,
    split: str = "train",
    jobs: int = 1,
) -> SearchResult:
    """Stage-wise exhaustive search; earlier stages stay fixed at their optima.

    Within a stage every combination of that stage's grids is evaluated with
    earlier winners applied and all later parameters at their defaults. Ties
    keep the first candidate in grid order. The total number of evaluations is
    exactly the sum over stages of the per-stage grid product.
    """
    stages = list(stages)
    if not stages:
        raise ValueError("need at least one search stage")
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    _validate_stages(stages, algorithm)
    fixed = dict(defaults or {})
    trace: list[dict] = []
    n_evaluations = 0
    for stage in stages:
        names = [key for key, _ in stage.grid]
        best_score = None
        best_assignment = None
        rows = []
        for combo in itertools.product(*(candidates for _, candidates in stage.grid)):
            assignment = dict(zip(names, combo))
            candidate = {**fixed, **assignment}
            n_evaluations += 1
            try:
                report = evaluate(protocol, split, algorithm, dataset_root, params=candidate, jobs=jobs)
                score = report.pearson_rho if objective == "pearson" else -report.rmse
                rows.append({"params": candidate, "objective_value": score, "error": None})
            except Exception as exc:
                rows.append(
                    {"params": candidate, "objective_value": None, "error": f"{type(exc).__name__}: {exc}"}
                )
                continue
            if best_score is None or score > best_score:
                best_score = score
                best_assignment = assignment
        if best_assignment is None:
            raise SearchFailedError(stage.name)
        fixed.update(best_assignment)
        trace.append(
            {
                "stage": stage.name,
                "evaluations": rows,
                "selected": dict(best_assignment),
                "objective_value": best_score,
            }
        )
    return SearchResult(
        best_params=fixed,
        objective=objective,
        trace=tuple(trace),
        n_evaluations=n_evaluations,
    )


# ---------------------------------------------------------------------------
# reports on disk
# ---------------------------------------------------------------------------

def _float_cell(value) -> str:
    return "" if value is None else repr(float(value))


def emit_report(report: EvalReport, path, fmt: str | None = None) -> None:
    """Write a report as CSV (rows + rmse/pearson trailer) or JSON."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower() or "csv"
    if fmt == "csv":
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sequence_id", "status", "estimated_bpm", "ground_truth_bpm", "detail"])
            for s in report.sequences:
                writer.writerow(
                    [s.sequence_id, s.status, _float_cell(s.estimated_bpm), _float_cell(s.ground_truth_bpm), s.detail]
                )
            writer.writerow(["rmse", repr(report.rmse)])
            writer.writerow(["pearson", repr(report.pearson_rho)])
    elif fmt == "json":
        payload = {
            "protocol": report.protocol,
            "algorithm": report.algorithm,
            "split": report.split,
            "params": report.params,
            "rmse": report.rmse,
            "pearson_rho": report.pearson_rho,
            "ok_count": report.ok_count,
            "failed_count": report.failed_count,
            "sequences": [dataclasses.asdict(s) for s in report.sequences],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}, expected csv or json")


def read_report(path) -> EvalReport:
    """Read back a JSON report into a structurally equal EvalReport."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    sequences = tuple(
        SequenceResult(
            sequence_id=s["sequence_id"],
            status=s["status"],
            estimated_bpm=s["estimated_bpm"],
            ground_truth_bpm=s["ground_truth_bpm"],
            detail=s.get("detail", ""),
        )
        for s in payload["sequences"]
    )
    return EvalReport(
        protocol=payload["protocol"],
        algorithm=payload["algorithm"],
        split=payload["split"],
        params=payload["params"],
        sequences=sequences,
        rmse=payload["rmse"],
        pearson_rho=payload["pearson_rho"],
    )


def read_report_csv(path) -> tuple[tuple[SequenceResult, ...], float, float]:
    """Read back a CSV report: (sequence rows, rmse, pearson)."""
    rows: list[SequenceResult] = []
    rmse_value = None
    pearson_value = None
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "sequence_id":
            raise ValueError(f"{path}: missing report header")
        for cells in reader:
            if not cells:
                continue
            if cells[0] == "rmse":
                rmse_value = float(cells[1])
            elif cells[0] == "pearson":
                pearson_value = float(cells[1])
            else:
                rows.append(
                    SequenceResult(
                        sequence_id=cells[0],
                        status=cells[1],
                        estimated_bpm=float(cells[2]) if cells[2] else None,
                        ground_truth_bpm=float(cells[3]) if cells[3] else None,
                        detail=cells[4] if len(cells) > 4 else "",
                    )
                )
    if rmse_value is None or pearson_value is None:
        raise ValueError(f"{path}: missing rmse/pearson trailer rows")
    return tuple(rows), rmse_value, pearson_value
