"""Sweep orchestration, dataset/curve/checkpoint persistence, commands.

Datasets are self-describing structured text: a header block followed by
one record block per control-parameter value, every float hex-encoded so
write -> read round-trips exactly.  All writes go through a temp file and
os.replace, which makes interrupted sweeps resumable: grid points whose
control value already sits in the file are skipped on rerun.

The command functions (generate, train_cmd, scan_cmd, stability_cmd,
kl_cmd, towers_cmd) hold the orchestration logic; the CLI in ``cli`` is a
thin argument-parsing shell around them.
"""

import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import gan
from .gan import ConfigError, default_train_config
from .models import build_model
from .solver import DmrgConfig, dmrg_ground_state, schmidt_decompose
from .spectra import (
    align_to_reference,
    build_reference_sequence,
    conformal_rescale,
    kl_divergence,
    make_labeled_spectrum,
)


class ConvergenceError(RuntimeError):
    """Training finished without meeting its thresholds."""


class SolverError(RuntimeError):
    """A ground-state computation failed outright."""


N_FEAT = 64

DEFAULT_GRIDS = {
    "xxz": (-1.5, 0.0, 0.01),
    "bh": (0.0, 6.0, 0.02),
    "bh2s": (-0.4, 0.0, 0.005),
}

# side of the training window on which stability_cmd places validation
# bands: the gapped phase lies left of the window for xxz/bh2s, right
# of it for bh
VAL_SIDE = {"xxz": "left", "bh": "right", "bh2s": "left"}


def data_dir():
    return os.environ.get("ESGAN_DATA_DIR", ".")


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class SweepConfig:
    model_id: str
    L: int
    control_min: float
    control_max: float
    step: float = None
    count: int = None
    chi_max: int = 64
    svd_cutoff: float = 1e-10
    max_sweeps: int = 12
    n_max: int = None
    seed: int = 1234
    out_path: str = None

    def __post_init__(self):
        if self.model_id not in DEFAULT_GRIDS:
            raise ConfigError(f"unknown model {self.model_id!r}")
        if not self.control_min < self.control_max:
            raise ConfigError("need control_min < control_max")
        if (self.step is None) == (self.count is None):
            raise ConfigError("give exactly one of step or count")
        if self.count is not None and self.count < 2:
            raise ConfigError("count must be >= 2")
        if self.step is not None and self.step <= 0:
            raise ConfigError("step must be positive")

    def grid(self):
        if self.count is not None:
            return np.linspace(self.control_min, self.control_max, self.count)
        n = int(
            np.floor((self.control_max - self.control_min) / self.step + 1 + 1e-9)
        )
        return self.control_min + self.step * np.arange(n)

    def dmrg_config(self):
        return DmrgConfig(
            chi_max=self.chi_max,
            svd_cutoff=self.svd_cutoff,
            max_sweeps=self.max_sweeps,
            seed=self.seed,
        )


def default_sweep(model_id, L, **overrides):
    lo, hi, step = DEFAULT_GRIDS[model_id]
    kw = dict(model_id=model_id, L=L, control_min=lo, control_max=hi, step=step)
    kw.update(overrides)
    return SweepConfig(**kw)


# ----------------------------------------------------------- dataset format

DATASET_MAGIC = "spectrum dataset v1"


@dataclass
class SpectrumDataset:
    """Header metadata plus one labeled spectrum per control value."""

    model_id: str
    L: int
    filling: tuple
    bipartition: int
    chi_max: int
    svd_cutoff: float
    boundary: str
    seed: int
    records: list = field(default_factory=list)
    format_version: int = 1

    def controls(self):
        return np.array([r.control_value for r in self.records])

    def origin_record(self):
        """Record nearest the phase-diagram origin (control = 0)."""
        if not self.records:
            raise ConfigError("dataset holds no records")
        return min(self.records, key=lambda r: (abs(r.control_value), r.control_value))

    def header_line(self):
        return (
            f"{self.model_id} L={self.L} chi={self.chi_max} "
            f"cutoff={self.svd_cutoff:g} seed={self.seed}"
        )


def _fractions_str(filling):
    return " ".join(f"{f.numerator}/{f.denominator}" for f in filling)


def write_dataset(path, ds):
    """Atomic write: header block, then records sorted by control value."""
    records = sorted(ds.records, key=lambda r: r.control_value)
    seen = set()
    for r in records:
        if r.control_value in seen:
            raise ValueError(f"duplicate control value {r.control_value!r}")
        seen.add(r.control_value)
    lines = [
        f"# {DATASET_MAGIC}",
        f"format_version {ds.format_version}",
        f"model_id {ds.model_id}",
        f"L {ds.L}",
        f"filling {_fractions_str(ds.filling)}",
        f"bipartition {ds.bipartition}",
        f"chi_max {ds.chi_max}",
        f"svd_cutoff {float(ds.svd_cutoff).hex()}",
        "boundary open",
        f"seed {ds.seed}",
        f"n_records {len(records)}",
    ]
    for r in records:
        lines.append("[record]")
        lines.append(f"control {float(r.control_value).hex()}")
        lines.append(f"truncation_error {float(r.truncation_error).hex()}")
        lines.append(f"n_entries {len(r.entries)}")
        for e in r.entries:
            charge = " ".join(str(c) for c in e.charge)
            lines.append(f"entry {charge} {e.k} {float(e.p).hex()}")
    text = "\n".join(lines) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_dataset(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"# {DATASET_MAGIC}":
        raise ValueError(f"{path} is not a spectrum dataset")
    head = {}
    i = 1
    while i < len(lines) and lines[i] != "[record]":
        key, _, val = lines[i].partition(" ")
        head[key] = val
        i += 1
    filling = tuple(Fraction(tok) for tok in head["filling"].split())
    ds = SpectrumDataset(
        model_id=head["model_id"],
        L=int(head["L"]),
        filling=filling,
        bipartition=int(head["bipartition"]),
        chi_max=int(head["chi_max"]),
        svd_cutoff=float.fromhex(head["svd_cutoff"]),
        boundary=head["boundary"],
        seed=int(head["seed"]),
        format_version=int(head["format_version"]),
    )
    while i < len(lines):
        assert lines[i] == "[record]"
        control = float.fromhex(lines[i + 1].split()[1])
        trunc = float.fromhex(lines[i + 2].split()[1])
        n_entries = int(lines[i + 3].split()[1])
        p, charges = [], []
        for j in range(n_entries):
            parts = lines[i + 4 + j].split()
            charges.append(tuple(int(c) for c in parts[1:-2]))
            p.append(float.fromhex(parts[-1]))
        ds.records.append(
            make_labeled_spectrum(
                p,
                charges,
                model_id=ds.model_id,
                L=ds.L,
                bipartition=ds.bipartition,
                filling=ds.filling,
                control_value=control,
                truncation_error=trunc,
            )
        )
        i += 4 + n_entries
    return ds


# ---------------------------------------------------------------- generate

def _solve_point(cfg, control):
    spec = build_model(cfg.model_id, cfg.L, control, n_max=cfg.n_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # convergence warnings logged below
        psi = dmrg_ground_state(spec, cfg.dmrg_config())
    return schmidt_decompose(psi)


def generate(cfg, threads=1, log=None):
    """Run the sweep, appending to an existing dataset file if present.

    A grid point whose exact control value already has a record is
    skipped; a point whose solver run raises is logged and skipped, and
    the sweep continues.  The file on disk is rewritten atomically after
    every completed point, so interrupting and rerunning loses at most
    the point in flight.
    """
    log = log if log is not None else sys.stderr
    path = cfg.out_path
    if path is None:
        path = os.path.join(data_dir(), f"{cfg.model_id}_L{cfg.L}.ds")
    if os.path.exists(path):
        ds = read_dataset(path)
        for key, want in (
            ("model_id", cfg.model_id),
            ("L", cfg.L),
            ("chi_max", cfg.chi_max),
        ):
            have = getattr(ds, key)
            if have != want:
                raise ConfigError(
                    f"{path} holds {key}={have!r}, sweep wants {want!r}"
                )
    else:
        spec = build_model(cfg.model_id, cfg.L, cfg.control_min, n_max=cfg.n_max)
        ds = SpectrumDataset(
            model_id=cfg.model_id,
            L=cfg.L,
            filling=spec.filling,
            bipartition=cfg.L // 2,
            chi_max=cfg.chi_max,
            svd_cutoff=cfg.svd_cutoff,
            boundary="open",
            seed=cfg.seed,
        )
    have = {r.control_value for r in ds.records}
    todo = [float(c) for c in cfg.grid() if float(c) not in have]
    if not todo:
        return ds, path

    def solve(control):
        try:
            return control, _solve_point(cfg, control), None
        except Exception as exc:  # noqa: BLE001 - sweep must survive a point
            return control, None, exc

    failures = 0
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(solve, todo)
            for control, rec, exc in results:
                if exc is not None:
                    failures += 1
                    print(f"[generate] {control:g} failed: {exc}", file=log)
                    continue
                ds.records.append(rec)
                write_dataset(path, ds)
                ds = read_dataset(path)
    else:
        for control in todo:
            control, rec, exc = solve(control)
            if exc is not None:
                failures += 1
                print(f"[generate] {control:g} failed: {exc}", file=log)
                continue
            ds.records.append(rec)
            write_dataset(path, ds)
            ds = read_dataset(path)
    if failures == len(todo):
        raise SolverError(f"all {failures} grid points failed")
    return ds, path


# ---------------------------------------------------------------- features

def dataset_features(ds, n_feat=N_FEAT, sequence=None):
    """Aligned feature vectors for every record; the sequence defaults to
    the one built from the record nearest the phase-diagram origin."""
    if not ds.records:
        raise ConfigError("dataset holds no records")
    if sequence is None:
        sequence = build_reference_sequence(ds.origin_record(), n_feat)
    features = [align_to_reference(r, sequence) for r in ds.records]
    return features, sequence


# ------------------------------------------------------------------- train

def train_cmd(dataset_path, train_window, val_window, cfg=None, out_path=None,
              log_path=None, n_feat=N_FEAT):
    """Train a detector on a dataset; write checkpoint + training log.

    Returns (detector, checkpoint path).  A detector that misses its
    thresholds is still checkpointed, then ConvergenceError is raised so
    the caller can exit with the dedicated status code.
    """
    ds = read_dataset(dataset_path)
    if cfg is None:
        cfg = default_train_config(ds.model_id)
    features, sequence = dataset_features(ds, n_feat)
    det = gan.train(features, cfg, train_window, val_window, sequence=sequence)
    if out_path is None:
        out_path = os.path.join(
            data_dir(), f"{ds.model_id}_L{ds.L}_detector.ckpt"
        )
    gan.save_detector(out_path, det)
    if log_path is None:
        log_path = out_path + ".log.csv"
    with open(log_path + ".tmp", "w") as fh:
        fh.write("epoch,train_loss,val_loss,lr_G,lr_D\n")
        for row in det.history:
            fh.write(
                f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r},"
                f"{row['lr_G']!r},{row['lr_D']!r}\n"
            )
    os.replace(log_path + ".tmp", log_path)
    if not det.converged:
        raise ConvergenceError(
            f"thresholds not met within {cfg.epochs_max} epochs "
            f"(final train {det.mean_train_loss:.3e}); checkpoint at {out_path}"
        )
    return det, out_path


# -------------------------------------------------------------------- scan

@dataclass
class ScoreCurve:
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([row[name] for row in self.rows])


def write_curve(path, curve):
    if not curve.rows:
        raise ValueError("refusing to write an empty curve")
    columns = list(curve.rows[0].keys())
    lines = [f"# {k} {v}" for k, v in sorted(curve.metadata.items())]
    lines.append(",".join(columns))
    for row in curve.rows:
        lines.append(",".join(repr(float(row[c])) for c in columns))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_curve(path):
    metadata, rows, columns = {}, [], None
    with open(path) as fh:
        for line in fh.read().splitlines():
            if line.startswith("# "):
                key, _, val = line[2:].partition(" ")
                metadata[key] = val
            elif columns is None:
                columns = line.split(",")
            else:
                vals = [float(tok) for tok in line.split(",")]
                rows.append(dict(zip(columns, vals)))
    return ScoreCurve(rows=rows, metadata=metadata)


def scan_cmd(checkpoint_path, dataset_path, out_path=None, with_kl=False,
             n_feat=N_FEAT, threads=1):
    """Score a dataset with a trained detector; returns (curve, path).

    Same-size data aligns on the detector's own sector sequence; data at
    a different system size gets its own origin-built sequence (the
    cross-size protocol).  ``with_kl`` appends the KL divergence of each
    record from the origin record.  Records are independent, so scoring
    fans out over ``threads``; rows are sorted afterwards either way.
    """
    det = gan.load_detector(checkpoint_path)
    ds = read_dataset(dataset_path)
    if not ds.records:
        raise ConfigError(f"{dataset_path} holds no records")
    if det.model.n_feat != n_feat:
        raise ConfigError(
            "incompatible checkpoint/dataset: "
            f"checkpoint n_feat={det.model.n_feat} ({checkpoint_path}), "
            f"requested n_feat={n_feat} for {ds.header_line()}"
        )
    if det.model_id is not None and det.model_id != ds.model_id:
        raise ConfigError(
            "incompatible checkpoint/dataset: detector trained on "
            f"{det.model_id!r} L={det.L}, dataset is {ds.header_line()}"
        )
    same_size = det.L is None or det.L == ds.L
    if same_size and det.sequence is not None:
        features, sequence = dataset_features(ds, n_feat, sequence=det.sequence)
        scanner = gan.scan
    else:
        features, sequence = dataset_features(ds, n_feat)
        scanner = gan.cross_size_scan
    if threads > 1:
        chunks = [features[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda ch: scanner(det, ch) if ch else [], chunks)
        rows = sorted(
            (r for part in parts for r in part),
            key=lambda r: r["control_value"],
        )
    else:
        rows = scanner(det, features)
    if with_kl:
        origin = ds.origin_record()
        kl_by_control = {
            r.control_value: kl_divergence(r, origin, sequence=sequence)
            for r in ds.records
        }
        for row in rows:
            row["kl_value"] = kl_by_control[row["control_value"]]
    curve = ScoreCurve(
        rows=rows,
        metadata={"detector": checkpoint_path, "dataset": dataset_path},
    )
    if out_path is None:
        out_path = os.path.join(data_dir(), f"{ds.model_id}_L{ds.L}_scan.csv")
    write_curve(out_path, curve)
    return curve, out_path


# --------------------------------------------------------------- stability

def stability_cmd(dataset_path, windows, cfg=None, out_path=None,
                  n_feat=N_FEAT, log=None):
    """Train one detector per training window, score the full sweep with
    each, and write all score columns into a single CSV.

    Validation bands are placed adjacent to each window on the side away
    from the transition (left for xxz/bh2s, right for bh), 20% of the
    window width.  Each window trains with a fresh seed offset.  A window
    whose training raises is noted in the header and its column is NaN.
    """
    log = log if log is not None else sys.stderr
    if len(windows) < 2:
        raise ConfigError("stability needs at least two training windows")
    ds = read_dataset(dataset_path)
    if cfg is None:
        cfg = default_train_config(ds.model_id)
    features, sequence = dataset_features(ds, n_feat)
    controls = [float(f.control_value) for f in features]
    columns = {}
    notes = {}
    for i, (lo, hi) in enumerate(windows):
        width = 0.2 * (hi - lo)
        if VAL_SIDE[ds.model_id] == "left":
            val_window = (lo - width, lo)
        else:
            val_window = (hi, hi + width)
        wcfg = replace(cfg, seed=cfg.seed + i)
        name = f"score_w{i}"
        try:
            det = gan.train(features, wcfg, (lo, hi), val_window,
                            sequence=sequence)
            rows = gan.scan(det, features)
            columns[name] = {r["control_value"]: r["anomaly_score"] for r in rows}
            notes[name] = f"window=[{lo},{hi}] val=[{val_window[0]},{val_window[1]}] converged={det.converged}"
        except Exception as exc:  # noqa: BLE001 - partial output contract
            print(f"[stability] window {i} failed: {exc}", file=log)
            columns[name] = {}
            notes[name] = f"window=[{lo},{hi}] FAILED: {exc}"
    rows = []
    for c in sorted(controls):
        row = {"control_value": c}
        for name, scores in columns.items():
            row[name] = scores.get(c, float("nan"))
        rows.append(row)
    curve = ScoreCurve(rows=rows, metadata={"dataset": dataset_path, **notes})
    if out_path is None:
        out_path = os.path.join(
            data_dir(), f"{ds.model_id}_L{ds.L}_stability.csv"
        )
    write_curve(out_path, curve)
    return curve, out_path


# ---------------------------------------------------------------------- kl

def kl_cmd(dataset_path, out_path=None, n_feat=N_FEAT):
    """KL divergence of every record from the origin record, as a CSV."""
    ds = read_dataset(dataset_path)
    if not ds.records:
        raise ConfigError(f"{dataset_path} holds no records")
    origin = ds.origin_record()
    sequence = build_reference_sequence(origin, n_feat)
    rows = [
        {
            "control_value": r.control_value,
            "kl_value": kl_divergence(r, origin, sequence=sequence),
        }
        for r in sorted(ds.records, key=lambda r: r.control_value)
    ]
    curve = ScoreCurve(
        rows=rows,
        metadata={
            "dataset": dataset_path,
            "reference_control": repr(float(origin.control_value)),
        },
    )
    if out_path is None:
        out_path = os.path.join(data_dir(), f"{ds.model_id}_L{ds.L}_kl.csv")
    write_curve(out_path, curve)
    return curve, out_path


# ------------------------------------------------------------------ towers

def towers_cmd(dataset_path, control, channel=None, out_path=None):
    """Rescaled conformal-tower table at one control value.

    Picks the record nearest the requested control; columns are the
    sector label, level rank, raw xi, and the rescaled level.
    """
    ds = read_dataset(dataset_path)
    if not ds.records:
        raise ConfigError(f"{dataset_path} holds no records")
    record = min(ds.records, key=lambda r: abs(r.control_value - control))
    table = conformal_rescale(record, channel=channel)
    rows = [
        {
            "delta_n": float(r["delta_n"]),
            "k": float(r["k"]),
            "xi": r["xi"],
            "rescaled": r["rescaled"],
        }
        for r in table
    ]
    curve = ScoreCurve(
        rows=rows,
        metadata={
            "dataset": dataset_path,
            "control_value": repr(float(record.control_value)),
            "channel": channel or "none",
        },
    )
    if out_path is None:
        out_path = os.path.join(
            data_dir(), f"{ds.model_id}_L{ds.L}_towers.csv"
        )
    write_curve(out_path, curve)
    return curve, out_path
