"""Formulation record persistence and weighted nearest-record retrieval.

Records live in an append-only JSONL file (one object per line, canonical
snake_case keys) with an in-memory index; reloading keeps the last version
of each id. Retrieval scores records with an exponential weighted-L1 kernel

    score(q, r) = exp(-sum_j w_j * |q_j - r_j| / s_j)

over the numeric feature set, where s_j is the per-feature median absolute
deviation across the store (floored at 1e-12) and the weights w_j are
proportional to |Spearman correlation| between feature j and the release at
1 hr. Stores with fewer than 5 records fall back to uniform weights over the
features that actually vary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConflictError, EmptyStoreError, ValidationError
from .types import FEATURE_NAMES, DissolutionProfile, FormulationInput

PROVENANCE_VALUES = ("experimental", "simulated")

#: Mapping from the verbatim record keys used in published prompt blocks to
#: canonical snake_case keys, for the import adapter.
VERBATIM_TO_CANONICAL = {
    "Mean Particle Size, D50": "d50_um",
    "Aspect ratio": "aspect_ratio",
    "Roundness": "roundness",
    "solubility of drug (mg/mL)": "solubility_mg_ml",
    "Diffusion coefficient of drug (m^2/s)": "diffusivity_m2_s",
    "True Density of drug (g/mL)": "true_density_g_ml",
    "Specific surface area (m^2/g)": "ssa_m2_g",
    "volume-based equivalent particle size (micrometer)": "vol_eq_um",
}


@dataclass(frozen=True)
class FormulationRecord:
    """One stored formulation: features, measured profile, provenance."""

    id: str
    features: FormulationInput
    profile: DissolutionProfile
    provenance: str = "experimental"
    source: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValidationError("record id must be non-empty")
        if self.provenance not in PROVENANCE_VALUES:
            raise ValidationError(
                f"provenance must be one of {PROVENANCE_VALUES}, got {self.provenance!r}")

    def to_dict(self) -> dict:
        row = {"id": self.id}
        for name in FEATURE_NAMES:
            row[name] = getattr(self.features, name)
        row["profile"] = [[float(t), float(v)] for t, v in self.profile.points()]
        row["provenance"] = self.provenance
        row["source"] = self.source
        return row

    @classmethod
    def from_dict(cls, row: dict) -> "FormulationRecord":
        missing = [k for k in ("id", "profile") if k not in row]
        if missing:
            raise ValidationError(f"record is missing keys: {', '.join(missing)}")
        feature_kwargs = {}
        for name in FEATURE_NAMES:
            if name not in row:
                raise ValidationError(f"record {row['id']!r} is missing feature {name!r}")
            feature_kwargs[name] = float(row[name])
        return cls(
            id=str(row["id"]),
            features=FormulationInput(**feature_kwargs),
            profile=DissolutionProfile.from_points(row["profile"]),
            provenance=row.get("provenance", "experimental"),
            source=row.get("source", ""),
        )


def record_from_verbatim(obj: dict, record_id: str, provenance: str = "experimental",
                         source: str = "") -> FormulationRecord:
    """Import adapter for records keyed with the verbatim prompt-block names.

    Accepts ``{"Input": {...}, "Output": {"columns": ..., "data": ...}}``
    (the worked-example shape) with either verbatim or canonical feature
    keys.
    """
    features_obj = obj.get("Input", obj.get("input", obj))
    if isinstance(features_obj, dict) and "Input" in features_obj:
        features_obj = features_obj["Input"]
    canonical = {}
    for key, value in features_obj.items():
        name = VERBATIM_TO_CANONICAL.get(key.strip() if isinstance(key, str) else key, key)
        if name in FEATURE_NAMES:
            canonical[name] = float(value)
    missing = [name for name in FEATURE_NAMES if name not in canonical]
    if missing:
        raise ValidationError(f"verbatim record is missing fields: {', '.join(missing)}")

    profile_obj = obj.get("Output", obj.get("output", obj.get("profile")))
    if profile_obj is None:
        raise ValidationError("verbatim record has no Output/profile block")
    if isinstance(profile_obj, dict) and "data" in profile_obj:
        points = profile_obj["data"]
    else:
        points = profile_obj
    return FormulationRecord(
        id=record_id,
        features=FormulationInput(**canonical),
        profile=DissolutionProfile.from_points(points),
        provenance=obj.get("provenance", provenance),
        source=obj.get("source", source),
    )


@dataclass(frozen=True)
class RetrievalWeights:
    """Per-feature weights (summing to 1) and robust scales for retrieval."""

    names: tuple[str, ...]
    weights: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = np.asarray(self.scales, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scales", s)
        if np.any(w < 0):
            raise ValidationError("weights must be >= 0")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must sum to 1")
        if np.any(s <= 0):
            raise ValidationError("scales must be > 0")

    def weight(self, name: str) -> float:
        return float(self.weights[self.names.index(name)])


class RecordStore:
    """Append-only JSONL store with deterministic top-k retrieval.

    Single-writer, multi-reader: ingest appends and updates the in-memory
    index; retrieval works on the current snapshot.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, FormulationRecord] = {}
        self._order: list[str] = []
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(
                        f"{self.path}:{line_no}: invalid JSON line") from exc
                record = FormulationRecord.from_dict(row)
                if record.id not in self._records:
                    self._order.append(record.id)
                self._records[record.id] = record

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._records

    @property
    def records(self) -> list[FormulationRecord]:
        return [self._records[rid] for rid in self._order]

    def get(self, record_id: str) -> FormulationRecord:
        return self._records[record_id]

    def ingest(self, record: FormulationRecord, overwrite: bool = False) -> None:
        """Add a record; appends to the JSONL file when the store is backed."""
        if record.id in self._records and not overwrite:
            raise ConflictError(f"record id {record.id!r} already in store")
        if record.id not in self._records:
            self._order.append(record.id)
        self._records[record.id] = record
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict()) + "\n")

    def feature_matrix(self) -> np.ndarray:
        return np.array([r.features.feature_vector() for r in self.records])

    def adapt_weights(self) -> RetrievalWeights:
        """Data-driven retrieval weights for the current store contents.

        Scale: per-feature MAD, floored at 1e-12. Weight: proportional to
        |Spearman correlation| between the feature and the record's release
        at 1 hr; uniform over varying features when the store is small
        (< 5 records) or no correlation is measurable.
        """
        if len(self) == 0:
            raise EmptyStoreError("cannot adapt weights on an empty store")
        matrix = self.feature_matrix()
        med = np.median(matrix, axis=0)
        mad = np.median(np.abs(matrix - med), axis=0)
        varying = mad > 0.0
        scales = np.maximum(mad, 1e-12)
        if not np.any(varying):
            # Degenerate store (e.g. a single record): uniform weights keep
            # retrieval well-defined; exact matches still score 1.
            n = len(FEATURE_NAMES)
            return RetrievalWeights(FEATURE_NAMES, np.full(n, 1.0 / n), scales)

        raw = np.zeros(len(FEATURE_NAMES))
        if len(self) >= 5:
            release_1hr = np.array([r.profile.released_at(1.0) for r in self.records])
            for j in range(len(FEATURE_NAMES)):
                if not varying[j]:
                    continue
                rho = stats.spearmanr(matrix[:, j], release_1hr).statistic
                if np.isfinite(rho):
                    raw[j] = abs(rho)
        if raw.sum() == 0.0:
            raw = varying.astype(float)
        return RetrievalWeights(FEATURE_NAMES, raw / raw.sum(), scales)

    def retrieve(self, query: FormulationInput, k: int,
                 weights: RetrievalWeights | None = None,
                 feature_subset=None) -> list[tuple[FormulationRecord, float]]:
        """Top-k records by kernel score, descending; ties break on id.

        Returns at most ``len(store)`` entries; k beyond the store size is
        not padded. ``feature_subset`` restricts scoring to the named
        features (weights renormalized over them), for queries that only
        specify some fields.
        """
        if k < 1:
            raise ValidationError("k must be >= 1")
        if len(self) == 0:
            raise EmptyStoreError("cannot retrieve from an empty store")
        if weights is None:
            weights = self.adapt_weights()
        if feature_subset is not None:
            subset = set(feature_subset)
            unknown = subset - set(FEATURE_NAMES)
            if unknown:
                raise ValidationError(f"unknown feature(s): {sorted(unknown)}")
            masked = np.array([
                w if name in subset else 0.0
                for name, w in zip(weights.names, weights.weights)])
            if masked.sum() == 0.0:
                # none of the requested features carries weight; fall back to
                # uniform over the subset
                masked = np.array([1.0 if name in subset else 0.0
                                   for name in weights.names])
            weights = RetrievalWeights(weights.names, masked / masked.sum(),
                                       weights.scales)
        q = query.feature_vector()
        scored = []
        for record in self.records:
            distance = np.sum(
                weights.weights * np.abs(q - record.features.feature_vector())
                / weights.scales)
            scored.append((record, float(np.exp(-distance))))
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        return scored[:k]


def to_examples(records) -> str:
    """Records rendered as prompt Example blocks, in the given order."""
    from .prompts import render_example_blocks

    return render_example_blocks(records)


def load_records(path: str | Path) -> list[FormulationRecord]:
    """Records from a JSONL file (canonical keys), in file order."""
    return RecordStore(path).records


def import_verbatim_file(path: str | Path) -> list[FormulationRecord]:
    """Records from a JSON file using the verbatim prompt-block keys.

    The file is either ``{"records": [...]}`` or a bare list; each entry
    carries Input/Output blocks plus optional id/provenance/source.
    """
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = payload.get("records", payload) if isinstance(payload, dict) else payload
    if not isinstance(entries, list):
        raise ValidationError("verbatim import expects a list of records")
    records = []
    for i, entry in enumerate(entries):
        record_id = entry.get("id", f"record-{i + 1}")
        records.append(record_from_verbatim(entry, record_id))
    return records
