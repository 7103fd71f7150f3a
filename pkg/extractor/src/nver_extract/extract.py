"""Corpus extraction: audio files in, embedding file plus manifest out.

Outputs follow the training engine's external storage contract:

* ``<fm_name>.nveb``  little-endian binary: magic ``NVEB`` | version u32=1
  | dim u32 | count u32 | count*dim float32, row-major;
* ``manifest.csv`` with header ``sample_id,label,speaker,dataset``, one row
  per successfully embedded clip, in input order;
* ``labels.txt`` vocabulary (sorted unique label names, one per line);
* ``rejects.txt`` listing skipped files and the reason, when any.

Undecodable clips are skipped with a warning; a dimension mismatch aborts
the whole job (it means the wrong checkpoint is loaded).
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import prepare
from .backends import EmbeddingBackend, resolve_backend
from .registry import ExtractorError, lookup

log = logging.getLogger("nver_extract")

MAGIC = b"NVEB"
FORMAT_VERSION = 1
MANIFEST_HEADER = ["sample_id", "label", "speaker", "dataset"]


@dataclass
class ExtractionJob:
    """One corpus/model extraction request."""

    fm_name: str
    audio_root: Path
    label_map: Path
    output_dir: Path
    backend_spec: str | None = None

    def __post_init__(self):
        self.audio_root = Path(self.audio_root)
        self.label_map = Path(self.label_map)
        self.output_dir = Path(self.output_dir)


@dataclass
class ExtractionResult:
    embeddings_path: Path
    manifest_path: Path
    labels_path: Path
    rows_written: int
    rejects: list[tuple[str, str]] = field(default_factory=list)


def read_label_map(path: Path) -> list[dict[str, str]]:
    """Rows of the input csv; ``path`` and ``label`` columns are required."""
    if not path.exists():
        raise ExtractorError(f"label map not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
            raise ExtractorError(
                f"{path}: label map needs at least 'path' and 'label' columns, "
                f"got {reader.fieldnames}"
            )
        rows = []
        for row in reader:
            if not row.get("path") or not row.get("label"):
                raise ExtractorError(f"{path}: row {len(rows) + 2} missing path or label")
            rows.append(row)
    if not rows:
        raise ExtractorError(f"{path}: label map holds no rows")
    return rows


def write_embeddings(path: Path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    count, dim = vectors.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, dim, count))
        f.write(vectors.astype("<f4").tobytes())


def extract_embeddings(job: ExtractionJob, backend: EmbeddingBackend | None = None) -> ExtractionResult:
    """Run the frozen model over every mapped clip and write the artifacts."""
    entry = lookup(job.fm_name)
    rows = read_label_map(job.label_map)  # cheap validation before model loading
    if backend is None:
        backend = resolve_backend(job.fm_name, job.backend_spec)
    if backend.dim != entry.dim:
        raise ExtractorError(
            f"backend emits dim {backend.dim}, {job.fm_name} requires {entry.dim}"
        )

    vectors: list[np.ndarray] = []
    manifest: list[tuple[str, str, str, str]] = []
    rejects: list[tuple[str, str]] = []
    for row in rows:
        rel = row["path"]
        clip = job.audio_root / rel
        try:
            wave = prepare(clip)
            emb = backend.embed(wave)
        except ExtractorError as exc:
            log.warning("skipping %s: %s", rel, exc)
            rejects.append((rel, str(exc)))
            continue
        if emb.shape != (entry.dim,):
            raise ExtractorError(
                f"{rel}: embedding dim {emb.shape} != expected ({entry.dim},); aborting"
            )
        if not np.all(np.isfinite(emb)):
            raise ExtractorError(f"{rel}: non-finite embedding values; aborting")
        vectors.append(emb)
        manifest.append((rel, row["label"], row.get("speaker", "") or "", row.get("dataset", "") or ""))

    if not vectors:
        raise ExtractorError("no clip could be embedded; nothing to write")

    job.output_dir.mkdir(parents=True, exist_ok=True)
    embeddings_path = job.output_dir / f"{job.fm_name}.nveb"
    manifest_path = job.output_dir / "manifest.csv"
    labels_path = job.output_dir / "labels.txt"

    write_embeddings(embeddings_path, np.stack(vectors))
    with open(manifest_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(manifest)
    vocabulary = sorted({label for _, label, _, _ in manifest})
    labels_path.write_text("".join(f"{name}\n" for name in vocabulary), encoding="utf-8")
    if rejects:
        rejects_path = job.output_dir / "rejects.txt"
        rejects_path.write_text(
            "".join(f"{rel}\t{reason}\n" for rel, reason in rejects), encoding="utf-8"
        )

    log.info(
        "wrote %s: %d rows x %d dims (%d rejected)",
        embeddings_path, len(vectors), entry.dim, len(rejects),
    )
    return ExtractionResult(
        embeddings_path=embeddings_path,
        manifest_path=manifest_path,
        labels_path=labels_path,
        rows_written=len(vectors),
        rejects=rejects,
    )
