"""Stage manifests and line-oriented JSON file helpers.

Every pipeline stage writes a manifest next to its output recording how many
records came in, how many went out, and where the rest went. The invariant

    n_in == n_out + sum(drops.values())

must hold for every stage, so a corpus can always be audited end to end:
no record is ever silently lost. ``extras`` carries auxiliary counters that
are deliberately outside the conservation sum (retries, records written per
group, and so on).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataValidationError


@dataclass(frozen=True)
class StageManifest:
    stage: str
    n_in: int
    n_out: int
    drops: dict[str, int] = field(default_factory=dict)
    extras: dict[str, int] = field(default_factory=dict)
    outputs: tuple[str, ...] = ()

    def conserved(self) -> bool:
        return self.n_in == self.n_out + sum(self.drops.values())

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "drops": dict(sorted(self.drops.items())),
            "extras": dict(sorted(self.extras.items())),
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_json_dict(cls, blob: dict) -> "StageManifest":
        try:
            return cls(
                stage=str(blob["stage"]),
                n_in=int(blob["n_in"]),
                n_out=int(blob["n_out"]),
                drops={str(k): int(v) for k, v in blob.get("drops", {}).items()},
                extras={str(k): int(v) for k, v in blob.get("extras", {}).items()},
                outputs=tuple(str(o) for o in blob.get("outputs", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"malformed manifest: {exc}") from exc


def manifest_path(workdir: str | Path, stage: str) -> Path:
    return Path(workdir) / "manifests" / f"{stage}.json"


def write_manifest(manifest: StageManifest, workdir: str | Path) -> Path:
    """Persist a manifest; refuses to write one that loses records."""
    if not manifest.conserved():
        raise DataValidationError(
            f"manifest for stage {manifest.stage!r} does not conserve counts: "
            f"{manifest.n_in} in, {manifest.n_out} out, "
            f"{sum(manifest.drops.values())} dropped"
        )
    path = manifest_path(workdir, manifest.stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def read_manifest(workdir: str | Path, stage: str) -> StageManifest:
    path = manifest_path(workdir, stage)
    if not path.exists():
        raise DataValidationError(f"no manifest for stage {stage!r} at {path}")
    try:
        blob = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"cannot parse manifest {path}: {exc}") from exc
    return StageManifest.from_json_dict(blob)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records as one sorted-key JSON object per line; returns count.

    Sorted keys keep reruns byte-identical for identical record streams.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield JSON objects from a line-oriented file; bad lines are errors."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                blob = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataValidationError(
                    f"bad JSON in {path}", line_numbers=[lineno]
                ) from exc
            if not isinstance(blob, dict):
                raise DataValidationError(
                    f"expected a JSON object in {path}", line_numbers=[lineno]
                )
            yield blob
