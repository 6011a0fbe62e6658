import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

logger = logging.getLogger(__name__)


class ArtifactStore:
    """Writes experiment artifacts under one output directory. Files carry no timestamps."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []

    def _path(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_csv(self, name: str, headers: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
        """One row per dict; columns follow `headers`, missing keys are left empty."""
        path = self._path(name)
        with open(path, mode="w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(headers), extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({h: _cell(row.get(h, "")) for h in headers})
        self._record(path)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        with open(path, mode="w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
            f.write("\n")
        self._record(path)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self._path(name)
        path.write_bytes(data)
        self._record(path)
        return path

    def read_json(self, name: str) -> Any:
        with open(self.out_dir / name, mode="r", encoding="utf-8") as f:
            return json.load(f)

    def read_bytes(self, name: str) -> bytes:
        return (self.out_dir / name).read_bytes()

    def _record(self, path: Path):
        if path not in self.written:
            self.written.append(path)
        logger.info("Wrote %s", path)


def _cell(value: Any) -> Any:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")
