import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd
import pyarrow as pa
import pyarrow.csv as pacsv

from utils.logger import get_logger

logger = get_logger()

ARTIFACT_VERSION = "1"
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """Config echo, resolved seeds and a checksum for every output file."""

    command: str
    config: dict
    seeds: dict
    artifact_version: str = ARTIFACT_VERSION
    files: dict[str, str] = field(default_factory=dict)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class ArtifactWriter:
    """
    Writes CSV outputs under a fixed schema and keeps their checksums for
    the run manifest.
    """

    def __init__(self, out_dir: str | Path, manifest: RunManifest) -> None:
        """
        Initializes the writer.

        Args:
            out_dir: Output directory; created if missing.
            manifest: Manifest to which written files are added.
        """
        self.out_dir = Path(out_dir)
        self.manifest = manifest
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_table(self, name: str, df: pd.DataFrame, schema: pa.Schema) -> Path:
        """
        Writes a DataFrame as CSV under the given schema.

        Args:
            name: File name inside the output directory.
            df: Rows to write; columns outside the schema are dropped.
            schema: The PyArrow schema to enforce on the data.

        Returns:
            The written path.
        """
        path = self.out_dir / name
        try:
            df = df.filter(items=schema.names)
            table = pa.Table.from_pandas(df, schema=schema, preserve_index=False, safe=True)
            pacsv.write_csv(table, path, write_options=pacsv.WriteOptions(quoting_style="none"))
        except Exception:
            logger.error(f"Failed to write {path}", exc_info=True)
            raise

        self.manifest.files[name] = sha256_file(path)
        logger.info(f"Wrote {len(df)} rows to {path}")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self.manifest.files[name] = sha256_file(path)
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(self) -> Path:
        """Writes manifest.json; files are listed in sorted order."""
        self.manifest.files = dict(sorted(self.manifest.files.items()))
        path = self.out_dir / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self.manifest), indent=2, sort_keys=True, default=str), encoding="utf-8")
        logger.info(f"Manifest written to {path} with {len(self.manifest.files)} files")
        return path
