"""CSV output for every command.

Layout: one ``#``-prefixed comment line carrying the run configuration
(``key=value`` pairs, the version string first), then a header row, then
data rows. UTF-8, comma-separated, ``\\n`` line endings.
"""

import csv
import io
import logging
import subprocess
import sys
from pathlib import Path

from storage.weights import PACKAGE_VERSION

logger = logging.getLogger(__name__)


def version_string() -> str:
    """``git describe`` output when run from a checkout, the package version otherwise."""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent.parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return PACKAGE_VERSION
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else PACKAGE_VERSION


def config_comment(config: dict[str, object]) -> str:
    pairs = [f"version={version_string()}"]
    for key, value in config.items():
        if isinstance(value, (list, tuple)):
            value = ";".join(str(v) for v in value)
        pairs.append(f"{key}={value}")
    return "# " + " ".join(pairs)


def render_csv(fields: list[str], rows: list[dict], config: dict[str, object]) -> str:
    output = io.StringIO()
    output.write(config_comment(config) + "\n")
    writer = csv.DictWriter(output, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: ("" if value is None else value) for key, value in row.items()})
    return output.getvalue()


def write_csv(path: str | Path | None, fields: list[str], rows: list[dict], config: dict[str, object]) -> None:
    """Write to ``path``, or to stdout when ``path`` is None or ``-``.

    Raises:
        OSError: If the file cannot be written.
    """
    text = render_csv(fields, rows, config)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {len(rows)} rows to {path}")


def read_csv_body(path: str | Path, exclude: tuple[str, ...] = ()) -> list[dict[str, str]]:
    """Data rows without the comment line, minus the ``exclude`` columns."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = [line for line in lines if not line.startswith("#")]
    return [
        {key: value for key, value in row.items() if key not in exclude}
        for row in csv.DictReader(body)
    ]
