"""
CSV-Ausgabe einer Mission.

Dateien je Ausgabeverzeichnis:
- mission.csv: eine Zeile je Takt (deterministisch, ohne Wanduhrzeiten)
- latency.csv: Planungslatenz je Takt (Wanduhr)
- summary.csv: Kennzahlen als eine Zeile
- tether_final.csv / tether_inspection_end.csv: Tether-Polylinie (node_index,x,y,z)
"""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np

from app.models.mission import MissionLog, MissionSummary

logger = logging.getLogger(__name__)

MISSION_COLUMNS = [
    "time", "phase", "x", "y", "z", "target_x", "target_y", "target_z",
    "tether_length", "mode", "coverage", "soft_limit", "event",
]
LATENCY_COLUMNS = ["time", "latency"]
TETHER_COLUMNS = ["node_index", "x", "y", "z"]
SUMMARY_COLUMNS = list(MissionSummary.model_fields.keys())


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _write_rows(path: Path, header: List[str], rows: Iterable[List]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_tether_csv(nodes, path: Union[str, Path]) -> Path:
    """Tether-Knoten als node_index,x,y,z"""
    path = Path(path)
    pts = np.asarray(nodes, dtype=np.float64).reshape(-1, 3)
    _write_rows(path, TETHER_COLUMNS, ([i, *(_fmt(c) for c in p)] for i, p in enumerate(pts)))
    return path


def summary_row(summary: MissionSummary) -> Dict[str, str]:
    """Zusammenfassung als Spalte -> Text (Fließkommazahlen mit 6 Nachkommastellen)"""
    row = {}
    for key, value in summary.model_dump().items():
        if isinstance(value, bool):
            row[key] = str(value).lower()
        elif isinstance(value, float):
            row[key] = _fmt(value)
        else:
            row[key] = str(value)
    return row


def write_log(log: MissionLog, directory: Union[str, Path]) -> Dict[str, Path]:
    """
    Schreibt alle CSV-Dateien einer Mission.

    Ein leeres Protokoll erzeugt Dateien nur mit Kopfzeile.

    Raises:
        OSError: Verzeichnis nicht anlegbar oder nicht beschreibbar
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "mission": directory / "mission.csv",
        "latency": directory / "latency.csv",
        "summary": directory / "summary.csv",
        "tether_final": directory / "tether_final.csv",
        "tether_inspection_end": directory / "tether_inspection_end.csv",
    }

    _write_rows(files["mission"], MISSION_COLUMNS, (
        [
            _fmt(row.time), row.phase,
            *(_fmt(c) for c in row.position),
            *(_fmt(c) for c in row.target),
            _fmt(row.tether_length), row.mode, _fmt(row.coverage),
            int(row.soft_limit), row.events,
        ]
        for row in log.rows
    ))
    _write_rows(files["latency"], LATENCY_COLUMNS, (
        [_fmt(row.time), _fmt(row.latency)] for row in log.rows
    ))

    if log.summary is not None:
        summary = summary_row(log.summary)
        _write_rows(files["summary"], SUMMARY_COLUMNS, [[summary[c] for c in SUMMARY_COLUMNS]])
    else:
        _write_rows(files["summary"], SUMMARY_COLUMNS, [])

    write_tether_csv(log.final_tether, files["tether_final"])
    write_tether_csv(log.inspection_end_tether, files["tether_inspection_end"])
    logger.info(f"Protokoll geschrieben: {directory} ({len(log.rows)} Takte)")
    return files
