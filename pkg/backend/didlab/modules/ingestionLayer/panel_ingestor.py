from pathlib import Path
from typing import Optional, Union

import pandas as pd
import structlog

from ...errors import ErrorCode, LabError
from ...model import MicroPanel, PanelData, PanelSchema
from ..preprocessingLayer.panel_transforms import PanelValidator

PathLike = Union[str, Path]

_LOGICAL = ("group", "time", "outcome", "unit", "weight", "treated", "treat_start", "cluster", "cohort")


def _file_row(index: int) -> int:
    """1-based line number in the file (header is line 1)."""
    return int(index) + 2


class PanelIngestor:
    """Reads and writes panel CSV files under one column mapping."""

    def __init__(self, schema: Optional[PanelSchema] = None, validator: Optional[PanelValidator] = None):
        self.schema = schema or PanelSchema()
        self.validator = validator or PanelValidator()
        self.logger = structlog.get_logger(__name__, component="panel_ingestor")

    def load(self, path: PathLike) -> Union[PanelData, MicroPanel]:
        """Load a group panel or, when the file has a unit column, a micro panel.

        Group panels are returned validated; a file without a ``treated`` column
        yields a design-free panel (balance is still enforced).
        """
        frame = self._read_frame(path)
        frame["outcome"] = self._numeric(frame, "outcome")

        if "unit" in frame.columns:
            if "weight" in frame.columns:
                frame["weight"] = self._numeric(frame, "weight").fillna(1.0)
            self.logger.info("micro_panel_loaded", path=str(path), rows=len(frame))
            return MicroPanel(frame=frame, source=str(path))

        panel = self._group_panel(frame)
        self.validator.validate(panel)
        self.logger.info(
            "panel_loaded",
            path=str(path),
            groups=panel.n_groups,
            periods=panel.n_periods,
            treated=panel.n_treated if panel.has_design else None,
        )
        return panel

    def write(self, p: PanelData, path: PathLike) -> Path:
        """Write ``p`` in the group-panel CSV schema; floats keep their shortest round-trip repr."""
        path = self._write_frame(p.to_frame(), path)
        self.logger.info("panel_written", path=str(path), groups=p.n_groups, periods=p.n_periods)
        return path

    def write_micro(self, m: MicroPanel, path: PathLike) -> Path:
        path = self._write_frame(m.frame, path)
        self.logger.debug("micro_panel_written", path=str(path), rows=len(m.frame))
        return path

    def _write_frame(self, frame: pd.DataFrame, path: PathLike) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False)
        except OSError as e:
            raise LabError(ErrorCode.IO_ERROR, f"could not write {path}: {e}", {"path": str(path)}) from e
        return path

    def _read_frame(self, path: PathLike) -> pd.DataFrame:
        path = Path(path)
        if not path.is_file():
            raise LabError(ErrorCode.DATA_NOT_FOUND, f"input file {path} does not exist", {"path": str(path)})
        try:
            frame = pd.read_csv(path, encoding="utf-8")
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise LabError(ErrorCode.PARSE_ERROR, f"could not parse {path}: {e}", {"path": str(path)}) from e
        except pd.errors.EmptyDataError as e:
            raise LabError(ErrorCode.SCHEMA_ERROR, f"{path} has no header row", {"path": str(path)}) from e

        rename = {getattr(self.schema, name): name for name in _LOGICAL if getattr(self.schema, name) in frame.columns}
        frame = frame.rename(columns=rename)

        missing = [c for c in ("group", "time", "outcome") if c not in frame.columns]
        if missing:
            raise LabError(
                ErrorCode.SCHEMA_ERROR,
                f"{path} is missing columns {missing}",
                {"missing": missing, "path": str(path)},
            )
        return frame

    @staticmethod
    def _numeric(frame: pd.DataFrame, column: str) -> pd.Series:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = frame.index[values.isna() & frame[column].notna()]
        if len(bad):
            row = _file_row(bad[0])
            raise LabError(
                ErrorCode.PARSE_ERROR,
                f"row {row}: {column} value {frame.at[bad[0], column]!r} is not a number",
                {"row": row, "column": column},
            )
        return values.astype(float)

    def _group_panel(self, frame: pd.DataFrame) -> PanelData:
        duplicated = frame.index[frame.duplicated(subset=["group", "time"], keep="first")]
        if len(duplicated):
            row = _file_row(duplicated[0])
            group, time = frame.at[duplicated[0], "group"], frame.at[duplicated[0], "time"]
            raise LabError(
                ErrorCode.PARSE_ERROR,
                f"row {row}: duplicate cell (group={group}, time={time})",
                {"row": row, "group": group, "time": time},
            )

        groups = sorted(frame["group"].unique().tolist())
        times = sorted(frame["time"].unique().tolist())
        matrix = frame.pivot(index="group", columns="time", values="outcome").reindex(index=groups, columns=times)

        design = {}
        if "treated" in frame.columns:
            treated = self.validator.group_attribute(frame, "treated", groups, self._numeric(frame, "treated"))
            starts = None
            if "treat_start" in frame.columns:
                starts = self.validator.group_attribute(
                    frame, "treat_start", groups, self._numeric(frame, "treat_start")
                ).tolist()
            design = {"treated": treated.fillna(0).to_numpy() > 0, "treat_start": starts}

        extras = {}
        for column, field in (("cluster", "clusters"), ("cohort", "cohorts")):
            values = self.validator.group_attribute(frame, column, groups)
            if values is not None:
                extras[field] = tuple(values.tolist())

        return PanelData(
            outcomes=matrix.to_numpy(dtype=float),
            group_ids=tuple(groups),
            time_ids=tuple(times),
            **design,
            **extras,
        )


def load_panel_csv(path: PathLike, schema: Optional[PanelSchema] = None) -> Union[PanelData, MicroPanel]:
    return PanelIngestor(schema).load(path)


def write_panel_csv(p: PanelData, path: PathLike) -> Path:
    return PanelIngestor().write(p, path)


def micro_to_csv(m: MicroPanel, path: PathLike) -> Path:
    return PanelIngestor().write_micro(m, path)
