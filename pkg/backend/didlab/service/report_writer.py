"""CSV / JSON renderings of experiment reports."""
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, Union

import orjson
import pandas as pd
import structlog
from pydantic import BaseModel, ValidationError

from ..errors import ErrorCode, LabError
from ..model import ExperimentKind, MCReport, PlaceboCurve, PlaceboSurface, VarianceMethod

logger = structlog.get_logger(__name__)

Report = Union[MCReport, PlaceboCurve, PlaceboSurface, pd.DataFrame]
PathLike = Union[str, Path]

FORMATS = ("csv", "json")

CELL_COLUMNS = ["experiment", "params", "estimator", "variance_method", "rate", "mc_se", "reps"]
PRETEST_COLUMNS = ["panel", "T", "rho", "pass_rate", "cond_rej", "mc_se"]
TWOWAY_COLUMNS = {
    VarianceMethod.HC_ROBUST: "no_cluster",
    VarianceMethod.CRVE_GROUP: "cluster_j",
    VarianceMethod.TWOWAY_CGM: "cgm",
}
CURVE_COLUMNS = ["delta", "scheme", "rate", "mc_se", "n_cells"]
SURFACE_COLUMNS = ["delta_time", "delta_group", "rate", "mc_se"]


def _cells_frame(report: MCReport) -> pd.DataFrame:
    rows = [
        {
            "experiment": report.name,
            "params": orjson.dumps(cell.params, option=orjson.OPT_SORT_KEYS).decode(),
            "estimator": cell.estimator.value,
            "variance_method": cell.variance_method.value,
            "rate": cell.rate,
            "mc_se": cell.mc_se,
            "reps": cell.reps,
        }
        for cell in report.cells
    ]
    return pd.DataFrame(rows, columns=CELL_COLUMNS)


def _twoway_frame(report: MCReport) -> pd.DataFrame:
    columns = ["rho", "T"] + list(TWOWAY_COLUMNS.values())
    if not report.cells:
        return pd.DataFrame(columns=columns)
    long = pd.DataFrame(
        [
            {"rho": c.params["rho"], "T": c.params["T"], "column": TWOWAY_COLUMNS[c.variance_method], "rate": c.rate}
            for c in report.cells
        ]
    )
    wide = long.pivot_table(index=["rho", "T"], columns="column", values="rate", sort=False).reset_index()
    return wide.reindex(columns=columns)


def _pretest_frame(report: MCReport) -> pd.DataFrame:
    rows = [
        {
            "panel": row.panel,
            "T": row.T,
            "rho": row.rho,
            "pass_rate": row.pass_rate,
            "cond_rej": row.cond_rej,
            "mc_se": row.pass_mc_se,
        }
        for row in report.pretest_rows
    ]
    return pd.DataFrame(rows, columns=PRETEST_COLUMNS)


def _single_row(model: Optional[BaseModel], fields: List[str]) -> pd.DataFrame:
    if model is None:
        return pd.DataFrame(columns=fields)
    data = model.model_dump(mode="json", include=set(fields))
    return pd.DataFrame([data], columns=fields)


def report_frame(report: Report) -> pd.DataFrame:
    """Flat table for ``report``; a report without rows gives an empty frame with the usual columns."""
    if isinstance(report, pd.DataFrame):
        return report
    if isinstance(report, PlaceboCurve):
        rows = [{**p.model_dump(include=set(CURVE_COLUMNS)), "scheme": p.scheme.value} for p in report.points]
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if isinstance(report, PlaceboSurface):
        return pd.DataFrame([p.model_dump(include=set(SURFACE_COLUMNS)) for p in report.points], columns=SURFACE_COLUMNS)

    if report.kind == ExperimentKind.TWOWAY:
        return _twoway_frame(report)
    if report.kind == ExperimentKind.PRETEST:
        return _pretest_frame(report)
    if report.kind == ExperimentKind.CONDITIONAL_LAMBDA:
        return _single_row(report.conditional, ["n_lambda_draws", "reps_per_lambda", "across_variance", "within_variance", "ratio"])
    if report.kind == ExperimentKind.PRETEST_NORMAL_MODEL:
        return _single_row(
            report.normal_model,
            ["reps", "alpha", "pass_rate", "uncond_mean", "cond_mean", "uncond_var", "cond_var", "mean_mc_se", "cond_var_mc_se"],
        )
    return _cells_frame(report)


def _json_bytes(report: Report) -> bytes:
    if isinstance(report, pd.DataFrame):
        payload: Any = report.to_dict(orient="records")
    else:
        payload = report.model_dump(mode="json")
    return orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)


def emit_tables(report: Report, out: PathLike, fmt: Optional[str] = None) -> List[Path]:
    """Write ``report`` to ``out`` as CSV or JSON (format from ``fmt``, else the file suffix, else CSV)."""
    path = Path(out)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    if fmt not in FORMATS:
        raise LabError(ErrorCode.INVALID_CONFIG, f"unknown output format {fmt!r}", {"formats": list(FORMATS)})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_bytes(_json_bytes(report))
        else:
            report_frame(report).to_csv(path, index=False)
    except OSError as e:
        raise LabError(ErrorCode.IO_ERROR, f"could not write {path}: {e}", {"path": str(path)}) from e
    logger.info("report_written", path=str(path), format=fmt)
    return [path]


def _report_model(data: Dict[str, Any]) -> Type[BaseModel]:
    if "kind" in data:
        return MCReport
    points = data.get("points") or []
    if points and "delta_time" in points[0]:
        return PlaceboSurface
    return PlaceboCurve


def load_report(path: PathLike, model: Optional[Type[BaseModel]] = None) -> BaseModel:
    """Read a JSON report written by ``emit_tables``; the report type is inferred unless ``model`` is given."""
    path = Path(path)
    if not path.is_file():
        raise LabError(ErrorCode.DATA_NOT_FOUND, f"report {path} does not exist", {"path": str(path)})
    try:
        data = orjson.loads(path.read_bytes())
    except (OSError, orjson.JSONDecodeError) as e:
        raise LabError(ErrorCode.IO_ERROR, f"could not read report {path}: {e}", {"path": str(path)}) from e
    cls = model or _report_model(data)
    try:
        return cls.model_validate(data)
    except ValidationError as e:
        raise LabError(ErrorCode.SCHEMA_ERROR, f"{path} is not a {cls.__name__}: {e.error_count()} errors", {"path": str(path)}) from e
