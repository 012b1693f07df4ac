# Service layer: experiment runners, estimation and report emission
from .estimate_service import estimate_and_test
from .report_writer import emit_tables, load_report, report_frame

__all__ = ["estimate_and_test", "emit_tables", "load_report", "report_frame"]
