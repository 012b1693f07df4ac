from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class RunManifest(BaseModel):
    """Audit record of one CLI invocation; written even when the run fails."""

    subcommand: str
    argv: List[str] = Field(default_factory=list)
    resolved_config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str
    started_at: datetime = Field(default_factory=_utcnow)
    finished_at: Optional[datetime] = None
    outputs: List[str] = Field(default_factory=list)
    status: str = "running"
    error: Optional[Dict[str, Any]] = None
