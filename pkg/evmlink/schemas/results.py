"""Run summary schemas written as summary.json."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import RunConfig


class AcceptanceVerdict(BaseModel):
    """Pass/fail of one declared acceptance threshold."""

    criterion: str = Field(..., description="Short identifier of the check")
    description: str = Field(..., description="What was compared")
    passed: bool
    hard: bool = Field(default=True, description="False for checks reported but not gated on")
    measured: Optional[float] = Field(None, description="Headline measured value")
    threshold: Optional[str] = Field(None, description="Threshold in words")


class StudySummary(BaseModel):
    """Headline statistics and verdicts of one finished study."""

    study: str
    seed: int
    config: RunConfig
    headline: Dict[str, Any] = Field(default_factory=dict)
    verdicts: List[AcceptanceVerdict] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "study": "fit-a",
                "seed": 42,
                "headline": {"a_value": 98.4, "residual_rms_db": 0.41},
                "verdicts": [],
                "files": ["table-i.csv", "fig3.csv"],
            }
        }
    )

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if v.hard)
