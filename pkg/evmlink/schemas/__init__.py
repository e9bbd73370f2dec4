from .config import RunConfig, Study
from .results import AcceptanceVerdict, StudySummary


__all__ = [
    "RunConfig",
    "Study",
    "AcceptanceVerdict",
    "StudySummary",
]
