from __future__ import annotations

from pydantic import Field

from .base import BaseSchema

CSV_COLUMNS = ["utterance_id", "n_cycles", "idr", "mr", "far", "ida_ms", "ignored_detections"]


class EvalReport(BaseSchema):
    idr: float = 0.0
    mr: float = 0.0
    far: float = 0.0
    # Milliseconds.
    ida: float = 0.0
    n_cycles: int = Field(default=0, ge=0)
    n_identified: int = Field(default=0, ge=0)
    n_missed: int = Field(default=0, ge=0)
    n_false_alarm: int = Field(default=0, ge=0)
    ignored_detections: int = Field(default=0, ge=0)
    # Seconds, one per identified cycle.
    timing_errors: list[float] = Field(default_factory=list)

    def to_text(self) -> str:
        rows = [
            ("n_cycles", str(self.n_cycles)),
            ("idr", f"{self.idr:.2f}"),
            ("mr", f"{self.mr:.2f}"),
            ("far", f"{self.far:.2f}"),
            ("ida_ms", f"{self.ida:.4f}"),
            ("identified", str(self.n_identified)),
            ("missed", str(self.n_missed)),
            ("false_alarm", str(self.n_false_alarm)),
            ("ignored_detections", str(self.ignored_detections)),
        ]
        return "\n".join(f"{key} = {value}" for key, value in rows) + "\n"

    def to_row(self, utterance_id: str) -> dict:
        return {
            "utterance_id": utterance_id,
            "n_cycles": self.n_cycles,
            "idr": self.idr,
            "mr": self.mr,
            "far": self.far,
            "ida_ms": self.ida,
            "ignored_detections": self.ignored_detections,
        }
