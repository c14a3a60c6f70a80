"""Class label table: the five 2020-series birr denominations plus a
rejection class for everything that is not a banknote.

Amharic display strings are app configuration. The shipped defaults are
placeholders pending review by an Amharic speaker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

OTHER_CODE = "OTHER"


@dataclass(frozen=True)
class ClassLabel:
    id: int
    code: str
    display_amharic: str
    display_latin: str


DEFAULT_LABELS: tuple[ClassLabel, ...] = (
    ClassLabel(0, "ETB_5", "አምስት ብር", "5 birr"),
    ClassLabel(1, "ETB_10", "አስር ብር", "10 birr"),
    ClassLabel(2, "ETB_50", "ሃምሳ ብር", "50 birr"),
    ClassLabel(3, "ETB_100", "መቶ ብር", "100 birr"),
    ClassLabel(4, "ETB_200", "ሁለት መቶ ብር", "200 birr"),
    ClassLabel(5, OTHER_CODE, "ብር አይደለም", "not a banknote"),
)


def validate_labels(labels: list[ClassLabel] | tuple[ClassLabel, ...]) -> None:
    ids = sorted(lab.id for lab in labels)
    if ids != list(range(len(labels))):
        raise ConfigError(f"label ids must be exactly 0..{len(labels) - 1}, got {ids}")
    codes = [lab.code for lab in labels]
    if len(set(codes)) != len(codes):
        raise ConfigError(f"label codes must be unique, got {codes}")
    if sum(1 for c in codes if c == OTHER_CODE) != 1:
        raise ConfigError("label table must contain exactly one OTHER class")


def save_labels(labels, path) -> None:
    """Write the id -> {code, display_amharic, display_latin} mapping as JSON."""
    validate_labels(labels)
    doc = {
        str(lab.id): {
            "code": lab.code,
            "display_amharic": lab.display_amharic,
            "display_latin": lab.display_latin,
        }
        for lab in sorted(labels, key=lambda lab: lab.id)
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n",
                          encoding="utf-8")


def load_labels(path) -> list[ClassLabel]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    labels = [
        ClassLabel(int(key), entry["code"], entry["display_amharic"],
                   entry["display_latin"])
        for key, entry in doc.items()
    ]
    labels.sort(key=lambda lab: lab.id)
    validate_labels(labels)
    return labels


def codes_to_ids(labels) -> dict[str, int]:
    return {lab.code: lab.id for lab in labels}
