"""Factor catalogue for the Three Gorges Reservoir Area study region.

Every factor is a contributing (conditioning) factor; nine of them are also
tagged as triggering factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

CONDITIONING = "C"
TRIGGERING = "T"
CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FactorMeta:
    """Name, mechanism tags, measurement kind and unit of one factor."""

    name: str
    tags: frozenset = field(default_factory=lambda: frozenset({CONDITIONING}))
    kind: str = CONTINUOUS
    unit: str = ""

    def __post_init__(self):
        tags = frozenset(self.tags)
        object.__setattr__(self, "tags", tags)
        if not self.name:
            raise ValueError("factor name must be non-empty")
        unknown = tags - {CONDITIONING, TRIGGERING}
        if unknown:
            raise ValueError(f"factor {self.name!r}: unknown mechanism tags {sorted(unknown)}")
        if TRIGGERING in tags and CONDITIONING not in tags:
            raise ValueError(f"factor {self.name!r}: a triggering factor must also be conditioning")
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ValueError(f"factor {self.name!r}: kind must be continuous or categorical")

    @property
    def is_triggering(self) -> bool:
        return TRIGGERING in self.tags


_C = frozenset({CONDITIONING})
_CT = frozenset({CONDITIONING, TRIGGERING})

TGRA_FACTORS: tuple[FactorMeta, ...] = (
    FactorMeta("Elevation", _C, CONTINUOUS, "m"),
    FactorMeta("Slope", _CT, CONTINUOUS, "deg"),
    FactorMeta("Aspect", _C, CONTINUOUS, "deg"),
    FactorMeta("Plan Curvature", _C, CONTINUOUS, "1/m"),
    FactorMeta("Profile Curvature", _C, CONTINUOUS, "1/m"),
    FactorMeta("Surface cut depth", _C, CONTINUOUS, "m"),
    FactorMeta("TRI", _C, CONTINUOUS, ""),
    FactorMeta("Landform", _C, CATEGORICAL, ""),
    FactorMeta("Lithology", _CT, CATEGORICAL, ""),
    FactorMeta("Distance to fault", _CT, CONTINUOUS, "m"),
    FactorMeta("Land use", _C, CATEGORICAL, ""),
    FactorMeta("Distance to road", _CT, CONTINUOUS, "m"),
    FactorMeta("NDVI", _CT, CONTINUOUS, ""),
    FactorMeta("SPI", _C, CONTINUOUS, ""),
    FactorMeta("STI", _C, CONTINUOUS, ""),
    FactorMeta("TWI", _CT, CONTINUOUS, ""),
    FactorMeta("Distance to stream", _CT, CONTINUOUS, "m"),
    FactorMeta("Peak rainfall intensity", _CT, CONTINUOUS, "mm/h"),
    FactorMeta("Average rainfall intensity", _CT, CONTINUOUS, "mm/h"),
)

TGRA_FACTOR_NAMES = tuple(m.name for m in TGRA_FACTORS)
TRIGGERING_FACTOR_NAMES = tuple(m.name for m in TGRA_FACTORS if m.is_triggering)

FACTOR_SETS = {
    "all_19": TGRA_FACTOR_NAMES,
    "triggering_9": TRIGGERING_FACTOR_NAMES,
}


def tgra_schema() -> dict[str, FactorMeta]:
    """Column name to metadata map covering all 19 catalogue factors."""
    return {m.name: m for m in TGRA_FACTORS}


def resolve_factor_set(selector, available=None) -> tuple[str, ...]:
    """Turn a factor-set selector (``all_19``, ``triggering_9`` or a list) into names.

    Raises ``KeyError`` listing every name missing from ``available``.
    """
    if isinstance(selector, str):
        if selector not in FACTOR_SETS:
            raise KeyError(f"unknown factor set {selector!r}; expected one of {sorted(FACTOR_SETS)} or a list")
        names = FACTOR_SETS[selector]
    else:
        names = tuple(selector)
        if len(set(names)) != len(names):
            raise KeyError("factor list contains duplicates")
    if available is not None:
        missing = [n for n in names if n not in set(available)]
        if missing:
            raise KeyError(f"factors missing from table: {', '.join(missing)}")
    return tuple(names)
