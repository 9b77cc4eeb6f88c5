"""Shared type definitions for the omra-lab package."""

from enum import Enum

#: Downsampling factors every search and classifier chooses from.
FACTORS: tuple[int, ...] = (1, 2, 4, 8)


class SequenceFormat(Enum):
    """On-disk sequence formats."""

    RAW_PLANAR = "raw-planar"
    Y4M = "y4m"


class FrameKind(Enum):
    """Coding type of a scheduled frame."""

    INTRA = "intra"
    BFRAME = "bframe"


class Refinement(Enum):
    """Sub-pixel refinement applied after integer block search."""

    NONE = "none"
    HALF_PEL = "half-pel"


class FlowPrecision(Enum):
    """Precision at which motion vectors are coded."""

    INTEGER_PEL = "integer-pel"
    HALF_PEL = "half-pel"


class ClassifierMode(Enum):
    """Output head of a TinyCnn: one logit (Bi) or one per factor (Mu)."""

    BI = "bi"
    MU = "mu"

    @property
    def num_outputs(self) -> int:
        return 1 if self is ClassifierMode.BI else len(FACTORS)


class Variant(Enum):
    """Resolution decision policies applied by the sequence encoder."""

    EXHAUSTIVE = "exhaustive"
    MEMC = "memc"
    MEMC_STAR = "memc_star"
    BI = "bi"
    MU = "mu"
    CO = "co"
    FIXED1 = "fixed1"
    FIXED2 = "fixed2"
    FIXED4 = "fixed4"
    FIXED8 = "fixed8"

    @property
    def fixed_factor(self) -> int | None:
        """Factor of a fixed(S) variant, None for adaptive variants."""
        if self.value.startswith("fixed"):
            return int(self.value.removeprefix("fixed"))
        return None


def factor_index(factor: int) -> int:
    """Position of a downsampling factor in FACTORS."""
    if factor not in FACTORS:
        raise ValueError(f"Downsampling factor must be one of {FACTORS}, got {factor}")
    return FACTORS.index(factor)
