from .bp import (
    POLICIES,
    BpConfig,
    BpState,
    DecodeOutcome,
    bp_decode,
    cn_update_message,
    default_max_iter,
    lottery_select,
    prior_llr,
)
from .osd import osd0_decode, osd0_decode_fast
from .quant import FixedPointFormat, quantize
from .two_stage import PLACEMENTS, two_stage_decode
from .vote import majority_vote, vote_stabilization_round

__all__ = [
    "POLICIES",
    "PLACEMENTS",
    "BpConfig",
    "BpState",
    "DecodeOutcome",
    "FixedPointFormat",
    "bp_decode",
    "cn_update_message",
    "default_max_iter",
    "lottery_select",
    "majority_vote",
    "osd0_decode",
    "osd0_decode_fast",
    "prior_llr",
    "quantize",
    "two_stage_decode",
    "vote_stabilization_round",
]
