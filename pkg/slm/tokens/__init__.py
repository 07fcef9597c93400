from slm.tokens.context import (
    ContextBuilder,
    TaskParts,
    Task,
    TokenStream,
    assemble_context,
    build_prompt,
)
from slm.tokens.grouping import (
    IGNORE_INDEX,
    GroupedStream,
    SliceVocab,
    Unit,
    group_stream,
    split_generated_group,
)
from slm.tokens.interleave import (
    Scheme,
    deinterleave,
    interleave_cwi,
    interleave_fwi,
    pack_groups,
    unpack_groups,
)
from slm.tokens.vocabulary import (
    FrameLayout,
    SegmentTag,
    SpeechFrame,
    TokenGroup,
    Vocabulary,
)

__all__ = [
    "IGNORE_INDEX",
    "ContextBuilder",
    "FrameLayout",
    "GroupedStream",
    "Scheme",
    "SegmentTag",
    "SliceVocab",
    "SpeechFrame",
    "Task",
    "TaskParts",
    "TokenGroup",
    "TokenStream",
    "Unit",
    "Vocabulary",
    "assemble_context",
    "build_prompt",
    "deinterleave",
    "group_stream",
    "interleave_cwi",
    "interleave_fwi",
    "pack_groups",
    "split_generated_group",
    "unpack_groups",
]
