"""Fragment-based video quality assessment (Python bindings)."""

from fragq._core import (  # noqa: F401
    FragqError,
    Model,
    flops_g,
    krcc,
    parameter_count,
    plcc,
    sample,
    srcc,
    synthesize_clip,
)
