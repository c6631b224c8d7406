"""Learning-curve sensitivity analysis for iAFM/AFM mixed-effects models.

Fits and reports are plain dicts holding the same JSON documents the
``lcsens`` command-line tool writes.
"""

from ._core import (
    ConfigError,
    Dataset,
    Error,
    FormatError,
    __version__,
    compare,
    describe,
    fit,
    from_tsv,
    load,
    preprocess,
    random_window,
    refit,
    save_tsv,
    signature,
    simulate,
    stratify,
    summarize,
    truncate,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "Error",
    "FormatError",
    "__version__",
    "compare",
    "describe",
    "fit",
    "from_tsv",
    "load",
    "preprocess",
    "random_window",
    "refit",
    "save_tsv",
    "signature",
    "simulate",
    "stratify",
    "summarize",
    "truncate",
]
